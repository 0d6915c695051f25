"""Exception types shared across the package."""


class AffectSrError(Exception):
    """Base class for all package errors."""


class DataError(AffectSrError):
    """Bad or inconsistent input data (images, landmark files, manifests)."""


class ConfigError(AffectSrError):
    """Invalid run configuration (bad keys, bad values, missing paths)."""


class CheckpointError(AffectSrError):
    """Checkpoint/weight archives that cannot be read or do not match."""


class PluginError(AffectSrError):
    """A metric or classifier plugin failed or was misconfigured."""


class LossError(AffectSrError):
    """A loss term became non-finite during training."""
