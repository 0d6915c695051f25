"""Run-configuration files: TOML with strict unknown-key rejection."""

import sys
from pathlib import Path

from .errors import ConfigError
from .losses import LossWeights
from .model import VARIANTS, ModelConfig
from .training import TrainConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

# section -> key -> (expected type(s), default)
SCHEMA = {
    "data": {
        "root": (str, None),
        "scale": (int, 4),
        "eval_count": (int, 4),
    },
    "model": {
        "variant": (str, "full"),
        "hr_size": (int, 128),
        "base_channels": (int, 64),
        "num_blocks": (int, 8),
        "growth_channels": (int, 32),
        "gcn_dims": (list, [3, 32, 64, 64, 64]),
        "msaf_block_channels": (int, 32),
        "msaf_reduction": (int, 4),
    },
    "train": {
        "lr_start": (float, 1e-3),
        "lr_end": (float, 1e-5),
        "batch_size": (int, 4),
        "max_steps": (int, 500),
        "seed": (int, 0),
        "checkpoint_interval": (int, 100),
        "grad_clip": (float, 1.0),
        "style_seed": (int, 0),
        "k1": (float, 1.0),
        "k2": (float, 20.0),
        "k3": (float, 50.0),
        "k4": (float, 0.1),
        "pretrained": (str, ""),
    },
    "metrics": {
        "names": (list, ["psnr", "ssim"]),
        "fer_plugin": (str, ""),
        "lpips_plugin": (str, ""),
    },
    "output": {
        "dir": (str, "runs/out"),
        "figures": (bool, True),
    },
}


class RunConfig:
    """Validated view of one run-configuration document."""

    def __init__(self, values: dict):
        self.values = values

    def __getitem__(self, section: str) -> dict:
        return self.values[section]

    def model_config(self) -> ModelConfig:
        m = self.values["model"]
        try:
            return ModelConfig(
                scale=self.values["data"]["scale"],
                variant=m["variant"],
                hr_size=m["hr_size"],
                base_channels=m["base_channels"],
                num_blocks=m["num_blocks"],
                growth_channels=m["growth_channels"],
                gcn_dims=tuple(m["gcn_dims"]),
                msaf_block_channels=m["msaf_block_channels"],
                msaf_reduction=m["msaf_reduction"],
                seed=self.values["train"]["seed"],
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def train_config(self) -> TrainConfig:
        t = self.values["train"]
        try:
            return TrainConfig(
                lr_start=t["lr_start"], lr_end=t["lr_end"],
                batch_size=t["batch_size"], max_steps=t["max_steps"],
                seed=t["seed"], checkpoint_interval=t["checkpoint_interval"],
                grad_clip=t["grad_clip"], style_seed=t["style_seed"],
                weights=LossWeights(k1=t["k1"], k2=t["k2"], k3=t["k3"], k4=t["k4"]),
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


def _coerce(section: str, key: str, value, expected):
    if expected is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if expected is int and isinstance(value, bool):
        raise ConfigError(f"[{section}] {key}: expected int, got bool")
    if not isinstance(value, expected):
        raise ConfigError(
            f"[{section}] {key}: expected {expected.__name__}, got {type(value).__name__}"
        )
    return value


def load_run_config(path) -> RunConfig:
    """Parse and validate a TOML run config; unknown sections/keys are
    rejected and referenced paths must exist."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, "rb") as f:
            doc = tomllib.load(f)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc

    values = {}
    for section, keys in SCHEMA.items():
        given = doc.pop(section, {})
        if not isinstance(given, dict):
            raise ConfigError(f"[{section}] must be a table")
        section_values = {}
        for key, (expected, default) in keys.items():
            if key in given:
                section_values[key] = _coerce(section, key, given.pop(key), expected)
            else:
                section_values[key] = default
        if given:
            raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(sorted(given))}")
        values[section] = section_values
    if doc:
        raise ConfigError(f"unknown section(s): {', '.join(sorted(doc))}")

    cfg = RunConfig(values)
    _validate(cfg, base_dir=path.parent)
    return cfg


def _validate(cfg: RunConfig, base_dir: Path):
    data = cfg["data"]
    if data["scale"] not in (4, 8):
        raise ConfigError(f"[data] scale must be 4 or 8, got {data['scale']}")
    if data["root"] is not None:
        root = (base_dir / data["root"]).resolve() if not Path(data["root"]).is_absolute() \
            else Path(data["root"])
        if not root.is_dir():
            raise ConfigError(f"[data] root directory not found: {root}")
        for sub in ("images", "landmarks"):
            if not (root / sub).is_dir():
                raise ConfigError(f"[data] missing {sub} directory: {root / sub}")
        if not (root / "manifest.txt").is_file():
            raise ConfigError(f"[data] missing manifest: {root / 'manifest.txt'}")
        data["root"] = str(root)
    variant = cfg["model"]["variant"]
    if variant not in VARIANTS:
        raise ConfigError(f"[model] variant must be one of {VARIANTS}, got '{variant}'")
    if variant == "full" and cfg["train"]["batch_size"] < 2:
        raise ConfigError("[train] batch_size must be >= 2 for the full variant "
                          "(fusion batch norm needs batch statistics)")
    pretrained = cfg["train"]["pretrained"]
    if pretrained and not Path(pretrained).is_file():
        raise ConfigError(f"[train] pretrained archive not found: {pretrained}")
    for name in cfg["metrics"]["names"]:
        if name not in ("psnr", "ssim", "ecm", "lpips"):
            raise ConfigError(f"[metrics] unknown metric '{name}'")
    if "ecm" in cfg["metrics"]["names"] and not cfg["metrics"]["fer_plugin"]:
        raise ConfigError("[metrics] 'ecm' requested but fer_plugin is not set")
