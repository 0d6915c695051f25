"""Paired-sample data pipeline: image/landmark loading, bicubic degradation,
dataset splits, and the optional derived-data cache (AFFECTSR_CACHE)."""

import hashlib
import os
import random
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence, Tuple

import numpy as np
import torch
from PIL import Image

from .bicubic import bicubic_resize
from .errors import DataError
from .facegraph import NUM_LANDMARKS

HR_SIZE = 128
SUPPORTED_SCALES = (4, 8)
IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg")
CACHE_ENV = "AFFECTSR_CACHE"
_CACHE_VERSION = "1"


@dataclass(frozen=True)
class LandmarkSet:
    """478 landmark rows of (x, y, z); x and y normalized to [0, 1]."""

    coords: torch.Tensor

    def __post_init__(self):
        c = self.coords
        if c.shape != (NUM_LANDMARKS, 3):
            raise DataError(f"expected {NUM_LANDMARKS}x3 landmarks, got {tuple(c.shape)}")
        if not torch.isfinite(c).all():
            raise DataError("landmarks contain non-finite values")
        xy = c[:, :2]
        if xy.min() < 0.0 or xy.max() > 1.0:
            raise DataError("landmark x/y coordinates must lie in [0, 1]")


@dataclass(frozen=True)
class SamplePair:
    hr: torch.Tensor  # (3, 128, 128) in [0, 1]
    lr: torch.Tensor  # (3, 128/scale, 128/scale)
    landmarks: LandmarkSet
    id: str


def validate_image(img: torch.Tensor) -> torch.Tensor:
    if not torch.isfinite(img).all():
        raise DataError("image contains non-finite values")
    return img.clamp(0.0, 1.0)


def load_image(path) -> torch.Tensor:
    """Decode PNG/JPEG to a (3, H, W) float tensor in [0, 1]."""
    try:
        with Image.open(path) as im:
            arr = np.asarray(im.convert("RGB"), dtype=np.float32) / 255.0
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise DataError(f"cannot decode image {path}: {exc}") from exc
    return validate_image(torch.from_numpy(arr).permute(2, 0, 1).contiguous())


def load_landmarks(path) -> LandmarkSet:
    """Parse a .lmk sidecar: 478 lines of comma-separated x,y,z floats."""
    rows = []
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise DataError(f"{path}:{lineno}: expected 3 comma-separated values")
            try:
                rows.append([float(p) for p in parts])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
    if len(rows) != NUM_LANDMARKS:
        raise DataError(f"{path}: expected {NUM_LANDMARKS} landmark rows, got {len(rows)}")
    return LandmarkSet(torch.tensor(rows, dtype=torch.float32))


def _center_crop_square(img: torch.Tensor) -> torch.Tensor:
    _, h, w = img.shape
    side = min(h, w)
    top = (h - side) // 2
    left = (w - side) // 2
    return img[:, top:top + side, left:left + side]


def _cache_key(image_bytes: bytes, landmark_bytes: bytes, scale: int) -> str:
    h = hashlib.sha256()
    h.update(_CACHE_VERSION.encode())
    h.update(str(scale).encode())
    h.update(image_bytes)
    h.update(landmark_bytes)
    return h.hexdigest()


def load_sample(image_path, landmark_path, scale: int) -> SamplePair:
    """Build an HR/LR training pair from an image and its landmark sidecar.

    The HR side is center-cropped square and resized to 128x128; the LR side
    is generated from it by bicubic downsampling. Pure given file contents;
    results are memoized on disk when AFFECTSR_CACHE is set.
    """
    if scale not in SUPPORTED_SCALES:
        raise DataError(f"scale must be one of {SUPPORTED_SCALES}, got {scale}")
    image_path = Path(image_path)
    landmark_path = Path(landmark_path)
    image_bytes = image_path.read_bytes()
    landmark_bytes = landmark_path.read_bytes()

    cache_dir = os.environ.get(CACHE_ENV)
    cache_file = None
    if cache_dir:
        cache_file = Path(cache_dir) / f"{_cache_key(image_bytes, landmark_bytes, scale)}.npz"
        if cache_file.exists():
            with np.load(cache_file) as z:
                return SamplePair(
                    hr=torch.from_numpy(z["hr"]),
                    lr=torch.from_numpy(z["lr"]),
                    landmarks=LandmarkSet(torch.from_numpy(z["coords"])),
                    id=image_path.stem,
                )

    hr = load_image(image_path)
    hr = _center_crop_square(hr)
    if hr.shape[-1] != HR_SIZE:
        hr = bicubic_resize(hr, HR_SIZE, HR_SIZE)
    lr = bicubic_resize(hr, HR_SIZE // scale, HR_SIZE // scale)
    landmarks = load_landmarks(landmark_path)

    if cache_file is not None:
        cache_file.parent.mkdir(parents=True, exist_ok=True)
        tmp = cache_file.parent / (cache_file.stem + ".tmp.npz")
        np.savez(tmp, hr=hr.numpy(), lr=lr.numpy(), coords=landmarks.coords.numpy())
        os.replace(tmp, cache_file)
    return SamplePair(hr=hr, lr=lr, landmarks=landmarks, id=image_path.stem)


def make_split(ids: Sequence[str], eval_count: int, seed: int) -> Tuple[List[str], List[str]]:
    """Deterministic seeded shuffle into disjoint (train, eval) id lists."""
    if eval_count >= len(ids):
        raise ValueError(f"eval_count {eval_count} must be < number of ids {len(ids)}")
    shuffled = list(ids)
    random.Random(seed).shuffle(shuffled)
    return shuffled[eval_count:], shuffled[:eval_count]


def read_manifest(path) -> List[str]:
    with open(path) as f:
        ids = [line.strip() for line in f if line.strip()]
    if not ids:
        raise DataError(f"manifest {path} lists no sample ids")
    return ids


class PairDataset:
    """Dataset root layout: images/, landmarks/, manifest.txt."""

    def __init__(self, root, scale: int):
        self.root = Path(root)
        self.scale = scale
        self.image_dir = self.root / "images"
        self.landmark_dir = self.root / "landmarks"
        if not self.image_dir.is_dir():
            raise DataError(f"missing image directory: {self.image_dir}")
        if not self.landmark_dir.is_dir():
            raise DataError(f"missing landmark directory: {self.landmark_dir}")
        self.ids = read_manifest(self.root / "manifest.txt")

    def __len__(self) -> int:
        return len(self.ids)

    def image_path(self, sample_id: str) -> Path:
        for ext in IMAGE_EXTENSIONS:
            p = self.image_dir / f"{sample_id}{ext}"
            if p.exists():
                return p
        raise DataError(f"no image found for id '{sample_id}' under {self.image_dir}")

    def load(self, sample_id: str) -> SamplePair:
        return load_sample(self.image_path(sample_id), self.landmark_dir / f"{sample_id}.lmk", self.scale)

    def __getitem__(self, index: int) -> SamplePair:
        return self.load(self.ids[index])


def collate(samples: Sequence[SamplePair]) -> dict:
    """Stack sample pairs into batch tensors."""
    return {
        "lr": torch.stack([s.lr for s in samples]),
        "hr": torch.stack([s.hr for s in samples]),
        "coords": torch.stack([s.landmarks.coords for s in samples]),
        "ids": [s.id for s in samples],
    }
