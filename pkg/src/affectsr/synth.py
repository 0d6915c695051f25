"""Synthetic face-like toy datasets for desk-scale runs and tests.

Images are procedurally drawn (skin ellipse, eyes, eyebrows, mouth with
varying curvature standing in for expression); landmark sidecars hold 478
plausible in-range coordinates. Everything is seeded and deterministic.
"""

from pathlib import Path

import numpy as np
from PIL import Image

from .facegraph import NUM_LANDMARKS


def synthesize_face(rng: np.random.Generator, size: int = 128) -> np.ndarray:
    """One (size, size, 3) uint8 face-like image."""
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64) / size
    img = np.zeros((size, size, 3))
    bg = rng.uniform(0.1, 0.45, size=3)
    img += bg + 0.15 * yy[..., None] * rng.uniform(-1, 1, size=3)

    cx, cy = 0.5 + rng.uniform(-0.04, 0.04), 0.52 + rng.uniform(-0.03, 0.03)
    rx, ry = rng.uniform(0.26, 0.33), rng.uniform(0.33, 0.4)
    face = ((xx - cx) / rx) ** 2 + ((yy - cy) / ry) ** 2 <= 1.0
    skin = np.array([0.85, 0.65, 0.52]) + rng.uniform(-0.08, 0.08, size=3)
    img[face] = skin

    for side in (-1, 1):
        ex = cx + side * rng.uniform(0.10, 0.14)
        ey = cy - rng.uniform(0.08, 0.12)
        er = rng.uniform(0.02, 0.035)
        eye = (xx - ex) ** 2 + (yy - ey) ** 2 <= er**2
        img[eye] = rng.uniform(0.02, 0.2, size=3)
        brow = (np.abs(yy - (ey - 0.06)) < 0.012) & (np.abs(xx - ex) < 0.06)
        img[brow & face] = rng.uniform(0.1, 0.3, size=3)

    curve = rng.uniform(-1.2, 1.2)  # smile vs frown
    my = cy + 0.18
    mouth = (np.abs(yy - (my + curve * (xx - cx) ** 2 * 3)) < 0.015) & (np.abs(xx - cx) < 0.11)
    img[mouth & face] = np.array([0.6, 0.15, 0.2]) + rng.uniform(-0.05, 0.05, size=3)

    img += rng.normal(0, 0.01, img.shape)
    return (np.clip(img, 0, 1) * 255).round().astype(np.uint8)


def synthesize_landmarks(rng: np.random.Generator) -> np.ndarray:
    """(478, 3) coordinates scattered over an elliptical face region."""
    angles = rng.uniform(0, 2 * np.pi, NUM_LANDMARKS)
    radii = np.sqrt(rng.uniform(0, 1, NUM_LANDMARKS))
    x = 0.5 + 0.3 * radii * np.cos(angles)
    y = 0.52 + 0.36 * radii * np.sin(angles)
    z = rng.normal(0, 0.05, NUM_LANDMARKS)
    coords = np.stack([np.clip(x, 0, 1), np.clip(y, 0, 1), z], axis=1)
    return coords.astype(np.float64)


def write_landmarks(path, coords: np.ndarray):
    lines = [f"{x:.6f},{y:.6f},{z:.6f}" for x, y, z in coords]
    Path(path).write_text("\n".join(lines) + "\n")


def generate_dataset(out_dir, count: int = 16, seed: int = 0, size: int = 128):
    """Write images/, landmarks/ and manifest.txt under out_dir."""
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    (out_dir / "landmarks").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    ids = []
    for i in range(count):
        sample_id = f"{i:04d}"
        Image.fromarray(synthesize_face(rng, size)).save(out_dir / "images" / f"{sample_id}.png")
        write_landmarks(out_dir / "landmarks" / f"{sample_id}.lmk", synthesize_landmarks(rng))
        ids.append(sample_id)
    (out_dir / "manifest.txt").write_text("\n".join(ids) + "\n")
    return ids
