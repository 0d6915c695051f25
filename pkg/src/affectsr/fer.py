"""Facial-expression classifier plugins producing class-confidence vectors.

The real auxiliary model is external by design; anything that maps an image
to a probability vector can serve. A deterministic toy classifier ships for
tests and desk-scale runs, and external models can attach as subprocesses
speaking a line-delimited protocol (request: image file path, response:
comma-separated class probabilities).
"""

import math
import shlex
import subprocess
import tempfile
from pathlib import Path
from typing import Protocol

import numpy as np
import torch
from torch import nn

from .bicubic import bicubic_resize
from .errors import PluginError

NUM_EXPRESSION_CLASSES = 7


def validate_confidence(probs, num_classes=None) -> np.ndarray:
    p = np.asarray(probs, dtype=np.float64).reshape(-1)
    if num_classes is not None and p.shape[0] != num_classes:
        raise PluginError(f"expected {num_classes} class probabilities, got {p.shape[0]}")
    if not np.isfinite(p).all() or (p < 0).any():
        raise PluginError("confidence vector must be finite and non-negative")
    if abs(p.sum() - 1.0) > 1e-6:
        raise PluginError(f"confidence vector sums to {p.sum()!r}, expected 1")
    return p


class FerPlugin(Protocol):
    name: str
    num_classes: int

    def classify(self, img: torch.Tensor) -> np.ndarray: ...


def classify(img: torch.Tensor, plugin: FerPlugin) -> np.ndarray:
    """Run one image (3, H, W) or (1, 3, H, W) through a plugin and validate
    the returned distribution."""
    if img.dim() == 4:
        if img.shape[0] != 1:
            raise PluginError(f"classify expects a single image, got batch of {img.shape[0]}")
        img = img[0]
    return validate_confidence(plugin.classify(img), plugin.num_classes)


class _ToyNet(nn.Module):
    def __init__(self):
        super().__init__()
        self.conv1 = nn.Conv2d(3, 8, 3, stride=2, padding=1)
        self.conv2 = nn.Conv2d(8, 16, 3, stride=2, padding=1)
        self.head = nn.Linear(16, NUM_EXPRESSION_CLASSES)

    def forward(self, x):
        h = torch.relu(self.conv1(x))
        h = torch.relu(self.conv2(h))
        return self.head(h.mean(dim=(2, 3)))


class ToyFerClassifier:
    """Small frozen conv classifier with seeded random weights; 7 classes.

    Stands in for a trained expression model so metric plumbing can run
    end to end without GPUs or external weights. Owns its preprocessing
    (bicubic resize to 32x32).
    """

    input_size = 32

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.name = f"toy:{seed}"
        self.num_classes = NUM_EXPRESSION_CLASSES
        self.net = _ToyNet()
        gen = torch.Generator().manual_seed(seed)
        with torch.no_grad():
            for _, param in sorted(self.net.named_parameters()):
                if param.dim() > 1:
                    bound = math.sqrt(6.0 / param[0].numel())
                    param.uniform_(-bound, bound, generator=gen)
                else:
                    param.zero_()
        self.net.eval()
        self.net.requires_grad_(False)

    def classify(self, img: torch.Tensor) -> np.ndarray:
        if img.dim() == 3:
            img = img.unsqueeze(0)
        img = img.to(torch.float32)
        if img.shape[-2:] != (self.input_size, self.input_size):
            img = bicubic_resize(img, self.input_size, self.input_size)
        with torch.no_grad():
            logits = self.net(img)[0]
            probs = torch.softmax(logits.double(), dim=0)
        return probs.numpy()

    def classify_file(self, path) -> np.ndarray:
        from .dataio import load_image

        return self.classify(load_image(path))


class SubprocessFerPlugin:
    """External classifier behind the line-delimited path protocol.

    The child process reads one image path per line on stdin and answers one
    line of comma-separated class probabilities. In-memory tensors are
    materialized as 8-bit PNG temp files before sending.
    """

    def __init__(self, command, num_classes: int = NUM_EXPRESSION_CLASSES, name: str = None):
        self.command = list(command)
        self.num_classes = num_classes
        self.name = name or f"proc:{' '.join(self.command)}"
        self._proc = None

    def _ensure_process(self):
        if self._proc is None or self._proc.poll() is not None:
            self._proc = subprocess.Popen(
                self.command, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                text=True, bufsize=1,
            )
        return self._proc

    def classify_path(self, path) -> np.ndarray:
        proc = self._ensure_process()
        try:
            proc.stdin.write(f"{Path(path)}\n")
            proc.stdin.flush()
            line = proc.stdout.readline()
        except (BrokenPipeError, OSError) as exc:
            raise PluginError(f"plugin process '{self.name}' failed: {exc}") from exc
        if not line:
            raise PluginError(f"plugin process '{self.name}' closed its output")
        try:
            return np.array([float(v) for v in line.strip().split(",")], dtype=np.float64)
        except ValueError as exc:
            raise PluginError(f"plugin '{self.name}' sent malformed response: {line!r}") from exc

    def classify(self, img: torch.Tensor) -> np.ndarray:
        from PIL import Image

        if img.dim() == 4:
            img = img[0]
        arr = (img.clamp(0, 1).numpy() * 255.0).round().astype(np.uint8)
        with tempfile.NamedTemporaryFile(suffix=".png", delete=False) as f:
            Image.fromarray(arr.transpose(1, 2, 0)).save(f, format="PNG")
            tmp = Path(f.name)
        try:
            return self.classify_path(tmp)
        finally:
            tmp.unlink(missing_ok=True)

    def close(self):
        if self._proc is None:
            return
        for stream in (self._proc.stdin, self._proc.stdout):
            if stream and not stream.closed:
                stream.close()
        if self._proc.poll() is None:
            self._proc.wait(timeout=10)
        self._proc = None


def resolve_plugin(spec: str) -> FerPlugin:
    """Plugin specs: ``toy:<seed>`` (built-in) or ``proc:<command line>``."""
    if spec.startswith("toy:"):
        try:
            return ToyFerClassifier(int(spec.split(":", 1)[1]))
        except ValueError as exc:
            raise PluginError(f"bad toy plugin seed in '{spec}'") from exc
    if spec.startswith("proc:"):
        command = shlex.split(spec.split(":", 1)[1])
        if not command:
            raise PluginError(f"empty subprocess command in '{spec}'")
        return SubprocessFerPlugin(command)
    raise PluginError(f"unknown FER plugin spec '{spec}' (use toy:<seed> or proc:<command>)")
