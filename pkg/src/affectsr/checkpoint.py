"""Flat named-tensor container used for checkpoints and weight archives.

Layout (all integers little-endian):

    bytes 0..7    magic b"AFSRTNS1"
    bytes 8..15   u64 manifest length in bytes
    manifest      UTF-8 JSON: {"meta": {...}, "tensors": [see below]}
    payload       raw little-endian tensor bytes

Each manifest tensor entry records name, dtype (numpy little-endian code),
shape, offset (relative to payload start) and nbytes. Entries are sorted by
name, which makes save -> load -> save byte-identical.
"""

import json
import struct
from pathlib import Path
from typing import Dict, Mapping, Tuple

import numpy as np
import torch

from .errors import CheckpointError

MAGIC = b"AFSRTNS1"


def _to_le_array(value) -> np.ndarray:
    arr = value.detach().cpu().numpy() if isinstance(value, torch.Tensor) else np.asarray(value)
    if not arr.flags["C_CONTIGUOUS"]:
        # note: ascontiguousarray would promote 0-d arrays to 1-d, so gate it
        arr = np.ascontiguousarray(arr)
    if arr.dtype.byteorder == ">":
        arr = arr.astype(arr.dtype.newbyteorder("<"))
    return arr


def save_tensors(path, tensors: Mapping[str, object], meta: dict = None):
    """Write a named-tensor archive; tensor entries are sorted by name."""
    entries = []
    blobs = []
    offset = 0
    for name in sorted(tensors):
        arr = _to_le_array(tensors[name])
        blob = arr.tobytes()
        dtype = np.dtype(arr.dtype).newbyteorder("<").str
        entries.append({
            "name": name,
            "dtype": dtype,
            "shape": list(arr.shape),
            "offset": offset,
            "nbytes": len(blob),
        })
        blobs.append(blob)
        offset += len(blob)
    manifest = json.dumps({"meta": meta or {}, "tensors": entries},
                          sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<Q", len(manifest)))
        f.write(manifest)
        for blob in blobs:
            f.write(blob)


def load_tensors(path) -> Tuple[Dict[str, np.ndarray], dict]:
    """Read a named-tensor archive back into arrays plus its meta dict."""
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"archive not found: {path}")
    data = path.read_bytes()
    if data[:8] != MAGIC:
        raise CheckpointError(f"{path} is not a tensor archive (bad magic)")
    (mlen,) = struct.unpack("<Q", data[8:16])
    manifest = json.loads(data[16:16 + mlen].decode())
    payload = data[16 + mlen:]
    tensors = {}
    for entry in manifest["tensors"]:
        start, n = entry["offset"], entry["nbytes"]
        if start + n > len(payload):
            raise CheckpointError(f"{path}: tensor '{entry['name']}' overruns the payload")
        arr = np.frombuffer(payload[start:start + n], dtype=np.dtype(entry["dtype"]))
        tensors[entry["name"]] = arr.reshape(entry["shape"]).copy()
    return tensors, manifest.get("meta", {})


def save_checkpoint(path, model, optimizer=None, step: int = 0, meta: dict = None):
    """Snapshot model parameters/buffers plus Adam moments under one archive."""
    tensors = {}
    for name, param in model.named_parameters():
        tensors[f"model/{name}"] = param
    for name, buf in model.named_buffers():
        tensors[f"model/{name}"] = buf
    opt_steps = {}
    if optimizer is not None:
        params_by_id = {id(p): n for n, p in model.named_parameters()}
        for group in optimizer.param_groups:
            for p in group["params"]:
                state = optimizer.state.get(p)
                if not state:
                    continue
                name = params_by_id[id(p)]
                tensors[f"opt/{name}/exp_avg"] = state["exp_avg"]
                tensors[f"opt/{name}/exp_avg_sq"] = state["exp_avg_sq"]
                s = state["step"]
                opt_steps[name] = float(s.item() if isinstance(s, torch.Tensor) else s)
    full_meta = dict(meta or {})
    full_meta["step"] = int(step)
    full_meta["opt_steps"] = opt_steps
    save_tensors(path, tensors, full_meta)


def restore_model(model, tensors: Mapping[str, np.ndarray], prefix: str = "model/"):
    """Copy archived tensors into a model, strict on names and shapes."""
    states = dict(model.named_parameters())
    states.update(dict(model.named_buffers()))
    for name, target in states.items():
        key = prefix + name
        if key not in tensors:
            raise CheckpointError(f"checkpoint is missing tensor '{key}'")
        arr = tensors[key]
        if tuple(arr.shape) != tuple(target.shape):
            raise CheckpointError(
                f"shape mismatch for '{key}': archive {tuple(arr.shape)} vs model {tuple(target.shape)}"
            )
        with torch.no_grad():
            target.copy_(torch.from_numpy(arr).to(target.dtype))


def restore_optimizer(optimizer, model, tensors: Mapping[str, np.ndarray], meta: dict):
    """Re-inject Adam moments saved by save_checkpoint."""
    opt_steps = meta.get("opt_steps", {})
    names = dict(model.named_parameters())
    for name, step in opt_steps.items():
        param = names[name]
        optimizer.state[param] = {
            "step": torch.tensor(step),
            "exp_avg": torch.from_numpy(tensors[f"opt/{name}/exp_avg"]).to(param.dtype),
            "exp_avg_sq": torch.from_numpy(tensors[f"opt/{name}/exp_avg_sq"]).to(param.dtype),
        }
