"""Adam training loop, seeded initialization, evaluation, and the ablation
harness."""

import math
import random
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Sequence

import torch
from torch import nn

from . import checkpoint as ckpt
from .backbone import InstanceNorm2d
from .bicubic import bicubic_resize
from .dataio import SamplePair, collate
from .errors import CheckpointError
from .gcn import GcnEncoder
from .losses import (LossWeights, RandomConvExtractor, embedding_l2, pixel_l1,
                     style_loss, total_loss, train_hist_loss)
from .metrics import EcmReport, ecm, lpips, psnr, ssim
from .model import VARIANTS, AffectSRNet, ModelConfig, build_model

ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class TrainConfig:
    lr_start: float = 1e-3
    lr_end: float = 1e-5
    batch_size: int = 4
    max_steps: int = 500
    seed: int = 0
    weights: LossWeights = field(default_factory=LossWeights)
    checkpoint_interval: int = 100
    grad_clip: float = 1.0
    style_seed: int = 0

    def __post_init__(self):
        if self.lr_end > self.lr_start:
            raise ValueError("lr_end must be <= lr_start")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")


@dataclass(frozen=True)
class LossRecord:
    step: int
    lr: float
    pixel: float
    hist: float
    style: float
    embedding: float
    total: float


def cosine_lr(step: int, config: TrainConfig) -> float:
    """Cosine decay hitting lr_start at step 0 and lr_end at max_steps."""
    t = min(max(step, 0), config.max_steps) / config.max_steps
    return config.lr_end + 0.5 * (config.lr_start - config.lr_end) * (1.0 + math.cos(math.pi * t))


def _glorot_uniform(weight: torch.Tensor, gen: torch.Generator):
    fan_in = weight[0].numel()
    fan_out = weight.shape[0] * (weight[0].numel() // weight.shape[1] if weight.dim() > 2 else 1)
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    weight.uniform_(-bound, bound, generator=gen)


def init_params(model: AffectSRNet, seed: Optional[int] = None, pretrained=None) -> AffectSRNet:
    """Seeded re-initialization over modules in sorted name order, optionally
    followed by strict name-mapped backbone weights from a tensor archive.

    Norm affines always start at identity; graph-encoder and fusion weights
    are always seeded-random, never taken from the archive.
    """
    if seed is None:
        seed = model.config.seed
    gen = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for name, mod in sorted(model.named_modules(), key=lambda kv: kv[0]):
            if isinstance(mod, (nn.Conv2d, nn.Linear)):
                _glorot_uniform(mod.weight, gen)
                if mod.bias is not None:
                    mod.bias.zero_()
            elif isinstance(mod, (InstanceNorm2d, nn.BatchNorm1d)):
                mod.weight.fill_(1.0)
                mod.bias.zero_()
                if isinstance(mod, nn.BatchNorm1d):
                    mod.reset_running_stats()
            elif isinstance(mod, GcnEncoder):
                for w in mod.weights:
                    _glorot_uniform(w, gen)
                for b in mod.biases:
                    b.zero_()
    if pretrained is not None:
        load_pretrained_backbone(model, pretrained)
    return model


def _norm_param_names(backbone) -> set:
    skip = set()
    for mod_name, mod in backbone.named_modules():
        if isinstance(mod, InstanceNorm2d):
            for p_name, _ in mod.named_parameters():
                skip.add(f"{mod_name}.{p_name}")
    return skip


def load_pretrained_backbone(model: AffectSRNet, path):
    """Load backbone weights from a flat tensor archive, strict on names.

    Instance-norm affines are not expected in the archive (they stay at
    identity); all other backbone tensors must be present with exact shapes.
    """
    tensors, _ = ckpt.load_tensors(path)
    skip = _norm_param_names(model.backbone)
    with torch.no_grad():
        for name, param in model.backbone.named_parameters():
            if name in skip:
                continue
            if name not in tensors:
                raise CheckpointError(f"pretrained archive is missing tensor '{name}'")
            arr = tensors[name]
            if tuple(arr.shape) != tuple(param.shape):
                raise CheckpointError(
                    f"pretrained tensor '{name}' has shape {tuple(arr.shape)}, "
                    f"expected {tuple(param.shape)}"
                )
            param.copy_(torch.from_numpy(arr).to(param.dtype))


def export_backbone(model: AffectSRNet, path):
    """Write the backbone's non-norm tensors as a pretrained-style archive."""
    skip = _norm_param_names(model.backbone)
    tensors = {n: p for n, p in model.backbone.named_parameters() if n not in skip}
    ckpt.save_tensors(path, tensors, {"format": "affectsr-backbone", "version": 1})


def build_optimizer(model: nn.Module, config: TrainConfig) -> torch.optim.Adam:
    return torch.optim.Adam(model.parameters(), lr=config.lr_start,
                            betas=ADAM_BETAS, eps=ADAM_EPS)


def compute_loss_terms(model: AffectSRNet, batch: dict, extractor,
                       landmark_extractor: Optional[Callable] = None) -> dict:
    """Forward pass plus all loss components for one batch.

    The embedding term compares the forward-pass embeddings against the
    target-side landmark encoding; when a landmark extractor plugin is
    configured, the comparison side is re-extracted from the (detached) SR
    output instead.
    """
    sr, emb = model(batch["lr"], batch.get("coords"), clamp=False)
    terms = {
        "pixel": pixel_l1(sr, batch["hr"]),
        "hist": train_hist_loss(sr, batch["hr"]),
        "style": style_loss(sr, batch["hr"], extractor),
    }
    if emb is not None:
        emb_cmp = emb
        if landmark_extractor is not None:
            coords_sr = landmark_extractor(sr.detach())
            emb_cmp = model.encode_landmarks(coords_sr)
        elif batch.get("coords_g1") is not None:
            emb_cmp = model.encode_landmarks(batch["coords_g1"])
        target_emb = model.encode_landmarks(batch["coords"])
        terms["embedding"] = embedding_l2(emb_cmp, target_emb)
    else:
        terms["embedding"] = sr.new_zeros(())
    return terms


def train_step(model: AffectSRNet, batch: dict, optimizer: torch.optim.Optimizer,
               step: int, config: TrainConfig, extractor,
               landmark_extractor: Optional[Callable] = None) -> LossRecord:
    """One Adam update on the weighted total loss; returns per-term values."""
    model.train()
    lr = cosine_lr(step, config)
    for group in optimizer.param_groups:
        group["lr"] = lr
    optimizer.zero_grad()
    terms = compute_loss_terms(model, batch, extractor, landmark_extractor)
    loss = total_loss(terms, config.weights)
    loss.backward()
    if config.grad_clip > 0:
        torch.nn.utils.clip_grad_norm_(model.parameters(), config.grad_clip)
    optimizer.step()
    return LossRecord(
        step=step, lr=lr,
        pixel=terms["pixel"].item(), hist=terms["hist"].item(),
        style=terms["style"].item(), embedding=terms["embedding"].item(),
        total=loss.item(),
    )


def _batch_order(num_samples: int, batch_size: int, max_steps: int, seed: int):
    """Seeded per-epoch shuffles, yielding index lists for each step."""
    rng = random.Random(seed)
    perm: List[int] = []
    pos = 0
    for _ in range(max_steps):
        idx = []
        for _ in range(min(batch_size, num_samples)):
            if pos >= len(perm):
                perm = list(range(num_samples))
                rng.shuffle(perm)
                pos = 0
            idx.append(perm[pos])
            pos += 1
        yield idx


def fit(model: AffectSRNet, samples: Sequence[SamplePair], config: TrainConfig,
        checkpoint_dir=None, extractor=None,
        landmark_extractor: Optional[Callable] = None) -> List[LossRecord]:
    """Train to max_steps over a fixed sample list with seeded batch order."""
    if extractor is None:
        extractor = RandomConvExtractor(config.style_seed)
    optimizer = build_optimizer(model, config)
    records = []
    for step, idx in enumerate(_batch_order(len(samples), config.batch_size,
                                            config.max_steps, config.seed), start=1):
        batch = collate([samples[i] for i in idx])
        records.append(train_step(model, batch, optimizer, step, config, extractor,
                                  landmark_extractor))
        if checkpoint_dir is not None and (step % config.checkpoint_interval == 0
                                           or step == config.max_steps):
            path = checkpoint_dir / f"step_{step:06d}.ckpt"
            ckpt.save_checkpoint(path, model, optimizer, step,
                                 meta={"model_config": model.config.to_dict()})
    return records


def super_resolve(model: Optional[AffectSRNet], sample: SamplePair, hr_size: int = 128) -> torch.Tensor:
    """SR output for one sample; with no model, the bicubic baseline."""
    if model is None:
        return bicubic_resize(sample.lr.unsqueeze(0), hr_size, hr_size)[0]
    model.eval()
    with torch.no_grad():
        sr, _ = model(sample.lr.unsqueeze(0), sample.landmarks.coords.unsqueeze(0))
    return sr[0]


def evaluate(model: Optional[AffectSRNet], samples: Sequence[SamplePair],
             metric_names: Sequence[str], fer_plugin=None, lpips_plugin=None):
    """Per-sample PSNR/SSIM (and optional LPIPS) plus aggregate means and an
    optional ECM record over (original, super-resolved) pairs."""
    rows = []
    sr_images, hr_images = [], []
    want_lpips = "lpips" in metric_names
    for sample in samples:
        sr = super_resolve(model, sample, sample.hr.shape[-1])
        sr_images.append(sr)
        hr_images.append(sample.hr)
        row = {"id": sample.id}
        if "psnr" in metric_names:
            row["psnr"] = psnr(sr, sample.hr)
        if "ssim" in metric_names:
            row["ssim"] = ssim(sr.unsqueeze(0), sample.hr.unsqueeze(0))
        if want_lpips:
            value = lpips(sr, sample.hr, lpips_plugin)
            if value is not None:
                row["lpips"] = value
        rows.append(row)
    aggregate = {"n": len(rows)}
    for key in ("psnr", "ssim", "lpips"):
        values = [r[key] for r in rows if key in r]
        if values:
            aggregate[f"{key}_mean"] = sum(values) / len(values)
    report = None
    if "ecm" in metric_names:
        report = ecm(hr_images, sr_images, fer_plugin)
    return rows, aggregate, report


def run_ablation(variants: Sequence[str], model_config: ModelConfig, train_config: TrainConfig,
                 train_samples: Sequence[SamplePair], eval_samples: Sequence[SamplePair],
                 fer_plugin) -> List[dict]:
    """Train and evaluate each variant under identical seeds and data order;
    one result row per variant with PSNR/SSIM/ECM."""
    if len(variants) == 0:
        raise ValueError("variant list is empty")
    for v in variants:
        if v not in VARIANTS:
            raise ValueError(f"unknown variant '{v}' (choose from {VARIANTS})")
    results = []
    for variant in variants:
        cfg = replace(model_config, variant=variant)
        model = init_params(build_model(cfg), seed=cfg.seed)
        fit(model, train_samples, train_config)
        _, aggregate, report = evaluate(model, eval_samples, ("psnr", "ssim", "ecm"),
                                        fer_plugin=fer_plugin)
        results.append({
            "variant": variant,
            "psnr": aggregate["psnr_mean"],
            "ssim": aggregate["ssim_mean"],
            "ecm": report.ecm,
        })
    return results
