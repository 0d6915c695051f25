"""Command-line entry points: train, eval, infer, ablate (+ demo-data).

Exit codes: 0 success, 1 configuration error, 2 runtime error.
"""

import functools
import sys
from pathlib import Path

import click
import numpy as np
import torch
from PIL import Image

from . import checkpoint as ckpt
from . import report as report_mod
from .config import load_run_config
from .dataio import PairDataset, load_image, load_landmarks, make_split
from .errors import AffectSrError, CheckpointError, ConfigError
from .fer import resolve_plugin
from .metrics import resolve_lpips_plugin
from .model import VARIANTS, ModelConfig, build_model
from .synth import generate_dataset
from .training import evaluate, fit, init_params, run_ablation

EXIT_CONFIG = 1
EXIT_RUNTIME = 2


def _exit_codes(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            fn(*args, **kwargs)
        except (ConfigError, CheckpointError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_CONFIG)
        except AffectSrError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_RUNTIME)
        except Exception as exc:  # noqa: BLE001
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_RUNTIME)
    return wrapper


@click.group()
def main():
    """Emotion-aware face super-resolution toolkit."""


def _load_dataset(cfg):
    root = cfg["data"]["root"]
    if root is None:
        raise ConfigError("[data] root is required for this command")
    try:
        return PairDataset(root, cfg["data"]["scale"])
    except AffectSrError as exc:
        raise ConfigError(str(exc)) from exc


def _split_samples(dataset, eval_count, seed):
    if eval_count > 0:
        train_ids, eval_ids = make_split(dataset.ids, eval_count, seed)
    else:
        train_ids, eval_ids = list(dataset.ids), []
    train = [dataset.load(i) for i in train_ids]
    heldout = [dataset.load(i) for i in eval_ids]
    return train, heldout


def _out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--seed", type=int, default=None, help="override [train] seed")
@click.option("--variant", type=click.Choice(VARIANTS), default=None, help="override [model] variant")
@click.option("--scale", type=click.Choice(["4", "8"]), default=None, help="override [data] scale")
@click.option("--out", "out_override", type=click.Path(), default=None, help="override [output] dir")
@_exit_codes
def train(config_path, seed, variant, scale, out_override):
    """Train a model per the run config; writes checkpoints and loss logs."""
    cfg = load_run_config(config_path)
    if seed is not None:
        cfg["train"]["seed"] = seed
    if variant is not None:
        cfg["model"]["variant"] = variant
    if scale is not None:
        cfg["data"]["scale"] = int(scale)
    out = _out_dir(out_override or cfg["output"]["dir"])

    dataset = _load_dataset(cfg)
    train_cfg = cfg.train_config()
    model_cfg = cfg.model_config()
    train_samples, _ = _split_samples(dataset, cfg["data"]["eval_count"], train_cfg.seed)
    if not train_samples:
        raise ConfigError("no training samples left after the eval split")

    model = init_params(build_model(model_cfg),
                        pretrained=cfg["train"]["pretrained"] or None)
    ckpt_dir = out / "checkpoints"
    ckpt_dir.mkdir(exist_ok=True)
    records = fit(model, train_samples, train_cfg, checkpoint_dir=ckpt_dir)
    ckpt.save_checkpoint(out / "model.ckpt", model, step=train_cfg.max_steps,
                         meta={"model_config": model_cfg.to_dict()})
    report_mod.write_loss_log(out / "loss_log.tsv", records)
    if cfg["output"]["figures"]:
        report_mod.render_loss_figure(out, records)
    click.echo(f"trained {train_cfg.max_steps} steps; final total loss "
               f"{records[-1].total!r}; checkpoint at {out / 'model.ckpt'}")


def _model_from_checkpoint(path):
    tensors, meta = ckpt.load_tensors(path)
    if "model_config" not in meta:
        raise CheckpointError(f"{path} carries no model config snapshot")
    model_cfg = ModelConfig.from_dict(meta["model_config"])
    model = build_model(model_cfg)
    ckpt.restore_model(model, tensors)
    model.eval()
    return model, model_cfg


@main.command("eval")
@click.option("--ckpt", "ckpt_path", type=click.Path(), default=None)
@click.option("--data", "data_root", required=True, type=click.Path())
@click.option("--metrics", "metric_spec", default="psnr,ssim", show_default=True)
@click.option("--method", type=click.Choice(["model", "bicubic"]), default="model", show_default=True)
@click.option("--plugin", "fer_spec", default="", help="FER plugin for the ecm metric")
@click.option("--lpips-plugin", "lpips_spec", default="", help="perceptual-distance plugin")
@click.option("--scale", type=click.Choice(["4", "8"]), default=None,
              help="dataset scale (bicubic method; must match the checkpoint otherwise)")
@click.option("--eval-count", type=int, default=0, help="evaluate a seeded holdout instead of the whole manifest")
@click.option("--seed", type=int, default=0, help="seed for --eval-count splitting")
@click.option("--out", "out_path", type=click.Path(), default="eval_out", show_default=True)
@click.option("--figures/--no-figures", default=True, show_default=True)
@_exit_codes
def eval_cmd(ckpt_path, data_root, metric_spec, method, fer_spec, lpips_spec,
             scale, eval_count, seed, out_path, figures):
    """Evaluate a checkpoint (or the bicubic baseline) over a dataset."""
    metric_names = [m.strip() for m in metric_spec.split(",") if m.strip()]
    for m in metric_names:
        if m not in ("psnr", "ssim", "ecm", "lpips"):
            raise ConfigError(f"unknown metric '{m}'")
    if "ecm" in metric_names and not fer_spec:
        raise ConfigError("metric 'ecm' requires a FER plugin (--plugin, e.g. toy:0)")

    model = None
    if method == "model":
        if ckpt_path is None:
            raise ConfigError("--ckpt is required unless --method bicubic")
        model, model_cfg = _model_from_checkpoint(ckpt_path)
        if scale is not None and int(scale) != model_cfg.scale:
            raise ConfigError(f"--scale {scale} conflicts with checkpoint scale {model_cfg.scale}")
        data_scale = model_cfg.scale
    else:
        data_scale = int(scale) if scale is not None else 4

    try:
        dataset = PairDataset(data_root, data_scale)
    except AffectSrError as exc:
        raise ConfigError(str(exc)) from exc
    if eval_count > 0:
        _, eval_ids = make_split(dataset.ids, eval_count, seed)
    else:
        eval_ids = list(dataset.ids)
    samples = [dataset.load(i) for i in eval_ids]

    fer_plugin = resolve_plugin(fer_spec) if fer_spec else None
    lpips_plugin = resolve_lpips_plugin(lpips_spec) if lpips_spec else None
    rows, aggregate, ecm_rep = evaluate(model, samples, metric_names,
                                        fer_plugin=fer_plugin, lpips_plugin=lpips_plugin)
    out = _out_dir(out_path)
    report_path = out / "report.tsv"
    report_mod.write_eval_report(report_path, rows, aggregate, ecm_rep)
    if figures:
        report_mod.render_eval_figure(out, rows)
    click.echo(f"evaluated {len(rows)} samples; report at {report_path}")


@main.command()
@click.argument("input_image", type=click.Path())
@click.option("--ckpt", "ckpt_path", required=True, type=click.Path())
@click.option("--landmarks", "landmark_path", type=click.Path(), default=None)
@click.option("--scale", type=click.Choice(["4", "8"]), default=None)
@click.option("--out", "out_path", required=True, type=click.Path())
@_exit_codes
def infer(input_image, ckpt_path, landmark_path, scale, out_path):
    """Super-resolve one low-resolution image to a PNG file."""
    model, model_cfg = _model_from_checkpoint(ckpt_path)
    if scale is not None and int(scale) != model_cfg.scale:
        raise ConfigError(f"--scale {scale} conflicts with checkpoint scale {model_cfg.scale}")
    if not Path(input_image).exists():
        raise ConfigError(f"input image not found: {input_image}")
    img = load_image(input_image)
    size = model_cfg.lr_size
    if img.shape[-2:] != (size, size):
        raise ConfigError(
            f"input must be {size}x{size} for scale {model_cfg.scale}, "
            f"got {img.shape[-2]}x{img.shape[-1]}"
        )
    coords = None
    if model_cfg.variant == "full":
        if landmark_path is None:
            raise ConfigError("--landmarks is required for a full-variant checkpoint")
        coords = load_landmarks(landmark_path).coords.unsqueeze(0)
    with torch.no_grad():
        sr, _ = model(img.unsqueeze(0), coords)
    arr = (sr[0].clamp(0, 1).numpy() * 255.0).round().astype(np.uint8)
    out_file = Path(out_path)
    if out_file.parent != Path(""):
        out_file.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(arr.transpose(1, 2, 0)).save(out_file, format="PNG")


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--variants", "variant_spec", default="rrdb,rrdb_in,full", show_default=True)
@click.option("--out", "out_override", type=click.Path(), default=None)
@_exit_codes
def ablate(config_path, variant_spec, out_override):
    """Train/evaluate model variants under identical seeds and report a
    component table."""
    cfg = load_run_config(config_path)
    variants = [v.strip() for v in variant_spec.split(",") if v.strip()]
    if not variants:
        raise ConfigError("empty variant list")
    for v in variants:
        if v not in VARIANTS:
            raise ConfigError(f"unknown variant '{v}' (choose from {VARIANTS})")
    if not cfg["metrics"]["fer_plugin"]:
        raise ConfigError("[metrics] fer_plugin is required for the ablation's ECM column")

    dataset = _load_dataset(cfg)
    train_cfg = cfg.train_config()
    model_cfg = cfg.model_config()
    eval_count = cfg["data"]["eval_count"]
    if eval_count < 1:
        raise ConfigError("[data] eval_count must be >= 1 for ablation")
    train_samples, eval_samples = _split_samples(dataset, eval_count, train_cfg.seed)
    fer_plugin = resolve_plugin(cfg["metrics"]["fer_plugin"])

    results = run_ablation(variants, model_cfg, train_cfg, train_samples,
                           eval_samples, fer_plugin)
    out = _out_dir(out_override or cfg["output"]["dir"])
    report_mod.write_ablation_report(out / "ablation.tsv", results)
    if cfg["output"]["figures"]:
        report_mod.render_ablation_figure(out, results)
    click.echo(report_mod.format_ablation_table(results))


@main.command("demo-data")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--count", type=int, default=16, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@_exit_codes
def demo_data(out_path, count, seed):
    """Generate a synthetic toy dataset (images, landmarks, manifest)."""
    ids = generate_dataset(out_path, count=count, seed=seed)
    click.echo(f"wrote {len(ids)} samples under {out_path}")


if __name__ == "__main__":
    main()
