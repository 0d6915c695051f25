"""Delimited report files plus the matplotlib figures rendered beside them.

Report records are tab-separated: a record-type token followed by key=value
fields. Floats use shortest round-trip repr so seeded reruns are
byte-identical.
"""

from pathlib import Path
from typing import List, Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .metrics import EcmReport  # noqa: E402
from .training import LossRecord  # noqa: E402

EVAL_HEADER = "# affectsr eval report v1"
ABLATION_HEADER = "# affectsr ablation report v1"
LOSS_HEADER = "# affectsr loss log v1"


def _fmt(value) -> str:
    return repr(float(value)) if isinstance(value, float) else str(value)


def _kv(record: dict, keys) -> str:
    return "\t".join(f"{k}={_fmt(record[k])}" for k in keys if k in record)


def write_eval_report(path, rows: Sequence[dict], aggregate: dict,
                      ecm_report: Optional[EcmReport] = None) -> None:
    lines = [EVAL_HEADER]
    for row in rows:
        lines.append("sample\t" + row["id"] + "\t" + _kv(row, ("psnr", "ssim", "lpips")))
    agg = dict(aggregate)
    if ecm_report is not None:
        agg.update(l_h=ecm_report.l_h, l_conf=ecm_report.l_conf,
                   alpha=ecm_report.alpha, ecm=ecm_report.ecm,
                   num_samples=ecm_report.num_samples)
    lines.append("aggregate\t" + _kv(agg, ("n", "psnr_mean", "ssim_mean", "lpips_mean",
                                           "l_h", "l_conf", "alpha", "ecm", "num_samples")))
    Path(path).write_text("\n".join(lines) + "\n")


def write_loss_log(path, records: Sequence[LossRecord]) -> None:
    lines = [LOSS_HEADER, "step\tlr\tpixel\thist\tstyle\tembedding\ttotal"]
    for r in records:
        lines.append("\t".join(_fmt(v) for v in (r.step, r.lr, r.pixel, r.hist,
                                                 r.style, r.embedding, r.total)))
    Path(path).write_text("\n".join(lines) + "\n")


def format_ablation_table(results: Sequence[dict]) -> str:
    """Three-column component table with metric direction markers."""
    header = ("Component", "PSNR↑", "SSIM↑", "ECM↓")
    rows = [(r["variant"], f"{r['psnr']:.2f}", f"{r['ssim']:.4f}", f"{r['ecm']:.2f}")
            for r in results]
    widths = [max(len(h), *(len(row[i]) for row in rows)) for i, h in enumerate(header)]
    def line(cells):
        return " | ".join(c.ljust(w) for c, w in zip(cells, widths))
    sep = "-+-".join("-" * w for w in widths)
    return "\n".join([line(header), sep] + [line(r) for r in rows])


def write_ablation_report(path, results: Sequence[dict]) -> None:
    lines = [ABLATION_HEADER]
    for r in results:
        lines.append("variant\t" + r["variant"] + "\t" + _kv(r, ("psnr", "ssim", "ecm")))
    Path(path).write_text("\n".join(lines) + "\n")


def render_eval_figure(out_dir, rows: Sequence[dict]) -> Optional[Path]:
    keys = [k for k in ("psnr", "ssim") if rows and k in rows[0]]
    if not keys:
        return None
    fig, axes = plt.subplots(len(keys), 1, figsize=(8, 3 * len(keys)), squeeze=False)
    x = range(len(rows))
    for ax, key in zip(axes[:, 0], keys):
        ax.bar(x, [r[key] for r in rows], color="steelblue")
        ax.set_ylabel(key.upper())
        ax.set_xticks(list(x))
        ax.set_xticklabels([r["id"] for r in rows], rotation=90, fontsize=6)
    axes[-1, 0].set_xlabel("sample")
    fig.tight_layout()
    path = Path(out_dir) / "metrics.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_loss_figure(out_dir, records: Sequence[LossRecord]) -> Path:
    fig, ax = plt.subplots(figsize=(8, 5))
    steps = [r.step for r in records]
    for key in ("total", "pixel", "hist", "style", "embedding"):
        values = [getattr(r, key) for r in records]
        if any(v != 0 for v in values):
            ax.plot(steps, values, label=key)
    ax.set_xlabel("step")
    ax.set_ylabel("loss")
    ax.set_yscale("log")
    ax.legend()
    fig.tight_layout()
    path = Path(out_dir) / "loss_curves.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_ablation_figure(out_dir, results: Sequence[dict]) -> Path:
    fig, axes = plt.subplots(1, 3, figsize=(12, 4))
    variants = [r["variant"] for r in results]
    for ax, key, arrow in zip(axes, ("psnr", "ssim", "ecm"), ("↑", "↑", "↓")):
        ax.bar(variants, [r[key] for r in results], color="slategray")
        ax.set_title(f"{key.upper()}{arrow}")
        ax.tick_params(axis="x", rotation=20)
    fig.tight_layout()
    path = Path(out_dir) / "ablation.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
