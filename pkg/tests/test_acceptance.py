"""Acceptance suite: one test per primary criterion, each printing a
pass/fail line with its pinned tolerance."""

import math
import time

import numpy as np
import pytest
import torch
from click.testing import CliRunner

from affectsr.cli import main as cli_main
from affectsr.dataio import collate
from affectsr.facegraph import FaceGraph, normalize_adjacency
from affectsr.fer import ToyFerClassifier
from affectsr.fusion import SplitAttentionFusion, split_blocks
from affectsr.gcn import gcn_layer
from affectsr.losses import (IdentityExtractor, LossWeights, embedding_l2,
                             pixel_l1, style_loss, total_loss, train_hist_loss)
from affectsr.metrics import ECM_ALPHA, ECM_CONF_FLOOR, ecm, ecm_report, psnr, ssim
from affectsr.model import ModelConfig, build_model
from affectsr.synth import synthesize_face
from affectsr.training import (TrainConfig, build_optimizer, compute_loss_terms,
                               fit, init_params, run_ablation, train_step)

from conftest import tiny_config


def ok(name, detail):
    print(f"[acceptance] {name}: PASS ({detail})")


# --------------------------------------------------------------------------
# 1. Shape contract


def test_shape_contract_50_trials():
    start = time.time()
    models = {
        8: init_params(build_model(tiny_config(scale=8)), seed=0).eval(),
        4: init_params(build_model(tiny_config(scale=4)), seed=0).eval(),
    }
    gen = torch.Generator().manual_seed(123)
    failures = 0
    for trial in range(50):
        scale = 8 if trial % 2 == 0 else 4
        lr = torch.rand(1, 3, 128 // scale, 128 // scale, generator=gen)
        coords = torch.rand(1, 478, 3, generator=gen)
        sr, emb = models[scale](lr, coords)
        if sr.shape != (1, 3, 128, 128) or emb.shape != (1, 478, 16):
            failures += 1
    elapsed = time.time() - start
    assert failures == 0
    assert elapsed < 60
    ok("shape contract", f"50 randomized trials, 0 failures, {elapsed:.1f}s")


# --------------------------------------------------------------------------
# 2. Gradient suite (64-bit, 4x4 inputs, rel err <= 1e-4)

GRAD_TOL = 1e-4


def relerr(analytic, fd):
    return abs(analytic - fd) / max(abs(fd), 1e-12)


def fd_check(fn, tensor, indices, eps=1e-6):
    if tensor.grad is not None:
        tensor.grad = None
    fn().backward()
    worst = 0.0
    with torch.no_grad():
        for idx in indices:
            orig = tensor[idx].item()
            tensor[idx] = orig + eps
            hi = fn().item()
            tensor[idx] = orig - eps
            lo = fn().item()
            tensor[idx] = orig
            worst = max(worst, relerr(tensor.grad[idx].item(), (hi - lo) / (2 * eps)))
    return worst


def test_gradient_suite():
    start = time.time()
    gen = torch.Generator().manual_seed(7)
    idx4 = [(0, 0, 0, 0), (0, 1, 2, 3), (0, 2, 1, 2)]
    worst = {}

    sr = torch.rand(1, 3, 4, 4, dtype=torch.float64, generator=gen).requires_grad_()
    hr = torch.rand(1, 3, 4, 4, dtype=torch.float64, generator=gen)
    worst["pixel_l1"] = fd_check(lambda: pixel_l1(sr, hr), sr, idx4)
    worst["style_loss"] = fd_check(lambda: style_loss(sr, hr, IdentityExtractor()), sr, idx4)
    worst["train_hist_loss"] = fd_check(lambda: train_hist_loss(sr, hr), sr, idx4)

    ea = torch.randn(1, 4, 4, dtype=torch.float64, generator=gen).requires_grad_()
    eb = torch.randn(1, 4, 4, dtype=torch.float64, generator=gen)
    worst["embedding_l2"] = fd_check(lambda: embedding_l2(ea, eb), ea,
                                     [(0, 0, 0), (0, 2, 3), (0, 3, 1)])

    # end-to-end: tiny model on 4x4 LR inputs, weighted total loss
    cfg = tiny_config(scale=4, hr_size=16)
    model = init_params(build_model(cfg), seed=1).double().eval()
    batch = {
        "lr": torch.rand(2, 3, 4, 4, dtype=torch.float64, generator=gen),
        "hr": torch.rand(2, 3, 16, 16, dtype=torch.float64, generator=gen),
        "coords": torch.rand(2, 478, 3, dtype=torch.float64, generator=gen),
    }
    batch["coords_g1"] = (batch["coords"] + 0.01).clamp(0, 1)
    weights = LossWeights()

    def scalar():
        return total_loss(compute_loss_terms(model, batch, IdentityExtractor()), weights)

    targets = [
        ("stem", model.backbone.stem.weight, (0, 0, 0, 0)),
        ("gcn", model.encoder.weights[0], (0, 0)),
        ("fusion_joint", model.backbone.fusion[0].joint.weight, (0, 0)),
        ("rasterizer", model.rasterizer.smooth.weight, (0, 0, 1, 1)),
        ("conv_last", model.backbone.conv_last.weight, (0, 0, 0, 0)),
        ("instance_norm", model.backbone.blocks[0].rdbs[0].norms[0].weight, (0,)),
    ]
    eps = 1e-6
    model.zero_grad()
    scalar().backward()
    for name, param, idx in targets:
        analytic = param.grad[idx].item()
        with torch.no_grad():
            orig = param[idx].item()
            param[idx] = orig + eps
            hi = scalar().item()
            param[idx] = orig - eps
            lo = scalar().item()
            param[idx] = orig
        worst[f"total/{name}"] = relerr(analytic, (hi - lo) / (2 * eps))

    elapsed = time.time() - start
    for name, err in worst.items():
        assert err <= GRAD_TOL, (name, err)
    assert elapsed < 300
    ok("gradient suite", "max rel err "
       f"{max(worst.values()):.2e} <= {GRAD_TOL}, {elapsed:.1f}s")


# --------------------------------------------------------------------------
# 3. ECM oracle (brute force, 1e-9)


def brute_force_ecm(orig, sr, bins=10, alpha=0.5, floor=1e-6):
    """Naive histogram fill + naive entropy, kept independent of metrics.py."""
    n, c = orig.shape
    l_h = 0.0
    for cls in range(c):
        h_o, h_s = [0] * bins, [0] * bins
        for i in range(n):
            b_o = min(int(orig[i, cls] * bins), bins - 1)
            b_s = min(int(sr[i, cls] * bins), bins - 1)
            h_o[b_o] += 1
            h_s[b_s] += 1
        for b in range(bins):
            l_h += (h_o[b] / n - h_s[b] / n) ** 2

    def naive_entropy(p):
        total = 0.0
        for v in p:
            if v > 0:
                total -= v * math.log(v)
        return total

    l_conf = sum(abs(naive_entropy(orig[i]) - naive_entropy(sr[i])) for i in range(n)) / n
    return l_h, l_conf, alpha * l_h + math.log(max(l_conf, floor))


def test_ecm_oracle_100_pairs():
    start = time.time()
    rng = np.random.default_rng(2024)
    orig = rng.dirichlet(np.ones(7), size=100)
    sr = rng.dirichlet(np.ones(7), size=100)
    rep = ecm_report(orig, sr)
    l_h, l_conf, value = brute_force_ecm(orig, sr)
    assert abs(rep.l_h - l_h) <= 1e-9
    assert abs(rep.l_conf - l_conf) <= 1e-9
    assert abs(rep.ecm - value) <= 1e-9
    assert rep.alpha == ECM_ALPHA == 0.5
    # log-combination verified directly: alpha*L_H + ln(L_conf)
    assert rep.ecm == pytest.approx(0.5 * rep.l_h + math.log(max(rep.l_conf, ECM_CONF_FLOOR)),
                                    abs=1e-12)
    elapsed = time.time() - start
    assert elapsed < 10
    ok("ECM oracle", f"100 synthetic pairs match brute force to 1e-9, {elapsed:.2f}s")


# --------------------------------------------------------------------------
# 4. ECM direction (toy plugin, N=50, 10/10 seeded trials)


def test_ecm_direction_10_trials():
    start = time.time()
    plugin = ToyFerClassifier(0)
    wins = 0
    for seed in range(10):
        rng = np.random.default_rng(seed)
        gen = torch.Generator().manual_seed(seed + 1000)
        orig = [torch.from_numpy(synthesize_face(rng).astype(np.float32) / 255).permute(2, 0, 1)
                for _ in range(50)]
        noise = [torch.rand(3, 128, 128, generator=gen) for _ in range(50)]
        if ecm(orig, orig, plugin).ecm < ecm(orig, noise, plugin).ecm:
            wins += 1
    elapsed = time.time() - start
    assert wins == 10
    assert elapsed < 120
    ok("ECM direction", f"identity beats noise in {wins}/10 trials, {elapsed:.1f}s")


# --------------------------------------------------------------------------
# 5. GCN oracle (200 random graphs <= 10 nodes, 1e-6)


def test_gcn_oracle_200_graphs():
    start = time.time()
    rng = np.random.default_rng(7)
    max_err_adj = 0.0
    max_err_layer = 0.0
    for _ in range(200):
        n = int(rng.integers(1, 11))
        edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < 0.4]
        graph = normalize_adjacency(FaceGraph(num_nodes=n, edges=tuple(edges)))

        a = np.zeros((n, n))
        for i, j in edges:
            a[i, j] = a[j, i] = 1.0
        a_hat = a + np.eye(n)
        d = np.diag(1.0 / np.sqrt(a_hat.sum(axis=1)))
        want_adj = d @ a_hat @ d
        max_err_adj = max(max_err_adj, np.abs(graph.adjacency_norm.numpy() - want_adj).max())

        x = rng.normal(size=(n, 3))
        w = rng.normal(size=(3, 6))
        b = rng.normal(size=6)
        got = gcn_layer(torch.from_numpy(x), graph.adjacency_norm,
                        torch.from_numpy(w), torch.from_numpy(b)).numpy()
        want = np.maximum(want_adj @ x @ w + b, 0)
        max_err_layer = max(max_err_layer, np.abs(got - want).max())
    elapsed = time.time() - start
    assert max_err_adj <= 1e-6
    assert max_err_layer <= 1e-6
    assert elapsed < 30
    ok("GCN oracle", f"200 graphs, adj err {max_err_adj:.1e}, layer err "
       f"{max_err_layer:.1e}, {elapsed:.1f}s")


# --------------------------------------------------------------------------
# 6. MSAF invariants


def test_msaf_invariants():
    start = time.time()
    torch.manual_seed(5)
    fusion = SplitAttentionFusion((16, 24), block_channels=8, reduction=2).eval()
    z = fusion.joint_projection([torch.randn(3, 8), torch.randn(3, 8)])
    for modality in (0, 1):
        sums = fusion.attention(z, modality).sum(dim=1)
        assert (sums - 1).abs().max() <= 1e-6

    single = SplitAttentionFusion((8, 8), block_channels=8, reduction=2).eval()
    feat = torch.randn(2, 8, 4, 4)
    assert torch.equal(single(feat, torch.randn(2, 8, 4, 4)), feat)

    multi = SplitAttentionFusion((10, 8), block_channels=4, reduction=2).eval()
    feat = torch.randn(2, 10, 3, 3)
    blocks = split_blocks(feat, 4)
    ones = torch.ones(2, len(blocks), 4)
    assert torch.equal(multi._reassemble(blocks, ones, 10), feat)
    elapsed = time.time() - start
    assert elapsed < 30
    ok("MSAF invariants", f"softmax sums, passthrough, roundtrip, {elapsed:.2f}s")


# --------------------------------------------------------------------------
# 7. Metric oracles


def test_metric_oracles():
    start = time.time()
    a = torch.zeros(1, 3, 16, 16, dtype=torch.float64)
    assert abs(psnr(a, torch.full_like(a, 0.1)) - 20.0) <= 1e-9
    assert abs(psnr(a, torch.full_like(a, math.sqrt(0.001))) - 30.0) <= 1e-9
    img = torch.rand(1, 3, 16, 16)
    assert ssim(img, img) == pytest.approx(1.0, abs=1e-9)
    got = ssim(torch.zeros(1, 3, 16, 16), torch.ones(1, 3, 16, 16))
    assert got == pytest.approx(9.999e-5, abs=1e-7)
    elapsed = time.time() - start
    assert elapsed < 10
    ok("metric oracles", f"PSNR 20/30 dB exact to 1e-9, SSIM caps verified, {elapsed:.2f}s")


# --------------------------------------------------------------------------
# 8. Overfit smoke test (500 steps, total <= 20% of step-1, < 10 min)


def test_overfit_smoke(toy_samples):
    start = time.time()
    samples = toy_samples[:4]
    model = init_params(build_model(tiny_config(scale=4)), seed=0)
    cfg = TrainConfig(max_steps=500, batch_size=4, seed=0, checkpoint_interval=10_000)
    records = fit(model, samples, cfg)
    elapsed = time.time() - start
    first, last = records[0].total, records[-1].total
    assert last <= 0.2 * first, (first, last)
    assert elapsed < 600
    ok("overfit smoke", f"total {first:.4f} -> {last:.4f} "
       f"({100 * last / first:.1f}% of step 1) in {elapsed:.0f}s")


# --------------------------------------------------------------------------
# 9. Ablation harness (3 variants on a 32-image toy set)


def test_ablation_harness(toy_samples, tmp_path):
    from affectsr.report import format_ablation_table, write_ablation_report

    start = time.time()
    assert len(toy_samples) == 32
    train_samples, eval_samples = toy_samples[:28], toy_samples[28:]
    cfg = TrainConfig(max_steps=20, batch_size=4, seed=0, checkpoint_interval=10_000)
    rows = run_ablation(["rrdb", "rrdb_in", "full"], tiny_config(scale=4), cfg,
                        train_samples, eval_samples, ToyFerClassifier(0))
    assert len(rows) == 3
    assert [r["variant"] for r in rows] == ["rrdb", "rrdb_in", "full"]
    table = format_ablation_table(rows)
    assert "PSNR↑" in table and "SSIM↑" in table and "ECM↓" in table
    assert len(table.splitlines()) == 5  # header + separator + 3 rows
    write_ablation_report(tmp_path / "ablation.tsv", rows)
    assert (tmp_path / "ablation.tsv").exists()
    elapsed = time.time() - start
    print(table)
    assert elapsed < 1800
    ok("ablation harness", f"3-row table emitted in {elapsed:.0f}s; values logged above")


# --------------------------------------------------------------------------
# 10. Determinism (two seeded train+eval runs, byte-identical reports)

DET_CFG = """
[data]
root = "{root}"
scale = 4
eval_count = 2

[model]
variant = "full"
base_channels = 8
num_blocks = 1
growth_channels = 4
gcn_dims = [3, 16, 16, 16, 16]
msaf_block_channels = 4
msaf_reduction = 2

[train]
max_steps = 8
batch_size = 2
seed = 11

[metrics]
names = ["psnr", "ssim", "ecm"]
fer_plugin = "toy:0"

[output]
dir = "{out}"
"""


def test_determinism_byte_identical_reports(toy_root, tmp_path):
    start = time.time()
    runner = CliRunner()
    reports = []
    for run in ("one", "two"):
        out = tmp_path / run
        cfg = tmp_path / f"{run}.toml"
        cfg.write_text(DET_CFG.format(root=toy_root, out=out))
        result = runner.invoke(cli_main, ["train", "--config", str(cfg)])
        assert result.exit_code == 0, result.output
        result = runner.invoke(cli_main, [
            "eval", "--ckpt", str(out / "model.ckpt"), "--data", str(toy_root),
            "--metrics", "psnr,ssim,ecm", "--plugin", "toy:0",
            "--eval-count", "4", "--seed", "11", "--out", str(out / "eval"),
        ])
        assert result.exit_code == 0, result.output
        reports.append((
            (out / "eval" / "report.tsv").read_bytes(),
            (out / "loss_log.tsv").read_bytes(),
        ))
    elapsed = time.time() - start
    assert reports[0][0] == reports[1][0], "metric reports differ between runs"
    assert reports[0][1] == reports[1][1], "loss logs differ between runs"
    assert elapsed < 900
    ok("determinism", f"train+eval reports byte-identical across runs, {elapsed:.0f}s")
