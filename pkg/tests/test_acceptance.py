"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The toy-benchmark criteria train the retrieval embedder, TMED and the text-only
baseline once per session on the bundled ``toy`` profile (tens of minutes on
one CPU core).
"""

import time

import numpy as np
import pytest
import scipy.linalg
import torch

from motionedit.baselines import PARTS, part_mask, sample_baseline
from motionedit.codec import FEATURE_DIM, compute_stats, decode, encode, heading
from motionedit.config import load_config
from motionedit.dataset import by_split
from motionedit.denoiser import DenoiserConfig, TMEDDenoiser, count_parameters
from motionedit.diffusion import (
    ConditionSet, GuidanceScales, TripletBatch, cosine_schedule, guided_x0, q_sample, sample_condition_dropout,
    training_loss,
)
from motionedit.harness import datasize_ablation, run_toy_benchmark
from motionedit.mining import POOLED, align_pair, mine_pairs
from motionedit.retrieval import evaluate_editing, fid, rank_gallery
from motionedit.rotations import factor_z_rotation, random_rotations, rot_z, rotmat_to_6d, sixd_to_rotmat
from motionedit.synthetic import generate_synthetic_triplets

from conftest import random_motion
from oracles import StubDenoiser, brute_force_ranks, mining_oracle, synthetic_window_corpus

RESULTS = []


def verdict(number, title, ok, detail):
    line = f"[acceptance {number:>2}] {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


# ------------------------------------------------------------------ shared toy run


@pytest.fixture(scope="session")
def toy_run():
    torch.set_num_threads(1)
    cfg = load_config("toy")
    return cfg, run_toy_benchmark(cfg, ("tmed", "mdm", "mdm_bp"))


# ------------------------------------------------------------------ 1: codec


def test_criterion_01_codec_round_trip(skeleton):
    rng = np.random.default_rng(1)
    start = time.time()
    joint_err = feat_err = 0.0
    for _ in range(1000):
        m = random_motion(rng, int(rng.integers(2, 101)))
        f = encode(m, skeleton)
        back = decode(f, skeleton, m.fps)
        joint_err = max(joint_err, float(np.abs(back.joints(skeleton) - m.joints(skeleton)).max()))
        feat_err = max(feat_err, float(np.abs(encode(back, skeleton).data - f.data).max()))
    elapsed = time.time() - start
    ok = joint_err < 1e-4 and feat_err < 1e-5 and elapsed < 60
    verdict(1, "codec round-trip", ok,
            f"max joint error {joint_err:.2e} m, max feature error {feat_err:.2e}, {elapsed:.1f} s")


# ------------------------------------------------------------------ 2: rotations


def test_criterion_02_rotation_suite():
    rng = np.random.default_rng(2)
    R = random_rotations(10_000, rng)
    sixd_err = float(np.abs(sixd_to_rotmat(rotmat_to_6d(R)) - R).max())
    theta, r_xy = factor_z_rotation(R)
    recompose_err = float(np.abs(rot_z(theta) @ r_xy - R).max())
    ok = sixd_err < 1e-9 and recompose_err < 1e-9
    verdict(2, "rotation suite", ok, f"6D round-trip {sixd_err:.1e}, z-factor recomposition {recompose_err:.1e}")


# ------------------------------------------------------------------ 3: guidance algebra


def test_criterion_03_guidance_algebra():
    gen = torch.Generator().manual_seed(3)
    x = torch.randn(2, 3, FEATURE_DIM, generator=gen, dtype=torch.float64)
    mask = torch.ones(2, 3, dtype=torch.bool)
    src = torch.randn(2, 3, FEATURE_DIM, generator=gen)
    cond = ConditionSet(["raise the arm"] * 2, src, torch.ones(2, 3, dtype=torch.bool))
    stub = StubDenoiser()
    full = stub(x, mask, 1, cond)
    uncond = stub(x, mask, 1, cond.drop(text=True, source=True))
    at_one = torch.equal(guided_x0(stub, x, mask, 1, cond, GuidanceScales(1, 1)), full)
    at_zero = torch.equal(guided_x0(stub, x, mask, 1, cond, GuidanceScales(0, 0)), uncond)
    one = ConditionSet(["x"], torch.zeros(1, 1, FEATURE_DIM), torch.ones(1, 1, dtype=torch.bool))
    scalar = guided_x0(StubDenoiser(), torch.zeros(1, 1, 1, dtype=torch.float64), torch.ones(1, 1, dtype=torch.bool),
                       1, one, GuidanceScales(2, 2)).item()
    ok = at_one and at_zero and scalar == 6.0
    verdict(3, "guidance algebra", ok, f"(1,1) bitwise {at_one}, (0,0) bitwise {at_zero}, scalar case {scalar:g}")


# ------------------------------------------------------------------ 4: schedule and diffusion


def _gradient_check():
    torch.manual_seed(0)
    cfg = DenoiserConfig(d_model=8, layers=1, heads=2, ff_dim=16, max_frames=8, dropout=0.0, vocab_size=32)
    model = TMEDDenoiser(cfg).double()
    sched = cosine_schedule(20)
    gen = torch.Generator().manual_seed(1)
    src = torch.randn(3, 4, FEATURE_DIM, generator=gen, dtype=torch.float64)
    cond = ConditionSet(["raise arm", "faster", "mirror the motion"], src, torch.ones(3, 4, dtype=torch.bool))
    target = torch.randn(3, 5, FEATURE_DIM, generator=gen, dtype=torch.float64)
    mask = torch.ones(3, 5, dtype=torch.bool)
    mask[2, 3:] = False
    batch = TripletBatch(target, mask, cond)
    eps = torch.randn(3, 5, FEATURE_DIM, generator=gen, dtype=torch.float64)
    t = torch.tensor([3, 10, 17])

    def loss():
        return training_loss(model, batch, t, eps, np.random.default_rng(4), sched)

    model.zero_grad()
    loss().backward()
    params = list(model.parameters())
    rng = np.random.default_rng(0)
    worst, h = 0.0, 1e-6
    for _ in range(100):
        p = params[rng.integers(len(params))]
        idx = tuple(int(rng.integers(s)) for s in p.shape)
        analytic = p.grad[idx].item()
        with torch.no_grad():
            orig = p[idx].item()
            p[idx] = orig + h
            up = loss().item()
            p[idx] = orig - h
            down = loss().item()
            p[idx] = orig
        numeric = (up - down) / (2 * h)
        worst = max(worst, abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-8))
    return count_parameters(model), worst


def test_criterion_04_schedule_and_diffusion():
    s = cosine_schedule(300)
    schedule_ok = s.alpha_bar[0] == 1.0 and bool(np.all(np.diff(s.alpha_bar) < 0)) and s.alpha_bar[300] < 0.01
    gen = torch.Generator().manual_seed(4)
    worst_var = 0.0
    for t in (1, 30, 150, 280, 300):
        eps = torch.randn(100_000, generator=gen, dtype=torch.float64)
        var = q_sample(torch.zeros_like(eps), t, eps, s).var().item()
        worst_var = max(worst_var, abs(var / (1 - s.alpha_bar[t]) - 1))
    n_params, grad_err = _gradient_check()
    ok = schedule_ok and worst_var < 0.02 and n_params <= 10_000 and grad_err < 1e-3
    verdict(4, "schedule and diffusion", ok,
            f"alpha_bar[300]={s.alpha_bar[300]:.2e}, variance rel. error {worst_var:.4f}, "
            f"gradient rel. error {grad_err:.1e} on {n_params} parameters")


# ------------------------------------------------------------------ 5: condition dropout


def test_criterion_05_condition_dropout():
    drop_text, drop_source = sample_condition_dropout(np.random.default_rng(5), 100_000)
    freqs = np.array([np.mean(~drop_text & drop_source), np.mean(drop_text & ~drop_source),
                      np.mean(drop_text & drop_source), np.mean(~drop_text & ~drop_source)])
    ok = bool(np.all(np.abs(freqs - [0.05, 0.05, 0.05, 0.85]) <= 0.005))
    verdict(5, "condition dropout", ok, "source/text/both/none = " + "/".join(f"{100 * f:.2f}%" for f in freqs))


# ------------------------------------------------------------------ 6: toy benchmark


@pytest.mark.slow
def test_criterion_06_toy_benchmark(toy_run):
    cfg, res = toy_run
    r1 = {k: r.target["R@1"] for k, r in res.reports.items()}
    train_minutes = res.timings["train_tmed"] / 60
    n_triplets = len(res.corpus)
    ok = (n_triplets >= 2000 and train_minutes <= 30 and r1["tmed"] >= 10 and r1["tmed"] >= r1["mdm"] + 5
          and r1["tmed"] > r1["mdm_bp"] > r1["mdm"])
    galleries = res.reports["tmed"].batches
    verdict(6, "toy benchmark", ok,
            f"R@1 TMED {r1['tmed']:.2f} / MDM-BP {r1['mdm_bp']:.2f} / MDM {r1['mdm']:.2f} on {galleries} "
            f"galleries of 32, {n_triplets} triplets, TMED trained {train_minutes:.1f} min")


# ------------------------------------------------------------------ 7: data-size trend


@pytest.mark.slow
def test_criterion_07_data_size_trend(toy_run):
    cfg, res = toy_run
    train, test = by_split(res.corpus, "train"), by_split(res.corpus, "test")
    reports = datasize_ablation(train, test, res.embedder, (0.1, 0.5, 1.0), cfg.seed, cfg.denoiser,
                                cfg.train_config(), cosine_schedule(cfg.steps), cfg.scales, cfg.eval.gallery_size,
                                trained={1.0: res.models["tmed"]})
    r1 = [reports[f].target["R@1"] for f in (0.1, 0.5, 1.0)]
    ok = r1[1] >= r1[0] - 2 and r1[2] >= r1[1] - 2
    verdict(7, "data-size trend", ok, "R@1 at 10/50/100% = " + " / ".join(f"{v:.2f}" for v in r1))


# ------------------------------------------------------------------ 8: retrieval metrics


def _closed_form_fid(a, b):
    mu_a, mu_b = a.mean(0), b.mean(0)
    ca, cb = np.cov(a, rowvar=False), np.cov(b, rowvar=False)
    cross = scipy.linalg.sqrtm(ca @ cb).real
    return float(np.sum((mu_a - mu_b) ** 2) + np.trace(ca + cb - 2 * cross))


@pytest.mark.slow
def test_criterion_08_retrieval_metrics(toy_run):
    rng = np.random.default_rng(8)
    mismatches = 0
    for _ in range(1000):
        n, d = int(rng.integers(1, 65)), int(rng.integers(1, 9))
        g = np.round(rng.normal(size=(n, d)), 1)
        g /= np.maximum(np.linalg.norm(g, axis=1, keepdims=True), 1e-12)
        q = g[rng.integers(n)]
        mismatches += list(rank_gallery(q, g)) != brute_force_ranks(g @ q)

    cfg, res = toy_run
    test = by_split(res.corpus, "test")
    gt = evaluate_editing(lambda trips: [t.target for t in trips], test, res.embedder, 32, cfg.eval.seed)

    a = rng.normal(size=(400, 6))
    fid_same = fid(a, a)
    worst_fid = 0.0
    for _ in range(5):
        x = rng.normal(size=(300, 6)) @ rng.normal(size=(6, 6))
        y = rng.normal(size=(300, 6)) @ rng.normal(size=(6, 6)) + rng.normal(size=6)
        worst_fid = max(worst_fid, abs(fid(x, y) - _closed_form_fid(x, y)))
    ok = (mismatches == 0 and gt.target["R@1"] == 100.0 and gt.target["AvgR"] == 1.0
          and abs(fid_same) < 1e-6 and worst_fid < 1e-6)
    verdict(8, "retrieval metrics", ok,
            f"{mismatches} rank mismatches / 1000, GT sampler R@1 {gt.target['R@1']:.1f} AvgR {gt.target['AvgR']:.2f}, "
            f"FID(A,A) {fid_same:.1e}, closed-form gap {worst_fid:.1e}")


# ------------------------------------------------------------------ 9: mining


def test_criterion_09_mining():
    rng = np.random.default_rng(9)
    wins = synthetic_window_corpus(rng, n=500)
    pairs = mine_pairs(wins, k=2)
    exact = [(p.source, p.target, p.status) for p in pairs] == mining_oracle(wins, 2, 0.99)
    pooled_max = max(p.similarity for p in pairs if p.status == POOLED)
    worst = 0.0
    for _ in range(50):
        m1, m2 = random_motion(rng, 30), random_motion(rng, 30)
        shifted = type(m2)(m2.root_trans @ rot_z(1.1).T + rng.normal(size=3), rot_z(1.1) @ m2.root_orient,
                           m2.body_pose, m2.fps)
        a, b = align_pair(m1, shifted)
        worst = max(worst, float(np.abs(a.root_trans[0] - b.root_trans[0]).max()),
                    abs(float(heading(a.root_orient[0]) - heading(b.root_orient[0]))))
    ok = exact and pooled_max < 0.99 and worst < 1e-9
    verdict(9, "mining", ok, f"oracle match {exact} on {len(wins)} windows, max pooled similarity {pooled_max:.4f}, "
            f"frame-0 residual {worst:.1e}")


# ------------------------------------------------------------------ 10: inpainting exactness


def test_criterion_10_inpainting_exactness():
    torch.manual_seed(10)
    model = TMEDDenoiser(DenoiserConfig(d_model=32, layers=1, heads=2, ff_dim=64, max_frames=128)).eval()
    triplets = generate_synthetic_triplets(6, seed=10)
    sources = [encode(t.source) for t in triplets]
    stats = compute_stats(sources)
    texts = [t.edit_text for t in triplets]
    sched = cosine_schedule(20)
    masks = [part_mask(["left arm", "right arm"]), part_mask(["left leg", "right leg", "buttocks"]),
             part_mask(["neck"]), part_mask(["torso", "waist"]), part_mask(["left leg"]), part_mask(["right arm"])]
    bp = sample_baseline("mdm_bp", model, sched, stats, sources, texts, GuidanceScales(), 7, masks)
    held_exact = all(np.array_equal(out.data[:, ~m], src.data[:, ~m]) for out, src, m in zip(bp, sources, masks))
    full = [part_mask(PARTS)] * len(sources)
    bp_full = sample_baseline("mdm_bp", model, sched, stats, sources, texts, GuidanceScales(), 7, full)
    mdm = sample_baseline("mdm", model, sched, stats, sources, texts, GuidanceScales(), 7)
    full_equal = all(np.array_equal(a.data, b.data) for a, b in zip(bp_full, mdm))
    verdict(10, "inpainting exactness", held_exact and full_equal,
            f"held dims bitwise {held_exact}, full-body mask equals MDM {full_equal}")
