"""Acceptance criteria, one test per criterion.

Each test prints a single ``ACCEPTANCE <n> ... PASS|FAIL`` line with the
measured numbers before asserting, so the summary survives a failure.
Run with ``pytest tests/test_acceptance.py -v``.
"""
import math
import os
import time

import numpy as np
import pytest

from volterra_levy.cli import main as cli_main
from volterra_levy.kernel import KernelSpec, verify_smooth_variation
from volterra_levy.levy import LevyMeasureSpec, assemble_path, jump_oracle_grid, simulate
from volterra_levy.regularity import estimate_frontier, estimate_local_holder, gauge_profile
from volterra_levy.spectrum import ClassifyConfig, classify_points, default_bins, estimate_spectrum
from volterra_levy.volterra import (decomposition_check, eval_by_parts, eval_jump_sum,
                                    f_delta_integral)

D = 0.5
P5 = KernelSpec.power(D)
PL = KernelSpec.powerlog(0.5, 1.0)
STABLE15 = LevyMeasureSpec.symmetric_stable(1.5, j_max=12)


@pytest.fixture
def report(capsys):
    def emit(n, name, ok, detail):
        with capsys.disabled():
            print(f"\nACCEPTANCE {n:>2} {name}: {'PASS' if ok else 'FAIL'} ({detail})")
        return ok
    return emit


def _interior(idx, G, margin_log2=5):
    m = 2 ** (G - margin_log2)
    return idx[(idx > m) & (idx < 2 ** G - m)]


# 1 ---------------------------------------------------------------------------

def test_c01_kernel_exactness(report):
    t0 = time.perf_counter()
    worst = max(max(r.sup_deviation) for d in (0.25, 0.5, 0.75)
                for r in verify_smooth_variation(KernelSpec.power(d)))
    elapsed = time.perf_counter() - t0
    pl = {r.condition: r for r in verify_smooth_variation(PL)}
    mono = all(np.all(np.diff(r.sup_deviation) < 0) or max(r.sup_deviation) < 1e-12
               for r in pl.values())
    final = max(r.sup_deviation[-1] for r in pl.values())
    ok = worst < 1e-12 and elapsed < 1.0 and mono and final < 0.05
    report(1, "kernel exactness", ok,
           f"power max dev {worst:.2e} in {elapsed:.2f}s; powerlog monotone={mono}, "
           f"final devs " + ", ".join(f"{k}={v.sup_deviation[-1]:.4f}" for k, v in pl.items()))
    assert ok


# 2 ---------------------------------------------------------------------------

def test_c02_integration_by_parts(report):
    m = LevyMeasureSpec.symmetric_stable(1.2, j_max=14)
    t = np.linspace(1.0 / 32, 1.0, 32)
    worst, slowest = 0.0, 0.0
    for seed in range(8):
        p = simulate(m, 16, seed)
        t0 = time.perf_counter()
        js = eval_jump_sum(P5, p, t).values
        bp = eval_by_parts(P5, p, t).values
        slowest = max(slowest, time.perf_counter() - t0)
        worst = max(worst, float(np.max(np.abs(js - bp))))
    ok = worst <= 1e-8 and slowest < 30
    report(2, "integration by parts", ok,
           f"max |JumpSum-ByParts| {worst:.2e} over 8 seeds x 32 t; slowest seed {slowest:.1f}s")
    assert ok


# 3 ---------------------------------------------------------------------------

def test_c03_f_delta_limit(report):
    deltas = np.geomspace(1e-8, 1e-1, 15)
    worst = max(abs(f_delta_integral(KernelSpec.power(d), 0.5, dl) - 1 / d)
                for d in (0.25, 0.5, 0.75) for dl in deltas)
    pl = [f_delta_integral(PL, 0.5, dl) for dl in (1e-2, 1e-3, 1e-4, 1e-5)]
    at4 = abs(pl[2] - 2.0)
    decreasing = bool(np.all(np.diff(pl) < 0))
    ok = worst < 1e-10 and at4 < 0.05 and decreasing
    report(3, "f_delta limit", ok,
           f"power max |int - 1/d| {worst:.2e}; powerlog |int - 2| at 1e-4 = {at4:.4f}, "
           f"decreasing toward the limit as delta shrinks={decreasing}")
    assert ok


# 4 ---------------------------------------------------------------------------

def test_c04_decomposition_identity(report):
    rng = np.random.default_rng(2024)
    m = LevyMeasureSpec.symmetric_stable(1.5, j_max=10)
    paths = [simulate(m, 12, seed) for seed in range(4)]
    worst = 0.0
    for case in range(100):
        p = paths[case % 4]
        v = rng.uniform(0.02, 0.95)
        delta = min(10 ** rng.uniform(-4, -1), 1.0 - v)
        t = rng.uniform(0.02, 0.98)
        degree = int(rng.integers(0, 2))
        worst = max(worst, decomposition_check(P5, p, t, v, delta, degree).residual)
    ok = worst <= 1e-8
    report(4, "decomposition identity", ok, f"max residual {worst:.2e} over 100 cases")
    assert ok


# 5 ---------------------------------------------------------------------------

def test_c05_jump_normalization(report):
    s, size = 0.37, 0.21
    single = assemble_path(10, [s], [size], [3], 0.0)
    hs = [2.0 ** -k for k in range(1, 40)] + [0.5, 0.63]
    exact = max(abs((eval_jump_sum(P5, single, [s, s + h]).values @ [-1, 1]) / P5(s + h, s) - size)
                for h in hs if s + h <= 1)
    p = simulate(STABLE15, 16, 0)
    h = 2.0 ** -14
    rel = []
    for k in np.argsort(-np.abs(p.jump_sizes))[:5]:
        r = p.jump_times[k]
        if r + h > 1:
            continue
        inc = eval_jump_sum(P5, p, [r, r + h]).values @ [-1, 1]
        rel.append(abs(inc / P5(r + h, r) / p.jump_sizes[k] - 1))
    ok = exact <= 1e-14 and max(rel) <= 0.05
    report(5, "jump normalization", ok,
           f"single jump max error {exact:.1e}; 5 largest jumps max relative error {max(rel):.4f}")
    assert ok


# 6 ---------------------------------------------------------------------------

def test_c06_local_exponent(report):
    G = 18
    sr = (2.0 ** -14, 2.0 ** -9)
    ball = 2.0 ** -5
    rng = np.random.default_rng(6)
    at_jumps, uniform = [], []
    for seed in range(4):
        p = simulate(STABLE15, G, seed)
        m = eval_jump_sum(P5, p).values
        for k in np.argsort(-np.abs(p.jump_sizes))[:5]:
            at_jumps.append(estimate_local_holder(m, p.jump_times[k], sr, ball=ball).value)
        ts = rng.uniform(ball, 1 - ball, 25)
        uniform += [estimate_local_holder(m, t, sr, ball=ball).value for t in ts]
    at_jumps, uniform = np.array(at_jumps), np.array(uniform)
    frac_j = float(np.mean(np.abs(at_jumps - D) <= 0.05))
    frac_u = float(np.mean(uniform >= D - 0.05))
    ok = frac_j == 1.0 and frac_u >= 0.95
    report(6, "local exponent", ok,
           f"jump times within d+-0.05: {frac_j:.0%} of {at_jumps.size} (median "
           f"{np.median(at_jumps):.3f}); uniform >= d-0.05: {frac_u:.0%} of {uniform.size}")
    assert ok


# 7 ---------------------------------------------------------------------------

def test_c07_gauge_lower_bound(report):
    G = 16
    sr = (2.0 ** -12, 2.0 ** -5)
    rates = {}
    counts = {}
    pooled = {l: [] for l in (0.2, 0.4, 0.6)}
    for seed in range(4):
        p = simulate(STABLE15, G, seed)
        m = eval_jump_sum(P5, p).values
        oracle = jump_oracle_grid(p, 12, h_floor=sr[0], h_ceil=sr[1])
        gl, _ = gauge_profile(m, P5, sr, beta=1.5)
        excluded = np.zeros(p.n_grid, bool)
        k = np.rint(p.jump_times / p.step).astype(np.int64)
        excluded[k[k * p.step == p.jump_times]] = True
        for l in pooled:
            idx = _interior(np.nonzero((np.abs(oracle - l) <= 0.05) & ~excluded)[0], G)
            pooled[l].append(D + gl[idx] >= D + l - 0.1)
    for l, v in pooled.items():
        v = np.concatenate(v)
        rates[l], counts[l] = float(v.mean()), v.size
    ok = all(r >= 0.8 for r in rates.values())
    report(7, "gauge lower bound", ok,
           ", ".join(f"l={l}: {rates[l]:.0%} of {counts[l]}" for l in rates))
    assert ok


# 8 ---------------------------------------------------------------------------

def test_c08_frontier(report):
    G = 18
    sr = (2.0 ** -12, 2.0 ** -5)
    sep = (2.0 ** (-G + 1), sr[0])
    rng = np.random.default_rng(8)
    sig = {l: [] for l in (0.2, 0.4, 0.6)}
    for seed in range(3):
        p = simulate(STABLE15, G, seed)
        m = eval_jump_sum(P5, p).values
        oracle = jump_oracle_grid(p, 12, h_floor=sr[0], h_ceil=sr[1])
        for l in sig:
            idx = _interior(np.nonzero(np.abs(oracle - l) <= 0.05)[0], G)
            for i in rng.choice(idx, min(20, idx.size), replace=False):
                front = estimate_frontier(m, i * p.step, [-l], sr, order=2, sep_range=sep,
                                          rho_min=sr[0])
                sig[l].append(front[0][1])
    rates = {l: float(np.mean(np.abs(np.array(v) - D) <= 0.1)) for l, v in sig.items()}
    meds = {l: float(np.median(v)) for l, v in sig.items()}
    ok = all(r >= 0.8 for r in rates.values())
    report(8, "2-microlocal frontier", ok,
           ", ".join(f"l={l}: {rates[l]:.0%} within d+-0.1 (median {meds[l]:.3f}, n={len(sig[l])})"
                     for l in sig))
    assert ok


# 9 ---------------------------------------------------------------------------

def test_c09_spectrum(report):
    t0 = time.perf_counter()
    cfg = ClassifyConfig(scale_range=(2.0 ** -12, 2.0 ** -5), pointwise=False)
    records = []
    for seed in range(16):
        p = simulate(STABLE15, 16, seed)
        records.append(classify_points(p, eval_jump_sum(P5, p).values, P5, cfg))
    est = estimate_spectrum(records, default_bins())
    elapsed = time.perf_counter() - t0
    th = 1.5 * est.h_center
    ex, em = np.abs(est.dim_hat_X - th), np.abs(est.dim_hat_M - th)
    mono = bool(np.all(np.diff(est.dim_hat_X) >= -0.15) and np.all(np.diff(est.dim_hat_M) >= -0.15))
    ok = bool(np.all(ex <= 0.2) and np.all(em <= 0.2) and mono and elapsed < 600)
    rows = "; ".join(f"h={h:.1f}: X {x:.3f} M {mm:.3f} theory {t:.2f}"
                     for h, x, mm, t in zip(est.h_center, est.dim_hat_X, est.dim_hat_M, th))
    report(9, "spectrum", ok, f"{rows}; monotone={mono}; {elapsed:.0f}s")
    assert ok


# 10 --------------------------------------------------------------------------

CONFIG = """\
kernel.family = power
kernel.d = 0.5
measure.alpha = 1.5
measure.j_max = 10
sim.grid_log2 = 12
volterra.method = both
volterra.n_check = 5
analysis.scale_range = 2^-10, 2^-5
analysis.n_points = 4
analysis.seeds = 1, 2
analysis.deltas = 1.5, 2
"""


def test_c10_determinism(report, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(CONFIG, encoding="utf-8")
    outs = []
    for name in ("a", "b"):
        out = str(tmp_path / name)
        for cmd in ("verify-kernel", "simulate", "transform", "exponents", "spectrum"):
            assert cli_main([cmd, "--config", str(cfg), "--out", out]) == 0
        outs.append(out)
    names = sorted(os.listdir(outs[0]))
    same = names == sorted(os.listdir(outs[1])) and all(
        open(os.path.join(outs[0], n), "rb").read() == open(os.path.join(outs[1], n), "rb").read()
        for n in names)
    report(10, "determinism", same, f"{len(names)} CSV files compared byte for byte")
    assert same
