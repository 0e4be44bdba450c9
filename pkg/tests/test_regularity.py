import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from volterra_levy.errors import ConsistencyError, InsufficientScalesError, ScaleError
from volterra_levy.kernel import KernelSpec
from volterra_levy.levy import LevyMeasureSpec, simulate
from volterra_levy.regularity import (dyadic_scales, estimate_exponents, estimate_frontier,
                                      estimate_gauge_exponent, estimate_local_holder,
                                      estimate_pointwise_holder, frontier_holder, gauge_profile,
                                      loglog_fit, modulus_table)
from volterra_levy.volterra import eval_jump_sum

G = 14
T = np.arange(2 ** G + 1) / 2 ** G
SR = (2.0 ** -11, 2.0 ** -5)
P5 = KernelSpec.power(0.5)


def cusp(h, t0=0.5):
    return np.abs(T - t0) ** h


@pytest.fixture(scope="module")
def levy_m():
    p = simulate(LevyMeasureSpec.symmetric_stable(1.5, j_max=12), G, seed=3)
    return p, eval_jump_sum(P5, p).values


# -- scales -----------------------------------------------------------------

def test_dyadic_scales_and_errors():
    hs = dyadic_scales(SR, 2.0 ** -G)
    assert hs[0] == SR[1] and hs[-1] == SR[0] and len(hs) == 7
    with pytest.raises(ScaleError):
        dyadic_scales((2.0 ** -G, 2.0 ** -5), 2.0 ** -G)
    with pytest.raises(InsufficientScalesError):
        dyadic_scales((2.0 ** -8, 2.0 ** -6), 2.0 ** -G)


def test_loglog_fit_recovers_power():
    h = 2.0 ** -np.arange(3, 10)
    fit = loglog_fit(h, 3 * h ** 0.37)
    assert fit.slope == pytest.approx(0.37, abs=1e-12) and fit.r2 == pytest.approx(1.0)


# -- pointwise ----------------------------------------------------------------

@pytest.mark.parametrize("h", [0.3, 0.7])
def test_pointwise_cusp(h):
    assert estimate_pointwise_holder(cusp(h), 0.5, SR).value == pytest.approx(h, abs=0.01)


def test_pointwise_constant_is_degenerate():
    fit = estimate_pointwise_holder(np.full(T.size, 2.0), 0.5, SR)
    assert fit.value == 1.0 and fit.r2 == 0.0 and fit.degenerate


def test_pointwise_at_levy_jumps():
    # the jump keeps the oscillation near |jump| at every radius, so the
    # statistic is nearly flat; fine radii keep the small-jump noise below it
    sr = (2.0 ** -13, 2.0 ** -8)
    est = []
    for seed in (3, 4, 5, 6, 7):
        p = simulate(LevyMeasureSpec.symmetric_stable(1.5, j_max=12), G, seed=seed)
        for k in np.argsort(-np.abs(p.jump_sizes))[:5]:
            fit = estimate_pointwise_holder(p.values, p.jump_times[k], sr)
            assert np.all(fit.stat >= 0.5 * abs(p.jump_sizes[k]))
            est.append(fit.value)
    assert np.median(est) == pytest.approx(0.0, abs=0.05)


@pytest.mark.parametrize("h", [0.3, 0.7])
def test_pointwise_scale_equivariance(h):
    t0 = 0.5
    g = np.abs(T - t0) ** h
    g2 = np.abs(2 * T - t0) ** h              # g(2 u), whose cusp sits at t0 / 2
    a = estimate_pointwise_holder(g, t0, SR).value
    b = estimate_pointwise_holder(g2, t0 / 2, SR).value
    assert a == pytest.approx(b, abs=1e-9)


@settings(max_examples=25, deadline=None)
@given(a=st.floats(-5, 5), b=st.floats(-5, 5), h=st.sampled_from([0.3, 0.6, 0.9]))
def test_affine_invariance_degree1(a, b, h):
    g = cusp(h)
    ga = g + a + b * T
    for fn in (lambda v: estimate_pointwise_holder(v, 0.5, SR, degree=1),
               lambda v: estimate_gauge_exponent(v, P5, 0.5, SR, degree=1)):
        assert fn(ga).value == pytest.approx(fn(g).value, abs=1e-7)


# -- gauge ----------------------------------------------------------------------

def test_gauge_single_jump_profile():
    s = 0.5
    m = np.where(T > s, np.abs(T - s) ** 0.5, 0.0)
    assert estimate_gauge_exponent(m, P5, s, SR).value == pytest.approx(0.5, abs=0.05)


@pytest.mark.parametrize("l", [0.2, 0.5])
def test_gauge_synthetic(l):
    m = cusp(0.5 + l)
    fit = estimate_gauge_exponent(m, P5, 0.5, SR, lags="all")
    assert fit.value == pytest.approx(0.5 + l, abs=0.05)
    # brute force oracle at the largest scale: sup over all grid pairs in the ball
    r = int(SR[1] * 2 ** G)
    i = 2 ** (G - 1)
    seg = m[i - r:i + r + 1]
    u = np.arange(seg.size)
    du = (u[:, None] - u[None, :]) / 2 ** G
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(du > 0, np.abs(seg[:, None] - seg[None, :]) / np.abs(du) ** 0.5, 0)
    if fit.slope == pytest.approx(l, abs=1e-9):
        assert fit.stat[0] == pytest.approx(q.max(), rel=1e-9)


def test_gauge_profile_matches_pointwise(levy_m):
    _, m = levy_m
    lp, _ = gauge_profile(m, P5, SR, degree=0, beta=1.5)
    for i in (3000, 8192, 12000):
        ref = estimate_gauge_exponent(m, P5, T[i], SR, degree=0, beta=1.5).value - 0.5
        assert lp[i] == pytest.approx(ref, abs=1e-6)


def test_gauge_refuses_unverified_kernel():
    k = KernelSpec.powerlog(0.5, 1.0)
    with pytest.raises(ConsistencyError):
        estimate_gauge_exponent(cusp(0.7), k, 0.5, SR)
    estimate_gauge_exponent(cusp(0.7), k, 0.5, SR, require_verified=False)


# -- local ----------------------------------------------------------------------

def test_local_single_jump_and_affine():
    s = 0.5
    m = np.where(T > s, np.abs(T - s) ** 0.5, 0.0)
    assert estimate_local_holder(m, s, SR).value == pytest.approx(0.5, abs=0.05)
    assert estimate_local_holder(0.3 + 2 * T, 0.4, SR).value == 1.0


# -- frontier ------------------------------------------------------------------

@pytest.mark.parametrize("h", [0.3, 0.7])
def test_frontier_cusp(h):
    g = np.abs(np.arange(2 ** 16 + 1) / 2 ** 16 - 0.5) ** h
    sr = (2.0 ** -12, 2.0 ** -5)
    front = estimate_frontier(g, 0.5, [-1.0, -0.6, -0.2, 0.0], sr)
    s0 = dict(front)[0.0]
    assert s0 == pytest.approx(min(h, 1 - 1 / 64), abs=1 / 32)
    hp = estimate_pointwise_holder(g, 0.5, sr).value
    assert frontier_holder(estimate_frontier(g, 0.5, np.linspace(-1, 0, 11), sr)) == \
        pytest.approx(hp, abs=0.1)


def test_frontier_range_check():
    with pytest.raises(ValueError):
        estimate_frontier(cusp(0.5), 0.5, [0.5], SR)


def test_membership_monotone_in_s_prime(levy_m):
    _, m = levy_m
    rng = np.random.default_rng(5)
    for t in rng.random(6) * 0.8 + 0.1:
        tab = modulus_table(m, t, SR)
        for sigma in np.linspace(-0.5, 0.95, 12):
            res = [tab.bounded(sigma, s) for s in np.linspace(-1, 0, 9)]
            assert all(b for a, b in zip(res, res[1:]) if a)


def test_gauge_sandwich_on_tables(levy_m):
    # for a Power kernel gauge membership is the (d, s') test itself, so
    # (d + eps, s') implies (d, s') implies (d - eps, s')
    _, m = levy_m
    rng = np.random.default_rng(6)
    d = 0.5
    for t in rng.random(6) * 0.8 + 0.1:
        tab = modulus_table(m, t, SR)
        for sp in (-0.6, -0.3, 0.0):
            for eps in (0.05, 0.2):
                if tab.bounded(d + eps, sp):
                    assert tab.bounded(d, sp)
                if tab.bounded(d, sp):
                    assert tab.bounded(d - eps, sp)


def test_estimate_exponents_bundle(levy_m):
    p, m = levy_m
    e = estimate_exponents(p.values, m, P5, 0.5, SR, s_prime_grid=(-0.4, 0.0), step=p.step)
    assert e.h_hat >= 0 and 0 <= e.fit_r2 <= 1
    assert [s for s, _ in e.frontier] == [-0.4, 0.0]
    assert e.scales_used == (SR[0], SR[1])
