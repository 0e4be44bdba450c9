import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from volterra_levy.errors import ToleranceError
from volterra_levy.kernel import KernelSpec
from volterra_levy.levy import LevyMeasureSpec, assemble_path, simulate
from volterra_levy.volterra import (decomposition_check, eval_by_parts, eval_jump_sum,
                                    f_delta_integral)

P5 = KernelSpec.power(0.5)
PL = KernelSpec.powerlog(0.5, 1.0)


@pytest.fixture(scope="module")
def path12():
    return simulate(LevyMeasureSpec.symmetric_stable(1.2, j_max=10), 12, seed=7)


def test_single_jump_closed_form():
    p = assemble_path(10, [0.5], [1.0], [1], 0.0)
    t = np.array([0.25, 0.5, 0.75, 1.0])
    m = eval_jump_sum(P5, p, t).values
    assert np.allclose(m, [0.0, 0.0, 0.5, math.sqrt(0.5)], atol=1e-15)
    bp = eval_by_parts(P5, p, [1.0]).values[0]
    assert bp == pytest.approx(math.sqrt(0.5), abs=1e-12)


@pytest.mark.parametrize("d", [0.25, 0.5, 0.75])
def test_drift_only_closed_form(d):
    k = KernelSpec.power(d)
    p = assemble_path(10, [], [], [], 1.0)
    t = np.array([0.3, 0.7, 1.0])
    exact = t ** (d + 1) / (d + 1)
    assert np.allclose(eval_jump_sum(k, p, t).values, exact, rtol=1e-13)
    assert np.allclose(eval_by_parts(k, p, t).values, exact, rtol=1e-10)


def test_methods_agree_and_sign(path12):
    t = np.array([0.25, 0.5, 0.75, 1.0])
    for k in (P5, PL):
        js = eval_jump_sum(k, path12, t).values
        bp = eval_by_parts(k, path12, t, quad_tol=1e-9)
        assert bp.method == "ByParts"
        assert np.max(np.abs(js - bp.values)) <= 10 * 1e-9
        assert np.all(np.sign(js[np.abs(js) > 1e-6]) == np.sign(bp.values[np.abs(js) > 1e-6]))


def test_multipole_matches_direct():
    p = simulate(LevyMeasureSpec.symmetric_stable(1.5, j_max=9), 12, seed=4)
    direct = eval_jump_sum(P5, p, method="direct").values
    fast = eval_jump_sum(P5, p, method="multipole").values
    assert np.max(np.abs(direct - fast)) < 1e-11
    with pytest.raises(ValueError):
        eval_jump_sum(P5, p, [0.5], method="multipole")


def test_linearity_in_ledger():
    a = simulate(LevyMeasureSpec.symmetric_stable(1.5, j_max=7), 10, seed=1)
    b = simulate(LevyMeasureSpec.symmetric_stable(1.5, j_max=7), 10, seed=2)
    both = a.with_ledger(np.concatenate([a.jump_times, b.jump_times]),
                         np.concatenate([a.jump_sizes, b.jump_sizes]),
                         np.concatenate([a.jump_shells, b.jump_shells]))
    t = np.linspace(0, 1, 33)
    lhs = eval_jump_sum(P5, both, t).values
    rhs = eval_jump_sum(P5, a, t).values + eval_jump_sum(P5, b, t).values
    assert np.allclose(lhs, rhs, rtol=0, atol=1e-13)


def test_jump_at_evaluation_time_contributes_nothing():
    p = assemble_path(8, [0.5], [1.0], [1], 0.0)
    assert eval_jump_sum(P5, p, [0.5]).values[0] == 0.0


def test_by_parts_tolerance_error(path12):
    with pytest.raises(ToleranceError) as err:
        eval_by_parts(PL, path12, [0.9], quad_tol=1e-30)
    assert err.value.achieved is not None


@pytest.mark.parametrize("d", [0.25, 0.5, 0.75])
@pytest.mark.parametrize("delta", [1e-8, 1e-5, 1e-3, 1e-1])
def test_f_delta_power_exact(d, delta):
    assert abs(f_delta_integral(KernelSpec.power(d), 0.5, delta) - 1 / d) < 1e-10


def test_f_delta_powerlog_against_quad_oracle():
    # independent oracle: adaptive quadrature of |f_delta| in the variable y = v^d
    d = 0.5
    for delta in (1e-3, 1e-4, 1e-5):
        t = 0.5
        den = PL.g(np.array([delta]), 1)[0]

        def integrand(y):
            v = y ** (1 / d)
            return abs(PL.g(np.array([delta * v]), 1)[0] / den) * v ** (1 - d) / d

        ref = quad(integrand, 0, 1, limit=400, epsabs=1e-13)[0]
        assert f_delta_integral(PL, t, delta) == pytest.approx(ref, rel=1e-8)
    vals = [f_delta_integral(PL, 0.5, dl) for dl in (1e-2, 1e-3, 1e-4, 1e-5)]
    assert np.all(np.diff(vals) < 0)


def test_decomposition_zero_polynomial(path12):
    terms = decomposition_check(P5, path12, 0.6, 0.6, 0.01, degree=0, poly=(0.0,))
    assert terms.I12 == 0.0 and terms.I22 == 0.0
    assert abs(terms.I11 - terms.I21 - terms.increment) < 1e-9


def test_decomposition_constant_path():
    # X = 1 from r = 0: a single unit jump at time 0
    p = assemble_path(10, [0.0], [1.0], [1], 0.0)
    terms = decomposition_check(P5, p, 0.5, 0.4, 0.05, degree=0, poly=(1.0,))
    assert terms.I11 == 0.0 and terms.I21 == 0.0


def test_decomposition_seed3_example():
    p = simulate(LevyMeasureSpec.symmetric_stable(1.5, j_max=10), 12, seed=3)
    terms = decomposition_check(P5, p, 0.6, 0.6, 0.01, degree=0)
    assert terms.residual <= 1e-8


@settings(max_examples=12, deadline=None)
@given(t=st.floats(0.05, 0.95), v=st.floats(0.05, 0.9), delta=st.floats(1e-4, 0.09),
       degree=st.sampled_from([0, 1]))
def test_decomposition_property(t, v, delta, degree):
    p = _hyp_path()
    terms = decomposition_check(P5, p, t, v, delta, degree=degree)
    assert terms.residual <= 1e-8


_CACHE = {}


def _hyp_path():
    if "p" not in _CACHE:
        _CACHE["p"] = simulate(LevyMeasureSpec.symmetric_stable(1.5, j_max=8), 10, seed=11)
    return _CACHE["p"]


def test_jump_normalization_single_jump():
    s, size = 0.3, -0.7
    p = assemble_path(10, [s], [size], [1], 0.0)
    for h in (2.0 ** -20, 1e-5, 0.01, 0.5):
        m = eval_jump_sum(P5, p, [s, s + h]).values
        assert (m[1] - m[0]) / P5(s + h, s) == pytest.approx(size, rel=1e-13)
