"""Evaluation of M(t) = int_0^t F(t, r) dX(r) for truncated Lévy paths.

Two independent routes are provided:

``jump_sum``
    ``M(t) = sum_{r_i <= t} F(t, r_i) dX_i + drift * int_0^t F(t, r) dr``,
    exact apart from the drift primitive.
``by_parts``
    ``M(t) = -int_0^t f(t, r) X(r) dr`` with ``f = dF/dr``, computed by
    Gauss-Legendre panels in the variable ``w = (t - r)^d``. The map makes
    ``f dr`` bounded near ``r = t``; panel edges sit on the jump times, so
    X is affine on every panel.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.signal import fftconvolve

from .errors import ScaleError, ToleranceError
from .kernel import KernelSpec
from .levy import SamplePath

DEFAULT_QUAD_TOL = 1e-9
N_NODES = 16
_CHUNK = 1 << 16


@dataclass
class VolterraPath:
    t: np.ndarray
    values: np.ndarray
    method: str
    quad_tol: Optional[float] = None
    err_est: Optional[float] = None


# ---------------------------------------------------------------------------
# jump sum


def eval_jump_sum(kernel: KernelSpec, path: SamplePath, t_grid=None, method="auto",
                  n_near=4, order=12) -> VolterraPath:
    """Jump-sum evaluation of M on ``t_grid`` (default: the path grid).

    ``method="direct"`` sums over the sorted ledger for every t, costing
    ``O(n_jumps * n_t)``. ``method="multipole"`` applies only on the full
    path grid: jumps within ``n_near`` cells of a grid point are summed
    exactly and farther cells enter through a Taylor expansion of the kernel
    of ``order`` terms about the cell centre, convolved over the grid by FFT
    (relative truncation error about ``(2 n_near + 1)^{-order-1}``).
    ``"auto"`` picks the multipole route for large grids of analytic kernels.
    """
    full_grid = t_grid is None
    t = path.grid if full_grid else np.atleast_1d(np.asarray(t_grid, float))
    if method == "auto":
        big = path.n_jumps * t.size > 5e7
        method = "multipole" if (full_grid and big and kernel.max_order >= order) else "direct"
    if method == "multipole":
        if not full_grid:
            raise ValueError("multipole evaluation is only defined on the path grid")
        vals = _jump_sum_multipole(kernel, path, n_near, order)
    elif method == "direct":
        vals = _jump_sum_direct(kernel, path, t)
    else:
        raise ValueError(f"unknown jump-sum method {method!r}")
    vals = vals + path.drift_total * kernel.primitive(t) if path.drift_total else vals
    return VolterraPath(t, vals, "JumpSum")


def _jump_sum_direct(kernel, path, t):
    times, sizes = path.jump_times, path.jump_sizes
    out = np.empty(t.size)
    for i, ti in enumerate(t):
        k = np.searchsorted(times, ti, side="right")
        if k == 0:
            out[i] = 0.0
            continue
        out[i] = np.dot(kernel.g(ti - times[:k]), sizes[:k])
    return out


def _jump_sum_multipole(kernel, path, n_near, order):
    n = 2 ** path.grid_log2
    step = path.step
    times, sizes = path.jump_times, path.jump_sizes
    out = np.zeros(n + 1)
    if times.size == 0:
        return out
    cell = np.minimum(np.floor(times / step).astype(np.int64), n - 1)
    # near field, exact
    for q in range(1, n_near + 1):
        k = cell + q
        ok = k <= n
        out += np.bincount(k[ok], weights=kernel.g(k[ok] * step - times[ok]) * sizes[ok],
                           minlength=n + 1)
    # far field: g(u - e) = sum_p (-e)^p g^(p)(u) / p!, e scaled by the step
    e = (times - (cell + 0.5) * step) / step
    lag = np.arange(n + 1)
    far = lag >= n_near + 1
    u = (lag[far] - 0.5) * step
    moment = sizes.copy()
    for p in range(order + 1):
        m_p = np.bincount(cell, weights=moment, minlength=n)
        a_p = np.zeros(n + 1)
        a_p[far] = (-1.0) ** p * kernel.g(u, p) * step ** p / math.factorial(p)
        out += fftconvolve(a_p, m_p)[: n + 1]
        moment = moment * e
    return out


# ---------------------------------------------------------------------------
# quadrature engine for int f(t, r) phi(r) dr


def gauss_panels_graded(w0, w1, levels=40, q=0.5):
    """Panel edges on ``[w0, w1]`` refined geometrically toward ``w0``."""
    if w1 <= w0:
        return np.array([w0, w1])
    k = np.arange(levels, 0, -1)
    inner = w0 + (w1 - w0) * q ** k
    return np.concatenate(([w0], inner, [w1]))


_GL_CACHE = {}


def _gl(n):
    if n not in _GL_CACHE:
        _GL_CACHE[n] = np.polynomial.legendre.leggauss(n)
    return _GL_CACHE[n]


def integrate_f(kernel: KernelSpec, t: float, edges_r: np.ndarray, phi, n_nodes=N_NODES,
                err_nodes=10):
    """``int f(t, r) phi(r) dr`` over ``[edges_r[0], edges_r[-1]]`` with ``t >= edges_r[-1]``.

    ``edges_r`` are ascending panel edges in r; ``phi(r, panel)`` is evaluated
    at nodes of panel ``panel`` (0-based into ``edges_r``). Panels are mapped to
    ``w = (t - r)^d`` and the panel nearest to t is refined geometrically.
    Returns ``(value, error_estimate)`` where the estimate compares against an
    ``err_nodes``-point rule on the same panels.
    """
    d = kernel.d
    edges_r = np.asarray(edges_r, float)
    if edges_r.size < 2 or edges_r[-1] <= edges_r[0]:
        return 0.0, 0.0
    w_edges = np.maximum(t - edges_r, 0.0) ** d            # descending
    panel_ids = np.arange(edges_r.size - 1)
    # refine the panel adjacent to r = t (the last one)
    last_lo, last_hi = w_edges[-1], w_edges[-2]
    fine = gauss_panels_graded(last_lo, last_hi)
    total = 0.0
    total_lo = 0.0
    for nodes_n, acc_idx in ((n_nodes, 0), (err_nodes, 1)):
        x, wt = _gl(nodes_n)
        acc = 0.0
        # bulk panels
        for s in range(0, panel_ids.size - 1, _CHUNK):
            ids = panel_ids[s: min(s + _CHUNK, panel_ids.size - 1)]
            if ids.size == 0:
                break
            a, b = w_edges[ids + 1], w_edges[ids]       # a < b in w
            acc += _panel_sum(kernel, t, d, a, b, ids, x, wt, phi)
        # graded last panel
        a, b = fine[:-1], fine[1:]
        ids = np.full(a.size, panel_ids[-1])
        acc += _panel_sum(kernel, t, d, a, b, ids, x, wt, phi)
        if acc_idx == 0:
            total = acc
        else:
            total_lo = acc
    return total, abs(total - total_lo)


def _panel_sum(kernel, t, d, a, b, ids, x, wt, phi):
    half = 0.5 * (b - a)
    w = a[:, None] + half[:, None] * (x[None, :] + 1.0)
    u = w ** (1.0 / d)
    r = t - u
    # f(t, r) dr/dw with f = -g'(u), dr = -du, du/dw = u^{1-d}/d
    with np.errstate(invalid="ignore", divide="ignore"):
        jac = np.where(u > 0, -kernel.g(np.where(u > 0, u, 1.0), 1) * u ** (1.0 - d) / d, 0.0)
    # int_a^b f(t,r) phi dr = int_{w_b}^{w_a} f(t, t-u) phi u'(w) dw
    vals = jac * phi(r, np.broadcast_to(ids[:, None], r.shape))
    return float(np.sum(vals * half[:, None] * wt[None, :]))


def _ledger_edges(path, a, b):
    lo = np.searchsorted(path.jump_times, a, side="right")
    hi = np.searchsorted(path.jump_times, b, side="left")
    return np.concatenate(([a], path.jump_times[lo:hi], [b]))


def _x_phi(path, edges, poly=None, t_ref=0.0):
    """phi(r, panel) = X(r) - P(r) with X affine on each panel."""
    mids = 0.5 * (edges[:-1] + edges[1:])
    const = path.jump_sum_before(mids)
    drift = path.drift_total

    def phi(r, ids):
        val = const[ids] + drift * r
        if poly is not None:
            val = val - _poly(poly, r, t_ref)
        return val
    return phi


def _poly(coeffs, r, t_ref):
    out = np.zeros_like(r, dtype=float)
    for k, c in enumerate(coeffs):
        out = out + c * (r - t_ref) ** k
    return out


def y_integral(kernel, path, t, a=0.0, b=None, poly=None, t_ref=0.0, only_poly=False):
    """``int_a^b f(t, r) phi(r) dr`` with phi = X - P, or phi = P if ``only_poly``."""
    b = t if b is None else b
    edges = _ledger_edges(path, a, b)
    if only_poly:
        def phi(r, ids):
            return _poly(poly, r, t_ref)
    else:
        phi = _x_phi(path, edges, poly, t_ref)
    return integrate_f(kernel, t, edges, phi)


def eval_by_parts(kernel: KernelSpec, path: SamplePath, t_grid, quad_tol=DEFAULT_QUAD_TOL,
                  check=True) -> VolterraPath:
    """``M(t) = -int_0^t f(t, r) X(r) dr`` on ``t_grid`` by panel quadrature.

    Raises :class:`ToleranceError` when the embedded error estimate of any
    point exceeds ``quad_tol`` (and ``check`` is set).
    """
    t = np.atleast_1d(np.asarray(t_grid, float))
    vals = np.empty(t.size)
    worst = 0.0
    for i, ti in enumerate(t):
        if ti <= 0:
            vals[i] = 0.0
            continue
        y, err = y_integral(kernel, path, ti)
        vals[i] = -y
        worst = max(worst, err)
    if check and worst > quad_tol:
        raise ToleranceError(f"quadrature error {worst:.3g} exceeds quad_tol {quad_tol:.3g}",
                             achieved=worst)
    return VolterraPath(t, vals, "ByParts", quad_tol, worst)


# ---------------------------------------------------------------------------
# f_delta and the increment decomposition


def f_delta_integral(kernel: KernelSpec, t: float, delta: float, levels=60) -> float:
    """``int_0^1 |f_delta(t, v)| dv`` with ``f_delta(t,v) = f(t+delta, t+delta-delta v) / f(t+delta, t)``.

    The lag of the numerator is ``delta v`` and of the denominator
    ``delta``; they are formed directly rather than by subtracting times,
    which would lose relative precision for tiny ``delta``. The endpoint
    ``v -> 0`` is handled with ``v = w^{1/d}``.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    if not 0.0 <= t <= 1.0:
        raise ValueError("t must lie in [0, 1]")
    den = kernel.g(delta, 1)
    if not np.isfinite(den) or den == 0.0:
        raise ScaleError(f"f(t+delta, t) is not representable at delta={delta:g}")
    d = kernel.d
    edges = gauss_panels_graded(0.0, 1.0, levels=levels)
    x, wt = _gl(N_NODES)
    a, b = edges[:-1, None], edges[1:, None]
    half = 0.5 * (b - a)
    w = a + half * (x + 1.0)
    v = w ** (1.0 / d)
    dv_dw = v ** (1.0 - d) / d
    ratio = np.abs(kernel.g(delta * v, 1) / den)
    return float(np.sum(ratio * dv_dw * half * wt))


@dataclass
class DecompositionTerms:
    I11: float
    I12: float
    I21: float
    I22: float
    v: float
    delta: float
    detrend_degree: int
    increment: float = math.nan
    residual: float = math.nan

    @property
    def total(self):
        return self.I11 + self.I12 - self.I21 - self.I22


def decomposition_check(kernel: KernelSpec, path: SamplePath, t: float, v: float, delta: float,
                        degree: int = 0, poly: Optional[Sequence[float]] = None) -> DecompositionTerms:
    """Split ``Y(v+delta) - Y(v)`` into the four detrended integrals.

    With ``Y(s) = int_0^s f(s, r) X(r) dr``, ``u = v + delta`` and a
    polynomial ``P`` centred at ``t``::

        I11 = int_v^u f(u, r) (X - P)(r) dr
        I12 = int_v^u f(u, r) P(r) dr
        I21 = int_0^v (f(v, r) - f(u, r)) (X - P)(r) dr
        I22 = int_0^v (f(v, r) - f(u, r)) P(r) dr

    These are the change-of-variables forms ``z = (u - r)/delta`` and
    ``z = (v - r)/delta`` of the scaled integrals over [0, 1] and [0, v/delta].
    ``poly`` defaults to ``(X(t),)`` for degree 0 and ``(X(t), drift)`` for degree 1.
    """
    if not 0.0 < v < v + delta <= 1.0 + 1e-15:
        raise ValueError("need 0 < v < v + delta <= 1")
    if degree not in (0, 1):
        raise ValueError("degree must be 0 or 1")
    if poly is None:
        x_t = float(path(t))
        poly = (x_t,) if degree == 0 else (x_t, path.drift_total)
    poly = tuple(poly)[: degree + 1]
    u = v + delta
    I11 = y_integral(kernel, path, u, v, u, poly, t)[0]
    I12 = y_integral(kernel, path, u, v, u, poly, t, only_poly=True)[0]
    I21 = (y_integral(kernel, path, v, 0.0, v, poly, t)[0]
           - y_integral(kernel, path, u, 0.0, v, poly, t)[0])
    I22 = (y_integral(kernel, path, v, 0.0, v, poly, t, only_poly=True)[0]
           - y_integral(kernel, path, u, 0.0, v, poly, t, only_poly=True)[0])
    inc = y_integral(kernel, path, u)[0] - y_integral(kernel, path, v)[0]
    terms = DecompositionTerms(I11, I12, I21, I22, v, delta, degree, inc)
    terms.residual = abs(terms.total - inc)
    return terms
