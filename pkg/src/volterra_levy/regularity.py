"""Finite-scale estimators of Hölder-type exponents on uniformly sampled paths.

All estimators work on a vector of samples ``values[k] = g(k * step)`` and
use dyadic scales ``h = 2^{-k}`` inside a user supplied ``scale_range``.
A statistic ``S(h)`` is computed at every scale and the exponent is the
least-squares slope of ``log S`` against ``log h``.

Pair statistics (gauge exponent, 2-microlocal frontier) are suprema over
pairs ``u > v`` of grid points. Scanning every pair costs ``O(n^2)``, so by
default the pair separations are restricted to a lag set that is dense up to
``dense`` grid steps and geometric (``per_octave`` lags per octave) beyond.
``lags="all"`` gives the brute-force supremum.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.ndimage import maximum_filter1d, minimum_filter1d, uniform_filter1d

from .errors import ConsistencyError, InsufficientScalesError, ScaleError
from .kernel import KernelSpec, all_passed, verify_smooth_variation

FRONTIER_TOL = 1.0 / 64
MIN_SCALES = 4


@dataclass
class ScaleFit:
    """Exponent estimate from a log-log regression.

    ``value`` is the clamped exponent, ``slope`` the raw regression slope and
    ``stat`` the statistic ``S(h)`` at the scales ``h``. A degenerate fit
    (statistic identically zero) is reported with ``r2 = 0`` and ``value``
    at the upper clamp.
    """

    value: float
    slope: float
    r2: float
    h: np.ndarray = field(repr=False)
    stat: np.ndarray = field(repr=False)
    degenerate: bool = False

    def __float__(self):
        return float(self.value)


@dataclass
class ExponentEstimate:
    t: float
    h_hat: float
    gauge_hat: float
    alpha_loc_hat: float
    frontier: list
    scales_used: tuple
    fit_r2: float


# ---------------------------------------------------------------------------
# scales and regression


def dyadic_scales(scale_range, step, min_scales=MIN_SCALES):
    """Dyadic radii ``2^{-k}`` inside ``scale_range``, coarse to fine.

    ``k`` runs from ``ceil(log2 1/h_max)`` to ``floor(log2 1/h_min)``.
    """
    h_min, h_max = scale_range
    if not 0 < h_min < h_max:
        raise ScaleError(f"invalid scale range {scale_range}")
    if h_min < 2 * step * (1 - 1e-12):
        raise ScaleError(f"h_min={h_min} is below twice the grid step {step}")
    k_lo = math.ceil(-math.log2(h_max) - 1e-9)
    k_hi = math.floor(-math.log2(h_min) + 1e-9)
    if k_hi - k_lo + 1 < min_scales:
        raise InsufficientScalesError(
            f"scale range {scale_range} holds {max(k_hi - k_lo + 1, 0)} dyadic scales, "
            f"need {min_scales}")
    return 2.0 ** -np.arange(k_lo, k_hi + 1)


def loglog_fit(h, stat, lo=-math.inf, hi=math.inf):
    """Least-squares slope of ``log stat`` on ``log h`` with clamping."""
    h = np.asarray(h, float)
    stat = np.asarray(stat, float)
    ok = stat > 0
    if ok.sum() < 2:
        return ScaleFit(hi if math.isfinite(hi) else math.nan, math.nan, 0.0, h, stat, True)
    x, y = np.log(h[ok]), np.log(stat[ok])
    slope, icpt = np.polyfit(x, y, 1)
    resid = y - (slope * x + icpt)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum(resid ** 2))
    if ss_tot <= 1e-24 * max(1.0, float(np.sum(y ** 2))):
        r2 = 1.0
    else:
        r2 = max(0.0, 1.0 - ss_res / ss_tot)
    return ScaleFit(float(np.clip(slope, lo, hi)), float(slope), r2, h, stat)


def _step_of(values, step):
    return 1.0 / (len(values) - 1) if step is None else float(step)


def _locate(values, t, step):
    i = int(round(t / step))
    if not 0 <= i < len(values):
        raise ScaleError(f"t={t} lies outside the sampled interval")
    return i


def _ball(n, i, m):
    return max(i - m, 0), min(i + m, n - 1)


def _anchored_slope(values, i, m, step):
    """Slope ``c`` of the fit ``g(u) ~ g(t) + c (u - t)`` over ``B(t, m*step)``."""
    a, b = _ball(len(values), i, m)
    x = (np.arange(a, b + 1) - i) * step
    y = values[a:b + 1] - values[i]
    den = float(np.dot(x, x))
    return float(np.dot(x, y) / den) if den > 0 else 0.0


# ---------------------------------------------------------------------------
# pointwise and local exponents


def estimate_pointwise_holder(values, t, scale_range, degree=0, step=None) -> ScaleFit:
    """Pointwise Hölder exponent of a sampled function at ``t``.

    The detrending polynomial takes the value ``g(t)`` at ``t``; for
    ``degree=1`` its slope is the least-squares slope over the smallest
    ball and stays fixed across scales. The statistic is
    ``sup_{|u-t|<=h} |g(u) - P(u)|`` and the slope is clamped to
    ``[0, degree + 1]``.
    """
    values = np.asarray(values, float)
    step = _step_of(values, step)
    if degree not in (0, 1):
        raise ValueError("degree must be 0 or 1")
    hs = dyadic_scales(scale_range, step)
    i = _locate(values, t, step)
    radii = np.rint(hs / step).astype(np.int64)
    c1 = _anchored_slope(values, i, int(radii[-1]), step) if degree == 1 else 0.0
    a, b = _ball(len(values), i, int(radii[0]))
    x = (np.arange(a, b + 1) - i) * step
    resid = np.abs(values[a:b + 1] - values[i] - c1 * x)
    stat = np.array([resid[max(i - m, a) - a: min(i + m, b) - a + 1].max() for m in radii])
    return loglog_fit(hs, stat, 0.0, degree + 1.0)


def _difference(seg, q, order):
    if order == 1:
        return seg[q:] - seg[:-q]
    return seg[2 * q:] - 2 * seg[q:-q] + seg[:-2 * q]


def estimate_local_holder(values, t, scale_range, step=None, order=2, ball=None) -> ScaleFit:
    """Local (uniform) Hölder exponent of ``g`` on the ball ``B(t, ball)``.

    For every dyadic separation ``delta`` in ``scale_range`` the statistic is
    the largest difference of step ``delta`` with all points inside the
    ball: ``|g(u) - g(v)|`` with ``u - v = delta`` (``order=1``) or
    ``|g(w + delta) - 2 g(w) + g(w - delta)|`` (``order=2``). Second
    differences are blind to the local linear trend, which otherwise masks
    the ``delta^d`` growth at coarse separations; for exponents in (0, 1)
    both characterize the same Hölder class. The ball radius defaults to
    ``16 h_max`` so that the coarsest differences are not clipped by its
    edges. The slope is clamped to ``[0, 1]``. Differences at the rounding
    level of the samples count as zero, so an affine ``g`` gives a
    degenerate fit at the clamp 1.
    """
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    values = np.asarray(values, float)
    step = _step_of(values, step)
    hs = dyadic_scales(scale_range, step)
    i = _locate(values, t, step)
    ball = 16 * hs[0] if ball is None else ball
    a, b = _ball(len(values), i, int(round(ball / step)))
    seg = values[a:b + 1]
    noise = 64 * np.finfo(float).eps * float(np.max(np.abs(seg), initial=0.0))
    stat = []
    for h in hs:
        q = int(round(h / step))
        if order * q >= seg.size:
            raise ScaleError("separation exceeds the ball")
        top = float(np.max(np.abs(_difference(seg, q, order))))
        stat.append(top if top > noise else 0.0)
    return loglog_fit(hs, np.array(stat), 0.0, 1.0)


# ---------------------------------------------------------------------------
# pair statistics


def default_lags(max_lag, dense=32, per_octave=8):
    """Lags ``1..dense`` followed by a geometric progression up to ``max_lag``."""
    max_lag = int(max_lag)
    if max_lag < 1:
        return np.zeros(0, np.int64)
    base = np.arange(1, min(dense, max_lag) + 1)
    if max_lag <= dense:
        return base
    n_oct = math.log2(max_lag / dense)
    geo = np.rint(dense * 2.0 ** (np.arange(1, math.ceil(n_oct * per_octave) + 1) / per_octave))
    geo = np.unique(np.minimum(geo.astype(np.int64), max_lag))
    return np.unique(np.concatenate((base, geo, [max_lag])))


def _resolve_lags(lags, max_lag):
    if lags is None:
        return default_lags(max_lag)
    if isinstance(lags, str):
        if lags != "all":
            raise ValueError(f"unknown lag set {lags!r}")
        return np.arange(1, max_lag + 1)
    lags = np.asarray(lags, np.int64)
    return lags[(lags >= 1) & (lags <= max_lag)]


def _range_extreme(a, lo, hi, n_out, fn):
    """``out[i] = fn(a[i+lo : i+hi+1])`` clipped to valid indices (nan if empty)."""
    w = hi - lo + 1
    big = -np.inf if fn is maximum_filter1d else np.inf
    pad = np.concatenate((np.full(w, big), a, np.full(w, big)))
    F = fn(pad, w, origin=-(w // 2))          # F[q] = fn(pad[q:q+w])
    q = np.arange(n_out) + lo + w
    q = np.clip(q, 0, pad.size - 1)
    out = F[q]
    out[~np.isfinite(out)] = np.nan
    return out


def _gauge_stats(values, step, kernel, radii, lags, c1, centers):
    """``S[s, c] = sup |dM - c1[c] (u - v)| / F(u, v)`` over pairs in ``B(c, radii[s])``.

    For a fixed lag ``k`` the detrended ratio equals
    ``(k step / g(k step)) * |chord_k - c1|`` with ``chord_k`` the slope of
    the chord, so its supremum over a window needs only the window max and
    min of ``chord_k``. This keeps all centres vectorized.
    """
    n = values.size
    S = np.zeros((len(radii), len(centers)))
    for k in lags:
        lag = k * step
        chord = (values[k:] - values[:-k]) / lag
        scale = lag / float(kernel.g(lag))
        for s, m in enumerate(radii):
            if k > 2 * m:
                continue
            hi = _range_extreme(chord, -m, m - k, n, maximum_filter1d)[centers]
            lo = _range_extreme(chord, -m, m - k, n, minimum_filter1d)[centers]
            val = scale * np.fmax(hi - c1, c1 - lo)
            S[s] = np.fmax(S[s], np.nan_to_num(val, nan=0.0))
    return S


@functools.lru_cache(maxsize=64)
def _kernel_verified(kernel: KernelSpec) -> bool:
    return all_passed(verify_smooth_variation(kernel))


def _check_kernel(kernel, require_verified):
    if require_verified and not _kernel_verified(kernel):
        raise ConsistencyError(
            f"{kernel.family} kernel (d={kernel.d}) failed smooth-variation verification; "
            "pass require_verified=False to estimate anyway")


def _gauge_cap(beta):
    return (1.0 / beta if beta and beta > 0 else 1.0) + 0.5


def estimate_gauge_exponent(values, kernel: KernelSpec, t, scale_range, degree="auto",
                            step=None, lags=None, beta=None, require_verified=True,
                            switch_margin=0.05) -> ScaleFit:
    """Gauge Hölder exponent ``d + l`` of a sampled Volterra path at ``t``.

    The statistic is ``sup |(M(u) - P(u)) - (M(v) - P(v))| / F(u, v)`` over
    pairs ``u > v`` in ``B(t, h)``; its log-log slope is the offset ``l``,
    clamped to ``[0, 1/beta + 0.5]``. ``degree`` selects the detrending
    polynomial (``P`` constant or affine, the affine slope fitted on the
    smallest ball). ``"auto"`` starts with degree 0 and switches to degree 1
    once the degree-0 offset reaches ``1 - d - switch_margin``, the ceiling
    imposed by an undetrended linear part.

    The returned fit's ``value`` is ``gauge_hat = d + l``.
    """
    _check_kernel(kernel, require_verified)
    values = np.asarray(values, float)
    step = _step_of(values, step)
    hs = dyadic_scales(scale_range, step)
    i = _locate(values, t, step)
    radii = np.rint(hs / step).astype(np.int64)
    a, b = _ball(len(values), i, int(radii[0]))
    seg = values[a:b + 1]
    c = np.array([i - a])
    L = _resolve_lags(lags, 2 * int(radii[0]))
    cap = _gauge_cap(beta)
    degrees = (0, 1) if degree == "auto" else (int(degree),)
    fit = None
    for deg in degrees:
        c1 = _anchored_slope(values, i, int(radii[-1]), step) if deg == 1 else 0.0
        S = _gauge_stats(seg, step, kernel, radii, L, np.array([c1]), c)
        fit = loglog_fit(hs, S[:, 0], 0.0, cap)
        if degree == "auto" and deg == 0 and fit.value < 1 - kernel.d - switch_margin:
            break
    fit.value = kernel.d + fit.value
    return fit


def gauge_profile(values, kernel: KernelSpec, scale_range, degree="auto", step=None, lags=None,
                  beta=None, require_verified=True, switch_margin=0.05, centers=None):
    """:func:`estimate_gauge_exponent` at many grid points at once.

    Returns ``(l_hat, r2)`` arrays (offsets, not ``d + l``) for ``centers``
    (default: every grid point).
    """
    _check_kernel(kernel, require_verified)
    values = np.asarray(values, float)
    step = _step_of(values, step)
    hs = dyadic_scales(scale_range, step)
    radii = np.rint(hs / step).astype(np.int64)
    n = values.size
    centers = np.arange(n) if centers is None else np.asarray(centers, np.int64)
    L = _resolve_lags(lags, 2 * int(radii[0]))
    cap = _gauge_cap(beta)
    x = np.log(hs)
    out, r2 = None, None
    degrees = (0, 1) if degree == "auto" else (int(degree),)
    for deg in degrees:
        if deg == 1:
            c1 = _anchored_slope_all(values, int(radii[-1]), step)[centers]
        else:
            c1 = np.zeros(centers.size)
        S = _gauge_stats(values, step, kernel, radii, L, c1, centers)
        l_hat, fit_r2 = _vector_fit(x, S, 0.0, cap)
        if out is None:
            out, r2 = l_hat, fit_r2
        else:
            use = out >= 1 - kernel.d - switch_margin
            out = np.where(use, l_hat, out)
            r2 = np.where(use, fit_r2, r2)
    return out, r2


def _anchored_slope_all(values, m, step):
    n = values.size
    x = np.arange(-m, m + 1) * step
    # sum_x x * (g(i+x) - g(i)) = sum_x x g(i+x) since sum x = 0 on a full ball
    num = np.convolve(values, x[::-1], mode="same")
    c = num / np.dot(x, x)
    edge = np.r_[0:min(m, n), max(n - m, 0):n]
    for i in np.unique(edge):
        c[i] = _anchored_slope(values, i, m, step)
    return c


def _vector_fit(x, S, lo, hi):
    """Column-wise least-squares slopes of ``log S`` on ``x`` (degenerate -> hi, r2 0)."""
    with np.errstate(divide="ignore"):
        Y = np.log(S)
    ok = np.isfinite(Y).all(axis=0)
    Y[:, ~ok] = 0.0
    xm = x - x.mean()
    Yc = Y - Y.mean(axis=0)
    slope = (xm @ np.where(ok, Yc, 0.0)) / np.dot(xm, xm)
    ss_tot = np.sum(np.where(ok, Yc, 0.0) ** 2, axis=0)
    ss_res = np.sum((np.where(ok, Yc, 0.0) - np.outer(xm, slope)) ** 2, axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        r2 = np.where(ss_tot > 1e-24, 1.0 - ss_res / ss_tot, 1.0)
    slope = np.where(ok, slope, hi)
    r2 = np.where(ok, np.clip(r2, 0.0, 1.0), 0.0)
    return np.clip(slope, lo, hi), r2


# ---------------------------------------------------------------------------
# 2-microlocal frontier


@dataclass
class ModulusTable:
    """Pair moduli ``sup |g(u) - g(v)|`` binned by separation and distance.

    ``table[i, j]`` is the supremum over pairs in ``B(t, h_max)`` with
    ``u - v`` in the dyadic band ``(eps[i]/2, eps[i]]`` and
    ``|u - t| + |v - t|`` in ``(rho[j]/2, rho[j]]``; empty cells hold nan.
    """

    eps: np.ndarray
    rho: np.ndarray
    table: np.ndarray

    def envelope(self, s_prime):
        """``V(i) = max_j log table[i, j] + s' log rho[j]`` for each separation band.

        ``s_prime`` may be an array, giving one row of ``V`` per value.
        """
        sp = np.atleast_1d(np.asarray(s_prime, float))
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.log(self.table)[None, :, :] + sp[:, None, None] * np.log(self.rho)[None, None, :]
        w[~np.isfinite(w)] = -np.inf
        V = w.max(axis=2)
        return V[0] if np.ndim(s_prime) == 0 else V

    def _slopes(self, s_prime):
        """Least-squares slopes of ``V`` against ``log eps``, one per ``s'``."""
        V = self.envelope(np.atleast_1d(s_prime))
        x = np.log(self.eps)
        out = np.full(V.shape[0], np.inf)
        for k, row in enumerate(V):
            ok = np.isfinite(row)
            if ok.sum() < 2:
                continue
            xc = x[ok] - x[ok].mean()
            out[k] = float(np.dot(xc, row[ok] - row[ok].mean()) / np.dot(xc, xc))
        return out

    def bounded(self, sigma, s_prime, slack=0.0, closed=True):
        """Boundedness test for ``|dg| <= C |u-v|^sigma (|u-t|+|v-t|)^{-s'}``.

        The weighted envelope ``V(i) - sigma log eps[i]`` must not grow as
        the separation shrinks: its least-squares slope in ``log eps`` has
        to be ``>= -slack``. A regression slope of a maximum is not
        monotone in ``s'``, so with ``closed=True`` the test accepts
        ``(sigma, s')`` only when it passes at every ``s~'`` in ``[s', 1)`` on
        a grid of step 1/64. This matches the nesting of the spaces in
        ``s'`` and, unlike closing from below, it never borrows the inflated
        slopes that very negative ``s'`` produce on a finite ball.
        """
        grid = [s_prime]
        if closed:
            grid = s_prime + np.arange(int(math.ceil((1.0 - s_prime) * 64 - 1e-9))) / 64.0
        return bool(np.all(self._slopes(grid) - sigma >= -slack))


def modulus_table(values, t, scale_range, step=None, lags=None, order=2, sep_range=None,
                  rho_min=0.0) -> ModulusTable:
    """Pair (``order=1``) or centred second-difference (``order=2``) moduli at ``t``.

    Pairs lie in ``B(t, h_max)``. Separation bands are the dyadic scales of
    ``sep_range`` (default ``scale_range``) and pairs whose distance
    ``|u - t| + |v - t|`` is below ``rho_min`` are skipped. For ``order=2``
    the separation of the triple ``(w - e, w, w + e)`` is ``e`` and its
    distance to ``t`` is ``|w - e - t| + |w + e - t|``.
    """
    values = np.asarray(values, float)
    step = _step_of(values, step)
    hs = dyadic_scales(scale_range, step)
    i = _locate(values, t, step)
    M = int(round(hs[0] / step))
    a, b = _ball(len(values), i, M)
    seg = values[a:b + 1]
    c = i - a
    eps = hs if sep_range is None else dyadic_scales(sep_range, step)
    k_eps = -np.log2(eps)
    rho_k = np.arange(-math.log2(hs[0]) - 1, math.floor(-math.log2(step)) + 1)
    rho = 2.0 ** -rho_k
    table = np.full((eps.size, rho.size), np.nan)
    L = _resolve_lags(lags, min(2 * M, seg.size - 1) // order)
    pos = np.arange(seg.size)
    for k in L:
        sep = k * step
        ie = int(math.floor(-math.log2(sep) + 1e-12)) - int(k_eps[0])
        if ie < 0 or ie >= eps.size:
            continue
        diff = np.abs(_difference(seg, k, order))
        span = order * k
        r = (np.abs(pos[:-span] - c) + np.abs(pos[span:] - c)) * step
        keep = r >= rho_min
        jr = np.floor(-np.log2(r[keep]) + 1e-12).astype(np.int64) - int(rho_k[0])
        jr = np.clip(jr, 0, rho.size - 1)
        best = np.full(rho.size, -np.inf)
        np.maximum.at(best, jr, diff[keep])
        row = table[ie]
        table[ie] = np.where(np.isnan(row), best, np.fmax(row, best))
    table[~np.isfinite(table)] = np.nan
    return ModulusTable(eps, rho, table)


def estimate_frontier(values, t, s_prime_grid: Sequence[float], scale_range, step=None,
                      lags=None, tol=FRONTIER_TOL, sigma_floor=-2.0, order=2, sep_range=None,
                      rho_min=0.0):
    """2-microlocal frontier ``s' -> sigma_hat(s')`` at ``t``.

    ``sigma_hat`` is found by bisection (tolerance ``tol``) as the largest
    ``sigma`` passing :meth:`ModulusTable.bounded`. The search interval is
    ``[sigma_floor, 1)`` and the midpoint of the final bracket is returned;
    the upper end is clamped to ``1 - tol``. Values
    below 0 are reported so that ``-inf{s': sigma_hat(s') >= 0}`` can be read
    off the frontier.
    """
    s_prime_grid = [float(s) for s in s_prime_grid]
    if any(s < -2 - 1e-12 or s > 1e-12 for s in s_prime_grid):
        raise ValueError("s' values must lie in [-2, 0]")
    tab = modulus_table(values, t, scale_range, step, lags, order, sep_range, rho_min)
    out = []
    for sp in s_prime_grid:
        out.append((sp, _bisect_sigma(tab, sp, tol, sigma_floor)))
    return out


def _bisect_sigma(tab, sp, tol, lo):
    hi = 1.0
    if tab.bounded(hi - tol, sp):
        return hi - tol
    if not tab.bounded(lo, sp):
        return lo
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if tab.bounded(mid, sp):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def frontier_holder(frontier):
    """``-inf{s' : sigma_hat(s') >= 0}`` read off a frontier by interpolation."""
    sp = np.array([f[0] for f in frontier])
    sg = np.array([f[1] for f in frontier])
    order = np.argsort(sp)
    sp, sg = sp[order], sg[order]
    ok = np.nonzero(sg >= 0)[0]
    if ok.size == 0:
        return math.nan
    j = ok[0]
    if j == 0:
        return -sp[0]
    # linear interpolation of the zero crossing between sp[j-1] and sp[j]
    s0 = sp[j - 1] + (0 - sg[j - 1]) * (sp[j] - sp[j - 1]) / (sg[j] - sg[j - 1])
    return -s0


# ---------------------------------------------------------------------------
# combined


def estimate_exponents(x_values, m_values, kernel: KernelSpec, t, scale_range,
                       s_prime_grid=(), step=None, beta=None, degree="auto",
                       require_verified=True, frontier_kw=None) -> ExponentEstimate:
    """All exponents at ``t``: ``h_hat`` of X, gauge and local exponents of M.

    ``fit_r2`` is the smallest r² among the three regressions.
    ``frontier_kw`` is forwarded to :func:`estimate_frontier`.
    """
    hx = estimate_pointwise_holder(x_values, t, scale_range, 0, step)
    gm = estimate_gauge_exponent(m_values, kernel, t, scale_range, degree, step,
                                 beta=beta, require_verified=require_verified)
    al = estimate_local_holder(m_values, t, scale_range, step)
    front = (estimate_frontier(m_values, t, s_prime_grid, scale_range, step, **(frontier_kw or {}))
             if len(s_prime_grid) else [])
    return ExponentEstimate(float(t), hx.value, gm.value, al.value, front,
                            (float(hx.h.min()), float(hx.h.max())),
                            float(min(hx.r2, gm.r2, al.r2)))
