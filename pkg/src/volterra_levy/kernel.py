"""Smooth-variation kernels F(t, r) = g(t - r) and their verification.

Every kernel here depends on (t, r) only through the lag u = t - r and
vanishes on the diagonal, so the partial derivatives reduce to

    F^{(n,m)}(t, r) = (-1)^m g^{(n+m)}(t - r).

Three families are provided:

* ``power``     g(u) = u^d
* ``powerlog``  g(u) = u^d |log u|^eta
* ``tabulated`` cubic spline of log g against log u on a log-graded mesh
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import lgamma
from typing import Callable, Sequence

import numpy as np
from scipy import special
from scipy.interpolate import CubicSpline

from .errors import KernelDomainError, UnsupportedOrderError

FAMILIES = ("power", "powerlog", "tabulated")

# closed forms are available to any order; cap keeps coefficient tables small
_ANALYTIC_MAX_ORDER = 24


@dataclass(frozen=True)
class KernelSpec:
    """Kernel of smooth variation of index ``(d, max_order)``.

    Parameters
    ----------
    family : {"power", "powerlog", "tabulated"}
    d : float
        Index in (0, 1).
    eta : float
        Log exponent, used by ``powerlog`` only.
    max_order : int
        Highest partial-derivative order n + m that may be requested.
    table_u, table_g : arrays, optional
        Samples of g on a log-graded mesh (``tabulated`` only).
    """

    family: str
    d: float
    eta: float = 0.0
    max_order: int = 16
    table_u: tuple = field(default=(), repr=False)
    table_g: tuple = field(default=(), repr=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        if not 0.0 < self.d < 1.0:
            raise ValueError(f"d out of (0,1): {self.d}")
        if self.family == "tabulated":
            if self.max_order > 2:
                raise UnsupportedOrderError("tabulated kernels support orders <= 2")
            if len(self.table_u) < 4 or len(self.table_u) != len(self.table_g):
                raise ValueError("tabulated kernel needs matching u/g tables of length >= 4")
            u = np.asarray(self.table_u, float)
            if np.any(np.diff(u) <= 0) or u[0] <= 0:
                raise ValueError("table_u must be positive and strictly increasing")
            if np.any(np.asarray(self.table_g, float) <= 0):
                raise ValueError("table_g must be strictly positive")
        elif not 0 <= self.max_order <= _ANALYTIC_MAX_ORDER:
            raise UnsupportedOrderError(f"max_order must be in [0, {_ANALYTIC_MAX_ORDER}]")
        object.__setattr__(self, "_cache", {})

    # -- constructors -----------------------------------------------------
    @classmethod
    def power(cls, d, max_order=16):
        return cls("power", d, 0.0, max_order)

    @classmethod
    def powerlog(cls, d, eta=1.0, max_order=16):
        return cls("powerlog", d, eta, max_order)

    @classmethod
    def tabulate(cls, g: Callable, d, u_min=1e-12, u_max=2.0, per_decade=40):
        """Build a tabulated kernel by sampling ``g`` on a log-graded mesh."""
        n = int(np.ceil(np.log10(u_max / u_min) * per_decade)) + 1
        u = np.geomspace(u_min, u_max, n)
        gu = np.asarray(g(u), float)
        return cls("tabulated", d, 0.0, 2, tuple(u.tolist()), tuple(gu.tolist()))

    # -- evaluation of g and its derivatives ------------------------------
    def g(self, u, order=0):
        """``order``-th derivative of the profile g at lags ``u > 0``.

        ``g(0) = 0`` is returned for ``order == 0``.
        """
        if order > self.max_order:
            raise UnsupportedOrderError(
                f"order {order} exceeds max_order {self.max_order} of {self.family} kernel")
        u = np.asarray(u, float)
        if np.any(u < 0) or (order > 0 and np.any(u == 0)):
            raise KernelDomainError("kernel profile evaluated at non-positive lag")
        if self.family == "power":
            out = _falling(self.d, order) * _safe_pow(u, self.d - order)
        elif self.family == "powerlog":
            out = self._g_powerlog(u, order)
        else:
            out = self._g_tabulated(u, order)
        if order == 0:
            out = np.where(u == 0, 0.0, out)
        return out[()] if out.ndim == 0 else out

    def _g_powerlog(self, u, order):
        pos = u > 0
        uu = np.where(pos, u, 1.0)
        L = np.abs(np.log(uu))
        out = np.zeros_like(uu)
        for sign, mask in ((-1.0, uu < 1.0), (1.0, uu >= 1.0)):
            if not np.any(mask):
                continue
            coef = self._powerlog_coefs(order, sign)
            x, Lx = uu[mask], L[mask]
            acc = np.zeros_like(x)
            with np.errstate(divide="ignore", invalid="ignore"):
                for i, c in enumerate(coef):
                    if c != 0.0:
                        acc += c * Lx ** (self.eta - i)
                out[mask] = x ** (self.d - order) * acc
        return np.where(pos, out, 0.0)

    def _powerlog_coefs(self, order, sign):
        # g^(n)(u) = u^(d-n) * sum_i c_i L^(eta-i), with dL/du = sign/u
        key = ("plc", order, sign)
        if key not in self._cache:
            c = [1.0]
            for n in range(order):
                a = self.d - n
                nxt = [0.0] * (len(c) + 1)
                for i, ci in enumerate(c):
                    nxt[i] += a * ci
                    nxt[i + 1] += sign * (self.eta - i) * ci
                c = nxt
            self._cache[key] = tuple(c)
        return self._cache[key]

    def _spline(self):
        if "spline" not in self._cache:
            x = np.log(np.asarray(self.table_u))
            y = np.log(np.asarray(self.table_g))
            self._cache["spline"] = CubicSpline(x, y, bc_type="not-a-knot", extrapolate=True)
        return self._cache["spline"]

    def _g_tabulated(self, u, order):
        # phi(x) = log g(e^x); chain rule back to u
        pos = u > 0
        uu = np.where(pos, u, 1.0)
        x = np.log(uu)
        sp = self._spline()
        gval = np.exp(sp(x))
        if order == 0:
            return np.where(pos, gval, 0.0)
        p1 = sp(x, 1)
        if order == 1:
            return gval * p1 / uu
        p2 = sp(x, 2)
        return gval * (p2 + p1 * p1 - p1) / uu ** 2

    def partial(self, n, m, t, r):
        return eval_partial(self, n, m, t, r)

    def __call__(self, t, r):
        return eval_partial(self, 0, 0, t, r)

    def primitive(self, t):
        """``int_0^t F(t, r) dr = int_0^t g(u) du`` for ``t >= 0``."""
        t = np.asarray(t, float)
        if self.family == "power":
            out = t ** (self.d + 1) / (self.d + 1)
        elif self.family == "powerlog" and np.all(t <= 1.0):
            # u = e^{-x}: int_{-log t}^inf e^{-(d+1)x} x^eta dx
            a = self.eta + 1.0
            z = (self.d + 1.0) * -np.log(np.where(t > 0, t, 1.0))
            val = special.gammaincc(a, z) * np.exp(lgamma(a)) / (self.d + 1.0) ** a
            out = np.where(t > 0, val, 0.0)
        else:
            out = np.vectorize(self._primitive_quad)(t)
        return out[()] if np.ndim(out) == 0 else out

    def _primitive_quad(self, t):
        if t <= 0:
            return 0.0
        # w = u^d removes the endpoint behaviour; graded panels toward w = 0
        from .volterra import gauss_panels_graded
        edges = gauss_panels_graded(0.0, t ** self.d, levels=30)
        nodes, weights = _gauss_on_panels(edges, 16)
        u = nodes ** (1.0 / self.d)
        jac = u ** (1.0 - self.d) / self.d
        return float(np.sum(weights * self.g(u) * jac))


def _gauss_on_panels(edges, n):
    x, w = np.polynomial.legendre.leggauss(n)
    a, b = edges[:-1, None], edges[1:, None]
    half = 0.5 * (b - a)
    return (a + half * (x + 1.0)).ravel(), (half * w).ravel()


def _falling(x, n):
    out = 1.0
    for i in range(n):
        out *= x - i
    return out


def _safe_pow(u, p):
    with np.errstate(divide="ignore"):
        return np.where(u > 0, np.where(u > 0, u, 1.0) ** p, 0.0 if p > 0 else np.inf)


def eval_partial(kernel: KernelSpec, n: int, m: int, t, r):
    """Partial derivative ``d^{n+m} F / dt^n dr^m`` at ``(t, r)``.

    Exact for the analytic families, spline-based for tabulated kernels
    (cubic in log-log coordinates, so at most two derivatives).

    Raises
    ------
    KernelDomainError
        If ``r >= t`` with ``n + m > 0``, or ``r > t``.
    UnsupportedOrderError
        If ``n + m > kernel.max_order``.
    """
    if n < 0 or m < 0:
        raise ValueError("derivative orders must be non-negative")
    order = n + m
    if order > kernel.max_order:
        raise UnsupportedOrderError(
            f"order {order} exceeds max_order {kernel.max_order}")
    u = np.asarray(t, float) - np.asarray(r, float)
    if np.any(u < 0):
        raise KernelDomainError("kernel evaluated with r > t")
    if order > 0 and np.any(u == 0):
        raise KernelDomainError("derivative of kernel is singular at r = t")
    return (-1.0) ** m * kernel.g(u, order)


# ---------------------------------------------------------------------------
# verification of the smooth-variation limits and growth bounds


@dataclass
class VerificationReport:
    condition: str
    h_grid: list
    sup_deviation: list
    passed: bool
    tolerance: float

    def rows(self):
        return [(self.condition, h, dev) for h, dev in zip(self.h_grid, self.sup_deviation)]


def _check_h_grid(h_grid, K=None):
    h = np.asarray(h_grid, float)
    if h.ndim != 1 or len(h) == 0 or np.any(h <= 0):
        raise ValueError("h_grid must be a non-empty list of positive scales")
    if np.any(np.diff(h) >= 0):
        raise ValueError("h_grid must be strictly decreasing")
    if K is not None and h[0] >= K[1] - K[0] and K[1] > K[0]:
        raise ValueError("all scales must be smaller than the length of K")
    return h


def _converged(dev, tol, tail=3):
    dev = np.asarray(dev, float)
    last = dev[-tail:]
    monotone = bool(np.all(np.diff(last) <= 1e-13 + 1e-12 * np.abs(last[:-1])))
    return bool(dev[-1] <= tol) and monotone


def verify_smooth_variation(kernel: KernelSpec, K=(0.1, 1.0), h_grid=(1e-2, 1e-3, 1e-4, 1e-5, 1e-6),
                            tol=0.05, k=2, n_t=33):
    """Evaluate the four smooth-variation limit conditions on a scale grid.

    For each scale the supremum over ``t`` in ``K`` (sampled at ``n_t``
    points) of the deviation of the scaled derivative ratio from its power-law
    limit is recorded. Condition C is reported once per ``j = 2..k``.

    A condition passes when the deviation at the smallest scale is within
    ``tol`` and the deviations do not increase over the last three scales.
    """
    K = (float(K[0]), float(K[1]))
    if not (0.0 < K[0] <= K[1]):
        raise ValueError("K must be a closed interval of positive times")
    h = _check_h_grid(h_grid, K)
    if max(k, 2) > kernel.max_order:
        raise UnsupportedOrderError(
            f"condition C up to j={k} needs order {k}, kernel provides {kernel.max_order}")
    rho = kernel.d
    ts = np.linspace(K[0], K[1], n_t)
    T, H = np.meshgrid(ts, h, indexing="ij")

    def sup_t(x):
        return np.max(np.abs(x), axis=0).tolist()

    # scale by the lag actually represented in floating point, t - fl(t - h)
    R = T - H
    Hb = T - R
    Tf = T + H
    Hf = Tf - T
    F_back = eval_partial(kernel, 0, 0, T, R)
    dev = {}
    dev["A"] = sup_t(Hb * eval_partial(kernel, 0, 1, T, R) / F_back + rho)
    dev["B"] = sup_t(Hf * eval_partial(kernel, 1, 0, Tf, T) / eval_partial(kernel, 0, 0, Tf, T) - rho)
    for j in range(2, k + 1):
        target = _falling(rho, j)
        dev[f"C_{j}"] = sup_t(Hb ** j * eval_partial(kernel, j - 1, 1, T, R) / F_back + target)
    dev["D"] = sup_t(Hb ** 2 * eval_partial(kernel, 0, 2, T, R) / F_back - rho * (rho - 1))
    return [VerificationReport(name, h.tolist(), d, _converged(d, tol), tol)
            for name, d in dev.items()]


def _lag_samples(h, floor=1e-30, per_decade=24):
    n = max(2, int(np.ceil(np.log10(h / floor) * per_decade)) + 1)
    return np.geomspace(h, floor, n)


def verify_growth_bounds(kernel: KernelSpec, eps, interval=(0.0, 1.0),
                         h_grid=(1e-2, 1e-3, 1e-4, 1e-5, 1e-6), pairs=None, tol=0.5):
    """Growth bounds of the kernel near the diagonal.

    Part (a): ``sup_{0 < u-v <= h} (u-v)^{k+j-d+eps} |F^{(k,j)}(u,v)|`` for each
    derivative pair ``(k, j)``; part (b): ``sup (u-v)^{d+eps} / F(u,v)``.
    Both suprema tend to zero as ``h -> 0``. Lags are sampled log-uniformly
    from ``h`` down to 1e-30 so interior maxima are not missed.

    A report passes when its values are non-increasing in ``h`` and the
    last one is below ``tol``.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    a, b = interval
    h = _check_h_grid(h_grid)
    if h[0] > b - a:
        raise ValueError("scales must fit inside the interval")
    if pairs is None:
        pairs = [(kk, j) for j in (0, 1, 2) for kk in range(0, kernel.max_order - j + 1)
                 if kk + j <= min(kernel.max_order, 4)]
    for kk, j in pairs:
        if kk + j > kernel.max_order:
            raise UnsupportedOrderError(f"pair ({kk},{j}) exceeds max_order {kernel.max_order}")
    d = kernel.d
    reports = []
    for kk, j in pairs:
        vals = []
        for hh in h:
            x = _lag_samples(hh)
            q = x ** (kk + j - d + eps) * np.abs(kernel.g(x, kk + j))
            vals.append(float(np.max(q)))
        reports.append(_growth_report(f"GrowthA_{kk}_{j}", h, vals, tol))
    vals = []
    for hh in h:
        x = _lag_samples(hh)
        vals.append(float(np.max(x ** (d + eps) / kernel.g(x))))
    reports.append(_growth_report("GrowthB", h, vals, tol))
    return reports


def _growth_report(name, h, vals, tol):
    v = np.asarray(vals)
    mono = bool(np.all(np.diff(v) <= 1e-12 * np.maximum(1.0, np.abs(v[:-1]))))
    return VerificationReport(name, h.tolist(), vals, mono and v[-1] <= tol, tol)


def all_passed(reports: Sequence[VerificationReport]) -> bool:
    return all(r.passed for r in reports)
