"""Level-set dimensions of exponents by box counting.

Two classifications of points are available.

``"pointwise"``
    Every grid point carries one exponent (the ledger oracle for X, the
    gauge estimate for M) and the level set ``{t : exponent in bin}`` is box
    counted. With a finite ledger these level sets are unions of small
    intervals, so at fine scales their box dimension drifts toward 1.
``"coarse"``
    Exponents are measured at the box scale itself. At scale ``eps = 2^{-k}``
    the box ``B`` gets ``log(S(B) / s_ref) / log eps`` where ``S(B)`` is the
    largest jump in ``B`` (X) or the gauge-normalized pair supremum of M over
    ``B`` (M), and ``s_ref = 2^{-j_min}`` is the largest admissible jump.
    ``N(eps)`` counts the boxes whose exponent lies in the bin
    (``counting="bin"``) or is at most the bin centre
    (``counting="cumulative"``, the default). Since ``d(h) = beta h``
    increases, the cumulative sets have the same dimension as the level set
    at the centre and avoid the bias of a finite bin width.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence

import numpy as np

from .errors import ConsistencyError
from .kernel import KernelSpec
from .levy import SamplePath, beta_index, jump_oracle_grid
from .regularity import _gauge_stats, default_lags, gauge_profile

DEFAULT_HIT_FRACTION = 0.8
M_MIN_CELLS_LOG2 = 4          # a box must span >= 16 grid cells to resolve M pairs


# ---------------------------------------------------------------------------
# E_delta


@dataclass
class EDeltaSet:
    """Finite union of ``[r - 2^{-delta j}, r + 2^{-delta j}]`` over shell-j jump times.

    ``centers[j]`` holds the sorted jump times of shell ``j``; intervals are
    clipped to ``[0, 1]``.
    """

    delta: float
    centers: Dict[int, np.ndarray]
    j_range: tuple
    hit_fraction: float = DEFAULT_HIT_FRACTION

    def half_width(self, j):
        return 2.0 ** (-self.delta * j)

    @property
    def shells(self):
        return [j for j in range(self.j_range[0], self.j_range[1] + 1) if self.centers.get(j, np.zeros(0)).size]

    def hits(self, t):
        """Number of shells ``j`` whose set ``A_delta^j`` contains ``t``."""
        t = np.atleast_1d(np.asarray(t, float))
        out = np.zeros(t.shape, np.int64)
        for j in self.shells:
            c = self.centers[j]
            w = self.half_width(j)
            k = np.searchsorted(c, t)
            left = np.abs(t - c[np.maximum(k - 1, 0)])
            right = np.abs(c[np.minimum(k, c.size - 1)] - t)
            out += (np.minimum(left, right) <= w * (1 + 1e-12)).astype(np.int64)
        return out

    def membership(self, t):
        """True where ``t`` is hit by at least ``hit_fraction`` of the shells with jumps."""
        t = np.atleast_1d(np.asarray(t, float))
        n = len(self.shells)
        if n == 0:
            return np.zeros(t.shape, bool)
        need = max(1, math.ceil(self.hit_fraction * n - 1e-12))
        inside = (t >= 0) & (t <= 1)
        return (self.hits(t) >= need) & inside

    def union_membership(self, t):
        """True where ``t`` lies in at least one interval."""
        return self.hits(t) >= 1

    def intervals(self):
        """Rows ``(shell, lo, hi)`` of all clipped intervals."""
        rows = []
        for j in self.shells:
            w = self.half_width(j)
            for c in self.centers[j]:
                rows.append((j, max(c - w, 0.0), min(c + w, 1.0)))
        return rows


def build_e_delta(path: SamplePath, delta, j_range=None, hit_fraction=DEFAULT_HIT_FRACTION) -> EDeltaSet:
    if not delta > 0:
        raise ValueError("delta must be positive")
    shells = path.jump_shells
    if j_range is None:
        j_range = (int(shells.min(initial=0)), int(shells.max(initial=0)))
    centers = {}
    for j in range(j_range[0], j_range[1] + 1):
        sel = shells == j
        if np.any(sel):
            centers[j] = np.sort(path.jump_times[sel])
    return EDeltaSet(float(delta), centers, tuple(j_range), hit_fraction)


# ---------------------------------------------------------------------------
# box counting


@dataclass
class BoxDimension:
    dim: float
    r2: float
    eps: np.ndarray
    counts: np.ndarray


def _eps_of(scales):
    scales = np.asarray(scales)
    if np.issubdtype(scales.dtype, np.integer):
        return 2.0 ** -scales.astype(float)
    return scales.astype(float)


def box_counts(mask, scales, t=None):
    """Occupied-box counts of a grid mask; ``t`` defaults to ``i / (n - 1)``."""
    mask = np.asarray(mask, bool)
    if t is None:
        t = np.arange(mask.size) / max(mask.size - 1, 1)
    pts = np.asarray(t, float)[mask]
    eps = _eps_of(scales)
    out = np.zeros(eps.size)
    for i, e in enumerate(eps):
        nb = int(round(1.0 / e))
        idx = np.minimum(np.floor(pts / e * (1 + 1e-12)).astype(np.int64), max(nb - 1, 0))
        out[i] = np.unique(idx).size
    return eps, out


def slope_fit(eps, counts):
    """Slope of ``log N`` against ``log 1/eps`` over scales with ``N > 0``."""
    eps = np.asarray(eps, float)
    counts = np.asarray(counts, float)
    ok = counts > 0
    if ok.sum() < 2:
        return math.nan, 0.0
    x = -np.log(eps[ok])
    y = np.log(counts[ok])
    slope, icpt = np.polyfit(x, y, 1)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else max(0.0, 1.0 - float(np.sum((y - slope * x - icpt) ** 2)) / ss_tot)
    return float(slope), r2


def box_dimension(mask, scales, t=None) -> BoxDimension:
    """Box-counting dimension of a grid mask (nan for an empty mask).

    ``scales`` are box sizes, or integers ``k`` meaning ``2^{-k}``.
    """
    eps = _eps_of(scales)
    if len(eps) < 4:
        raise ValueError("box counting needs at least 4 scales")
    mask = np.asarray(mask, bool)
    if not mask.any():
        return BoxDimension(math.nan, 0.0, eps, np.zeros(eps.size))
    eps, counts = box_counts(mask, eps, t)
    dim, r2 = slope_fit(eps, counts)
    return BoxDimension(dim, r2, eps, counts)


# ---------------------------------------------------------------------------
# classification


@dataclass
class ClassifyConfig:
    """Settings shared by the pointwise and coarse classifications."""

    scale_range: tuple = (2.0 ** -12, 2.0 ** -5)
    j_cut: Optional[int] = None
    deltas: tuple = ()
    hit_fraction: float = DEFAULT_HIT_FRACTION
    coarse_k: Optional[tuple] = None
    degree: object = "auto"
    pointwise: bool = True


@dataclass
class ClassifiedPoints:
    """Per-grid-point record of one sample path."""

    t: np.ndarray
    oracle_l: np.ndarray
    gauge_l: np.ndarray
    excluded: np.ndarray
    in_e_delta: Dict[float, np.ndarray]
    d: float
    beta: float
    grid_log2: int
    j_min: int
    j_max: int
    coarse_x: Dict[int, np.ndarray] = field(default_factory=dict, repr=False)
    coarse_m: Dict[int, np.ndarray] = field(default_factory=dict, repr=False)

    @property
    def gauge_hat(self):
        return self.d + self.gauge_l


def _path_beta(path):
    if path.measure is None:
        return math.nan
    return beta_index(path.measure)


def coarse_exponents(path: SamplePath, m_values, kernel: KernelSpec, k, s_ref=None):
    """Scale-``2^{-k}`` exponents of X and M on the ``2^k`` dyadic boxes.

    X uses the largest ledger jump in the box. M uses
    ``sup |dM - c (u - v)| / F(u, v)`` over pairs inside the box, with ``c``
    the least-squares slope of M over the box. Boxes without any jump get
    ``inf`` for X.
    """
    G = path.grid_log2
    k = int(k)
    if k > G:
        raise ValueError("box scale finer than the grid")
    if s_ref is None:
        s_ref = 2.0 ** -(path.measure.j_min if path.measure is not None else 1)
    lx = _coarse_x_only(path, k, s_ref)
    nb = 2 ** k
    lm = None
    if k <= G - 1:
        half = 2 ** (G - k - 1)
        cen = (2 * np.arange(nb) + 1) * half
        x = np.arange(-half, half + 1) * path.step
        c1 = np.convolve(m_values, x[::-1], mode="same")[cen] / np.dot(x, x)
        S = _gauge_stats(np.asarray(m_values, float), path.step, kernel, [half],
                         default_lags(2 * half), c1, cen)[0]
        with np.errstate(divide="ignore"):
            lm = np.log(S / s_ref) / math.log(2.0 ** -k)
        lm[S == 0] = np.inf
    return lx, lm


def classify_points(path: SamplePath, m_values, kernel: KernelSpec, config: ClassifyConfig = None,
                    require_verified=True) -> ClassifiedPoints:
    """Join oracle exponents, gauge estimates and E_delta flags per grid point.

    ``m_values`` must live on the grid of ``path``. Grid points that are jump
    times are flagged as excluded.
    """
    config = config or ClassifyConfig()
    m_values = np.asarray(getattr(m_values, "values", m_values), float)
    if m_values.size != path.n_grid:
        raise ConsistencyError(f"M has {m_values.size} samples, path grid has {path.n_grid}")
    t = path.grid
    beta = _path_beta(path)
    j_max = int(path.jump_shells.max(initial=0)) if path.measure is None else path.measure.j_max
    j_min = 1 if path.measure is None else path.measure.j_min
    j_cut = j_max if config.j_cut is None else config.j_cut
    h_min, h_max = config.scale_range
    n = t.size
    if config.pointwise:
        oracle = jump_oracle_grid(path, j_cut, h_floor=h_min, h_ceil=h_max)
        gl, _ = gauge_profile(m_values, kernel, config.scale_range, config.degree, path.step,
                              beta=beta if beta == beta else None, require_verified=require_verified)
    else:
        oracle = np.full(n, np.nan)
        gl = np.full(n, np.nan)
    excluded = np.zeros(n, bool)
    if path.n_jumps:
        k = np.rint(path.jump_times / path.step).astype(np.int64)
        on_grid = np.abs(k * path.step - path.jump_times) == 0
        excluded[k[on_grid]] = True
    in_e = {}
    for delta in config.deltas:
        in_e[float(delta)] = build_e_delta(path, delta, hit_fraction=config.hit_fraction).membership(t)
    rec = ClassifiedPoints(t, oracle, gl, excluded, in_e, kernel.d, beta, path.grid_log2,
                           j_min, j_max)
    G = path.grid_log2
    km = config.coarse_k if config.coarse_k is not None else range(4, G - M_MIN_CELLS_LOG2 + 1)
    for k in km:
        rec.coarse_m[int(k)] = coarse_exponents(path, m_values, kernel, k)[1]
    for k in range(4, G + 1):
        rec.coarse_x[k] = _coarse_x_only(path, k)
    return rec


def _coarse_x_only(path, k, s_ref=None):
    if s_ref is None:
        s_ref = 2.0 ** -(path.measure.j_min if path.measure is not None else 1)
    nb = 2 ** k
    box = np.minimum((path.jump_times * nb).astype(np.int64), nb - 1)
    big = np.zeros(nb)
    np.maximum.at(big, box, np.abs(path.jump_sizes))
    with np.errstate(divide="ignore"):
        lx = np.log(big / s_ref) / math.log(2.0 ** -k)
    lx[big == 0] = np.inf
    return lx


# ---------------------------------------------------------------------------
# spectrum


@dataclass
class SpectrumEstimate:
    h_bins: list
    h_center: np.ndarray
    dim_hat_X: np.ndarray
    dim_hat_M: np.ndarray
    r2_X: np.ndarray
    r2_M: np.ndarray
    counts_X: list
    counts_M: list
    scales_X: list
    scales_M: list
    n_points: np.ndarray
    beta_hat: float
    theory: np.ndarray
    classification: str
    counting: str

    def rows(self):
        """Rows ``h_center, dim_hat_X, dim_hat_M, theory, r2, n_points``."""
        r2 = np.fmin(self.r2_X, self.r2_M)
        return [(float(h), float(x), float(m), float(th), float(r), int(n))
                for h, x, m, th, r, n in zip(self.h_center, self.dim_hat_X, self.dim_hat_M,
                                             self.theory, r2, self.n_points)]


def default_bins(centers=(0.2, 0.4, 0.6), half_width=0.05):
    return [(c - half_width, c + half_width) for c in centers]


def _select(vals, lo, hi, center, counting):
    if counting == "cumulative":
        return vals <= center
    return (vals >= lo) & (vals < hi)


def _scale_list(h, j_max, k_hi_grid, k_lo=4):
    k_hi = min(k_hi_grid, int(math.floor(j_max / h + 1e-9))) if h > 0 else k_hi_grid
    return list(range(k_lo, k_hi + 1))


def estimate_spectrum(records: Sequence[ClassifiedPoints], h_bins=None, scales=None,
                      classification="coarse", counting="cumulative", beta=None) -> SpectrumEstimate:
    """Multi-seed box-counting spectrum of X and M.

    Counts ``N(eps)`` are averaged over the records before the slope fit.
    Default scales are ``k = 4 .. min(G, floor(j_max / h))`` for X and
    ``k = 4 .. min(G - 4, floor(j_max / h))`` for M (coarse classification),
    i.e. box counting stops at the truncation floor of the ledger.
    Bins whose centre is at or beyond ``1/beta`` or whose counts vanish are
    reported as nan.
    """
    if not records:
        raise ValueError("no records")
    if classification not in ("coarse", "pointwise"):
        raise ValueError(f"unknown classification {classification!r}")
    if counting not in ("cumulative", "bin"):
        raise ValueError(f"unknown counting {counting!r}")
    h_bins = default_bins() if h_bins is None else [tuple(b) for b in h_bins]
    G = records[0].grid_log2
    for r in records:
        if r.grid_log2 != G or r.d != records[0].d:
            raise ConsistencyError("records mix grids or kernels")
    beta_hat = float(np.nanmean([r.beta for r in records])) if beta is None else float(beta)
    j_max = records[0].j_max
    centers = np.array([0.5 * (lo + hi) for lo, hi in h_bins])
    dX, dM, rX, rM, nP = [], [], [], [], []
    cX, cM, sX, sM = [], [], [], []
    for (lo, hi), c in zip(h_bins, centers):
        if scales is not None:
            kx = km = [int(k) for k in scales]
        elif classification == "coarse":
            kx = _scale_list(c, j_max, G)
            km = _scale_list(c, j_max, G - M_MIN_CELLS_LOG2)
        else:
            kx = km = _scale_list(c, j_max, G)
        if beta_hat > 0 and c >= 1.0 / beta_hat:
            nan_counts = np.full(len(kx), np.nan)
            dX.append(math.nan); dM.append(math.nan); rX.append(0.0); rM.append(0.0); nP.append(0)
            cX.append(nan_counts); cM.append(nan_counts); sX.append(kx); sM.append(km)
            continue
        if classification == "coarse":
            NX = np.array([[np.sum(_select(r.coarse_x[k], lo, hi, c, counting)) for k in kx]
                           for r in records], float)
            NM = np.array([[np.sum(_select(r.coarse_m[k], lo, hi, c, counting)) for k in km]
                           for r in records], float)
            n_pts = int(NX[:, -1].sum()) if NX.size else 0
        else:
            NX, NM = [], []
            n_pts = 0
            for r in records:
                keep = ~r.excluded
                mx = _select(r.oracle_l, lo, hi, c, counting) & keep
                mm = _select(r.gauge_l, lo, hi, c, counting) & keep
                NX.append(box_counts(mx, kx, r.t)[1])
                NM.append(box_counts(mm, km, r.t)[1])
                n_pts += int(mx.sum())
            NX, NM = np.array(NX), np.array(NM)
        ax, am = NX.mean(axis=0), NM.mean(axis=0)
        fx = slope_fit(2.0 ** -np.array(kx, float), ax) if len(kx) >= 2 else (math.nan, 0.0)
        fm = slope_fit(2.0 ** -np.array(km, float), am) if len(km) >= 2 else (math.nan, 0.0)
        dX.append(fx[0]); rX.append(fx[1]); dM.append(fm[0]); rM.append(fm[1]); nP.append(n_pts)
        cX.append(ax); cM.append(am); sX.append(kx); sM.append(km)
    theory = np.where(centers < (1.0 / beta_hat if beta_hat > 0 else math.inf), beta_hat * centers, math.nan)
    return SpectrumEstimate(h_bins, centers, np.array(dX), np.array(dM), np.array(rX), np.array(rM),
                            cX, cM, sX, sM, np.array(nP), beta_hat, theory, classification, counting)
