"""Random-design estimator via the representer principle.

The penalized part of the ANOVA kernel is

    R(s, t) = sum_{S, 1 <= |S| <= r} prod_{k in S} K(s_k, t_k)

with the periodic Sobolev kernel ``K(s, t) = sum_k 2 k^(-2m) cos(2 pi k (s - t))``.
The constant is the unpenalized null space.  Observation functionals are
point evaluation (function rows) and point evaluation of ``d/dt_j``
(derivative rows), whose representers are sections of R and its partials.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy import linalg

from . import tables
from .basis import TWO_PI, subsets
from .data import Channel, DerivativeDataset
from .errors import CapabilityError, DegenerateSystemError, InputError


DEFAULT_SERIES_CUTOFF = 200
STATIONARITY_TOL = 1e-8


def series_tail_bound(m: float, cutoff: int) -> float:
    """Upper bound on ``sum_{k > cutoff} 2 k^(-2m)``."""
    return 2.0 * cutoff ** (1.0 - 2.0 * m) / (2.0 * m - 1.0)


@dataclass(frozen=True)
class PeriodicKernel:
    """Periodic Sobolev kernel of order ``m``.

    ``series_cutoff=None`` selects the exact Bernoulli-polynomial closed
    form (integer ``m`` in 1..3 only).
    """

    m: float
    series_cutoff: int | None = DEFAULT_SERIES_CUTOFF

    def __post_init__(self):
        if self.series_cutoff is None:
            if self.m not in (1, 2, 3):
                raise InputError(f"closed form needs integer m in 1..3, got {self.m}")
        elif self.series_cutoff < 1:
            raise InputError(f"series_cutoff must be >= 1, got {self.series_cutoff}")

    def _series(self, x, order: int) -> np.ndarray:
        # d^order/dx^order of sum_k 2 k^-2m cos(2 pi k x)
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for k in range(1, self.series_cutoff + 1):
            w = 2.0 * k ** (-2.0 * self.m) * (TWO_PI * k) ** order
            arg = TWO_PI * k * x
            if order % 4 == 0:
                out += w * np.cos(arg)
            elif order % 4 == 1:
                out -= w * np.sin(arg)
            elif order % 4 == 2:
                out -= w * np.cos(arg)
            else:
                out += w * np.sin(arg)
        return out

    def _closed(self, x, order: int) -> np.ndarray:
        m = int(self.m)
        deg = 2 * m - order
        if deg < 1 or (deg == 1 and order):
            raise CapabilityError(f"derivative of order {order} is not continuous for m={m}")
        x = np.mod(np.asarray(x, dtype=float), 1.0)
        scale = (-1) ** (m + 1) * TWO_PI ** (2 * m) / math.factorial(2 * m)
        scale *= math.factorial(2 * m) / math.factorial(deg)
        return scale * _bernoulli_poly(deg, x)

    def dx(self, x, order: int = 0) -> np.ndarray:
        """``order``-th derivative of ``K`` as a function of ``x = s - t``."""
        if self.series_cutoff is None:
            return self._closed(x, order)
        return self._series(x, order)

    def __call__(self, s, t) -> np.ndarray:
        return self.dx(np.subtract(s, t), 0)

    def d_t(self, s, t) -> np.ndarray:
        return -self.dx(np.subtract(s, t), 1)

    def d_s(self, s, t) -> np.ndarray:
        return self.dx(np.subtract(s, t), 1)

    def d_st(self, s, t) -> np.ndarray:
        return -self.dx(np.subtract(s, t), 2)


# exact B_0..B_6; scipy.special.bernoulli is only good to ~1e-12 here
_BERNOULLI = [Fraction(1), Fraction(-1, 2), Fraction(1, 6), Fraction(0), Fraction(-1, 30),
              Fraction(0), Fraction(1, 42)]


def _bernoulli_poly(n: int, x: np.ndarray) -> np.ndarray:
    coef = [float(math.comb(n, k) * _BERNOULLI[k]) for k in range(n + 1)]
    # B_n(x) = sum_k C(n,k) B_k x^(n-k); polyval wants highest power first
    return np.polyval(coef, x)


def kernel_eval(kern: PeriodicKernel, s, t):
    return kern(s, t)


@dataclass(frozen=True)
class AnovaKernel:
    """Truncated tensor-product kernel and its derivative sections.

    Matrices are evaluated between point sets ``S`` (rows) and ``T``
    (columns), each ``(n, d)``.  ``dims`` arguments are 0-based.
    """

    kern: PeriodicKernel
    d: int
    r: int

    def _factors(self, S, T):
        S = np.atleast_2d(np.asarray(S, dtype=float))
        T = np.atleast_2d(np.asarray(T, dtype=float))
        if S.shape[1] != self.d or T.shape[1] != self.d:
            raise InputError(f"points must have {self.d} coordinates")
        x = S[:, None, :] - T[None, :, :]
        return x

    def _sum(self, x, special_factors):
        base = [None] * self.d
        out = np.zeros(x.shape[:2])
        for sub in subsets(self.d, self.r):
            if not set(special_factors) <= set(sub):
                continue
            prod = np.ones(x.shape[:2])
            for k in sub:
                if k in special_factors:
                    prod = prod * special_factors[k]
                else:
                    if base[k] is None:
                        base[k] = self.kern.dx(x[:, :, k], 0)
                    prod = prod * base[k]
            out += prod
        return out

    def value(self, S, T, constant: bool = False) -> np.ndarray:
        """Penalized kernel R, plus 1 if ``constant`` (the full kernel)."""
        x = self._factors(S, T)
        out = self._sum(x, {})
        return out + 1.0 if constant else out

    def d_t(self, S, T, dim: int) -> np.ndarray:
        x = self._factors(S, T)
        return self._sum(x, {dim: -self.kern.dx(x[:, :, dim], 1)})

    def d_s(self, S, T, dim: int) -> np.ndarray:
        x = self._factors(S, T)
        return self._sum(x, {dim: self.kern.dx(x[:, :, dim], 1)})

    def d_st(self, S, T, sdim: int, tdim: int) -> np.ndarray:
        x = self._factors(S, T)
        if sdim == tdim:
            return self._sum(x, {sdim: -self.kern.dx(x[:, :, sdim], 2)})
        return self._sum(x, {sdim: self.kern.dx(x[:, :, sdim], 1),
                             tdim: -self.kern.dx(x[:, :, tdim], 1)})

    def section(self, S, s_channel: int, T, t_channel: int) -> np.ndarray:
        """Apply the channel functionals: ``L^s_{s_channel} L^t_{t_channel} R``."""
        if s_channel == 0 and t_channel == 0:
            return self.value(S, T)
        if s_channel == 0:
            return self.d_t(S, T, t_channel - 1)
        if t_channel == 0:
            return self.d_s(S, T, s_channel - 1)
        return self.d_st(S, T, s_channel - 1, t_channel - 1)


def kernel_sections(kern: PeriodicKernel, d: int, r: int) -> AnovaKernel:
    if not 1 <= r <= d:
        raise InputError(f"r must satisfy 1 <= r <= d, got r={r}, d={d}")
    return AnovaKernel(kern, d, r)


@dataclass
class KernelFit:
    """Representer coefficients over observation rows plus the constant."""

    channels: np.ndarray
    points: np.ndarray
    coef: np.ndarray
    null_coef: float
    kernel: AnovaKernel
    lam: float
    scales: np.ndarray
    residual: float = 0.0
    jitter: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def d(self) -> int:
        return self.kernel.d

    def __call__(self, points, deriv_mask: Sequence[int] | None = None) -> np.ndarray:
        return predict(self, points, deriv_mask)

    def save(self, path) -> None:
        k = self.kernel
        header = {"d": k.d, "r": k.r, "m": k.kern.m, "series_cutoff": k.kern.series_cutoff,
                  "lambda": self.lam, "null_coef": self.null_coef}
        header.update(self.meta)
        cols = ["channel"] + [f"t{i + 1}" for i in range(k.d)] + ["scale", "coef"]
        rows = [[int(c), *pt.tolist(), float(s), float(a)]
                for c, pt, s, a in zip(self.channels, self.points, self.scales, self.coef)]
        tables.write(path, header, cols, rows)

    @classmethod
    def load(cls, path) -> "KernelFit":
        header, cols, rows = tables.read(path)
        for key in ("d", "r", "m", "series_cutoff", "lambda", "null_coef"):
            if key not in header:
                raise InputError(f"{path}: header is missing {key!r}")
        d = int(header["d"])
        arr = np.array([[float(v) for v in row] for row in rows]).reshape(-1, d + 3)
        kern = PeriodicKernel(float(header["m"]), header["series_cutoff"])
        return cls(arr[:, 0].astype(int), arr[:, 1 : d + 1], arr[:, d + 2], float(header["null_coef"]),
                   AnovaKernel(kern, d, int(header["r"])), float(header["lambda"]), arr[:, d + 1])


def _rows(dataset: DerivativeDataset):
    chans, pts, ys, scales = [], [], [], []
    for j, ch in enumerate(dataset.channels):
        chans.append(np.full(ch.n, j))
        pts.append(ch.points)
        ys.append(ch.responses)
        scales.append(ch.row_scales())
    return (np.concatenate(chans), np.concatenate(pts, axis=0),
            np.concatenate(ys), np.concatenate(scales))


def gram(ak: AnovaKernel, channels: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Symmetric Gram matrix of the observation functionals."""
    N = channels.size
    Q = np.empty((N, N))
    groups = {c: np.flatnonzero(channels == c) for c in np.unique(channels)}
    for a, ia in groups.items():
        for b, ib in groups.items():
            if b < a:
                continue
            block = ak.section(points[ia], int(a), points[ib], int(b))
            Q[np.ix_(ia, ib)] = block
            Q[np.ix_(ib, ia)] = block.T
    return Q


def fit_regularized(dataset: DerivativeDataset, lam: float, m: float, r: int,
                    series_cutoff: int | None = DEFAULT_SERIES_CUTOFF,
                    sigmas: Sequence[float] | None = None) -> KernelFit:
    """Minimize the weighted multi-channel loss plus ``lam * J(f)``.

    The loss is ``(1/N) sum_i (y_i - L_i f)^2 / s_i^2`` over all ``N``
    observation rows, ``s_i`` being the row's noise scale (or ``sigmas`` per
    channel when given).  Solves the bordered system
    ``[[Q + N lam W^-1, T], [T', 0]] [c; b] = [y; 0]``.
    """
    if lam < 0 or not np.isfinite(lam):
        raise InputError(f"lambda must be a finite value >= 0, got {lam}")
    chans, pts, y, scales = _rows(dataset)
    if y.size == 0:
        raise InputError("dataset has no observations")
    if sigmas is not None:
        if len(sigmas) != dataset.p + 1:
            raise InputError(f"need {dataset.p + 1} noise scales, got {len(sigmas)}")
        scales = np.asarray([float(sigmas[c]) for c in chans])
    if np.any(scales <= 0):
        raise InputError("row noise scales must be > 0 to weight the loss")
    ak = kernel_sections(PeriodicKernel(m, series_cutoff), dataset.d, r)
    Q = gram(ak, chans, pts)
    N = y.size
    T = (chans == 0).astype(float)
    A = Q + N * lam * np.diag(scales**2)

    jitter = 0.0
    try:
        factor = linalg.cho_factor(A, lower=True)
    except linalg.LinAlgError:
        if lam == 0:
            raise DegenerateSystemError("Gram system is singular at lambda=0") from None
        jitter = 1e-10 * np.trace(A) / N
        warnings.warn(f"penalized system not positive definite; added jitter {jitter:.3g}",
                      RuntimeWarning, stacklevel=2)
        factor = linalg.cho_factor(A + jitter * np.eye(N), lower=True)

    def solve(rhs_y, rhs_t):
        Ay = linalg.cho_solve(factor, rhs_y)
        if not T.any():
            return Ay, 0.0
        AT = linalg.cho_solve(factor, T)
        b = (T @ Ay - rhs_t) / (T @ AT)
        return Ay - b * AT, b

    c, b = solve(y, 0.0)
    res_y = y - (A @ c + T * b)
    res_t = -(T @ c)
    dc, db = solve(res_y, -res_t)
    c, b = c + dc, b + db
    residual = _stationarity(A, T, c, b, y)
    if residual > STATIONARITY_TOL:
        if lam == 0:
            raise DegenerateSystemError(
                f"Gram system is numerically singular at lambda=0 (residual {residual:.2e})")
        warnings.warn(f"stationarity residual {residual:.2e} exceeds {STATIONARITY_TOL}",
                      RuntimeWarning, stacklevel=2)
    return KernelFit(chans, pts, c, float(b), ak, float(lam), scales, residual, jitter)


def _stationarity(A, T, c, b, y) -> float:
    r1 = y - (A @ c + T * b)
    r2 = T @ c
    return float(math.hypot(np.linalg.norm(r1), r2) / max(np.linalg.norm(y), 1e-300))


def predict(fit: KernelFit, points, deriv_mask: Sequence[int] | None = None) -> np.ndarray:
    """Fitted function (mask of zeros) or one first partial (a single 1)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    d = fit.d
    mask = (0,) * d if deriv_mask is None else tuple(int(v) for v in deriv_mask)
    if len(mask) != d or any(v not in (0, 1) for v in mask):
        raise InputError(f"deriv_mask must hold {d} entries in {{0, 1}}, got {mask}")
    order = sum(mask)
    if order > 1:
        raise CapabilityError("mixed partials are only available on the lattice estimator")
    target = 0 if order == 0 else mask.index(1) + 1
    out = np.zeros(pts.shape[0])
    for c in np.unique(fit.channels):
        sel = fit.channels == c
        out += fit.coef[sel] @ fit.kernel.section(fit.points[sel], int(c), pts, target)
    if target == 0:
        out += fit.null_coef
    return out


def objective(fit_or_coef, dataset: DerivativeDataset, lam: float, kernel: AnovaKernel,
              null_coef: float | None = None) -> float:
    """Penalized objective of a representer-span function.

    Accepts a :class:`KernelFit` or a raw coefficient vector with its
    constant; used for optimality checks.
    """
    if isinstance(fit_or_coef, KernelFit):
        c, b = fit_or_coef.coef, fit_or_coef.null_coef
        scales = fit_or_coef.scales
    else:
        c, b = np.asarray(fit_or_coef, dtype=float), float(null_coef)
        scales = None
    chans, pts, y, sc = _rows(dataset)
    if scales is None:
        scales = sc
    Q = gram(kernel, chans, pts)
    T = (chans == 0).astype(float)
    resid = y - (Q @ c + T * b)
    return float(np.sum(resid**2 / scales**2) / y.size + lam * c @ Q @ c)


def preprocess_known_density(dataset: DerivativeDataset, densities) -> DerivativeDataset:
    """Map a known product design density to uniform coordinates.

    ``densities`` is either one sequence of ``d`` frozen distributions
    applied to every channel, or a mapping ``channel -> sequence``.  Each
    distribution needs ``cdf`` and ``pdf``.  Coordinates become
    ``x_k = CDF_k(t_k)``; function responses are unchanged; derivative
    responses in coordinate j are divided by ``pdf_j(t_j)`` and so are their
    per-row noise scales.
    """
    d = dataset.d
    out = []
    for j, ch in enumerate(dataset.channels):
        dens = densities[j] if isinstance(densities, dict) else densities
        if len(dens) != d:
            raise InputError(f"channel {j}: need {d} coordinate densities, got {len(dens)}")
        x = np.column_stack([np.asarray(dens[k].cdf(ch.points[:, k]), dtype=float) for k in range(d)])
        y = ch.responses.copy()
        scales = ch.row_scales().copy()
        if j >= 1:
            pdf = np.asarray(dens[j - 1].pdf(ch.points[:, j - 1]), dtype=float)
            if np.any(~(pdf > 0)):
                raise InputError(f"channel {j}: design density is not positive at every design point")
            y = y / pdf
            scales = scales / pdf
        out.append(Channel(np.clip(x, 0.0, 1.0), y, ch.sigma, scales if j >= 1 else ch.scales))
    return DerivativeDataset(out, dataset.seed, dataset.truth_hash, dict(dataset.meta))
