"""Ground truths, synthetic derivative data, and L2 error metrics."""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from . import tables
from .basis import (TWO_PI, BasisSpec, MultiIndex, from_dense, penalty_weights,
                    series_on_grid, series_on_points, to_dense)
from .data import Channel, DerivativeDataset
from .errors import InputError
from .lattice import LatticeDesign

DECAY_EPS = 0.05


@dataclass(frozen=True)
class TruthSpec:
    """Model-class truth.

    Either an explicit ``coefficients`` map, or the seeded decay law
    ``theta = sign * prod_k k_k^-(m + 1/2 + eps)`` over every index with
    interaction order <= r and frequency <= ``max_frequency`` per axis.
    """

    d: int
    r: int
    m: float
    max_frequency: int = 16
    coefficients: Mapping[MultiIndex, float] | None = None
    eps: float = DECAY_EPS

    def basis(self) -> BasisSpec:
        return BasisSpec(self.d, self.r, self.m, 2 * self.max_frequency + 1)


@dataclass
class Truth:
    spec: TruthSpec
    theta: np.ndarray
    seed: int | None = None

    def __call__(self, points, deriv_mask: Sequence[int] | None = None) -> np.ndarray:
        return series_on_points(self.theta, points, deriv_mask)

    def partial(self, points, dim: int) -> np.ndarray:
        mask = [0] * self.theta.ndim
        mask[dim] = 1
        return self(points, mask)

    def on_grid(self, axes, deriv_mask=None) -> np.ndarray:
        return series_on_grid(self.theta, axes, deriv_mask)

    def on_lattice(self, design: LatticeDesign, deriv_mask=None) -> np.ndarray:
        """Values at ``design.points`` (row-major)."""
        return series_on_grid(self.theta, None, deriv_mask, lattice=design.resolutions).reshape(-1)

    @property
    def coeffs(self) -> dict[MultiIndex, float]:
        return from_dense(self.theta, self.theta != 0)

    def penalty(self) -> float:
        """Roughness ``J(f0) = sum_nu w_nu theta_nu^2``."""
        return float(np.sum(penalty_weights(self.theta.shape, self.spec.m) * self.theta**2))

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(repr((self.spec.d, self.spec.r, self.spec.m, self.theta.shape)).encode())
        h.update(np.ascontiguousarray(self.theta).tobytes())
        return h.hexdigest()[:16]

    def save(self, path) -> None:
        d = self.theta.ndim
        header = {"d": d, "r": self.spec.r, "m": self.spec.m,
                  "max_frequency": self.spec.max_frequency, "seed": self.seed, "hash": self.digest()}
        rows = [[*k, v] for k, v in self.coeffs.items()]
        tables.write(path, header, [f"nu{k + 1}" for k in range(d)] + ["theta"], rows)

    @classmethod
    def load(cls, path) -> "Truth":
        header, _, rows = tables.read(path)
        d = int(header["d"])
        coeffs = {tuple(int(v) for v in row[:d]): float(row[d]) for row in rows}
        spec = TruthSpec(d, int(header["r"]), float(header["m"]), int(header["max_frequency"]), coeffs)
        return cls(spec, to_dense(coeffs, spec.basis().shape), header.get("seed"))


def sample_truth(spec: TruthSpec, seed: int | None = None) -> Truth:
    """Instantiate a truth; deterministic given ``seed``."""
    basis = spec.basis()
    if spec.coefficients is not None:
        theta = to_dense(spec.coefficients, basis.shape)
        if np.any(theta[~basis.mask()] != 0):
            raise InputError(f"explicit coefficients exceed interaction order r={spec.r}")
        return Truth(spec, theta, seed)
    rng = np.random.default_rng(seed)
    signs = rng.choice([-1.0, 1.0], size=basis.shape)
    mag = np.ones(basis.shape)
    expo = -(spec.m + 0.5 + spec.eps)
    for k, c in enumerate(basis.shape):
        f = (np.arange(1, c + 1) // 2).astype(float)
        f[0] = 1.0
        shp = [1] * spec.d
        shp[k] = c
        mag = mag * (f**expo).reshape(shp)
    theta = np.where(basis.mask(), signs * mag, 0.0)
    return Truth(spec, theta, seed)


@dataclass(frozen=True)
class IIDUniform:
    n: int


@dataclass(frozen=True)
class IIDDensity:
    """i.i.d. product design; ``densities[k]`` is a frozen distribution on [0, 1]
    exposing ``ppf``, ``cdf`` and ``pdf`` (e.g. from ``scipy.stats``)."""

    n: int
    densities: tuple = field(default_factory=tuple)


def _draw_points(design, d: int, rng: np.random.Generator) -> np.ndarray:
    if isinstance(design, IIDUniform):
        return rng.random((design.n, d))
    if isinstance(design, IIDDensity):
        if len(design.densities) != d:
            raise InputError(f"need {d} coordinate densities, got {len(design.densities)}")
        u = rng.random((design.n, d))
        return np.column_stack([np.clip(dist.ppf(u[:, k]), 0.0, 1.0)
                                for k, dist in enumerate(design.densities)])
    raise InputError(f"unknown design kind {design!r}")


def gen_data(truth: Truth, design, p: int, sigmas: Sequence[float] | float,
             seed: int | None = None, shared_design: bool = True) -> DerivativeDataset:
    """Noisy function and first-partial observations of ``truth``.

    Channel ``j`` observes ``df/dt_j`` (0-based coordinate ``j - 1``) plus
    Gaussian noise of scale ``sigmas[j]``.  Lattice designs are always shared.
    """
    d = truth.theta.ndim
    if not 0 <= p <= d:
        raise InputError(f"p must satisfy 0 <= p <= d, got p={p}, d={d}")
    sig = [float(sigmas)] * (p + 1) if np.isscalar(sigmas) else [float(s) for s in sigmas]
    if len(sig) != p + 1:
        raise InputError(f"need {p + 1} noise scales, got {len(sig)}")
    if any(s < 0 for s in sig):
        raise InputError(f"noise scales must be >= 0, got {sig}")
    rng = np.random.default_rng(seed)
    masks = [None] + [tuple(int(k == j - 1) for k in range(d)) for j in range(1, p + 1)]
    if isinstance(design, LatticeDesign):
        if design.d != d:
            raise InputError(f"lattice has d={design.d}, truth has d={d}")
        pts = design.points
        means = [truth.on_lattice(design, mk) for mk in masks]
        point_sets = [pts] * (p + 1)
    else:
        if shared_design:
            pts = _draw_points(design, d, rng)
            point_sets = [pts] * (p + 1)
        else:
            point_sets = [_draw_points(design, d, rng) for _ in range(p + 1)]
        means = [truth(pt, mk) for pt, mk in zip(point_sets, masks)]
    channels = []
    for j in range(p + 1):
        noise = rng.standard_normal(means[j].size) * sig[j] if sig[j] > 0 else 0.0
        channels.append(Channel(point_sets[j], means[j] + noise, sig[j]))
    return DerivativeDataset(channels, seed, truth.digest())


def midpoint_grid(points_per_dim: int, d: int) -> list[np.ndarray]:
    return [(np.arange(points_per_dim) + 0.5) / points_per_dim] * d


def l2_error(estimate: Callable, truth: Callable, deriv_mask: Sequence[int] | None = None,
             quad_points_per_dim: int = 64) -> float:
    """Tensor midpoint-rule approximation of ``int (estimate - truth)^2`` over the unit cube.

    Both callables take an ``(n, d)`` point array, plus the derivative mask
    when one is given.  Exact for trigonometric integrands below the grid's
    Nyquist frequency.
    """
    if quad_points_per_dim < 2:
        raise InputError(f"quad_points_per_dim must be >= 2, got {quad_points_per_dim}")
    d = _infer_dim(estimate, truth, deriv_mask)
    axes = midpoint_grid(quad_points_per_dim, d)
    pts = np.stack([g.reshape(-1) for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    total = 0.0
    chunk = 1 << 16
    for start in range(0, pts.shape[0], chunk):
        block = pts[start : start + chunk]
        if deriv_mask is None:
            diff = np.asarray(estimate(block)) - np.asarray(truth(block))
        else:
            diff = np.asarray(estimate(block, deriv_mask)) - np.asarray(truth(block, deriv_mask))
        total += math.fsum(diff * diff)
    return total / pts.shape[0]


def _infer_dim(*objs) -> int:
    est, tru, mask = objs
    if mask is not None:
        return len(mask)
    for obj in (est, tru):
        theta = getattr(obj, "theta", None)
        if theta is not None:
            return theta.ndim
        d = getattr(obj, "d", None)
        if isinstance(d, int):
            return d
    raise InputError("cannot infer dimension; pass deriv_mask explicitly")


def spectral_l2_error(theta_est: np.ndarray, theta_true: np.ndarray,
                      deriv_mask: Sequence[int] | None = None) -> float:
    """Exact ``int (f_est - f_true)^2`` for two dense series, by Parseval.

    A derivative in coordinate k rotates each (cos, sin) pair and scales it
    by ``2 pi k``; the rotation is orthonormal, so only the scale survives.
    """
    d = theta_true.ndim
    if theta_est.ndim != d:
        raise InputError("coefficient arrays differ in dimension")
    shape = tuple(max(a, b) for a, b in zip(theta_est.shape, theta_true.shape))
    diff = np.zeros(shape)
    diff[tuple(slice(0, s) for s in theta_true.shape)] -= theta_true
    diff[tuple(slice(0, s) for s in theta_est.shape)] += theta_est
    sq = diff * diff
    if deriv_mask is not None:
        for k, on in enumerate(deriv_mask):
            if on:
                f = TWO_PI * (np.arange(1, shape[k] + 1) // 2)
                shp = [1] * d
                shp[k] = -1
                sq = sq * (f**2).reshape(shp)
    return math.fsum(sq.reshape(-1))
