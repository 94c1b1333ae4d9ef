"""Regular-lattice estimator: coefficient transform and closed-form shrinkage.

On a lattice ``{(i_1/l_1, ..., i_d/l_d)}`` the sampled basis vectors are
orthonormal under the empirical inner product, so the penalized least
squares problem decouples into one scalar problem per multi-index.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import tables
from .basis import (TWO_PI, BasisSpec, MultiIndex, basis_matrix, from_dense,
                    lattice_basis, penalty_weights, series_on_points)
from .data import DerivativeDataset
from .errors import InputError


@dataclass(frozen=True)
class LatticeDesign:
    resolutions: tuple[int, ...]

    @property
    def d(self) -> int:
        return len(self.resolutions)

    @property
    def n(self) -> int:
        return math.prod(self.resolutions)

    @property
    def axes(self) -> list[np.ndarray]:
        return [np.arange(1, l + 1) / l for l in self.resolutions]

    @property
    def points(self) -> np.ndarray:
        """All grid points, row-major (last coordinate varies fastest)."""
        grids = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([g.reshape(-1) for g in grids], axis=1)

    @property
    def cutoff(self) -> tuple[int, ...]:
        """Largest slot resolvable on each axis with full (cos, sin) pairs."""
        return tuple(lattice_cutoff(l) for l in self.resolutions)


def lattice_cutoff(l: int) -> int:
    # an even lattice samples the Nyquist sine as zero; drop the lone cosine too
    return l if l % 2 else l - 1


def make_lattice(resolutions: Sequence[int] | int) -> LatticeDesign:
    res = (resolutions,) if np.isscalar(resolutions) else tuple(resolutions)
    if not res:
        raise InputError("lattice needs at least one dimension")
    for l in res:
        if int(l) != l or l < 1:
            raise InputError(f"lattice resolutions must be positive integers, got {res}")
    return LatticeDesign(tuple(int(l) for l in res))


def _grid_positions(points: np.ndarray, design: LatticeDesign) -> tuple[np.ndarray, ...]:
    pos = []
    for k, l in enumerate(design.resolutions):
        x = points[:, k] * l
        i = np.rint(x).astype(int)
        if np.any(np.abs(x - i) > 1e-9 * l) or i.min() < 1 or i.max() > l:
            raise InputError(f"design coordinate {k + 1} is not on a lattice of resolution {l}")
        pos.append(i - 1)
    return tuple(pos)


def infer_lattice(points) -> LatticeDesign:
    """Recover the lattice that ``points`` fill exactly once per cell."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    res = []
    for k in range(pts.shape[1]):
        vals = np.unique(np.round(pts[:, k], 12))
        res.append(vals.size)
    design = make_lattice(res)
    if pts.shape[0] != design.n:
        raise InputError(f"{pts.shape[0]} points cannot fill a lattice of size {design.n}")
    pos = _grid_positions(pts, design)
    seen = np.zeros(design.resolutions, dtype=int)
    np.add.at(seen, pos, 1)
    if not np.all(seen == 1):
        raise InputError("design is not a regular lattice (cells missing or repeated)")
    return design


def to_grid(points, values, design: LatticeDesign) -> np.ndarray:
    """Scatter lattice-sampled values into a dense ``resolutions``-shaped array."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    grid = np.full(design.resolutions, np.nan)
    grid[_grid_positions(pts, design)] = values
    if np.isnan(grid).any():
        raise InputError("lattice cells missing from the design")
    return grid


@dataclass
class ChannelCoefficients:
    """Transformed data for one channel.

    ``values`` is dense over slots ``1..cutoff[k]``.  For a derivative
    channel the model is ``values = k_j * theta + noise`` where ``k_j`` is the
    frequency in the channel's coordinate; slots with ``k_j = 0`` hold the
    raw projection and carry no signal.
    """

    channel: int
    values: np.ndarray
    noise_scale: float
    resolutions: tuple[int, ...]

    def as_dict(self) -> dict[MultiIndex, float]:
        return from_dense(self.values)


def _derivative_matrix(axis: np.ndarray, cutoff: int) -> np.ndarray:
    # column 2k holds -psi_{2k+1}/(2 pi), column 2k+1 holds psi_{2k}/(2 pi)
    b = basis_matrix(axis, cutoff)
    out = np.empty_like(b)
    out[:, 0] = b[:, 0]
    out[:, 1::2] = -b[:, 2::2]
    out[:, 2::2] = b[:, 1::2]
    return out / TWO_PI


def _project(grid: np.ndarray, mats: Sequence[np.ndarray]) -> np.ndarray:
    out = grid
    for k, b in enumerate(mats):
        out = np.moveaxis(np.tensordot(b, out, axes=([0], [k])), 0, k)
    return out / grid.size


def transform(dataset: DerivativeDataset, spec: BasisSpec | None = None,
              design: LatticeDesign | None = None) -> list[ChannelCoefficients]:
    """Empirical coefficient transform of every channel.

    All channels must share one regular lattice.  Slots are capped at the
    lattice cutoff and, if given, at ``spec.cutoff``.
    """
    if spec is not None and spec.d != dataset.d:
        raise InputError(f"basis has d={spec.d} but dataset has d={dataset.d}")
    if design is None:
        design = infer_lattice(dataset.channels[0].points)
    if design.d != dataset.d:
        raise InputError(f"lattice has d={design.d} but dataset has d={dataset.d}")
    cut = design.cutoff
    if spec is not None:
        cut = tuple(min(a, b) for a, b in zip(cut, spec.cutoff))
    n = design.n
    plain = [lattice_basis(l, c) for l, c in zip(design.resolutions, cut)]
    out = []
    for j, ch in enumerate(dataset.channels):
        grid = to_grid(ch.points, ch.responses, design)
        if j == 0:
            mats = plain
            scale = ch.sigma / math.sqrt(n)
        else:
            mats = list(plain)
            mats[j - 1] = _derivative_matrix(design.axes[j - 1], cut[j - 1])
            scale = ch.sigma / (TWO_PI * math.sqrt(n))
        out.append(ChannelCoefficients(j, _project(grid, mats), scale, design.resolutions))
    return out


@dataclass
class SpectralFit:
    theta: np.ndarray
    spec: BasisSpec
    lam: float
    sigmas: tuple[float, ...]
    resolutions: tuple[int, ...]
    meta: dict = field(default_factory=dict)

    @property
    def p(self) -> int:
        return len(self.sigmas) - 1

    @property
    def coeffs(self) -> dict[MultiIndex, float]:
        return from_dense(self.theta, self.spec.mask())

    def __call__(self, points, deriv_mask: Sequence[int] | None = None) -> np.ndarray:
        return series_on_points(self.theta, points, deriv_mask)

    def save(self, path) -> None:
        d = self.spec.d
        header = {"d": d, "m": self.spec.m, "r": self.spec.r, "p": self.p, "lambda": self.lam,
                  "sigmas": list(self.sigmas), "resolutions": list(self.resolutions)}
        header.update(self.meta)
        rows = [[*key, val] for key, val in self.coeffs.items()]
        tables.write(path, header, [f"nu{k + 1}" for k in range(d)] + ["theta"], rows)

    @classmethod
    def load(cls, path) -> "SpectralFit":
        header, cols, rows = tables.read(path)
        for key in ("d", "m", "r", "p", "lambda", "sigmas", "resolutions"):
            if key not in header:
                raise InputError(f"{path}: header is missing {key!r}")
        d = int(header["d"])
        coeffs = {tuple(int(v) for v in row[:d]): float(row[d]) for row in rows}
        cutoff = tuple(lattice_cutoff(int(l)) for l in header["resolutions"])
        spec = BasisSpec(d, int(header["r"]), float(header["m"]), cutoff)
        theta = np.zeros(spec.shape)
        for key, val in coeffs.items():
            theta[tuple(v - 1 for v in key)] = val
        return cls(theta, spec, float(header["lambda"]), tuple(header["sigmas"]),
                   tuple(header["resolutions"]))


def shrink(channels: Sequence[ChannelCoefficients], lam: float, m: float, r: int,
           sigmas: Sequence[float] | None = None) -> SpectralFit:
    """Closed-form minimizer of the transformed penalized objective.

    ``sigmas`` are the per-channel noise scales used as loss weights
    (default all 1).  A derivative channel's transformed noise is
    ``sigma_j / (2 pi)`` per unit, which the weights account for.
    """
    if not channels or channels[0].channel != 0:
        raise InputError("the function channel (0) must come first")
    if lam < 0 or not np.isfinite(lam):
        raise InputError(f"lambda must be a finite value >= 0, got {lam}")
    p = len(channels) - 1
    if sigmas is None:
        sigmas = (1.0,) * (p + 1)
    sigmas = tuple(float(s) for s in sigmas)
    if len(sigmas) != p + 1:
        raise InputError(f"need {p + 1} noise scales, got {len(sigmas)}")
    if any(s <= 0 for s in sigmas):
        raise InputError(f"noise scales must be > 0, got {sigmas}")
    z0 = channels[0].values
    d = z0.ndim
    spec = BasisSpec(d, r, m, z0.shape)
    num = z0 / sigmas[0] ** 2
    den = np.full(z0.shape, 1.0 / sigmas[0] ** 2)
    for ch in channels[1:]:
        j = ch.channel
        if not 1 <= j <= d or ch.values.shape != z0.shape:
            raise InputError(f"derivative channel {j} does not match the function channel")
        w = (TWO_PI / sigmas[j]) ** 2
        freq = (np.arange(1, z0.shape[j - 1] + 1) // 2).astype(float)
        shp = [1] * d
        shp[j - 1] = -1
        freq = freq.reshape(shp)
        num = num + w * freq * ch.values
        den = den + w * freq**2
    if lam:
        den = den + lam * penalty_weights(z0.shape, m)
    theta = np.where(spec.mask(), num / den, 0.0)
    return SpectralFit(theta, spec, float(lam), sigmas, channels[0].resolutions)


def fit_lattice(dataset: DerivativeDataset, lam: float, m: float, r: int,
                sigmas: Sequence[float] | None = None) -> SpectralFit:
    """Transform then shrink."""
    return shrink(transform(dataset), lam, m, r, sigmas)


def evaluate_fit(fit: SpectralFit, t, deriv_mask: Sequence[int] | None = None):
    """Evaluate the fit or a partial derivative; mask entries are 0 or 1 per coordinate."""
    if deriv_mask is not None and any(v not in (0, 1) for v in deriv_mask):
        raise InputError(f"deriv_mask entries must be 0 or 1, got {tuple(deriv_mask)}")
    t = np.asarray(t, dtype=float)
    out = fit(t, deriv_mask)
    return float(out[0]) if t.ndim == 1 else out


def tune_lambda(n: int, m: float, d: int, r: int, p: int, mode: str = "function", c: float = 1.0) -> float:
    """Rate-optimal penalty level (up to the constant ``c``).

    ``mode="function"`` targets ``f`` itself; ``mode="first_partial"``
    targets a first partial derivative.
    """
    if n < 2:
        raise InputError(f"n must be >= 2, got {n}")
    if not 1 <= r <= d:
        raise InputError(f"r must satisfy 1 <= r <= d, got r={r}, d={d}")
    if not 0 <= p <= d:
        raise InputError(f"p must satisfy 0 <= p <= d, got p={p}, d={d}")
    if not m > 1.5:
        raise InputError(f"m must exceed 3/2, got {m}")
    if not c > 0:
        raise InputError(f"c must be > 0, got {c}")
    if mode == "first_partial":
        return c * n ** (-2.0 * (m - 1) / (2 * m - 1))
    if mode != "function":
        raise InputError(f"unknown lambda mode {mode!r}")
    if p < d:
        return c * (n * math.log(n) ** (1 - min(d - p, r))) ** (-2.0 * m / (2 * m + 1))
    if r >= 3:
        return c * n ** (-(2.0 * m * r - 2) / ((2 * m + 1) * r - 2))
    if r == 2:
        return c * (n * math.log(n)) ** (-(2.0 * m - 1) / (2 * m))
    return c * n ** (-(m - 1.0) / m)


def lambda_grid_search(dataset: DerivativeDataset, truth, grid: Sequence[float], m: float, r: int,
                       sigmas: Sequence[float] | None = None,
                       deriv_mask: Sequence[int] | None = None,
                       quad_points: int | None = None) -> tuple[float, list[tuple[float, float]]]:
    """Pick the penalty minimizing quadrature L2 error against a known truth.

    Returns ``(best_lambda, [(lambda, error), ...])`` with the curve sorted by
    lambda; exact ties resolve to the smaller lambda.
    """
    from .sim import l2_error

    grid = sorted(float(g) for g in grid)
    if not grid:
        raise InputError("lambda grid is empty")
    channels = transform(dataset)
    if quad_points is None:
        quad_points = max(64, 2 * max(channels[0].values.shape) + 2)
    curve = []
    for lam in grid:
        fit = shrink(channels, lam, m, r, sigmas)
        curve.append((lam, l2_error(fit, truth, deriv_mask, quad_points)))
    best = min(range(len(curve)), key=lambda i: (curve[i][1], i))
    return curve[best][0], curve
