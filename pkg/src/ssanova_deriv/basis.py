"""Tensor-product trigonometric basis and ANOVA index bookkeeping.

One-dimensional basis on [0, 1] (linear index ``nu >= 1``)::

    psi_1(t)        = 1
    psi_{2k}(t)     = sqrt(2) cos(2 pi k t)
    psi_{2k+1}(t)   = sqrt(2) sin(2 pi k t)

so the frequency of slot ``nu`` is ``nu // 2`` and the (cos, sin) pair at
frequency ``k`` occupies slots ``(2k, 2k+1)``.  A multi-index is a plain
tuple of such slots, one per coordinate; dimensions are 0-based throughout
the Python API.

Coefficient maps are kept either as ``{multi_index: value}`` dicts (the
public exchange format) or as dense arrays of shape ``(L_1, ..., L_d)`` where
array position ``nu - 1`` holds slot ``nu``.  The dense form is what the
estimators use internally.
"""
from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import InputError

MultiIndex = tuple[int, ...]

SQRT2 = math.sqrt(2.0)
TWO_PI = 2.0 * math.pi


def frequency(nu: int) -> int:
    return nu // 2


def interaction_order(index: Sequence[int]) -> int:
    return sum(1 for nu in index if nu >= 2)


def support(index: Sequence[int]) -> frozenset[int]:
    """Dimensions carrying a non-constant factor."""
    return frozenset(k for k, nu in enumerate(index) if nu >= 2)


def _validate_index(index: Sequence[int]) -> None:
    if any(int(nu) < 1 for nu in index):
        raise InputError(f"multi-index entries must be >= 1, got {tuple(index)}")


@dataclass(frozen=True)
class BasisSpec:
    """Truncated tensor basis: ``d`` dimensions, interactions up to order ``r``.

    ``cutoff`` is the largest linear slot kept per dimension (odd, so that
    every retained frequency has both its cosine and sine).  An int applies
    to all dimensions.
    """

    d: int
    r: int
    m: float
    cutoff: tuple[int, ...]

    def __init__(self, d: int, r: int, m: float, cutoff: int | Sequence[int]):
        if d < 1:
            raise InputError(f"d must be >= 1, got {d}")
        if not 1 <= r <= d:
            raise InputError(f"r must satisfy 1 <= r <= d, got r={r}, d={d}")
        if not m > 1.5:
            raise InputError(f"m must exceed 3/2, got {m}")
        cut = (int(cutoff),) * d if np.isscalar(cutoff) else tuple(int(c) for c in cutoff)
        if len(cut) != d:
            raise InputError(f"cutoff has {len(cut)} entries for d={d}")
        for c in cut:
            if c < 1 or c % 2 == 0:
                raise InputError(f"cutoff must be odd and >= 1, got {c}")
        object.__setattr__(self, "d", int(d))
        object.__setattr__(self, "r", int(r))
        object.__setattr__(self, "m", float(m))
        object.__setattr__(self, "cutoff", cut)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.cutoff

    def max_frequency(self) -> tuple[int, ...]:
        return tuple(c // 2 for c in self.cutoff)

    def count(self) -> int:
        """Number of retained multi-indices.

        Equals ``sum_s C(d, s) (cutoff - 1)^s`` when all cutoffs agree.
        """
        # elementary symmetric polynomials of (cutoff_k - 1), orders 0..r
        e = [1] + [0] * self.d
        for c in self.cutoff:
            for q in range(self.d, 0, -1):
                e[q] += e[q - 1] * (c - 1)
        return sum(e[: self.r + 1])

    def mask(self) -> np.ndarray:
        """Boolean dense mask of indices with interaction order <= r."""
        order = np.zeros(self.shape, dtype=int)
        for k, c in enumerate(self.cutoff):
            shp = [1] * self.d
            shp[k] = c
            order = order + (np.arange(1, c + 1) >= 2).reshape(shp)
        return order <= self.r


def enumerate_indices(spec: BasisSpec) -> list[MultiIndex]:
    """All retained multi-indices, first coordinate varying fastest.

    >>> enumerate_indices(BasisSpec(d=2, r=1, m=2, cutoff=3))
    [(1, 1), (2, 1), (3, 1), (1, 2), (1, 3)]
    """
    out = []
    for rev in itertools.product(*(range(1, c + 1) for c in reversed(spec.cutoff))):
        index = rev[::-1]
        if interaction_order(index) <= spec.r:
            out.append(index)
    return out


def psi(nu: int, t) -> np.ndarray:
    """One-dimensional basis function ``psi_nu`` evaluated at ``t``."""
    t = np.asarray(t, dtype=float)
    k = nu // 2
    if nu == 1:
        return np.ones_like(t)
    if nu % 2 == 0:
        return SQRT2 * np.cos(TWO_PI * k * t)
    return SQRT2 * np.sin(TWO_PI * k * t)


def dpsi(nu: int, t) -> np.ndarray:
    """Derivative of ``psi_nu``: the pair rotates with factor ``2 pi k``."""
    t = np.asarray(t, dtype=float)
    k = nu // 2
    if nu == 1:
        return np.zeros_like(t)
    if nu % 2 == 0:
        return -TWO_PI * k * psi(nu + 1, t)
    return TWO_PI * k * psi(nu - 1, t)


def basis_matrix(t, cutoff: int, deriv: int = 0) -> np.ndarray:
    """Matrix ``B[i, nu-1] = psi_nu^{(deriv)}(t_i)`` for slots ``1..cutoff``.

    ``deriv`` is 0 or 1.  ``cutoff`` may be even here (used for raw lattice
    sampling); the last column is then a lone cosine.
    """
    t = np.asarray(t, dtype=float).reshape(-1)
    kmax = cutoff // 2
    out = np.empty((t.size, cutoff))
    if kmax:
        k = np.arange(1, kmax + 1)
        arg = TWO_PI * np.outer(t, k)
        c = SQRT2 * np.cos(arg)
        s = SQRT2 * np.sin(arg)
    if deriv == 0:
        out[:, 0] = 1.0
        if kmax:
            out[:, 1::2] = c
            out[:, 2::2] = s[:, : (cutoff - 1) // 2]
    elif deriv == 1:
        out[:, 0] = 0.0
        if kmax:
            w = TWO_PI * k
            out[:, 1::2] = -w * s
            out[:, 2::2] = (w * c)[:, : (cutoff - 1) // 2]
    else:
        raise InputError(f"deriv must be 0 or 1, got {deriv}")
    return out


@functools.lru_cache(maxsize=6)
def lattice_basis(l: int, cutoff: int, deriv: int = 0) -> np.ndarray:
    """Cached :func:`basis_matrix` on the axis ``1/l, 2/l, ..., 1`` (read-only)."""
    out = basis_matrix(np.arange(1, l + 1) / l, cutoff, deriv)
    out.setflags(write=False)
    return out


def eval_basis(index: Sequence[int], t) -> float | np.ndarray:
    """Tensor basis function ``prod_k psi_{nu_k}(t_k)``.

    ``t`` is a single point of length d or an ``(n, d)`` array.
    """
    _validate_index(index)
    t = np.asarray(t, dtype=float)
    pts = np.atleast_2d(t)
    val = np.ones(pts.shape[0])
    for k, nu in enumerate(index):
        val = val * psi(nu, pts[:, k])
    return float(val[0]) if t.ndim == 1 else val


def eval_basis_partial(index: Sequence[int], t, dim: int) -> float | np.ndarray:
    """Exact partial derivative of :func:`eval_basis` in coordinate ``dim``."""
    _validate_index(index)
    if not 0 <= dim < len(index):
        raise InputError(f"dim must be in [0, {len(index)}), got {dim}")
    t = np.asarray(t, dtype=float)
    pts = np.atleast_2d(t)
    val = np.ones(pts.shape[0])
    for k, nu in enumerate(index):
        val = val * (dpsi(nu, pts[:, k]) if k == dim else psi(nu, pts[:, k]))
    return float(val[0]) if t.ndim == 1 else val


def penalty_weight(index: Sequence[int], m: float) -> float:
    """Coefficient of ``theta^2`` in the roughness penalty.

    Zero for the global constant, else the product of ``k^(2m)`` over the
    non-constant coordinates.
    """
    if not m > 1.5:
        raise InputError(f"m must exceed 3/2, got {m}")
    _validate_index(index)
    freqs = [nu // 2 for nu in index if nu >= 2]
    if not freqs:
        return 0.0
    return float(np.prod([float(k) ** (2.0 * m) for k in freqs]))


def penalty_weights(shape: Sequence[int], m: float) -> np.ndarray:
    """Dense array of :func:`penalty_weight` over slots ``1..shape[k]``."""
    d = len(shape)
    w = np.ones(tuple(shape))
    for k, c in enumerate(shape):
        f = (np.arange(1, c + 1) // 2).astype(float)
        f[0] = 1.0
        shp = [1] * d
        shp[k] = c
        w = w * (f ** (2.0 * m)).reshape(shp)
    w[(0,) * d] = 0.0
    return w


def frequencies(cutoff: int) -> np.ndarray:
    """Frequency of each slot ``1..cutoff`` as a float vector."""
    return (np.arange(1, cutoff + 1) // 2).astype(float)


def to_dense(coeffs: Mapping[Sequence[int], float], shape: Sequence[int] | None = None) -> np.ndarray:
    if not coeffs:
        raise InputError("empty coefficient map")
    keys = [tuple(int(v) for v in key) for key in coeffs]
    for key in keys:
        _validate_index(key)
    d = len(keys[0])
    if any(len(key) != d for key in keys):
        raise InputError("coefficient map mixes multi-index lengths")
    if shape is None:
        shape = tuple(max(key[k] for key in keys) for k in range(d))
        shape = tuple(s if s % 2 else s + 1 for s in shape)
    out = np.zeros(tuple(shape))
    for key, val in zip(keys, coeffs.values()):
        if any(nu > s for nu, s in zip(key, shape)):
            raise InputError(f"index {key} exceeds shape {tuple(shape)}")
        out[tuple(nu - 1 for nu in key)] = val
    return out


def from_dense(theta: np.ndarray, mask: np.ndarray | None = None) -> dict[MultiIndex, float]:
    """Dense array to dict, first coordinate fastest; keeps entries where ``mask``."""
    if mask is None:
        mask = np.ones(theta.shape, dtype=bool)
    out = {}
    for pos in np.argwhere(mask.transpose()):
        idx = tuple(int(v) for v in pos[::-1])
        out[tuple(v + 1 for v in idx)] = float(theta[idx])
    return out


def _axis_matrices(theta_shape, coords, deriv_mask):
    return [basis_matrix(x, c, int(dm)) for x, c, dm in zip(coords, theta_shape, deriv_mask)]


def series_on_grid(theta: np.ndarray, axes: Sequence[np.ndarray], deriv_mask: Sequence[int] | None = None,
                   lattice: Sequence[int] | None = None) -> np.ndarray:
    """Evaluate a dense series on the tensor grid ``axes[0] x ... x axes[d-1]``.

    Returns an array of shape ``(len(axes[0]), ..., len(axes[d-1]))``.  When
    ``lattice`` gives the resolutions of a regular lattice, ``axes`` is
    ignored and cached basis matrices are used.
    """
    d = theta.ndim
    if deriv_mask is None:
        deriv_mask = (0,) * d
    if lattice is not None:
        mats = [lattice_basis(int(l), c, int(dm)) for l, c, dm in zip(lattice, theta.shape, deriv_mask)]
    else:
        mats = _axis_matrices(theta.shape, axes, deriv_mask)
    out = theta
    for k, b in enumerate(mats):
        out = np.moveaxis(np.tensordot(b, out, axes=([1], [k])), 0, k)
    return out


def series_on_points(theta: np.ndarray, points, deriv_mask: Sequence[int] | None = None) -> np.ndarray:
    """Evaluate a dense series (or one of its partial derivatives) at scattered points."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    d = theta.ndim
    if pts.shape[1] != d:
        raise InputError(f"points have {pts.shape[1]} coordinates, series has {d}")
    if deriv_mask is None:
        deriv_mask = (0,) * d
    inner = int(np.prod(theta.shape[:-1]))
    chunk = max(1, 2**22 // max(inner, 1))
    out = np.empty(pts.shape[0])
    for start in range(0, pts.shape[0], chunk):
        block = pts[start : start + chunk]
        mats = _axis_matrices(theta.shape, block.T, deriv_mask)
        # contract the last axis first; carry the point axis at the end
        acc = theta @ mats[-1].T
        for k in range(d - 2, -1, -1):
            acc = np.einsum("...jn,nj->...n", acc, mats[k])
        out[start : start + chunk] = acc
    return out


def anova_components(coeffs: Mapping[Sequence[int], float]) -> dict[frozenset[int], Callable]:
    """Group coefficients by support set; each value evaluates that component.

    The empty frozenset is the constant.  Every non-constant component has
    zero mean along each coordinate of its support.
    """
    groups: dict[frozenset[int], dict[MultiIndex, float]] = {}
    for key, val in coeffs.items():
        key = tuple(int(v) for v in key)
        groups.setdefault(support(key), {})[key] = float(val)

    def make(group):
        items = list(group.items())

        def component(t):
            t = np.asarray(t, dtype=float)
            total = 0.0 if t.ndim == 1 else np.zeros(np.atleast_2d(t).shape[0])
            for key, val in items:
                total = total + val * eval_basis(key, t)
            return total

        return component

    return {s: make(g) for s, g in groups.items()}


def subsets(d: int, r: int) -> Iterable[tuple[int, ...]]:
    """Non-empty subsets of ``range(d)`` of size at most ``r``."""
    for q in range(1, r + 1):
        yield from itertools.combinations(range(d), q)
