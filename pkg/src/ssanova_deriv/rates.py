"""Convergence-rate experiments and the theoretical exponents they target."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy import stats

from . import tables
from .errors import InputError
from .kernel import DEFAULT_SERIES_CUTOFF, fit_regularized
from .lattice import fit_lattice, make_lattice, tune_lambda
from .sim import (IIDUniform, TruthSpec, gen_data, l2_error, sample_truth,
                  spectral_l2_error)

TARGETS = ("function", "first_partial", "mixed_partial")
ESTIMATORS = ("spectral", "kernel")


class Rate(NamedTuple):
    """Error decays like ``n^exponent (log n)^log_power``."""

    exponent: float
    log_power: float


def _check(m, d, r, p):
    if d < 1:
        raise InputError(f"d must be >= 1, got {d}")
    if not 1 <= r <= d:
        raise InputError(f"r must satisfy 1 <= r <= d, got r={r}, d={d}")
    if not 0 <= p <= d:
        raise InputError(f"p must satisfy 0 <= p <= d, got p={p}, d={d}")
    if not m > 1.5:
        raise InputError(f"m must exceed 3/2, got {m}")


def _clean(x: float) -> float:
    return 0.0 if x == 0 else float(x)


def theoretical_terms(m: float, d: int, r: int, p: int, target: str = "function") -> list[Rate]:
    """Every term of the minimax rate; the sum of these is the rate."""
    _check(m, d, r, p)
    if target == "first_partial":
        if p < 1:
            raise InputError("first_partial target needs at least one derivative channel (p >= 1)")
        return [Rate(_clean(-2.0 * (m - 1) / (2 * m - 1)), 0.0)]
    if target == "function":
        if p < d:
            e = -2.0 * m / (2 * m + 1)
            return [Rate(_clean(e), _clean(e * (1 - min(d - p, r))))]
        return [Rate(-1.0, _clean(r - 1.0)),
                Rate(_clean(-2.0 * m * r / ((2 * m + 1) * r - 2)), 0.0)]
    if target == "mixed_partial":
        if p < d:
            e = -2.0 * (m - 1) / (2 * m + 1)
            return [Rate(_clean(e), _clean(e * (1 - min(d - p, r))))]
        return [Rate(_clean(-2.0 * (m - 1) * r / ((2 * m + 1) * r - 2)), 0.0)]
    raise InputError(f"unknown target {target!r}; expected one of {TARGETS}")


def theoretical_exponent(m: float, d: int, r: int, p: int, target: str = "function") -> Rate:
    """Dominant (slowest-decaying) term: larger exponent first, then larger log power."""
    return max(theoretical_terms(m, d, r, p, target))


def fit_slope(pairs: Sequence[tuple[float, float]]) -> tuple[float, float]:
    """OLS slope of log(error) on log(n) and its standard error."""
    if len(pairs) < 3:
        raise InputError(f"need at least 3 (n, error) pairs, got {len(pairs)}")
    n = np.array([float(a) for a, _ in pairs])
    e = np.array([float(b) for _, b in pairs])
    if np.any(e <= 0) or np.any(n <= 0):
        raise InputError("sample sizes and errors must be > 0 for a log-log fit")
    res = stats.linregress(np.log(n), np.log(e))
    return float(res.slope), float(res.stderr)


@dataclass
class RateConfig:
    m: float = 2.0
    d: int = 1
    r: int = 1
    p: int = 0
    estimator: str = "spectral"
    target: str = "function"
    j: int = 1
    n_grid: list[int] = field(default_factory=lambda: [256, 512, 1024, 2048, 4096])
    replicates: int = 20
    lambda_rule: str = "schedule"
    lambda_c: float = 1.0
    lambda_grid: list[float] = field(default_factory=list)
    sigmas: list[float] = field(default_factory=list)
    seed: int = 0
    truth_max_frequency: int | None = None
    series_cutoff: int | None = DEFAULT_SERIES_CUTOFF
    quad_points: int = 64
    tolerance: float | None = None

    def __post_init__(self):
        _check(self.m, self.d, self.r, self.p)
        if self.estimator not in ESTIMATORS:
            raise InputError(f"estimator must be one of {ESTIMATORS}, got {self.estimator!r}")
        if self.target not in TARGETS:
            raise InputError(f"target must be one of {TARGETS}, got {self.target!r}")
        if self.target == "first_partial" and not 1 <= self.j <= self.d:
            raise InputError(f"j must satisfy 1 <= j <= d, got {self.j}")
        if self.target == "mixed_partial" and self.estimator != "spectral":
            raise InputError("mixed_partial target needs the spectral estimator")
        grid = [int(n) for n in self.n_grid]
        if len(grid) < 4 or any(b <= a for a, b in zip(grid, grid[1:])):
            raise InputError(f"n_grid must be strictly increasing with >= 4 points, got {grid}")
        self.n_grid = grid
        if self.replicates < 3:
            raise InputError(f"replicates must be >= 3, got {self.replicates}")
        if self.lambda_rule not in ("schedule", "oracle_grid"):
            raise InputError(f"lambda_rule must be 'schedule' or 'oracle_grid', got {self.lambda_rule!r}")
        if self.lambda_rule == "oracle_grid" and not self.lambda_grid:
            raise InputError("lambda_grid is empty but lambda_rule is 'oracle_grid'")
        if not self.sigmas:
            self.sigmas = [1.0] * (self.p + 1)
        if len(self.sigmas) != self.p + 1:
            raise InputError(f"sigmas needs {self.p + 1} entries, got {len(self.sigmas)}")
        if any(s < 0 for s in self.sigmas):
            raise InputError(f"sigmas must be >= 0, got {self.sigmas}")

    def deriv_mask(self) -> tuple[int, ...] | None:
        if self.target == "function":
            return None
        if self.target == "first_partial":
            return tuple(int(k == self.j - 1) for k in range(self.d))
        return (1,) * self.d

    def theory(self) -> Rate:
        return theoretical_exponent(self.m, self.d, self.r, self.p, self.target)

    def lattice_side(self, n: int) -> int:
        side = round(n ** (1.0 / self.d))
        for cand in (side - 1, side, side + 1):
            if cand >= 1 and cand**self.d == n:
                return cand
        lo = math.floor(n ** (1.0 / self.d))
        feasible = sorted({max(lo, 1) ** self.d, (lo + 1) ** self.d})
        raise InputError(f"n={n} is not a {self.d}-dimensional regular lattice size; "
                         f"nearest feasible n: {feasible}")

    def resolved_truth_frequency(self) -> int:
        if self.truth_max_frequency is not None:
            return int(self.truth_max_frequency)
        if self.estimator == "spectral":
            top = max((self.lattice_side(n) - 1) // 2 for n in self.n_grid)
        else:
            top = max(1, int(round(self.n_grid[-1] ** (1.0 / self.d))) // 2)
        # 4x past the largest resolvable frequency, within a memory budget
        freq = 4 * top
        side = max(self.lattice_side(n) for n in self.n_grid) if self.estimator == "spectral" else 1
        while freq > top and ((2 * freq + 1) ** self.d > 2**21 or side * (2 * freq + 1) > 2**24):
            freq -= 1
        return max(freq, 1)


@dataclass
class RateReport:
    config: RateConfig
    rows: list[tuple[int, int, float, float]]
    slope: float
    stderr: float
    theory: Rate
    passed: bool | None

    def mean_errors(self) -> list[tuple[int, float]]:
        by_n: dict[int, list[float]] = {}
        for n, _, err, _ in self.rows:
            by_n.setdefault(n, []).append(err)
        return [(n, math.fsum(v) / len(v)) for n, v in sorted(by_n.items())]

    def to_csv(self) -> str:
        footer = [["slope", self.slope, "", ""],
                  ["stderr", self.stderr, "", ""],
                  ["theory_exponent", self.theory.exponent, "", ""],
                  ["theory_logpower", self.theory.log_power, "", ""],
                  ["pass", "NA" if self.passed is None else self.passed, "", ""]]
        return tables.render({}, ["n", "replicate", "error", "lambda"], self.rows, footer)

    def save(self, path) -> None:
        from pathlib import Path

        Path(path).write_text(self.to_csv())


def _sigma_weights(sigmas):
    # zero-noise channels still need a positive loss weight
    return [s if s > 0 else 1.0 for s in sigmas]


def _run_cell(config: RateConfig, truth, n: int, rep: int) -> tuple[float, float]:
    seed = np.random.SeedSequence([config.seed, rep, n])
    data_seed = int(seed.generate_state(1, np.uint64)[0])
    mask = config.deriv_mask()
    weights = _sigma_weights(config.sigmas)
    if config.estimator == "spectral":
        side = config.lattice_side(n)
        design = make_lattice([side] * config.d)
    else:
        design = IIDUniform(n)
    data = gen_data(truth, design, config.p, config.sigmas, seed=data_seed)

    def fit_at(lam):
        if config.estimator == "spectral":
            return fit_lattice(data, lam, config.m, config.r, weights)
        return fit_regularized(data, lam, config.m, config.r, config.series_cutoff, weights)

    def error(fit):
        if config.estimator == "spectral":
            return spectral_l2_error(fit.theta, truth.theta, mask)
        return l2_error(fit, truth, mask if mask is not None else (0,) * config.d,
                        config.quad_points)

    if config.lambda_rule == "schedule":
        mode = "function" if config.target != "first_partial" else "first_partial"
        lam = tune_lambda(n, config.m, config.d, config.r, config.p, mode, config.lambda_c)
        return error(fit_at(lam)), lam
    curve = [(error(fit_at(lam)), lam) for lam in sorted(config.lambda_grid)]
    best = min(range(len(curve)), key=lambda i: (curve[i][0], i))
    return curve[best]


def run_experiment(config: RateConfig, threads: int = 1,
                   error_hook: Callable[[int, int], float] | None = None) -> RateReport:
    """Run every (n, replicate) cell and fit the log-log slope of mean error.

    The truth for replicate ``i`` is drawn once and reused across the n-grid.
    ``error_hook(n, replicate)`` replaces the estimator entirely (testing).
    Results do not depend on ``threads``.
    """
    if config.estimator == "spectral":
        for n in config.n_grid:
            config.lattice_side(n)
    cells = [(n, rep) for n in config.n_grid for rep in range(config.replicates)]
    if error_hook is not None:
        results = [(float(error_hook(n, rep)), float("nan")) for n, rep in cells]
    else:
        spec = TruthSpec(config.d, config.r, config.m, config.resolved_truth_frequency())
        truths = [sample_truth(spec, int(np.random.SeedSequence([config.seed, rep])
                                         .generate_state(1, np.uint64)[0]))
                  for rep in range(config.replicates)]
        work = lambda cell: _run_cell(config, truths[cell[1]], *cell)
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(work, cells))
        else:
            results = [work(c) for c in cells]
    rows = [(n, rep, err, lam) for (n, rep), (err, lam) in zip(cells, results)]
    report = RateReport(config, rows, 0.0, 0.0, config.theory(), None)
    slope, stderr = fit_slope(report.mean_errors())
    report.slope, report.stderr = slope, stderr
    if config.tolerance is not None:
        report.passed = abs(slope - report.theory.exponent) <= config.tolerance
    return report


def config_dict(config: RateConfig) -> dict:
    return asdict(config)
