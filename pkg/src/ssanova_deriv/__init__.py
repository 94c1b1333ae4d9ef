"""Smoothing-spline ANOVA regression with partial-derivative observations."""
from .basis import (BasisSpec, enumerate_indices, eval_basis, eval_basis_partial,
                    penalty_weight)
from .data import Channel, DerivativeDataset
from .errors import CapabilityError, DegenerateSystemError, InputError
from .kernel import AnovaKernel, KernelFit, PeriodicKernel, fit_regularized, predict
from .lattice import (LatticeDesign, SpectralFit, evaluate_fit, fit_lattice,
                      make_lattice, shrink, transform, tune_lambda)
from .rates import (Rate, RateConfig, RateReport, fit_slope, run_experiment,
                    theoretical_exponent)
from .sim import IIDDensity, IIDUniform, Truth, TruthSpec, gen_data, l2_error, sample_truth

__all__ = [
    "AnovaKernel", "BasisSpec", "CapabilityError", "Channel", "DegenerateSystemError",
    "DerivativeDataset", "IIDDensity", "IIDUniform", "InputError", "KernelFit",
    "LatticeDesign", "PeriodicKernel", "Rate", "RateConfig", "RateReport", "SpectralFit",
    "Truth", "TruthSpec", "enumerate_indices", "eval_basis", "eval_basis_partial",
    "evaluate_fit", "fit_lattice", "fit_regularized", "fit_slope", "gen_data", "l2_error",
    "make_lattice", "penalty_weight", "predict", "run_experiment", "sample_truth", "shrink",
    "theoretical_exponent", "transform", "tune_lambda",
]
