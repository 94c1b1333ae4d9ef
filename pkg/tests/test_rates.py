import math

import numpy as np
import pytest

from ssanova_deriv.errors import InputError
from ssanova_deriv.rates import (Rate, RateConfig, fit_slope, run_experiment,
                                 theoretical_exponent, theoretical_terms)


def test_exponent_examples():
    assert theoretical_exponent(2, 1, 1, 0, "function") == (pytest.approx(-0.8), 0.0)
    assert theoretical_exponent(2, 3, 3, 3, "function") == (pytest.approx(-12 / 13), 0.0)
    for d, r in [(1, 1), (3, 2), (4, 4)]:
        assert theoretical_exponent(2, d, r, 1, "first_partial") == (pytest.approx(-2 / 3), 0.0)


def test_terms_list_both_parts_of_full_derivative_rate():
    terms = theoretical_terms(2, 2, 2, 2)
    assert Rate(-1.0, 1.0) in terms and len(terms) == 2


def test_exponent_never_negative_zero():
    rate = theoretical_exponent(2, 1, 1, 0)
    assert math.copysign(1.0, rate.log_power) == 1.0


def test_exponent_rejects_bad_arguments():
    with pytest.raises(InputError):
        theoretical_exponent(2, 2, 3, 0)
    with pytest.raises(InputError):
        theoretical_exponent(1.5, 1, 1, 0)
    with pytest.raises(InputError):
        theoretical_exponent(2, 1, 1, 0, "first_partial")
    with pytest.raises(InputError):
        theoretical_exponent(2, 1, 1, 0, "hessian")


def test_fit_slope_examples():
    slope, _ = fit_slope([(100, 0.1), (200, 0.05), (400, 0.025)])
    assert slope == pytest.approx(-1.0, abs=1e-12)
    assert fit_slope([(100, 3.0), (200, 3.0), (400, 3.0)])[0] == pytest.approx(0.0, abs=1e-12)
    rng = np.random.default_rng(0)
    ns = [256, 512, 1024, 2048, 4096]
    for _ in range(200):
        pairs = [(n, n**-0.8 * (1 + rng.uniform(-0.01, 0.01))) for n in ns]
        assert abs(fit_slope(pairs)[0] + 0.8) <= 0.03
    with pytest.raises(InputError):
        fit_slope([(1, 1.0), (2, 0.5)])
    with pytest.raises(InputError):
        fit_slope([(1, 1.0), (2, 0.0), (3, 0.1)])


def test_injected_power_law():
    cfg = RateConfig(replicates=3)
    report = run_experiment(cfg, error_hook=lambda n, rep: 5.0 * n**-0.8)
    assert report.slope == pytest.approx(-0.8, abs=1e-10)


def test_bias_only_errors_are_monotone():
    cfg = RateConfig(replicates=3, n_grid=[9, 17, 33, 65], sigmas=[0.0],
                     lambda_rule="oracle_grid", lambda_grid=[0.0])
    report = run_experiment(cfg)
    for rep in range(3):
        errs = [e for n, r, e, _ in report.rows if r == rep]
        assert all(b <= a for a, b in zip(errs, errs[1:]))


def test_reports_are_deterministic_and_thread_independent():
    cfg = RateConfig(m=2, d=2, r=2, p=1, replicates=3, n_grid=[36, 64, 100, 144], seed=5)
    a = run_experiment(cfg).to_csv()
    b = run_experiment(cfg, threads=3).to_csv()
    assert a == b


def test_kernel_estimator_runs():
    cfg = RateConfig(estimator="kernel", replicates=3, n_grid=[16, 24, 32, 48], p=1,
                     series_cutoff=None, quad_points=128)
    report = run_experiment(cfg)
    assert len(report.rows) == 12 and all(e > 0 for _, _, e, _ in report.rows)


def test_csv_layout():
    cfg = RateConfig(replicates=3, tolerance=0.1)
    report = run_experiment(cfg, error_hook=lambda n, rep: n**-0.8)
    lines = report.to_csv().splitlines()
    assert lines[0] == "n,replicate,error,lambda"
    assert [ln.split(",")[0] for ln in lines[-5:]] == ["slope", "stderr", "theory_exponent",
                                                     "theory_logpower", "pass"]
    assert lines[-1] == "pass,true,,"


def test_config_validation():
    with pytest.raises(InputError, match="nearest feasible"):
        RateConfig(d=2, n_grid=[16, 36, 50, 64]).resolved_truth_frequency()
    with pytest.raises(InputError):
        RateConfig(n_grid=[256, 128, 512, 1024])
    with pytest.raises(InputError):
        RateConfig(target="mixed_partial", estimator="kernel")
    with pytest.raises(InputError):
        RateConfig(lambda_rule="oracle_grid")
    with pytest.raises(InputError):
        RateConfig(p=1, sigmas=[1.0])
