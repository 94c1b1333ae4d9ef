import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ssanova_deriv.basis import (BasisSpec, anova_components, enumerate_indices, eval_basis,
                                 eval_basis_partial, frequency, from_dense, interaction_order,
                                 penalty_weight, penalty_weights, series_on_grid,
                                 series_on_points, to_dense)
from ssanova_deriv.errors import InputError


def test_enumerate_small_cases():
    assert enumerate_indices(BasisSpec(1, 1, 2, 3)) == [(1,), (2,), (3,)]
    assert enumerate_indices(BasisSpec(2, 1, 2, 3)) == [(1, 1), (2, 1), (3, 1), (1, 2), (1, 3)]
    assert len(enumerate_indices(BasisSpec(2, 2, 2, 3))) == 9


@given(d=st.integers(1, 3), r=st.integers(1, 3), half=st.integers(0, 3))
def test_count_matches_brute_force(d, r, half):
    r = min(r, d)
    c = 2 * half + 1
    spec = BasisSpec(d, r, 2, c)
    brute = sum(1 for nu in np.ndindex(*([c] * d)) if sum(v > 0 for v in nu) <= r)
    assert spec.count() == brute == len(enumerate_indices(spec)) == int(spec.mask().sum())


def test_spec_rejects_bad_arguments():
    with pytest.raises(InputError):
        BasisSpec(2, 3, 2, 5)
    with pytest.raises(InputError):
        BasisSpec(1, 1, 1.5, 5)
    with pytest.raises(InputError):
        BasisSpec(1, 1, 2, 4)


def test_eval_basis_examples():
    assert eval_basis((1, 1), [0.37, 0.91]) == 1.0
    assert eval_basis((2,), [0.0]) == pytest.approx(math.sqrt(2))
    assert eval_basis((3, 2), [0.25, 0.5]) == pytest.approx(-2.0, abs=1e-12)


def test_eval_basis_partial_examples():
    assert eval_basis_partial((1,), [0.3], 0) == 0.0
    assert eval_basis_partial((3,), [0.0], 0) == pytest.approx(2 * math.pi * math.sqrt(2))


def test_index_helpers():
    assert [frequency(v) for v in range(1, 7)] == [0, 1, 1, 2, 2, 3]
    assert interaction_order((1, 4, 1, 2)) == 2
    with pytest.raises(InputError):
        eval_basis((0,), [0.5])


@settings(max_examples=50)
@given(nu=st.tuples(st.integers(1, 9), st.integers(1, 9)),
       t=st.tuples(st.floats(0.01, 0.99), st.floats(0.01, 0.99)), dim=st.integers(0, 1))
def test_partial_matches_finite_difference(nu, t, dim):
    h = 1e-6
    e = np.zeros(2)
    e[dim] = h
    x = np.array(t)
    fd = (eval_basis(nu, x + e) - eval_basis(nu, x - e)) / (2 * h)
    assert eval_basis_partial(nu, x, dim) == pytest.approx(fd, abs=1e-5)


def test_penalty_weight_examples():
    assert penalty_weight((1, 1), 2) == 0
    assert penalty_weight((4,), 2) == 16
    assert penalty_weight((2, 3), 2) == 1
    W = penalty_weights((5, 5), 2)
    for nu in np.ndindex(5, 5):
        assert W[nu] == penalty_weight(tuple(v + 1 for v in nu), 2)


def test_dense_round_trip():
    coeffs = {(1, 1): 0.5, (3, 2): -1.25, (1, 5): 2.0}
    theta = to_dense(coeffs)
    assert theta.shape == (3, 5)
    assert from_dense(theta, theta != 0) == coeffs


def test_anova_components_grouping():
    comps = anova_components({(2, 1): 1.0, (2, 2): 0.5})
    t = np.array([0.2, 0.7])
    c2 = lambda s: math.sqrt(2) * math.cos(2 * math.pi * s)
    assert comps[frozenset({0})](t) == pytest.approx(c2(0.2))
    assert comps[frozenset({0, 1})](t) == pytest.approx(0.5 * c2(0.2) * c2(0.7))
    const = anova_components({(1, 1): 3.0})
    assert list(const) == [frozenset()] and const[frozenset()](t) == 3.0


def test_anova_components_reconstruct_series():
    rng = np.random.default_rng(0)
    theta = rng.standard_normal((5, 5, 3)) * BasisSpec(3, 2, 2, (5, 5, 3)).mask()
    comps = anova_components(from_dense(theta))
    pts = rng.random((50, 3))
    total = sum(f(pts) for f in comps.values())
    assert np.abs(total - series_on_points(theta, pts)).max() < 1e-12


def test_series_on_grid_matches_points():
    rng = np.random.default_rng(1)
    theta = rng.standard_normal((5, 3))
    axes = [np.linspace(0, 1, 7), np.linspace(0, 1, 4)]
    pts = np.stack([g.reshape(-1) for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    for mask in (None, (1, 0), (1, 1)):
        grid = series_on_grid(theta, axes, mask).reshape(-1)
        assert np.allclose(grid, series_on_points(theta, pts, mask), atol=1e-12)
