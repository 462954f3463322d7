"""Unit tests for the groups module."""

import numpy as np
import pytest
from scipy.linalg import expm

from lie_entropy.groups import (
    AffPlusGroup,
    ChartViolation,
    EuclideanGroup,
    HeisenbergGroup,
    OutsideChart,
    TorusGroup,
    group_from_name,
    wrap_unit,
)
from lie_entropy.errors import ValidationError

ALL_GROUPS = [EuclideanGroup(2), AffPlusGroup(), HeisenbergGroup(), TorusGroup()]


def heisenberg_matrix(g):
    return np.array([[1.0, g[1], g[0]], [0.0, 1.0, g[2]], [0.0, 0.0, 1.0]])


def aff_matrix(g):
    return np.array([[g[0], g[1]], [0.0, 1.0]])


def test_aff_product_example():
    """(2, 3)(4, 5) = (8, 13)."""
    np.testing.assert_allclose(AffPlusGroup().product([2.0, 3.0], [4.0, 5.0]), [8.0, 13.0])


def test_aff_inverse_example():
    np.testing.assert_allclose(AffPlusGroup().inverse([2.0, 3.0]), [0.5, -1.5])


def test_heisenberg_product_example():
    """(1, 2, 3)(4, 5, 6) = (17, 7, 9)."""
    np.testing.assert_allclose(HeisenbergGroup().product([1.0, 2.0, 3.0], [4.0, 5.0, 6.0]), [17.0, 7.0, 9.0])


def test_torus_inverse_example():
    np.testing.assert_allclose(TorusGroup().inverse([0.25, 0.75]), [0.75, 0.25])


@pytest.mark.parametrize("group", ALL_GROUPS, ids=lambda g: g.name)
def test_identity_and_inverse(group, rng):
    g = group.random_points(rng, 100, 0.5)
    e = group.identity()
    np.testing.assert_allclose(group.product(e, g), g, atol=1e-12)
    np.testing.assert_allclose(group.inverse(e), e, atol=1e-12)
    assert np.max(group.chart_distance(group.product(g, group.inverse(g)), e)) <= 1e-12


@pytest.mark.parametrize("group", ALL_GROUPS, ids=lambda g: g.name)
def test_axioms_on_samples(group, rng):
    report = group.check_axioms(rng, n=10_000)
    assert report.samples == 10_000
    assert report.passed()


@pytest.mark.parametrize("group", ALL_GROUPS, ids=lambda g: g.name)
def test_exp_zero_is_identity(group):
    np.testing.assert_allclose(group.exp(np.zeros(group.dimension)), group.identity(), atol=1e-15)


def test_euclidean_exp_is_identity_chart(rng):
    X = rng.standard_normal((10, 3))
    np.testing.assert_allclose(EuclideanGroup(3).exp(X), X)


def test_heisenberg_matches_matrix_oracle(rng):
    group = HeisenbergGroup()
    a = group.random_points(rng, 100)
    b = group.random_points(rng, 100)
    prod = group.product(a, b)
    for i in range(100):
        expected = heisenberg_matrix(a[i]) @ heisenberg_matrix(b[i])
        np.testing.assert_allclose(heisenberg_matrix(prod[i]), expected, atol=1e-12)
    X = rng.standard_normal((100, 3))
    g = group.exp(X)
    for i in range(100):
        algebra = np.array([[0.0, X[i, 1], X[i, 0]], [0.0, 0.0, X[i, 2]], [0.0, 0.0, 0.0]])
        np.testing.assert_allclose(heisenberg_matrix(g[i]), expm(algebra), atol=1e-12)
    np.testing.assert_allclose(group.exp(group.log(g)), g, atol=1e-12)


def test_aff_matches_matrix_oracle(rng):
    group = AffPlusGroup()
    a = group.random_points(rng, 100)
    b = group.random_points(rng, 100)
    prod = group.product(a, b)
    inv = group.inverse(a)
    for i in range(100):
        np.testing.assert_allclose(aff_matrix(prod[i]), aff_matrix(a[i]) @ aff_matrix(b[i]), atol=1e-12)
        np.testing.assert_allclose(aff_matrix(inv[i]), np.linalg.inv(aff_matrix(a[i])), atol=1e-12)
    X = rng.standard_normal((100, 2))
    g = group.exp(X)
    for i in range(100):
        algebra = np.array([[X[i, 0], X[i, 1]], [0.0, 0.0]])
        np.testing.assert_allclose(aff_matrix(g[i]), expm(algebra), atol=1e-12)


def test_aff_exp_small_first_coordinate():
    g = AffPlusGroup().exp([0.0, 2.0])
    np.testing.assert_allclose(g, [1.0, 2.0])
    np.testing.assert_allclose(AffPlusGroup().log(g), [0.0, 2.0])


def test_chart_violations():
    with pytest.raises(ChartViolation):
        AffPlusGroup().product([0.0, 1.0], [1.0, 0.0])
    with pytest.raises(ChartViolation):
        AffPlusGroup().inverse([-1.0, 0.0])
    with pytest.raises(ChartViolation):
        TorusGroup().product([1.0, 0.2], [0.1, 0.1])
    with pytest.raises(ChartViolation):
        EuclideanGroup(1).distance([np.nan], [0.0])
    with pytest.raises(ValidationError):
        HeisenbergGroup().product([1.0, 2.0], [1.0, 2.0])


def test_torus_log_outside_chart():
    with pytest.raises(OutsideChart):
        TorusGroup().log([0.5, 0.1])
    np.testing.assert_allclose(TorusGroup().log([0.75, 0.25]), [-0.25, 0.25])


def test_torus_wrap():
    np.testing.assert_allclose(wrap_unit(np.array([1.25, -0.25, 1.0])), [0.25, 0.75, 0.0])
    np.testing.assert_allclose(TorusGroup().product([0.75, 0.5], [0.5, 0.5]), [0.25, 0.0])


@pytest.mark.parametrize("group", ALL_GROUPS, ids=lambda g: g.name)
def test_distance_metric_properties(group, rng):
    x, y, z = (group.random_points(rng, 1000, 0.7) for _ in range(3))
    assert np.all(group.distance(x, x) <= 1e-12)
    np.testing.assert_allclose(group.distance(x, y), group.distance(y, x), atol=1e-12)
    assert np.all(group.distance(x, z) <= group.distance(x, y) + group.distance(y, z) + 1e-12)
    g = group.random_points(rng, 1000, 0.7)
    left = np.abs(group.distance(group.product(g, x), group.product(g, y)) - group.distance(x, y))
    assert left.max() <= 1e-9


def test_euclidean_distance_is_norm():
    np.testing.assert_allclose(EuclideanGroup(2).distance([0.0, 0.0], [3.0, 4.0]), 5.0)


def test_torus_distance_wraps():
    assert TorusGroup().distance([0.05, 0.0], [0.95, 0.0]) == pytest.approx(0.1)


def test_alternative_distance_is_left_invariant(rng):
    group = HeisenbergGroup()
    g, x, y = (group.random_points(rng, 200, 0.5) for _ in range(3))
    diff = group.alternative_distance(group.product(g, x), group.product(g, y)) - group.alternative_distance(x, y)
    assert np.max(np.abs(diff)) <= 1e-9


def test_bracket_and_ad():
    group = HeisenbergGroup()
    np.testing.assert_allclose(group.bracket([0.0, 1.0, 0.0], [0.0, 0.0, 1.0]), [1.0, 0.0, 0.0])
    np.testing.assert_allclose(group.ad([0.0, 1.0, 0.0]) @ np.array([0.0, 0.0, 1.0]), [1.0, 0.0, 0.0])
    aff = AffPlusGroup()
    np.testing.assert_allclose(aff.bracket([1.0, 0.0], [0.0, 1.0]), [0.0, 1.0])
    assert np.all(EuclideanGroup(3).ad([1.0, 2.0, 3.0]) == 0.0)


@pytest.mark.parametrize("group", [EuclideanGroup(2), AffPlusGroup(), HeisenbergGroup()], ids=lambda g: g.name)
def test_neighborhood_bounds_contain_balls(group, rng):
    lower = group.identity() - 0.1
    upper = group.identity() + 0.1
    radius = 0.3
    lo, hi = group.neighborhood_bounds(lower, upper, radius)
    base = lower + (upper - lower) * rng.random((2000, group.dimension))
    candidates = base + rng.uniform(-2.0, 2.0, (2000, group.dimension)) * radius
    if isinstance(group, AffPlusGroup):
        candidates[:, 0] = np.abs(candidates[:, 0]) + 1e-3
    near = group.distance(base, candidates) < radius
    inside = np.all((candidates >= lo) & (candidates <= hi), axis=-1)
    assert np.all(inside[near])


def test_group_from_name():
    assert group_from_name("euclidean:3") == EuclideanGroup(3)
    assert group_from_name("euclidean").dimension == 1
    assert isinstance(group_from_name("AFF_PLUS"), AffPlusGroup)
    assert isinstance(group_from_name("heisenberg3"), HeisenbergGroup)
    assert isinstance(group_from_name("torus2"), TorusGroup)
    with pytest.raises(ValidationError):
        group_from_name("euclidean:x")
    with pytest.raises(ValidationError):
        group_from_name("sl2")
