"""Unit tests for the regions module."""

import numpy as np
import pytest

from lie_entropy.errors import ValidationError
from lie_entropy.groups import AffPlusGroup, EuclideanGroup, HeisenbergGroup, TorusGroup
from lie_entropy.regions import BallRegion, BoxRegion, region_from_mapping


def test_box_grid_includes_endpoints():
    grid = BoxRegion([-0.5], [0.5]).grid(0.25)
    np.testing.assert_allclose(grid[:, 0], [-0.5, -0.25, 0.0, 0.25, 0.5])


def test_box_grid_degenerate_axis_and_order():
    grid = BoxRegion([0.0, 0.3], [0.1, 0.3]).grid(0.05)
    assert grid.shape == (3, 2)
    np.testing.assert_allclose(grid[:, 1], 0.3)
    assert np.all(np.diff(grid[:, 0]) > 0)
    assert BoxRegion([0.0, 0.3], [0.1, 0.3]).degenerate


def test_box_grid_spacing_never_exceeds_rho():
    grid = BoxRegion([0.0], [1.0]).grid(0.3)
    assert np.max(np.diff(grid[:, 0])) <= 0.3


def test_box_validation():
    with pytest.raises(ValidationError):
        BoxRegion([1.0], [0.0])
    with pytest.raises(ValidationError):
        BoxRegion([0.0, 0.0], [1.0])
    with pytest.raises(ValidationError):
        BoxRegion([0.0], [1.0]).grid(0.0)


def test_box_neighborhood_euclidean():
    box = BoxRegion([-1.0, -1.0], [1.0, 1.0])
    group = EuclideanGroup(2)
    points = np.array([[0.0, 0.0], [1.05, 0.0], [1.1, 0.0], [1.05, 1.05]])
    np.testing.assert_array_equal(box.contains(group, points), [True, False, False, False])
    np.testing.assert_array_equal(box.neighborhood_contains(group, points, 0.1), [True, True, False, True])
    np.testing.assert_array_equal(box.neighborhood_contains(group, points, 0.0), [True, False, False, False])


def test_box_neighborhood_torus_wraps():
    box = BoxRegion([0.0, 0.4], [0.1, 0.6])
    group = TorusGroup()
    points = np.array([[0.97, 0.5], [0.5, 0.5], [0.05, 0.67]])
    np.testing.assert_array_equal(box.neighborhood_contains(group, points, 0.05), [True, False, False])
    np.testing.assert_array_equal(box.neighborhood_contains(group, points, 0.08), [True, False, True])


def test_box_neighborhood_nonabelian_uses_group_distance():
    group = HeisenbergGroup()
    box = BoxRegion([-0.1, -0.1, -0.1], [0.1, 0.1, 0.1])
    inside = np.array([[0.05, 0.0, 0.0]])
    near = np.array([[0.0, 0.15, 0.0]])
    far = np.array([[0.0, 0.5, 0.0]])
    assert box.neighborhood_contains(group, inside, 0.1)[0]
    assert box.neighborhood_contains(group, near, 0.1)[0]
    assert not box.neighborhood_contains(group, far, 0.1)[0]


def test_chart_bounds_cover_neighborhood(rng):
    group = AffPlusGroup()
    box = BoxRegion([0.9, 0.2], [1.1, 0.3])
    lo, hi = box.chart_bounds(group, 0.2)
    samples = np.column_stack([rng.uniform(0.3, 3.0, 5000), rng.uniform(-1.5, 1.5, 5000)])
    near = box.neighborhood_contains(group, samples, 0.2)
    assert np.all(np.all((samples >= lo) & (samples <= hi), axis=-1)[near])
    lo0, hi0 = box.chart_bounds(group)
    np.testing.assert_allclose(lo0, [0.9, 0.2])
    np.testing.assert_allclose(hi0, [1.1, 0.3])


def test_chart_volume_and_center():
    box = BoxRegion([0.0, -1.0], [2.0, 1.0])
    assert box.chart_volume() == pytest.approx(4.0)
    np.testing.assert_allclose(box.center, [1.0, 0.0])
    assert box.to_dict() == {"lower": [0.0, -1.0], "upper": [2.0, 1.0]}


def test_ball_region():
    group = EuclideanGroup(2)
    ball = BallRegion([0.0, 0.0], 1.0)
    points = np.array([[0.5, 0.5], [1.0, 0.0], [1.05, 0.0]])
    np.testing.assert_array_equal(ball.contains(group, points), [True, True, False])
    np.testing.assert_array_equal(ball.neighborhood_contains(group, points, 0.1), [True, True, True])
    lo, hi = ball.chart_bounds(group, 0.5)
    np.testing.assert_allclose(lo, [-1.5, -1.5])
    np.testing.assert_allclose(hi, [1.5, 1.5])
    assert ball.to_dict() == {"center": [0.0, 0.0], "radius": 1.0}
    with pytest.raises(ValidationError):
        BallRegion([0.0], 0.0)


def test_region_from_mapping():
    box = region_from_mapping({"K_lower": [-0.5], "K_upper": [0.5]}, "K")
    assert isinstance(box, BoxRegion)
    assert box.lower == (-0.5,)
    ball = region_from_mapping({"Q_center": [1.0, 0.0], "Q_radius": 2.0}, "Q")
    assert isinstance(ball, BallRegion)
    assert ball.radius == 2.0
    with pytest.raises(ValidationError, match="both"):
        region_from_mapping({"K_lower": [0.0]}, "K")
    with pytest.raises(ValidationError, match="No region"):
        region_from_mapping({}, "Q")
