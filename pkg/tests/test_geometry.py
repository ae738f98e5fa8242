import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.distance import pdist

from mfstune.errors import GeometryError, InvalidArgument
from mfstune.geometry import (
    DEFAULT_COUNTS,
    DEFAULT_HEAD,
    HeadModel,
    ThetaBounds,
    ThetaVector,
    build_center_sets,
    fictitious_radii,
    scaled_counts,
    spiral_points,
)


def test_head_defaults():
    assert DEFAULT_HEAD.radii == (0.1, 0.092, 0.087)
    assert DEFAULT_HEAD.sigmas == (0.33, 0.0125, 0.33)


@pytest.mark.parametrize("radii", [(0.1, 0.1, 0.087), (0.09, 0.092, 0.087), (0.1, 0.092, 0.0)])
def test_head_rejects_unordered_radii(radii):
    with pytest.raises(GeometryError):
        HeadModel(*radii)


def test_head_rejects_nonpositive_conductivity():
    with pytest.raises(GeometryError):
        HeadModel(sigma_skull=0.0)


def test_spiral_two_points_are_the_poles():
    pts = spiral_points(2, 1.0).points
    np.testing.assert_allclose(pts, [[0, 0, -1], [0, 0, 1]], atol=1e-15)


@pytest.mark.parametrize("n", [2, 3, 50, 300, 1000])
def test_spiral_points_on_sphere(n):
    pts = spiral_points(n, 0.092).points
    assert pts.shape == (n, 3)
    np.testing.assert_allclose(np.linalg.norm(pts, axis=1), 0.092, rtol=0, atol=1e-12)


def test_spiral_min_separation_300():
    pts = spiral_points(300, 0.1).points
    ideal = np.sqrt(8 * np.pi / (np.sqrt(3) * 300)) * 0.1
    assert pdist(pts).min() >= 0.5 * ideal


def test_spiral_is_deterministic():
    np.testing.assert_array_equal(spiral_points(137, 0.1).points, spiral_points(137, 0.1).points)


def test_spiral_nearly_balanced():
    pts = spiral_points(1000, 1.0).points
    assert np.linalg.norm(pts.mean(axis=0)) < 5e-3


@pytest.mark.parametrize("n", [0, 1, 2.5])
def test_spiral_rejects_bad_count(n):
    with pytest.raises(InvalidArgument):
        spiral_points(n, 1.0)


def test_fictitious_radii_values():
    rho = fictitious_radii(ThetaVector(1.5, 0.7, 1.3, 0.6, 1.4))
    np.testing.assert_allclose(rho, [0.15, 0.7 * 0.092, 1.3 * 0.092, 0.6 * 0.087, 1.4 * 0.087])


def test_inflated_sphere_on_scalp_is_degenerate():
    with pytest.raises(GeometryError):
        fictitious_radii(ThetaVector(1.0, 0.7, 1.3, 0.6, 1.4))


def test_center_sphere_on_other_interface_is_degenerate():
    # t1d * r_skull == r_brain
    with pytest.raises(GeometryError):
        fictitious_radii(ThetaVector(1.5, 0.087 / 0.092, 1.3, 0.6, 1.4))


@pytest.mark.parametrize("k, value", [(0, 0.95), (1, 1.02), (2, 0.9), (3, 1.1), (4, 0.99)])
def test_center_sphere_inside_own_layer(k, value):
    arr = np.array([1.5, 0.7, 1.3, 0.6, 1.4])
    arr[k] = value
    with pytest.raises(GeometryError):
        fictitious_radii(ThetaVector.from_array(arr))


def test_center_sets_default_counts():
    sets = build_center_sets(ThetaVector(1.5, 0.7, 1.3, 0.6, 1.4))
    assert [s.count for s in sets] == list(DEFAULT_COUNTS)
    assert sum(s.count for s in sets) == 540


def test_single_center_is_south_pole():
    sets = build_center_sets(ThetaVector(1.5, 0.7, 1.3, 0.6, 1.4), counts=(1, 1, 1, 1, 1))
    for s in sets:
        np.testing.assert_allclose(s.points, [[0, 0, -s.radius]])


@settings(max_examples=50, deadline=None)
@given(st.floats(1.05, 2.5), st.floats(1.05, 2.5))
def test_radius_monotone_in_factor(a, b):
    lo, hi = sorted((a, b))
    r_lo = fictitious_radii(ThetaVector(lo, 0.5, 1.3, 0.5, 1.4))[0]
    r_hi = fictitious_radii(ThetaVector(hi, 0.5, 1.3, 0.5, 1.4))[0]
    assert r_lo <= r_hi


def test_bounds_defaults_and_roundtrip():
    b = ThetaBounds()
    np.testing.assert_allclose(b.lo, [1.05, 0.2, 1.05, 0.2, 1.05])
    np.testing.assert_allclose(b.hi, [2.5, 0.95, 2.5, 0.95, 2.5])
    for u in itertools.product([0.0, 0.3, 1.0], repeat=2):
        x = np.r_[u, 0.5, 0.5, 0.5]
        np.testing.assert_allclose(b.normalize(b.denormalize(x)), x, atol=1e-14)
    assert b.contains(ThetaVector.from_array(b.lo))
    assert not b.contains(ThetaVector(3.0, 0.5, 1.5, 0.5, 1.5))


@pytest.mark.parametrize("lower, upper", [
    ((1.0, 0.2, 1.05, 0.2, 1.05), (2.5, 0.95, 2.5, 0.95, 2.5)),
    ((1.05, 0.2, 1.05, 0.2, 1.05), (2.5, 1.0, 2.5, 0.95, 2.5)),
    ((2.5, 0.2, 1.05, 0.2, 1.05), (1.5, 0.95, 2.5, 0.95, 2.5)),
])
def test_bounds_validation(lower, upper):
    with pytest.raises(InvalidArgument):
        ThetaBounds(lower, upper)


def test_theta_needs_five_values():
    with pytest.raises(InvalidArgument):
        ThetaVector.from_array([1, 2, 3])


def test_scaled_counts():
    assert scaled_counts(300) == DEFAULT_COUNTS
    assert scaled_counts(150) == (90, 45, 45, 45, 45)
    assert scaled_counts(75) == (45, 22, 22, 22, 22)
    for n in (75, 150, 300):
        assert 5 * n > sum(scaled_counts(n))
