import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from logbergman.exceptions import (
    DimensionMismatchError,
    DomainError,
    InvalidPointError,
    NotOnSubvarietyError,
    RankDeficientError,
)
from logbergman.geometry import (
    AffineChartPoint,
    LinearSubvariety,
    ProjectivePoint,
    adapted_frame,
    distance_to_subvariety,
    fs_distance,
    fubini_study_potential,
    point_at_distance,
)

import oracles

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def complex_vectors(n):
    return st.lists(st.tuples(finite, finite), min_size=n, max_size=n).map(
        lambda xs: np.array([complex(a, b) for a, b in xs])
    ).filter(lambda z: np.linalg.norm(z) > 1e-6)


# -- points and charts ---------------------------------------------------------


def test_zero_vector_rejected():
    with pytest.raises(InvalidPointError):
        ProjectivePoint([0, 0])
    with pytest.raises(InvalidPointError):
        ProjectivePoint([1, np.nan])


def test_chart_round_trip_default_pivot():
    p = ProjectivePoint([2.0, 1j, -4.0])
    c = p.to_chart()
    assert c.chart_index == 2
    q = c.to_projective()
    assert fs_distance(p, q) < 1e-15


def test_point_outside_chart():
    with pytest.raises(DomainError):
        ProjectivePoint([0, 1]).to_chart(0)


def test_chart_index_range():
    with pytest.raises(DimensionMismatchError):
        AffineChartPoint(3, [1.0, 2.0])


def test_huge_coordinates_do_not_overflow():
    p = ProjectivePoint([1e300, 1e300])
    assert np.allclose(np.abs(p.unit()), [2**-0.5, 2**-0.5])


# -- distance ------------------------------------------------------------------------


def test_fs_distance_examples():
    assert fs_distance([1, 0], [1, 0]) == 0.0
    assert fs_distance([1, 0], [0, 1]) == pytest.approx(math.pi / 2, abs=1e-15)
    assert fs_distance([1, 1], [1, 0]) == pytest.approx(math.acos(2**-0.5), abs=1e-15)


def test_fs_distance_small_angles_are_accurate():
    # arccos would lose half the digits here; compare against 50-digit arithmetic
    p = np.array([1.0, 1e-9, 0])
    q = np.array([1.0, 0, 0])
    assert fs_distance(p, q) == pytest.approx(float(oracles.fs_distance(p, q)), rel=1e-12)


@given(complex_vectors(3), complex_vectors(3))
@settings(max_examples=60, deadline=None)
def test_fs_distance_matches_oracle_and_is_symmetric(p, q):
    d = fs_distance(p, q)
    assert 0 <= d <= math.pi / 2 + 1e-15
    assert d == pytest.approx(fs_distance(q, p), abs=1e-14)
    assert d == pytest.approx(float(oracles.fs_distance(p, q)), abs=1e-12)


@given(complex_vectors(3), st.floats(0, 2 * math.pi), st.floats(0.1, 10))
@settings(max_examples=40, deadline=None)
def test_fs_distance_is_projective(p, theta, scale):
    q = p * scale * np.exp(1j * theta)
    assert fs_distance(p, q) < 1e-7


def test_fs_distance_unitary_invariance(rng):
    for _ in range(10):
        U, _ = np.linalg.qr(rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4)))
        p, q = rng.standard_normal((2, 4)) + 1j * rng.standard_normal((2, 4))
        assert fs_distance(U @ p, U @ q) == pytest.approx(fs_distance(p, q), abs=1e-13)


def test_fs_distance_triangle_inequality(rng):
    P = rng.standard_normal((200, 3, 3)) + 1j * rng.standard_normal((200, 3, 3))
    a, b, c = P[:, 0], P[:, 1], P[:, 2]
    assert np.all(fs_distance(a, c) <= fs_distance(a, b) + fs_distance(b, c) + 1e-13)


# -- linear subvarieties ------------------------------------------------------------


def test_distance_to_subvariety_examples():
    V1 = LinearSubvariety.coordinate_model(1, 1)
    assert distance_to_subvariety([1, 0], V1) == 0.0
    assert distance_to_subvariety([1, 1], V1) == pytest.approx(math.pi / 4, abs=1e-15)
    V2 = LinearSubvariety.coordinate_model(2, 1)
    assert distance_to_subvariety([1, 1j, 0], V2) == pytest.approx(math.pi / 4, abs=1e-15)


def test_distance_to_subvariety_brute_force(rng):
    """Minimum distance to sampled points of V agrees with the closed form."""
    V = LinearSubvariety.random(3, 1, rng)
    T = V.tangent_basis()
    samples = (rng.standard_normal((20000, 3)) + 1j * rng.standard_normal((20000, 3))) @ T
    for _ in range(3):
        p = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        d = distance_to_subvariety(p, V)
        nearest = V.nearest_point(p)
        assert fs_distance(p, nearest) == pytest.approx(d, abs=1e-13)
        assert np.min(fs_distance(samples, p)) >= d - 1e-13
        assert np.min(fs_distance(samples, p)) <= d + 0.1


def test_subvariety_validation():
    with pytest.raises(RankDeficientError):
        LinearSubvariety(2, np.array([[1, 0, 0], [2, 0, 0]]))
    with pytest.raises(DimensionMismatchError):
        distance_to_subvariety([1, 0], LinearSubvariety.coordinate_model(2, 1))


def test_subvariety_json_round_trip(tmp_path, rng):
    V = LinearSubvariety.random(3, 2, rng)
    path = tmp_path / "v.json"
    path.write_text(json.dumps(V.to_json()))
    W = LinearSubvariety.load(path)
    p = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    assert distance_to_subvariety(p, W) == pytest.approx(distance_to_subvariety(p, V), abs=1e-15)


def test_through_points_contains_them(rng):
    pts = rng.standard_normal((2, 4)) + 1j * rng.standard_normal((2, 4))
    V = LinearSubvariety.through_points(pts)
    assert V.dim == 1 and V.codim == 2
    assert all(V.contains(p) for p in pts)


def test_nearest_point_undefined_at_max_distance():
    V = LinearSubvariety.coordinate_model(1, 1)
    with pytest.raises(DomainError):
        V.nearest_point([0, 1])


def test_point_at_distance_is_exact(rng):
    V = LinearSubvariety.random(3, 2, rng)
    r = np.linspace(0, 1.5, 7)
    pts = point_at_distance(V, r, rng)
    assert np.allclose(distance_to_subvariety(pts, V), r, atol=1e-14)


# -- adapted frames -------------------------------------------------------------------


def test_coordinate_model_frame_is_identity():
    V = LinearSubvariety.coordinate_model(3, 2)
    U = adapted_frame(V, [1, 0, 0, 0]).unitary
    assert np.allclose(U, np.eye(4), atol=1e-15)


def test_frame_for_antidiagonal_point():
    V = LinearSubvariety(1, np.array([[1.0, 1.0]]))
    frame = adapted_frame(V)
    U = frame.unitary
    assert np.allclose(U @ U.conj().T, np.eye(2), atol=1e-14)
    assert np.allclose(U[1], np.array([1, 1]) / math.sqrt(2))
    W = frame.apply(np.array([1, 1]) / math.sqrt(2))
    assert abs(W[0]) < 1e-15 and abs(W[1]) == pytest.approx(1.0)


@given(st.integers(1, 4), st.data())
@settings(max_examples=30, deadline=None)
def test_frame_invariants_random(N, data):
    seed = data.draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    c = data.draw(st.integers(1, N))
    V = LinearSubvariety.random(N, c, rng)
    T = V.tangent_basis()
    base = (rng.standard_normal(T.shape[0]) + 1j * rng.standard_normal(T.shape[0])) @ T
    frame = adapted_frame(V, base)
    U = frame.unitary
    assert np.allclose(U @ U.conj().T, np.eye(N + 1), atol=1e-12)
    W = frame.apply(base / np.linalg.norm(base))
    assert abs(abs(W[0]) - 1) < 1e-12 and np.allclose(W[1:], 0, atol=1e-12)
    # points of V have vanishing normal coordinates in the frame
    v = (rng.standard_normal(T.shape[0]) + 1j * rng.standard_normal(T.shape[0])) @ T
    assert np.allclose(frame.apply(v)[1 : c + 1], 0, atol=1e-12)
    # distances are frame-independent and the chart gives tan r
    p = rng.standard_normal(N + 1) + 1j * rng.standard_normal(N + 1)
    zn, zt = frame.split_chart(p)
    d = distance_to_subvariety(p, V)
    assert np.isclose(distance_to_subvariety(frame.apply(p), LinearSubvariety.coordinate_model(N, c)), d)
    tn, tt = np.sum(np.abs(zn) ** 2), np.sum(np.abs(zt) ** 2)
    assert math.tan(d) ** 2 == pytest.approx(tn / (1 + tt), rel=1e-10)
    assert np.allclose(frame.pull_back(frame.apply(p)), p)


def test_frame_base_point_must_lie_on_V():
    V = LinearSubvariety.coordinate_model(2, 1)
    with pytest.raises(NotOnSubvarietyError):
        adapted_frame(V, [1, 1, 0])


def test_potential_values():
    assert fubini_study_potential([0]) == 0.0
    assert fubini_study_potential([1.0]) == pytest.approx(math.log(2))
    assert fubini_study_potential([3.0]) == pytest.approx(math.log(10))
