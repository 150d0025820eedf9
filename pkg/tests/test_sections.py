import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from logbergman.exceptions import DegenerateSectionError
from logbergman.geometry import LinearSubvariety, point_at_distance
from logbergman.kernels import dim_sections, normalized_kernel
from logbergman.sections import (
    SectionCoeffs,
    build_basis,
    cp1_inner_product,
    derivative_section,
    extension_norm,
    fubini_study_weight,
    gram_oracle_basis,
    graded_lex,
    peak_section,
    perturbed_weight,
    project_split,
    restriction_operator,
    split_by_subvariety,
)

import oracles


def test_graded_lex_order():
    assert graded_lex(2, 2).tolist() == [[0, 0], [1, 0], [0, 1], [2, 0], [1, 1], [0, 2]]
    assert len(graded_lex(3, 4)) == dim_sections(3, 4)


@pytest.mark.parametrize(
    "N,k,expected",
    [(1, 1, [2, 2]), (1, 2, [3, 6, 3]), (2, 1, [3, 3, 3])],
)
def test_basis_coefficients(N, k, expected):
    basis = build_basis(N, k)
    assert np.allclose(np.exp(2 * basis.log_coeffs), expected, rtol=1e-14)


@pytest.mark.parametrize("k", [1, 2, 7, 15])
def test_basis_is_orthonormal_by_quadrature(k):
    """Gram matrix by 2D quadrature, independent of the closed form: identity."""
    n = k + 1
    G = np.array([[cp1_inner_product(k, np.eye(n)[i], np.eye(n)[j]) for j in range(n)] for i in range(n)])
    assert np.allclose(G, np.eye(n), atol=1e-10)


@given(st.integers(1, 3), st.integers(0, 12), st.integers(0, 2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_reproducing_sum_is_N_k(N, k, seed):
    rng = np.random.default_rng(seed)
    basis = build_basis(N, k)
    p = rng.standard_normal(N + 1) + 1j * rng.standard_normal(N + 1)
    assert basis.bergman_sum(p) == pytest.approx(dim_sections(N, k), rel=1e-12)


def test_peak_section_at_origin():
    basis = build_basis(2, 3)
    s = peak_section(basis, [1, 0, 0])
    expected = np.zeros(len(basis))
    expected[0] = 1
    assert np.allclose(s.coeffs, expected, atol=1e-15)


@given(st.integers(1, 3), st.integers(1, 20), st.integers(0, 2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_peak_sections_reproduce(N, k, seed):
    rng = np.random.default_rng(seed)
    basis = build_basis(N, k)
    p, q = rng.standard_normal((2, N + 1)) + 1j * rng.standard_normal((2, N + 1))
    sp, sq = peak_section(basis, p), peak_section(basis, q)
    assert sp.norm() == pytest.approx(1.0, rel=1e-12)
    assert basis.pointwise_norm_sq(sp.coeffs, p) == pytest.approx(dim_sections(N, k), rel=1e-11)
    assert abs(sp.inner(sq)) == pytest.approx(normalized_kernel(N, k, p, q), rel=1e-9, abs=1e-15)


def test_section_arithmetic():
    basis = build_basis(1, 3)
    a = SectionCoeffs(np.array([1, 0, 0, 0]), basis)
    b = SectionCoeffs(np.array([0, 1j, 0, 0]), basis)
    assert (a + b).norm() == pytest.approx(math.sqrt(2))
    assert a.inner(b) == 0
    with pytest.raises(ValueError):
        SectionCoeffs(np.zeros(3), basis)


# -- splitting by V ------------------------------------------------------------------


def test_split_dimensions():
    s = split_by_subvariety(build_basis(1, 3), LinearSubvariety.coordinate_model(1, 1))
    assert s.perp_idx.tolist() == [0]
    s = split_by_subvariety(build_basis(2, 2), LinearSubvariety.coordinate_model(2, 1))
    assert s.perp_idx.size == 3
    assert s.basis.alphas[s.perp_idx, 0].tolist() == [0, 0, 0]
    s = split_by_subvariety(build_basis(2, 2), LinearSubvariety.coordinate_model(2, 2))
    assert s.perp_idx.size == 1


def test_perp_dimension_is_that_of_V_sections(rng):
    for N, c, k in ((3, 1, 4), (3, 2, 5), (4, 3, 3)):
        V = LinearSubvariety.random(N, c, rng)
        s = split_by_subvariety(build_basis(N, k), V)
        assert s.perp_idx.size == dim_sections(N - c, k)


def test_split_of_section_in_H_kV():
    V = LinearSubvariety.coordinate_model(2, 1)
    split = split_by_subvariety(build_basis(2, 3), V)
    c = np.zeros(len(split.basis), dtype=complex)
    c[split.in_V_idx] = 1.0
    s1, s2 = project_split(SectionCoeffs(c, split.basis), split)
    assert s2.norm() == 0.0
    assert s1.norm() == pytest.approx(math.sqrt(split.in_V_idx.size))


def test_peak_section_on_V_is_orthogonal_to_H_kV(rng):
    V = LinearSubvariety.random(2, 1, rng)
    split = split_by_subvariety(build_basis(2, 6), V)
    v = point_at_distance(V, 0.0, rng)
    s1, s2 = project_split(peak_section(split.basis, split.to_frame(v)), split)
    assert s1.norm() < 1e-14
    assert s2.norm() == pytest.approx(1.0)


def test_peak_section_far_from_V_is_almost_in_H_kV(rng):
    k = 256
    V = LinearSubvariety.coordinate_model(1, 1)
    split = split_by_subvariety(build_basis(1, k), V)
    p = point_at_distance(V, math.log(k) / math.sqrt(k), rng)
    _, s2 = project_split(peak_section(split.basis, split.to_frame(p)), split)
    assert s2.norm() ** 2 <= math.exp(-math.log(k) ** 2 * 0.9)


def test_derivative_section_cp1():
    for k in (1, 5, 40):
        basis = build_basis(1, k)
        s = derivative_section(basis, [0.0], [1.0])
        assert s.norm() == pytest.approx(1.0)
        assert np.flatnonzero(np.abs(s.coeffs) > 0).tolist() == [1]
        split = split_by_subvariety(basis, LinearSubvariety.coordinate_model(1, 1))
        assert project_split(s, split)[1].norm() == 0.0
    with pytest.raises(DegenerateSectionError):
        derivative_section(build_basis(1, 0), [0.0], [1.0])


def test_derivative_section_cp2_line():
    """At a point of V the projection onto H_perp carries only the tangential part of u."""
    V = LinearSubvariety.coordinate_model(2, 1)
    for k in (8, 64, 256):
        basis = build_basis(2, k)
        split = split_by_subvariety(basis, V)
        normal = derivative_section(basis, [0, 0], [1, 0])
        assert project_split(normal, split)[1].norm() == 0.0
        u = np.array([0.6, 0.8j])
        tilted = derivative_section(basis, [0, 0], u)
        assert project_split(tilted, split)[1].norm() ** 2 == pytest.approx(0.64, rel=1e-12)


def test_derivative_section_direction_must_be_unit():
    with pytest.raises(ValueError):
        derivative_section(build_basis(2, 3), [0, 0], [1, 1])


# -- restriction operator -------------------------------------------------------------


def test_restriction_cp1_point():
    for k in (1, 4, 9):
        op = restriction_operator(split_by_subvariety(build_basis(1, k), LinearSubvariety.coordinate_model(1, 1)))
        assert op.singular_values.size == 1
        assert op.singular_values[0] ** 2 == pytest.approx(k + 1, rel=1e-14)
        assert extension_norm(op) == pytest.approx(1 / (k + 1), rel=1e-13)


def test_restriction_cp2_line():
    V = LinearSubvariety.coordinate_model(2, 1)
    op = restriction_operator(split_by_subvariety(build_basis(2, 2), V))
    assert np.allclose(op.singular_values**2, [2, 2, 2], rtol=1e-14)
    op = restriction_operator(split_by_subvariety(build_basis(2, 8), V))
    assert extension_norm(op) == pytest.approx(1 / 5, rel=1e-13)


def test_restriction_spectrum_is_frame_independent(rng):
    V = LinearSubvariety.random(3, 1, rng)
    op = restriction_operator(split_by_subvariety(build_basis(3, 5), V))
    assert np.all(op.singular_values > 0)
    assert np.all(np.diff(op.singular_values) <= 1e-12)
    assert op.sigma_min_sq == pytest.approx(dim_sections(3, 5) / dim_sections(2, 5), rel=1e-12)


def test_restriction_brute_force_cp1():
    """sigma^2 = |s_0(p)|^2 / ||s_0||^2 with the norm computed by quadrature."""
    k = 6
    e0 = np.eye(k + 1)[0]
    norm_sq = cp1_inner_product(k, e0, e0).real
    value_sq = math.exp(2 * build_basis(1, k).log_coeffs[0])
    op = restriction_operator(split_by_subvariety(build_basis(1, k), LinearSubvariety.coordinate_model(1, 1)))
    assert op.sigma_max_sq == pytest.approx(value_sq / norm_sq, rel=1e-10)


# -- quadrature oracle ------------------------------------------------------------------


def test_gram_oracle_fubini_study_norms():
    k = 10
    qb = gram_oracle_basis(k)
    exact = np.array([1 / ((k + 1) * math.comb(k, j)) for j in range(k + 1)])
    assert np.allclose(np.exp(qb.log_norms), exact, rtol=1e-8)
    assert float(oracles.monomial_norm_fs(k, 3)) == pytest.approx(exact[3], rel=1e-12)


def test_gram_oracle_perturbed_weight_universality():
    k = 64
    qb = gram_oracle_basis(k, perturbed_weight(0.1))
    t = qb.t_at_radius(1 / math.sqrt(k))
    assert abs(float(qb.ratio(t)) - (1 - math.exp(-1))) < 0.05


def test_perturbed_weight_is_positive():
    w = perturbed_weight(0.1)
    t = np.geomspace(1e-8, 1e8, 200)
    assert np.all(w.density(t) > 0)


def test_gram_oracle_bounded_for_top_degree():
    qb = gram_oracle_basis(30, fubini_study_weight())
    assert np.all(np.isfinite(qb.log_norms))
