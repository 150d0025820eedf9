"""Holomorphic sections of O(k) on CP^N in the monomial orthonormal basis.

With the inner product <s1, s2> = int s1 conj(s2) e^{-k phi} omega^N / pi^N
(total volume 1) the monomials z^alpha are orthogonal, and expanding
rho_k e^{k phi} = N_k (1 + |z|^2)^k gives the orthonormal basis

    f_alpha(z) = sqrt(N_k * k! / (alpha! (k - |alpha|)!)) z^alpha.

The multinomial factor overflows doubles near k ~ 1000, so coefficients are
stored as logarithms.  Pointwise values are taken against a unit-norm
representative Z of the point, where |f_alpha(Z)| = |f_alpha(z)|_h <= sqrt(N_k);
each term is built in log space and exponentiated only at the end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import gammaln, logsumexp

from .exceptions import DegenerateSectionError, OracleFailureError
from .geometry import AdaptedFrame, LinearSubvariety, _homog, _unit, adapted_frame
from .kernels import dim_sections, log_dim_sections


def graded_lex(N: int, k: int) -> np.ndarray:
    """All alpha in N^N with |alpha| <= k, by degree then lexicographically descending."""
    out = []

    def comps(d, n):
        if n == 1:
            yield (d,)
            return
        for first in range(d, -1, -1):
            for rest in comps(d - first, n - 1):
                yield (first,) + rest

    for d in range(k + 1):
        out.extend(comps(d, N))
    return np.array(out, dtype=np.int64).reshape(-1, N)


@dataclass(frozen=True, eq=False)
class MonomialBasis:
    N: int
    k: int
    alphas: np.ndarray
    log_coeffs: np.ndarray

    def __len__(self) -> int:
        return self.alphas.shape[0]

    @cached_property
    def full_alphas(self) -> np.ndarray:
        """Exponents of the homogeneous monomials Z_0^{k-|alpha|} Z^alpha."""
        a0 = self.k - self.alphas.sum(axis=1, keepdims=True)
        return np.hstack([a0, self.alphas])

    @cached_property
    def index(self) -> dict:
        return {tuple(a): i for i, a in enumerate(self.alphas.tolist())}

    def log_values(self, p):
        """(log|f_alpha(p)|_h, arg f_alpha(Z)) for a unit representative Z of p."""
        Z = _unit(p)
        if Z.shape[-1] != self.N + 1:
            raise ValueError("point dimension does not match basis")
        absZ = np.abs(Z)
        with np.errstate(divide="ignore", invalid="ignore"):
            logZ = np.log(absZ)
            A = self.full_alphas
            # 0 * log 0 must be 0 (Z_i^0 = 1)
            terms = np.where(A > 0, A * logZ[..., None, :], 0.0)
        logmod = self.log_coeffs + terms.sum(axis=-1)
        phase = (A * np.angle(Z)[..., None, :]).sum(axis=-1)
        return logmod, phase

    def values(self, p) -> np.ndarray:
        """f_alpha(Z), |Z| = 1, so |values|^2 are the pointwise norms |s_alpha(p)|_h^2."""
        logmod, phase = self.log_values(p)
        return np.exp(logmod + 1j * phase)

    def evaluate(self, coeffs, p):
        """s(Z) for s = sum c_alpha s_alpha, via log-sum-exp with phases."""
        c = np.asarray(getattr(coeffs, "coeffs", coeffs), dtype=complex)
        logmod, phase = self.log_values(p)
        with np.errstate(divide="ignore"):
            lc = np.log(np.abs(c))
        lt = logmod + lc
        m = np.max(lt, axis=-1, keepdims=True)
        if np.all(np.isneginf(m)):
            return np.zeros(lt.shape[:-1], dtype=complex)
        tot = np.sum(np.exp(lt - m + 1j * (phase + np.angle(c))), axis=-1)
        return tot * np.exp(m[..., 0])

    def pointwise_norm_sq(self, coeffs, p):
        return np.abs(self.evaluate(coeffs, p)) ** 2

    def bergman_sum(self, p, idx: Optional[np.ndarray] = None):
        """sum_alpha |s_alpha(p)|_h^2 over all (or the given) basis indices."""
        logmod, _ = self.log_values(p)
        if idx is not None:
            logmod = logmod[..., idx]
        return np.exp(logsumexp(2 * logmod, axis=-1))


def build_basis(N: int, k: int) -> MonomialBasis:
    if k < 0 or N < 1:
        raise ValueError("need N >= 1 and k >= 0")
    alphas = graded_lex(N, k)
    if alphas.shape[0] != dim_sections(N, k):
        raise AssertionError("monomial enumeration miscounted")
    a0 = k - alphas.sum(axis=1)
    log_c = 0.5 * (
        log_dim_sections(N, k)
        + math.lgamma(k + 1)
        - gammaln(alphas + 1).sum(axis=1)
        - gammaln(a0 + 1)
    )
    return MonomialBasis(N, k, alphas, log_c)


@dataclass
class SectionCoeffs:
    """A section sum_alpha c_alpha s_alpha in an orthonormal monomial basis."""

    coeffs: np.ndarray
    basis: MonomialBasis

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=complex)
        if self.coeffs.shape != (len(self.basis),):
            raise ValueError("coefficient vector does not match basis size")

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def inner(self, other: "SectionCoeffs") -> complex:
        return complex(np.vdot(other.coeffs, self.coeffs))

    def __add__(self, other: "SectionCoeffs") -> "SectionCoeffs":
        return SectionCoeffs(self.coeffs + other.coeffs, self.basis)

    def __call__(self, p):
        return self.basis.evaluate(self.coeffs, p)


@dataclass(frozen=True, eq=False)
class SubspaceSplit:
    """H_k = H_{k,V} (+) H_perp in monomials of the frame adapted to V.

    All sections paired with a split are expressed in frame coordinates
    W = U Z; use :meth:`to_frame` on points before evaluating.
    """

    basis: MonomialBasis
    V: LinearSubvariety
    frame: AdaptedFrame
    in_V_idx: np.ndarray
    perp_idx: np.ndarray

    def to_frame(self, p):
        return self.frame.apply(_unit(p))


def split_by_subvariety(basis: MonomialBasis, V: LinearSubvariety,
                        frame: Optional[AdaptedFrame] = None) -> SubspaceSplit:
    if V.N != basis.N:
        raise ValueError("V and basis live in different projective spaces")
    if frame is None:
        frame = adapted_frame(V)
    c = V.codim
    vanishing = np.any(basis.alphas[:, :c] > 0, axis=1)
    return SubspaceSplit(
        basis, V, frame, np.flatnonzero(vanishing), np.flatnonzero(~vanishing)
    )


def peak_section(basis: MonomialBasis, p) -> SectionCoeffs:
    """Coherent state at p: c_alpha = conj(f_alpha(p)) / sqrt(rho_k)."""
    logmod, phase = basis.log_values(p)
    lognorm = 0.5 * logsumexp(2 * logmod)
    return SectionCoeffs(np.exp(logmod - lognorm - 1j * phase), basis)


def derivative_section(basis: MonomialBasis, v, direction) -> SectionCoeffs:
    """Unit section sum conj(d_u f_alpha(v)) s_alpha / |d_u f(v)|.

    ``v`` is a point of the chart U_0 (vector of N complex numbers) and
    ``direction`` a unit vector u in C^N.
    """
    v = np.asarray(getattr(v, "z", v), dtype=complex).reshape(-1)
    u = np.asarray(direction, dtype=complex).reshape(-1)
    N = basis.N
    if v.size != N or u.size != N:
        raise ValueError("v and direction must have N components")
    if not math.isclose(np.linalg.norm(u), 1.0, rel_tol=1e-9):
        raise ValueError("direction must be a unit vector")
    if basis.k == 0:
        raise DegenerateSectionError("constant sections have zero derivative")
    A = basis.alphas
    with np.errstate(divide="ignore"):
        logv = np.log(np.abs(v))
        logu = np.log(np.abs(u))
    # term (alpha, i): u_i * alpha_i * v^(alpha - e_i)
    E = A[:, None, :] - np.eye(N, dtype=np.int64)[None, :, :]
    valid = A > 0
    with np.errstate(invalid="ignore"):
        powers = np.where(E > 0, E * logv[None, None, :], 0.0)
    powers = np.where(E < 0, -np.inf, powers)
    with np.errstate(divide="ignore"):
        lt = basis.log_coeffs[:, None] + np.log(np.where(valid, A, 1)) + logu[None, :] + powers.sum(-1)
    lt = np.where(valid, lt, -np.inf)
    ph = np.angle(u)[None, :] + np.where(E > 0, E * np.angle(v)[None, None, :], 0.0).sum(-1)
    m = np.max(lt)
    if not np.isfinite(m):
        raise DegenerateSectionError("derivative vanishes identically")
    with np.errstate(invalid="ignore"):
        d = np.where(np.isfinite(lt), np.exp(lt - m + 1j * ph), 0).sum(axis=1)
    nrm = np.linalg.norm(d)
    if nrm == 0:
        raise DegenerateSectionError("derivative vector is zero")
    return SectionCoeffs(d.conj() / nrm, basis)


def project_split(s: SectionCoeffs, split: SubspaceSplit):
    """s = s1 + s2 with s1 in H_{k,V}, s2 in H_perp."""
    c1 = np.zeros_like(s.coeffs)
    c2 = np.zeros_like(s.coeffs)
    c1[split.in_V_idx] = s.coeffs[split.in_V_idx]
    c2[split.perp_idx] = s.coeffs[split.perp_idx]
    return SectionCoeffs(c1, s.basis), SectionCoeffs(c2, s.basis)


# -- restriction to V --------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RestrictionOperator:
    """R: H_perp -> H^0(V, O(k)) as a matrix between orthonormal bases.

    Rows follow the intrinsic CP^n monomial basis of V, columns ``perp_idx``.
    """

    matrix: np.ndarray
    singular_values: np.ndarray
    V_basis: Optional[MonomialBasis]
    perp_idx: np.ndarray

    @property
    def dim_perp(self) -> int:
        return self.perp_idx.size

    @property
    def sigma_max_sq(self) -> float:
        return float(self.singular_values[0] ** 2)

    @property
    def sigma_min_sq(self) -> float:
        return float(self.singular_values[-1] ** 2)


def restriction_operator(split: SubspaceSplit) -> RestrictionOperator:
    """Matrix of restriction H_perp -> H^0(V, L^k) in the two monomial bases.

    In the adapted frame V = {W_1 = .. = W_c = 0} is a copy of CP^n with chart
    coordinates z'' (the last n chart coordinates), and the tangential
    monomial z^alpha restricts to z''^beta with beta = alpha[c:].
    """
    basis = split.basis
    c = split.V.codim
    n = split.V.dim
    perp = split.perp_idx
    if n == 0:
        V_basis = None
        rows = np.zeros(perp.size, dtype=np.int64)
        log_v = np.zeros(perp.size)
        size = 1
    else:
        V_basis = build_basis(n, basis.k)
        betas = basis.alphas[perp][:, c:]
        rows = np.array([V_basis.index[tuple(b)] for b in betas.tolist()], dtype=np.int64)
        log_v = V_basis.log_coeffs[rows]
        size = len(V_basis)
    M = np.zeros((size, perp.size))
    M[rows, np.arange(perp.size)] = np.exp(basis.log_coeffs[perp] - log_v)
    sv = np.linalg.svd(M, compute_uv=False)
    return RestrictionOperator(M, sv, V_basis, perp)


def extension_norm(op: RestrictionOperator) -> float:
    """Squared norm of the minimal-norm extension R^{-1}: 1 / sigma_min^2."""
    return 1.0 / op.sigma_min_sq


# -- quadrature oracle on CP^1 ----------------------------------------------


@dataclass(frozen=True)
class RadialWeight:
    """Rotation-invariant Kahler potential psi(t), t = |z|^2, on the chart of CP^1.

    ``density(t) = psi'(t) + t psi''(t)`` is the metric coefficient: the Kahler
    form is density * dx dy and omega / pi integrates to 1.
    """

    psi: Callable
    dpsi: Callable
    d2psi: Callable
    name: str = "custom"

    def density(self, t):
        return self.dpsi(t) + t * self.d2psi(t)


def fubini_study_weight() -> RadialWeight:
    return RadialWeight(
        np.log1p,
        lambda t: 1.0 / (1.0 + t),
        lambda t: -1.0 / (1.0 + t) ** 2,
        "fubini-study",
    )


def perturbed_weight(eps: float) -> RadialWeight:
    """psi = log(1+t) + eps * t/(1+t); positive for |eps| < 1, same degree."""
    return RadialWeight(
        lambda t: np.log1p(t) + eps * t / (1.0 + t),
        lambda t: 1.0 / (1.0 + t) + eps / (1.0 + t) ** 2,
        lambda t: -1.0 / (1.0 + t) ** 2 - 2 * eps / (1.0 + t) ** 3,
        f"fs+{eps:g}*t/(1+t)",
    )


def _mapped_nodes(nodes: int):
    """Gauss-Legendre nodes on u in (0,1) with t = u/(1-u), plus log(dt/du)."""
    x, w = np.polynomial.legendre.leggauss(nodes)
    u = 0.5 * (x + 1.0)
    w = 0.5 * w
    t = u / (1.0 - u)
    return t, np.log(w) - 2 * np.log1p(-u)


def _log_monomial_norms(k: int, weight: RadialWeight, nodes: int, jmax: int) -> np.ndarray:
    t, logw = _mapped_nodes(nodes)
    base = -k * weight.psi(t) + np.log(weight.density(t)) + logw
    j = np.arange(jmax + 1)[:, None]
    return logsumexp(j * np.log(t)[None, :] + base[None, :], axis=1)


@dataclass(frozen=True)
class QuadratureBasis:
    """Orthogonal monomial basis of H^0(CP^1, O(k)) for a radial weight.

    ``log_norms[j] = log int |z^j|^2 e^{-k psi} omega/pi``; the orthonormal
    basis is z^j / sqrt(norm_j).  V is the point z = 0, so H_{k,V} is
    spanned by j >= 1.
    """

    k: int
    weight: RadialWeight
    log_norms: np.ndarray
    nodes: int

    @property
    def log_coeffs(self) -> np.ndarray:
        return -0.5 * self.log_norms

    def _log_terms(self, t):
        t = np.asarray(t, dtype=float)
        j = np.arange(self.k + 1)
        with np.errstate(divide="ignore"):
            lt = np.log(t)[..., None]
        terms = np.where(j > 0, j * lt, 0.0) - self.log_norms
        return terms - self.k * np.asarray(self.weight.psi(t))[..., None]

    def rho(self, t):
        return np.exp(logsumexp(self._log_terms(t), axis=-1))

    def rho_V(self, t):
        return np.exp(logsumexp(self._log_terms(t)[..., 1:], axis=-1))

    def ratio(self, t):
        lt = self._log_terms(t)
        return -np.expm1(lt[..., 0] - logsumexp(lt, axis=-1))

    def geodesic_radius(self, t) -> float:
        """Distance from z = 0 to |z| = sqrt(t) in the metric of the weight."""
        from scipy import integrate

        val, _ = integrate.quad(
            lambda s: math.sqrt(self.weight.density(s * s)), 0.0, math.sqrt(t),
            epsabs=0.0, epsrel=1e-12,
        )
        return val

    def t_at_radius(self, r: float) -> float:
        from scipy import optimize

        hi = 1.0
        while self.geodesic_radius(hi) < r:
            hi *= 4.0
        return optimize.brentq(lambda t: self.geodesic_radius(t) - r, 0.0, hi, xtol=1e-15, rtol=1e-13)


def gram_oracle_basis(k: int, weight: Optional[RadialWeight] = None, nodes: int = 400,
                      check_tol: float = 1e-6) -> QuadratureBasis:
    """Monomial norms on CP^1 by Gauss-Legendre quadrature (independent of closed forms).

    Radial weights keep the monomials orthogonal, so the Gram matrix is
    diagonal and only the norms need integrating.  The computation is repeated
    with twice the nodes; disagreement above ``check_tol`` raises.
    """
    if weight is None:
        weight = fubini_study_weight()
    coarse = _log_monomial_norms(k, weight, nodes, k)
    fine = _log_monomial_norms(k, weight, 2 * nodes, k)
    gap = np.max(np.abs(np.expm1(coarse - fine)))
    if not gap <= check_tol:
        raise OracleFailureError(f"quadrature with {nodes} vs {2 * nodes} nodes differs by {gap:.3g}")
    return QuadratureBasis(k, weight, coarse, nodes)


def cp1_inner_product(k: int, a, b, weight: Optional[RadialWeight] = None,
                      nodes: int = 400, log_coeffs: Optional[np.ndarray] = None) -> complex:
    """<s_a, s_b> on CP^1 by 2D quadrature (Gauss-Legendre radially, trapezoid in angle).

    ``a``, ``b`` are coefficient vectors in the basis with log coefficients
    ``log_coeffs`` (closed-form FS basis by default), i.e.
    s(z) = sum_j a_j exp(log_coeffs_j) z^j.
    """
    if weight is None:
        weight = fubini_study_weight()
    if log_coeffs is None:
        log_coeffs = build_basis(1, k).log_coeffs
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    t, logw = _mapped_nodes(nodes)
    n_ang = 2 * k + 4
    theta = 2 * np.pi * np.arange(n_ang) / n_ang
    rad = np.sqrt(t)
    j = np.arange(k + 1)
    # |s|_h e^{i.} with the weight absorbed: f_j(z) e^{-k psi/2}
    logf = log_coeffs[None, :] + j[None, :] * np.log(rad)[:, None] - 0.5 * k * weight.psi(t)[:, None]
    F = np.exp(logf)[:, None, :] * np.exp(1j * np.outer(theta, j))[None, :, :]
    sa = F @ a
    sb = F @ b
    integrand = (sa * sb.conj()).mean(axis=1)  # angular average
    # omega/pi = density dA/pi = density dt dtheta/(2 pi)
    return complex(np.sum(integrand * weight.density(t) * np.exp(logw)))
