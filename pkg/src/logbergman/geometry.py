"""Fubini-Study geometry of CP^N: points, linear subvarieties, distances, frames.

Homogeneous coordinates are kept exactly as the caller supplied them.  Every
operation rescales internally by the largest-modulus coordinate before
normalising, so inputs of any magnitude are handled without overflow.

Array-valued helpers (``_unit``) accept either a :class:`ProjectivePoint` or a
complex array whose last axis holds the N+1 homogeneous coordinates; this lets
the kernel functions evaluate whole grids without Python loops.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .exceptions import (
    DimensionMismatchError,
    DomainError,
    InvalidPointError,
    NotOnSubvarietyError,
    RankDeficientError,
)

MEMBERSHIP_TOL = 1e-10


@dataclass(frozen=True)
class ProjectivePoint:
    """A point [Z_0 : ... : Z_N] of CP^N."""

    homogeneous: np.ndarray

    def __post_init__(self):
        z = np.array(self.homogeneous, dtype=complex).reshape(-1)
        if z.size < 2:
            raise InvalidPointError("need at least two homogeneous coordinates")
        if not np.all(np.isfinite(z)) or not np.any(np.abs(z) > 0):
            raise InvalidPointError(f"invalid homogeneous coordinates {z!r}")
        z.setflags(write=False)
        object.__setattr__(self, "homogeneous", z)

    @property
    def N(self) -> int:
        return self.homogeneous.size - 1

    def unit(self) -> np.ndarray:
        """Unit-norm representative (pivot-scaled first, so never overflows)."""
        return _unit(self.homogeneous)

    @classmethod
    def from_chart(cls, z, chart_index: int = 0) -> "ProjectivePoint":
        return AffineChartPoint(chart_index, z).to_projective()

    def to_chart(self, chart_index: Optional[int] = None) -> "AffineChartPoint":
        Z = self.homogeneous
        if chart_index is None:
            chart_index = int(np.argmax(np.abs(Z)))
        pivot = Z[chart_index]
        if pivot == 0:
            raise DomainError(f"point lies outside chart U_{chart_index}")
        z = np.delete(Z, chart_index) / pivot
        return AffineChartPoint(chart_index, z)

    def transform(self, unitary: np.ndarray) -> "ProjectivePoint":
        return ProjectivePoint(np.asarray(unitary) @ self.homogeneous)

    def __eq__(self, other):
        if not isinstance(other, ProjectivePoint):
            return NotImplemented
        return np.array_equal(self.homogeneous, other.homogeneous)

    def __hash__(self):
        return hash(self.homogeneous.tobytes())


@dataclass(frozen=True)
class AffineChartPoint:
    """Point z in the affine chart U_i = {Z_i != 0}, z_j = Z_j / Z_i."""

    chart_index: int
    z: np.ndarray

    def __post_init__(self):
        z = np.array(self.z, dtype=complex).reshape(-1)
        if not 0 <= self.chart_index <= z.size:
            raise DimensionMismatchError(
                f"chart index {self.chart_index} outside 0..{z.size}"
            )
        z.setflags(write=False)
        object.__setattr__(self, "z", z)

    @property
    def N(self) -> int:
        return self.z.size

    def to_projective(self) -> ProjectivePoint:
        return ProjectivePoint(np.insert(self.z, self.chart_index, 1.0))


PointLike = Union[ProjectivePoint, np.ndarray]


def _homog(p) -> np.ndarray:
    if isinstance(p, ProjectivePoint):
        return p.homogeneous
    if isinstance(p, AffineChartPoint):
        return p.to_projective().homogeneous
    return np.asarray(p, dtype=complex)


def _unit(p) -> np.ndarray:
    """Unit representatives along the last axis; raises on a zero vector."""
    Z = _homog(p)
    scale = np.max(np.abs(Z), axis=-1, keepdims=True)
    if np.any(scale == 0) or not np.all(np.isfinite(Z)):
        raise InvalidPointError("zero or non-finite homogeneous vector")
    Z = Z / scale
    return Z / np.linalg.norm(Z, axis=-1, keepdims=True)


def fs_distance(p: PointLike, q: PointLike):
    """Fubini-Study distance arccos(|<Z,W>| / |Z||W|), in [0, pi/2].

    Evaluated as atan2(|W_perp|, |<W,Z>|) with unit representatives, which
    keeps full relative accuracy for nearby points where arccos would not.
    """
    Z = _unit(p)
    W = _unit(q)
    if Z.shape[-1] != W.shape[-1]:
        raise DimensionMismatchError("points live in different projective spaces")
    inner = np.sum(W * Z.conj(), axis=-1)
    perp = W - inner[..., None] * Z
    d = np.arctan2(np.linalg.norm(perp, axis=-1), np.abs(inner))
    return float(d) if np.ndim(d) == 0 else d


def _gram_schmidt_rows(forms: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Modified Gram-Schmidt on the rows (Hermitian inner product)."""
    rows = []
    for a in forms:
        v = a.astype(complex).copy()
        norm0 = np.linalg.norm(v)
        for q in rows:
            v = v - np.vdot(q, v) * q
        norm = np.linalg.norm(v)
        if norm0 == 0 or norm <= tol * max(norm0, 1.0):
            raise RankDeficientError("linear forms are linearly dependent")
        rows.append(v / norm)
    return np.array(rows)


@dataclass(frozen=True)
class LinearSubvariety:
    """V = {[Z] : forms . Z = 0}, codimension c = forms.shape[0].

    ``forms`` is orthonormalised on construction; only its row span matters.
    """

    N: int
    forms: np.ndarray

    def __post_init__(self):
        A = np.array(self.forms, dtype=complex)
        if A.ndim == 1:
            A = A[None, :]
        if A.shape[1] != self.N + 1:
            raise DimensionMismatchError(
                f"forms have {A.shape[1]} columns, expected N+1={self.N + 1}"
            )
        c = A.shape[0]
        if not 1 <= c <= self.N:
            raise DimensionMismatchError(f"codimension {c} outside 1..{self.N}")
        A = _gram_schmidt_rows(A)
        A.setflags(write=False)
        object.__setattr__(self, "forms", A)

    @property
    def codim(self) -> int:
        return self.forms.shape[0]

    @property
    def dim(self) -> int:
        return self.N - self.codim

    @classmethod
    def coordinate_model(cls, N: int, codim: int = 1) -> "LinearSubvariety":
        """The model {z_1 = ... = z_c = 0}, i.e. Z_1 = ... = Z_c = 0."""
        return cls(N, np.eye(N + 1)[1 : codim + 1])

    @classmethod
    def random(cls, N: int, codim: int, rng: np.random.Generator) -> "LinearSubvariety":
        A = rng.standard_normal((codim, N + 1)) + 1j * rng.standard_normal((codim, N + 1))
        return cls(N, A)

    @classmethod
    def through_points(cls, points) -> "LinearSubvariety":
        """Smallest linear subspace containing the given points."""
        P = np.array([_unit(p) for p in points])
        N = P.shape[1] - 1
        # forms annihilate the span of the points: rows of the null space of P
        _, s, vh = np.linalg.svd(P)
        rank = int(np.sum(s > 1e-10 * s[0]))
        null = vh[rank:]  # P @ null^H = 0  ->  forms = conj(null)
        return cls(N, null.conj())

    def sine_distance(self, p: PointLike):
        Z = _unit(p)
        if Z.shape[-1] != self.N + 1:
            raise DimensionMismatchError(
                f"point has {Z.shape[-1]} coordinates, V lives in CP^{self.N}"
            )
        return np.linalg.norm(Z @ self.forms.T, axis=-1)

    def contains(self, p: PointLike, tol: float = MEMBERSHIP_TOL):
        return self.sine_distance(p) < tol

    def nearest_point(self, p: PointLike) -> ProjectivePoint:
        """Orthogonal projection of p onto V (unique unless d(p, V) = pi/2)."""
        Z = _unit(p)
        tangential = Z - (Z @ self.forms.T) @ self.forms.conj()
        if np.linalg.norm(tangential) < 1e-14:
            raise DomainError("point is at maximal distance from V; nearest point not unique")
        return ProjectivePoint(tangential)

    def tangent_basis(self) -> np.ndarray:
        """Orthonormal vectors (rows) spanning the cone over V."""
        q, _ = np.linalg.qr(self.forms.conj().T, mode="complete")
        return q[:, self.codim :].T

    def to_json(self) -> dict:
        return {
            "N": int(self.N),
            "forms": [[[float(a.real), float(a.imag)] for a in row] for row in self.forms],
        }

    @classmethod
    def from_json(cls, data: dict) -> "LinearSubvariety":
        try:
            N = int(data["N"])
            forms = np.array(
                [[complex(re, im) for re, im in row] for row in data["forms"]], dtype=complex
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"malformed subvariety JSON: {exc}") from exc
        return cls(N, forms)

    @classmethod
    def load(cls, path) -> "LinearSubvariety":
        with open(Path(path)) as fh:
            return cls.from_json(json.load(fh))


def distance_to_subvariety(p: PointLike, V: LinearSubvariety):
    """Fubini-Study distance arcsin(|A Z| / |Z|) from p to V."""
    Z = _unit(p)
    if Z.shape[-1] != V.N + 1:
        raise DimensionMismatchError(
            f"point has {Z.shape[-1]} coordinates, V lives in CP^{V.N}"
        )
    normal = Z @ V.forms.T
    tangential = Z - normal @ V.forms.conj()
    d = np.arctan2(np.linalg.norm(normal, axis=-1), np.linalg.norm(tangential, axis=-1))
    return float(d) if np.ndim(d) == 0 else d


@dataclass(frozen=True)
class AdaptedFrame:
    """Unitary U with U(V) = {W_1 = ... = W_c = 0} and, optionally, U(p) = [1,0,...,0].

    Rows 1..c of U are exactly the orthonormal forms of V, so in the new
    coordinates W = U Z the first c chart coordinates are the normal ones.
    """

    unitary: np.ndarray
    codim: int
    base_point: Optional[ProjectivePoint] = field(default=None)

    @property
    def N(self) -> int:
        return self.unitary.shape[0] - 1

    def apply(self, p):
        """Homogeneous coordinates of p (point or array) in the frame."""
        return _homog(p) @ self.unitary.T

    def pull_back(self, W):
        """Inverse map: frame coordinates -> original coordinates."""
        return np.asarray(W, dtype=complex) @ self.unitary.conj()

    def chart(self, p):
        """Frame chart coordinates w = W[1:] / W[0] (W_0 must be nonzero)."""
        W = self.apply(_unit(p))
        W0 = W[..., :1]
        if np.any(W0 == 0):
            raise DomainError("point is at infinity of the adapted chart")
        return W[..., 1:] / W0

    def split_chart(self, p):
        """(normal, tangential) chart coordinates (z_perp, z'')."""
        w = self.chart(p)
        return w[..., : self.codim], w[..., self.codim :]


def adapted_frame(V: LinearSubvariety, p: Optional[PointLike] = None) -> AdaptedFrame:
    A = V.forms
    n1 = V.N + 1
    rows = [A]
    base = None
    if p is not None:
        if not isinstance(p, ProjectivePoint):
            p = ProjectivePoint(_homog(p))
        if not V.contains(p):
            raise NotOnSubvarietyError("base point does not lie on V")
        Zp = p.unit()
        Zp = Zp - (A @ Zp) @ A.conj()  # strip the (<1e-10) normal residue
        Zp = Zp / np.linalg.norm(Zp)
        rows.insert(0, Zp.conj()[None, :])
        base = p
    B = np.vstack(rows)
    q, _ = np.linalg.qr(B.conj().T, mode="complete")
    complement = q[:, B.shape[0] :].T.conj()
    # fix phases so the largest entry of each completing row is real positive;
    # an already-adapted V then gets the identity frame
    lead = complement[np.arange(complement.shape[0]), np.argmax(np.abs(complement), axis=1)]
    complement = complement * (np.abs(lead) / lead)[:, None]
    if base is None:
        U = np.vstack([complement[:1], A, complement[1:]])
    else:
        U = np.vstack([B[:1], A, complement])
    assert U.shape == (n1, n1)
    return AdaptedFrame(U, V.codim, base)


def fubini_study_potential(z) -> float:
    """phi(z) = log(1 + |z|^2) on a chart, so that |Z_0|^2_FS = e^{-phi}."""
    if isinstance(z, AffineChartPoint):
        z = z.z
    z = np.asarray(z, dtype=complex)
    return np.log1p(np.sum(np.abs(z) ** 2, axis=-1))


def random_point(N: int, rng: np.random.Generator) -> ProjectivePoint:
    """Point drawn from the unitarily invariant (normalised FS volume) measure."""
    return ProjectivePoint(rng.standard_normal(N + 1) + 1j * rng.standard_normal(N + 1))


def point_at_distance(V: LinearSubvariety, r: float, rng: Optional[np.random.Generator] = None,
                      base: Optional[np.ndarray] = None, normal: Optional[np.ndarray] = None):
    """A point at exact distance r from V along the normal geodesic through ``base``.

    ``base`` (on V) and ``normal`` (a unit vector in the span of the conjugated
    forms) default to random choices when ``rng`` is given, otherwise to the
    first tangent/normal basis vectors.
    """
    T = V.tangent_basis()
    if base is None:
        if rng is None:
            base = T[0]
        else:
            coef = rng.standard_normal(T.shape[0]) + 1j * rng.standard_normal(T.shape[0])
            base = coef @ T
    base = base / np.linalg.norm(base)
    if normal is None:
        if rng is None:
            normal = V.forms[0].conj()
        else:
            coef = rng.standard_normal(V.codim) + 1j * rng.standard_normal(V.codim)
            normal = coef @ V.forms.conj()
    normal = normal / np.linalg.norm(normal)
    r = np.asarray(r, dtype=float)
    return np.cos(r)[..., None] * base + np.sin(r)[..., None] * normal
