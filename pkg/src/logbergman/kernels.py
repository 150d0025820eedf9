"""Closed-form Bergman kernels on CP^N with the Fubini-Study metric.

Everything that grows like (1 + |z|^2)^k is carried as a log-modulus plus a
phase, and differences of such powers are formed in factored form with
``expm1``/``log1p`` so that the logarithmic kernel keeps full relative
precision at distances r ~ k^{-1/2} from V.

The key closed form (in the frame adapted to V, with z'' the tangential chart
coordinates)::

    rho_kV = N_k [(1+|z|^2)^k - (1+|z''|^2)^k] / (1+|z|^2)^k
           = N_k (1 - cos^{2k} d(z, V))

The second line is frame-free and is what the vectorised routines evaluate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate

from .exceptions import DomainError, RangeError
from .geometry import (
    MEMBERSHIP_TOL,
    LinearSubvariety,
    ProjectivePoint,
    _unit,
    adapted_frame,
    distance_to_subvariety,
    fs_distance,
)

_INT64_MAX = 2**63 - 1


def _wrap_phase(phase):
    """Map angles into (-pi, pi]."""
    w = np.mod(np.asarray(phase, dtype=float) + np.pi, 2 * np.pi) - np.pi
    w = np.where(w == -np.pi, np.pi, w)
    return float(w) if np.ndim(w) == 0 else w


@dataclass(frozen=True)
class LogMagnitude:
    """Complex (or real) number stored as exp(log_mod) * e^{i phase}.

    ``log_mod = -inf`` encodes zero.
    """

    log_mod: float
    phase: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "phase", _wrap_phase(self.phase))

    @classmethod
    def from_complex(cls, x: complex) -> "LogMagnitude":
        x = complex(x)
        if x == 0:
            return cls(-math.inf, 0.0)
        return cls(math.log(abs(x)), math.atan2(x.imag, x.real))

    @classmethod
    def from_real(cls, x: float) -> "LogMagnitude":
        return cls.from_complex(complex(x, 0.0))

    def __mul__(self, other: "LogMagnitude") -> "LogMagnitude":
        if not isinstance(other, LogMagnitude):
            other = LogMagnitude.from_complex(other)
        return LogMagnitude(self.log_mod + other.log_mod, self.phase + other.phase)

    __rmul__ = __mul__

    def __truediv__(self, other: "LogMagnitude") -> "LogMagnitude":
        if not isinstance(other, LogMagnitude):
            other = LogMagnitude.from_complex(other)
        return LogMagnitude(self.log_mod - other.log_mod, self.phase - other.phase)

    def __pow__(self, k: int) -> "LogMagnitude":
        return LogMagnitude(k * self.log_mod, k * self.phase)

    @property
    def modulus(self) -> float:
        return math.exp(self.log_mod)

    def value(self) -> complex:
        if self.log_mod == -math.inf:
            return 0j
        return self.modulus * complex(math.cos(self.phase), math.sin(self.phase))

    def real(self) -> float:
        return self.value().real

    def __float__(self) -> float:
        return self.real()


def dim_sections(N: int, k: int) -> int:
    """N_k = dim H^0(CP^N, O(k)) = C(N+k, N), checked against int64 range."""
    if N < 1 or k < 0:
        raise ValueError(f"need N >= 1 and k >= 0, got N={N}, k={k}")
    n = math.comb(N + k, N)
    if n > _INT64_MAX:
        raise OverflowError(f"dim H^0(CP^{N}, O({k})) = {n} exceeds int64")
    return n


def log_dim_sections(N: int, k: int) -> float:
    return math.lgamma(N + k + 1) - math.lgamma(N + 1) - math.lgamma(k + 1)


def rho_k(N: int, k: int, z=None) -> LogMagnitude:
    """On-diagonal Bergman kernel of O(k): constant N_k by U(N+1)-invariance."""
    if z is not None:
        Z = _unit(z)
        if Z.shape[-1] != N + 1:
            raise ValueError("point dimension does not match N")
    return LogMagnitude(math.log(dim_sections(N, k)), 0.0)


def q_offdiag(N: int, k: int, z, w) -> LogMagnitude:
    """Q_k(z, w) = sum_i f_i(z) conj(f_i(w)) = N_k (1 + z . conj(w))^k in a chart."""
    z = np.asarray(getattr(z, "z", z), dtype=complex).reshape(-1)
    w = np.asarray(getattr(w, "z", w), dtype=complex).reshape(-1)
    if z.size != N or w.size != N:
        raise ValueError("chart vectors must have N components")
    base = 1.0 + np.sum(z * w.conj())
    log_n = math.log(dim_sections(N, k))
    if base == 0:
        return LogMagnitude(-math.inf, 0.0)
    return LogMagnitude(log_n + k * math.log(abs(base)), k * math.atan2(base.imag, base.real))


def log_normalized_kernel(N: int, k: int, p, q):
    d = fs_distance(p, q)
    return k * np.log(np.cos(d))


def normalized_kernel(N: int, k: int, p, q):
    """P_k(p, q) = |Pi_k(p,q)| / sqrt(Pi_k(p,p) Pi_k(q,q)) = cos^k d_FS(p, q)."""
    Zp, Zq = _unit(p), _unit(q)
    if Zp.shape[-1] != N + 1 or Zq.shape[-1] != N + 1:
        raise ValueError("point dimension does not match N")
    with np.errstate(divide="ignore"):
        out = np.exp(log_normalized_kernel(N, k, Zp, Zq))
    return float(out) if np.ndim(out) == 0 else out


def gaussian_offdiag_check(N: int, k: int, u, v, b: float = 3.0) -> float:
    """|P_k(u/sqrt k, v/sqrt k) - exp(-|u - v|^2 / 2)| at chart points around [1,0,..,0]."""
    u = np.atleast_1d(np.asarray(u, dtype=complex))
    v = np.atleast_1d(np.asarray(v, dtype=complex))
    if u.size != N or v.size != N:
        raise ValueError("u and v must have N components")
    if np.linalg.norm(u) + np.linalg.norm(v) > b * math.sqrt(math.log(k)):
        raise RangeError(f"|u|+|v| exceeds b*sqrt(log k) = {b * math.sqrt(math.log(k)):.4g}")
    sk = math.sqrt(k)
    p = np.concatenate([[1.0], u / sk])
    q = np.concatenate([[1.0], v / sk])
    return abs(normalized_kernel(N, k, p, q) - math.exp(-0.5 * np.linalg.norm(u - v) ** 2))


# -- logarithmic Bergman kernel ---------------------------------------------


def _sin2_distance(V: LinearSubvariety, z):
    return np.clip(V.sine_distance(z), 0.0, 1.0) ** 2


def log_one_minus_ratio(k: int, V: LinearSubvariety, z):
    """log(1 - rho_kV / rho_k) = k log cos^2 d(z, V); 0 on V, -inf at distance pi/2."""
    s2 = _sin2_distance(V, z)
    with np.errstate(divide="ignore"):
        return k * np.log1p(-s2)


def ratio_rho(N: int, k: int, V: LinearSubvariety, z):
    """rho_kV / rho_k = 1 - ((1+|z''|^2)/(1+|z|^2))^k, evaluated as -expm1(k log cos^2 d)."""
    if V.N != N:
        raise ValueError("V does not live in CP^N")
    out = -np.expm1(log_one_minus_ratio(k, V, z))
    return float(out) if np.ndim(out) == 0 else out


def ratio_rho_chart(k: int, z_normal, z_tangential):
    """Chart form of ratio_rho in the adapted frame, for cross-checking."""
    t = np.sum(np.abs(np.atleast_1d(z_normal)) ** 2, axis=-1)
    t2 = np.sum(np.abs(np.atleast_1d(z_tangential)) ** 2, axis=-1)
    return -np.expm1(k * (np.log1p(t2) - np.log1p(t + t2)))


def rho_kV(N: int, k: int, V: LinearSubvariety, z) -> LogMagnitude:
    """Logarithmic Bergman kernel rho_{k,V}(z) (real, >= 0), in log form."""
    r = ratio_rho(N, k, V, z)
    if np.ndim(r) != 0:
        raise ValueError("rho_kV takes a single point; use ratio_rho for grids")
    if r <= 0:
        return LogMagnitude(-math.inf, 0.0)
    return LogMagnitude(math.log(dim_sections(N, k)) + math.log(r), 0.0)


def rho_kV_chart(N: int, k: int, V: LinearSubvariety, z) -> LogMagnitude:
    """Same quantity via an adapted frame and the chart closed form."""
    frame = adapted_frame(V)
    zn, zt = frame.split_chart(z)
    r = float(ratio_rho_chart(k, zn, zt))
    if r <= 0:
        return LogMagnitude(-math.inf, 0.0)
    return LogMagnitude(math.log(dim_sections(N, k)) + math.log(r), 0.0)


def remainder_Rk(N: int, k: int, V: LinearSubvariety, z):
    """R_k(z) = (rho_kV / rho_k) / (1 - e^{-k r^2}) - 1, r the geodesic distance to V."""
    r = np.asarray(distance_to_subvariety(z, V))
    if np.any(np.sin(r) < MEMBERSHIP_TOL):
        raise DomainError("R_k is 0/0 on V")
    out = ratio_rho(N, k, V, z) / -np.expm1(-k * r**2) - 1.0
    return float(out) if np.ndim(out) == 0 else out


# -- bounds from the near-V analysis ----------------------------------------


def beta_bound(k: int, r: float, C: float = 1.0) -> float:
    """beta(r) = C * int_0^r sqrt(1 + k x^2) exp(k x^2 / 2) dx (adaptive quadrature)."""
    if r < 0:
        raise ValueError("r must be nonnegative")
    if r == 0:
        return 0.0
    if k * r * r / 2 > 700:
        return math.inf
    val, err = integrate.quad(
        lambda x: math.sqrt(1 + k * x * x) * math.exp(k * x * x / 2),
        0.0,
        r,
        epsabs=0.0,
        epsrel=1e-12,
        limit=200,
    )
    return C * val


@dataclass(frozen=True)
class SandwichResult:
    lower: float
    ratio: float
    upper: float
    beta: float
    r: float
    ok: bool


def sandwich_check(N: int, k: int, V: LinearSubvariety, v, C: float = 1.0,
                   slack: float = 1e-12) -> SandwichResult:
    """Evaluate 1 - P^2/(1 - beta^2) <= rho_kV/rho_k(v) <= 1 - P^2, P = P_k(v, z0).

    z0 is the point of V nearest to v, so v lies on the normal disk through z0.
    beta uses the geodesic distance r = d(v, V).  When beta >= 1 the lower bound
    is vacuous and reported as -inf.
    """
    r = distance_to_subvariety(v, V)
    ratio = ratio_rho(N, k, V, v)
    if r == 0:
        return SandwichResult(0.0, ratio, 0.0, 0.0, 0.0, ratio <= slack)
    z0 = V.nearest_point(v)
    log_P2 = 2 * log_normalized_kernel(N, k, _unit(v), z0.unit())
    P2 = math.exp(log_P2)
    upper = -math.expm1(log_P2)
    beta = beta_bound(k, r, C)
    lower = 1.0 - P2 / (1.0 - beta**2) if beta < 1 else -math.inf
    ok = lower <= ratio <= upper + slack
    return SandwichResult(lower, ratio, upper, beta, r, bool(ok))
