"""Gaussian random sections of O(k) on CP^1 conditioned to vanish on V.

Conditioning a standard Gaussian on H^0(CP^1, O(k)) to {s|_V = 0} gives the
standard Gaussian on H_{k,V}.  For a single point V we work in the frame that
moves V to [1:0]: H_{k,V} is spanned by the monomials w^j, j >= 1, and the
fixed zero at w = 0 is divided out before root finding.  For several points
an orthonormal basis of H_{k,V} is built as the complement of their peak
sections, and every fixed zero is deflated.

Random streams are counter-based: trial i of an ensemble with master seed S
draws from ``Philox(key=S, counter=[0, 0, 0, i])``.  Trials are processed in
fixed chunks of ``CHUNK`` and tallies are integer-valued, so the result does
not depend on the number of worker threads.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from .exceptions import EnsembleError
from .geometry import LinearSubvariety, ProjectivePoint, _unit, adapted_frame
from .sections import SectionCoeffs, build_basis, peak_section, split_by_subvariety

logger = logging.getLogger(__name__)

CHUNK = 512
MAX_ITER = 200
UNDERFLOW_DIGITS = 300
DEFAULT_EDGES = np.linspace(0.0, 4.0, 81)
_LOG_UNDERFLOW = UNDERFLOW_DIGITS * math.log(10.0)
_BATCH_ELEMENTS = 4_000_000  # cap on B * n^2 in one Aberth sweep


def trial_rng(master_seed: int, trial_index: int) -> np.random.Generator:
    """Independent, reproducible generator for one trial."""
    if not 0 <= master_seed < 2**64:
        raise ValueError("master_seed must be a 64-bit unsigned integer")
    counter = np.array([0, 0, 0, trial_index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=master_seed, counter=counter))


def complex_gaussian(rng: np.random.Generator, n: int) -> np.ndarray:
    """n i.i.d. standard complex Gaussians (E|xi|^2 = 1)."""
    x = rng.standard_normal(2 * n)
    return (x[:n] + 1j * x[n:]) / math.sqrt(2.0)


@dataclass(frozen=True)
class EnsembleSpec:
    k: int
    V: Sequence = ((1.0, 0.0),)
    trials: int = 1
    master_seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        V = self.V
        if isinstance(V, LinearSubvariety):
            if V.N != 1:
                raise ValueError("zero sampling is implemented on CP^1 only")
            V = (V.tangent_basis()[0],)
        pts = tuple(p if isinstance(p, ProjectivePoint) else ProjectivePoint(p) for p in V)
        if not pts:
            raise ValueError("conditional ensemble needs at least one point")
        if any(p.N != 1 for p in pts):
            raise ValueError("V points must lie in CP^1")
        if len(pts) > self.k:
            raise ValueError("more fixed zeros than the degree allows")
        object.__setattr__(self, "V", pts)
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")

    @cached_property
    def model(self) -> "_ConditionalModel":
        return _ConditionalModel(self)


class _ConditionalModel:
    """Precomputed sampling data for an ensemble (frame, basis, H_{k,V})."""

    def __init__(self, spec: EnsembleSpec):
        k = spec.k
        self.k = k
        self.basis = build_basis(1, k)
        first = spec.V[0]
        self.single = len(spec.V) == 1
        V = LinearSubvariety(1, self._annihilator(first))
        self.frame = adapted_frame(V)
        if self.single:
            self.split = split_by_subvariety(self.basis, V, self.frame)
            self.fixed = [np.array([1.0, 0.0], dtype=complex)]  # in frame coordinates
            self.Q = None
        else:
            # work in original coordinates; H_{k,V} = complement of peak sections
            P = np.array([peak_section(self.basis, p).coeffs for p in spec.V])
            q, r = np.linalg.qr(P.conj().T, mode="complete")
            m = len(spec.V)
            if np.min(np.abs(np.diag(r))) < 1e-10:
                raise ValueError("V points are not distinct")
            self.Q = q[:, m:]
            self.fixed = [_unit(p) for p in spec.V]
            self.split = None
        self.dim = k if self.single else k + 1 - len(spec.V)

    @staticmethod
    def _annihilator(p: ProjectivePoint) -> np.ndarray:
        a, b = _unit(p)
        return np.array([-b, a])  # (-b) Z_0 + a Z_1 vanishes at [a : b]

    def sample(self, master_seed: int, trial_index: int) -> np.ndarray:
        xi = complex_gaussian(trial_rng(master_seed, trial_index), self.dim)
        c = np.zeros(self.k + 1, dtype=complex)
        if self.single:
            c[self.split.in_V_idx] = xi
        else:
            c = self.Q @ xi
        return c

    def to_u(self, roots_hom: np.ndarray) -> np.ndarray:
        """Rescaled radius sqrt(k) |w| in the chart centred at the first V point."""
        W = roots_hom if self.single else self.frame.apply(roots_hom)
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.abs(W[..., 1]) / np.abs(W[..., 0])
        return math.sqrt(self.k) * w


def sample_conditional(spec: EnsembleSpec, trial_index: int) -> SectionCoeffs:
    """Coefficients of trial ``trial_index`` (frame coordinates for a single V point)."""
    model = spec.model
    return SectionCoeffs(model.sample(spec.master_seed, trial_index), model.basis)


# -- polynomial roots ---------------------------------------------------------


def _horner_ratio(c: np.ndarray, x: np.ndarray) -> np.ndarray:
    """p(x)/p'(x) for descending coefficients c (B, n+1) at x (B, n).

    Outside the unit disk the reversed polynomial is used so nothing overflows.
    """
    n = c.shape[1] - 1
    inside = np.abs(x) <= 1
    y = np.where(inside, x, 1.0 / np.where(x == 0, 1, x))
    p = np.zeros_like(x)
    dp = np.zeros_like(x)
    q = np.zeros_like(x)
    dq = np.zeros_like(x)
    cr = c[:, ::-1]
    for j in range(n + 1):
        dp = dp * y + p
        p = p * y + c[:, j : j + 1]
        dq = dq * y + q
        q = q * y + cr[:, j : j + 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        r_in = p / dp
        # p(x) = x^n q(1/x): p/p' = x q / (n q - y q')
        r_out = x * q / (n * q - y * dq)
    return np.where(inside, r_in, r_out)


def _relative_residual(c: np.ndarray, x: np.ndarray) -> np.ndarray:
    """|p(x)| / sum |c_j| |x|^j, evaluated on the better-scaled side of |x| = 1."""
    inside = np.abs(x) <= 1
    y = np.where(inside, x, 1.0 / np.where(x == 0, 1, x))
    ay = np.abs(y)
    src = np.where(inside[..., None], c[:, None, :], c[:, None, ::-1])
    p = np.zeros_like(x)
    s = np.zeros(x.shape)
    for j in range(c.shape[1]):
        p = p * y + src[..., j]
        s = s * ay + np.abs(src[..., j])
    return np.abs(p) / np.where(s == 0, 1, s)


def newton_polygon_guesses(c_desc: np.ndarray) -> np.ndarray:
    """Starting points on the circles given by the upper convex hull of (j, log|a_j|).

    Each hull edge from i to j carries j - i points at radius
    (|a_i| / |a_j|)^(1/(j-i)); angles are spread uniformly with a small offset.
    """
    a = np.abs(c_desc[::-1])
    n = a.size - 1
    with np.errstate(divide="ignore"):
        la = np.log(a)
    hull = []
    for j in range(n + 1):
        if not np.isfinite(la[j]):
            continue
        while len(hull) >= 2:
            i0, i1 = hull[-2], hull[-1]
            # drop i1 if it lies on or below the chord i0 -> j
            if (la[i1] - la[i0]) * (j - i0) <= (la[j] - la[i0]) * (i1 - i0):
                hull.pop()
            else:
                break
        hull.append(j)
    x = np.empty(n, dtype=complex)
    pos = 0
    for i, j in zip(hull[:-1], hull[1:]):
        m = j - i
        radius = np.exp((la[i] - la[j]) / m)
        ang = 2 * np.pi * np.arange(m) / m + 2 * np.pi * i / n + 1e-3 + 0.5 * np.pi / n
        x[pos : pos + m] = radius * np.exp(1j * ang)
        pos += m
    return x


def aberth_ehrlich(c: np.ndarray, tol: float = 1e-14, max_iter: int = MAX_ITER):
    """Simultaneous roots of a batch of polynomials (descending coefficients).

    Returns (roots (B, n), converged (B,)).  Leading and constant coefficients
    must be nonzero.  Initial guesses come from the Newton polygon of the
    coefficient moduli, so polynomials whose roots span many orders of
    magnitude start close to the right radii.
    """
    c = np.asarray(c, dtype=complex)
    B, n1 = c.shape
    n = n1 - 1
    if n == 0:
        return np.zeros((B, 0), dtype=complex), np.ones(B, dtype=bool)
    c = c / c[:, :1]
    x = np.array([newton_polygon_guesses(row) for row in c])
    active = np.ones((B, n), dtype=bool)
    eye = np.eye(n, dtype=bool)
    for _ in range(max_iter):
        ratio = _horner_ratio(c, x)
        diff = x[:, :, None] - x[:, None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = np.where(eye[None], 0, 1.0 / diff)
        S = inv.sum(axis=2)
        with np.errstate(divide="ignore", invalid="ignore"):
            delta = ratio / (1 - ratio * S)
        delta = np.where(np.isfinite(delta), delta, 0)
        delta = np.where(active, delta, 0)
        x = x - delta
        active &= np.abs(delta) > tol * np.maximum(np.abs(x), 1e-300)
        if not active.any():
            break
    res = _relative_residual(c, x)
    ok = np.all((res <= 1e-10) & np.isfinite(x), axis=1)
    return x, ok


@dataclass
class ZeroSet:
    """Zeros of one section of O(k) on CP^1.

    ``finite_roots`` are the free zeros found numerically (chart coordinates of
    the frame they were computed in), ``fixed_roots`` the deterministic zeros
    on V (homogeneous coordinates), ``zeros_at_infinity`` free zeros that
    escaped to [0:1] through a vanishing leading coefficient.
    """

    finite_roots: np.ndarray
    zeros_at_infinity: int
    converged: bool
    fixed_roots: list = field(default_factory=list)

    @property
    def total(self) -> int:
        return len(self.finite_roots) + self.zeros_at_infinity + len(self.fixed_roots)


def _chart_coefficients(basis, coeffs) -> np.ndarray:
    """Ascending chart polynomial coefficients scaled so max |a_j| = 1."""
    coeffs = np.asarray(coeffs, dtype=complex)
    with np.errstate(divide="ignore"):
        la = np.log(np.abs(coeffs)) + basis.log_coeffs
    m = np.max(la, axis=-1, keepdims=True)
    return np.exp(la - m) * np.exp(1j * np.angle(coeffs)), la - m


def _deflate(a: np.ndarray, root_hom: np.ndarray) -> np.ndarray:
    """Divide ascending coefficients by the linear factor vanishing at [Z0:Z1]."""
    Z0, Z1 = root_hom
    if abs(Z0) < 1e-14 * abs(Z1):  # root at infinity: degree drops
        return a[:-1]
    z = Z1 / Z0
    n = len(a) - 1
    b = np.zeros(n, dtype=complex)
    if abs(z) <= 1:
        # a(x) = (x - z) b(x): b_{n-1} = a_n, b_{j-1} = a_j + z b_j
        acc = 0j
        for j in range(n, 0, -1):
            acc = acc * z + a[j]
            b[j - 1] = acc
    else:
        # same identity run upwards: b_0 = -a_0 / z, b_j = (b_{j-1} - a_j) / z
        acc = 0j
        for j in range(n):
            acc = (acc - a[j]) / z
            b[j] = acc
    return b


def _prepared_polynomial(basis, coeffs, fixed):
    """Deflated, trimmed chart polynomial: (ascending core, zeros at 0, zeros at infinity)."""
    a, la = _chart_coefficients(basis, coeffs)
    a = np.where(la >= -_LOG_UNDERFLOW, a, 0)
    for r in fixed:
        a = _deflate(a, r)
    mags = np.abs(a)
    nz = np.flatnonzero(mags > mags.max() * math.exp(-_LOG_UNDERFLOW))
    low, top = int(nz[0]), int(nz[-1])
    return a[low : top + 1], low, len(a) - 1 - top


def find_zeros_cp1(s: SectionCoeffs, known_roots: Sequence = ()) -> ZeroSet:
    """All k zeros on CP^1 of a section given in the closed-form monomial basis.

    ``known_roots`` (homogeneous coordinates) are divided out exactly once each
    before the Aberth-Ehrlich iteration.
    """
    if s.basis.N != 1:
        raise ValueError("find_zeros_cp1 needs a CP^1 basis")
    if not np.any(s.coeffs):
        raise ValueError("zero section has no zero set")
    fixed = [_unit(r) for r in known_roots]
    core, low, inf = _prepared_polynomial(s.basis, s.coeffs, fixed)
    roots, ok = aberth_ehrlich(core[::-1][None, :])
    return ZeroSet(np.concatenate([np.zeros(low, dtype=complex), roots[0]]), inf, bool(ok[0]), fixed)


# -- ensemble statistics ----------------------------------------------------


@dataclass
class EmpiricalZeroMeasure:
    """Binned radial zero statistics in u = sqrt(k) |w|.

    ``counts`` are mean zeros per trial per bin; the integer tallies behind
    them are kept so the mass identity can be checked exactly.
    """

    k: int
    bin_edges: np.ndarray
    counts: np.ndarray
    stderr: np.ndarray
    trials_used: int
    trials_failed: int
    fixed_zero_mass: float
    zeros_at_infinity: float
    out_of_range: float
    bin_tally: np.ndarray
    fixed_tally: int
    infinity_tally: int
    out_tally: int
    angle_tally: np.ndarray
    per_trial_total_ok: bool

    def mass_identity_holds(self) -> bool:
        total = int(self.bin_tally.sum()) + self.fixed_tally + self.infinity_tally + self.out_tally
        return total == self.k * self.trials_used

    def total_mass(self) -> float:
        return float(self.counts.sum() + self.fixed_zero_mass + self.zeros_at_infinity + self.out_of_range)


@dataclass
class _Tally:
    bins: np.ndarray
    bins_sq: np.ndarray
    angles: np.ndarray
    fixed: int = 0
    infinity: int = 0
    out: int = 0
    used: int = 0
    failed: int = 0
    totals_ok: bool = True

    def merge(self, other: "_Tally") -> None:
        self.bins += other.bins
        self.bins_sq += other.bins_sq
        self.angles += other.angles
        self.fixed += other.fixed
        self.infinity += other.infinity
        self.out += other.out
        self.used += other.used
        self.failed += other.failed
        self.totals_ok &= other.totals_ok


N_ANGLE_BINS = 16


def _run_chunk(spec: EnsembleSpec, start: int, stop: int, edges: np.ndarray) -> _Tally:
    model = spec.model
    k = spec.k
    nb = len(edges) - 1
    tally = _Tally(np.zeros(nb, np.int64), np.zeros(nb, np.int64), np.zeros(N_ANGLE_BINS, np.int64))
    polys = []
    meta = []
    for i in range(start, stop):
        core, low, inf = _prepared_polynomial(model.basis, model.sample(spec.master_seed, i), model.fixed)
        polys.append(core)
        meta.append((low, inf))
    # batch by degree; each polynomial's iteration is independent of its batch
    roots_of = [None] * len(polys)
    ok_of = [False] * len(polys)
    degrees = np.array([len(p) - 1 for p in polys])
    for d in np.unique(degrees):
        group = np.flatnonzero(degrees == d)
        step = max(1, _BATCH_ELEMENTS // max(int(d), 1) ** 2)
        for s0 in range(0, group.size, step):
            idx = group[s0 : s0 + step]
            roots, ok = aberth_ehrlich(np.array([polys[j][::-1] for j in idx]))
            for row, j in enumerate(idx):
                roots_of[j] = roots[row]
                ok_of[j] = bool(ok[row])
    n_fixed = len(model.fixed)
    for j in range(len(polys)):
        if not ok_of[j]:
            tally.failed += 1
            continue
        low, inf = meta[j]
        w = np.concatenate([np.zeros(low, dtype=complex), roots_of[j]])
        hom = np.stack([np.ones_like(w), w], axis=-1)
        u = model.to_u(hom)
        in_range = (u >= edges[0]) & (u < edges[-1])
        per = np.histogram(u[in_range], bins=edges)[0]
        W = hom if model.single else model.frame.apply(hom)
        phi = np.angle(W[..., 1] * W[..., 0].conj())
        tally.angles += np.histogram(phi, bins=N_ANGLE_BINS, range=(-np.pi, np.pi))[0]
        tally.bins += per
        tally.bins_sq += per * per
        tally.fixed += n_fixed
        tally.infinity += inf
        tally.out += int(np.count_nonzero(~in_range))
        tally.used += 1
        tally.totals_ok &= (len(w) + inf + n_fixed) == k
    return tally


def default_threads() -> int:
    env = os.environ.get("LOGBERGMAN_THREADS")
    if env:
        return max(1, int(env))
    return min(8, os.cpu_count() or 1)


def empirical_density(spec: EnsembleSpec, bin_edges: Optional[np.ndarray] = None,
                      threads: Optional[int] = None, max_failure_rate: float = 1e-3
                      ) -> EmpiricalZeroMeasure:
    """Monte Carlo radial zero statistics of the conditional ensemble."""
    edges = DEFAULT_EDGES if bin_edges is None else np.asarray(bin_edges, dtype=float)
    threads = threads or default_threads()
    spec.model  # build shared read-only data before fanning out
    chunks = [(s, min(s + CHUNK, spec.trials)) for s in range(0, spec.trials, CHUNK)]
    if threads == 1 or len(chunks) == 1:
        parts = [_run_chunk(spec, a, b, edges) for a, b in chunks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda ab: _run_chunk(spec, ab[0], ab[1], edges), chunks))
    total = parts[0]
    for p in parts[1:]:
        total.merge(p)
    if total.failed > max_failure_rate * spec.trials:
        raise EnsembleError(f"{total.failed} of {spec.trials} trials failed to converge")
    if total.failed:
        logger.warning("%d trials excluded after root-finder failure", total.failed)
    n = total.used
    mean = total.bins / n
    var = np.maximum(total.bins_sq / n - mean**2, 0.0)
    stderr = np.sqrt(var / max(n - 1, 1))
    return EmpiricalZeroMeasure(
        k=spec.k,
        bin_edges=edges,
        counts=mean,
        stderr=stderr,
        trials_used=n,
        trials_failed=total.failed,
        fixed_zero_mass=total.fixed / n,
        zeros_at_infinity=total.infinity / n,
        out_of_range=total.out / n,
        bin_tally=total.bins,
        fixed_tally=total.fixed,
        infinity_tally=total.infinity,
        out_tally=total.out,
        angle_tally=total.angles,
        per_trial_total_ok=total.totals_ok,
    )
