"""Independent high-precision reference implementations (mpmath).

These deliberately avoid the package's closed forms: kernels are summed
over the monomial basis, distances come from the raw inner product, and
densities are differentiated symbolically by mpmath.
"""

import itertools
import math

import mpmath as mp

mp.mp.dps = 50


def multi_indices(N, k):
    for alpha in itertools.product(range(k + 1), repeat=N):
        if sum(alpha) <= k:
            yield alpha


def bergman_sum(N, k, z, in_V=None):
    """sum_alpha N_k * multinomial * |z^alpha|^2 / (1+|z|^2)^k over a chart point z.

    ``in_V`` restricts to multi-indices for which the predicate holds.
    """
    z = [mp.mpc(complex(c)) for c in z]
    Nk = mp.binomial(N + k, N)
    total = mp.mpf(0)
    for alpha in multi_indices(N, k):
        if in_V is not None and not in_V(alpha):
            continue
        m = mp.factorial(k) / (mp.factorial(k - sum(alpha)) * mp.fprod(mp.factorial(a) for a in alpha))
        total += m * mp.fprod(abs(c) ** (2 * a) for c, a in zip(z, alpha))
    return Nk * total / (1 + sum(abs(c) ** 2 for c in z)) ** k


def fs_distance(p, q):
    p = [mp.mpc(complex(c)) for c in p]
    q = [mp.mpc(complex(c)) for c in q]
    ip = abs(mp.fsum(a * mp.conj(b) for a, b in zip(p, q)))
    np_ = mp.sqrt(mp.fsum(abs(a) ** 2 for a in p))
    nq = mp.sqrt(mp.fsum(abs(b) ** 2 for b in q))
    return mp.acos(min(mp.mpf(1), ip / (np_ * nq)))


def ratio_chart(k, zn, zt):
    """1 - ((1+|z''|^2)/(1+|z|^2))^k at high precision."""
    tn = mp.fsum(abs(mp.mpc(complex(c))) ** 2 for c in zn)
    tt = mp.fsum(abs(mp.mpc(complex(c))) ** 2 for c in zt)
    return 1 - ((1 + tt) / (1 + tn + tt)) ** k


def conditional_density(k, t):
    """(1/pi) (t u')' for u = log((1+t)^k - 1), differentiated by mpmath."""
    t = mp.mpf(t)
    u = lambda s: mp.log((1 + s) ** k - 1)  # noqa: E731
    return (mp.diff(u, t) + t * mp.diff(u, t, 2)) / mp.pi


def scaling_density(t):
    t = mp.mpf(t)
    v = lambda s: mp.log(mp.exp(s) - 1)  # noqa: E731
    return (mp.diff(v, t) + t * mp.diff(v, t, 2)) / mp.pi


def beta(k, r, C=1):
    return C * mp.quad(lambda x: mp.sqrt(1 + k * x * x) * mp.exp(k * x * x / 2), [0, r])


def monomial_norm_fs(k, j):
    """int |z^j|^2 (1+|z|^2)^{-k} omega/pi = 1/((k+1) C(k,j)), via mpmath quadrature."""
    f = lambda t: t**j * (1 + t) ** (-k) / (1 + t) ** 2  # noqa: E731
    return mp.quad(f, [0, 1, mp.inf])
