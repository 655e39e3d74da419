"""Orthogonal polynomial machinery for the deformed spherical weight.

The moment matrix of the weight is tridiagonal after a diagonal rescaling,
so its LDU factors follow a scalar pivot recurrence.  The pivots are
ratios g_{p+1}/g_p of the polynomials g_m below, which is how g is
evaluated stably for large m.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .special import DomainError, clog_sum


class SingularityError(ZeroDivisionError):
    """Evaluation at an excluded point (x = 0, nx = L, ...)."""


class BreakdownError(ArithmeticError):
    pass


@dataclass(frozen=True)
class EnsembleParams:
    """Matrix size N and the spherical-ensemble parameters n, L."""

    N: int
    n: float
    L: float

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise DomainError(f"N must be a positive integer, got {self.N!r}")
        if self.L < 0:
            raise DomainError(f"L must be >= 0, got {self.L!r}")
        if self.n < self.N or self.n < self.L:
            raise DomainError(f"need n >= N and n >= L, got n={self.n}, N={self.N}, L={self.L}")

    @property
    def m(self) -> float:
        """n + L, the exponent that appears everywhere."""
        return self.n + self.L

    @property
    def r1(self) -> float:
        return math.sqrt(self.L / self.n)

    @property
    def r2(self) -> float:
        return math.sqrt((self.N + self.L) / (self.n - self.N)) if self.n > self.N else math.inf

    def with_N(self, N: int) -> "EnsembleParams":
        return EnsembleParams(N, self.n, self.L)


def _as_complex(x) -> complex:
    return complex(x)


def _clog(x: complex) -> complex:
    if x == 0:
        return complex(-np.inf)
    return np.log(complex(x))


# ---------------------------------------------------------------- binomials

def log_binom_coeffs(kmax: int, params: EnsembleParams) -> np.ndarray:
    """log B_k = log Gamma(L+n+1) - log Gamma(k+L+1) - log Gamma(n+1-k), k = 0..kmax."""
    n, L = params.n, params.L
    if kmax > n:
        raise DomainError(f"degree {kmax} exceeds n = {n}")
    k = np.arange(kmax + 1, dtype=float)
    return gammaln(L + n + 1) - gammaln(k + L + 1) - gammaln(n + 1 - k)


def _log_qhat_correction(params: EnsembleParams, x: complex) -> complex | None:
    """log of Gamma(L+n+1)/((n x - L) Gamma(n+1) Gamma(L)); None when L = 0."""
    n, L = params.n, params.L
    if L == 0:
        return None
    den = n * x - L
    if abs(den) < 1e-12:
        raise SingularityError("q-hat correction has a pole at n x = L")
    return gammaln(L + n + 1) - gammaln(n + 1) - gammaln(L) - _clog(den)


# ---------------------------------------------------------------- q, q-hat, g-hat

def log_q(deg: int, params: EnsembleParams, y) -> complex:
    """Complex log of q_deg(y).

    Terms follow t_{k+1} = t_k * y * (n-k)/(k+L+1), accumulated as logs.
    """
    n, L = params.n, params.L
    if deg > n:
        raise DomainError(f"q_deg needs deg <= n, got deg={deg}, n={n}")
    y = complex(y)
    lb0 = gammaln(L + n + 1) - gammaln(L + 1) - gammaln(n + 1)
    if deg == 0 or y == 0:
        return complex(lb0)
    k = np.arange(deg, dtype=float)
    steps = np.log((n - k) / (k + L + 1)) + np.log(y)
    logs = np.concatenate(([lb0], lb0 + np.cumsum(steps)))
    return clog_sum(logs)


def eval_q(deg: int, params: EnsembleParams, x) -> complex:
    return complex(np.exp(log_q(deg, params, x)))


def log_qhat(deg: int, params: EnsembleParams, y, x) -> complex:
    lq = log_q(deg, params, y)
    corr = _log_qhat_correction(params, complex(x))
    if corr is None:
        return lq
    return clog_sum(np.array([lq, corr]))


def eval_qhat(deg: int, params: EnsembleParams, y, x) -> complex:
    return complex(np.exp(log_qhat(deg, params, y, x)))


def log_ghat(deg: int, params: EnsembleParams, x) -> complex:
    """log of (L+deg+1) qhat_{deg+1}(x|x) - x (n-deg-1) qhat_deg(x|x)."""
    n, L = params.n, params.L
    x = complex(x)
    a = np.log(L + deg + 1) + log_qhat(deg + 1, params, x, x)
    b = log_qhat(deg, params, x, x)
    c = n - deg - 1
    if c == 0 or x == 0:
        return a
    # subtraction: a - x c e^b
    bb = b + _clog(x * c) + 1j * np.pi
    return clog_sum(np.array([a, bb]))


def eval_ghat(deg: int, params: EnsembleParams, x) -> complex:
    return complex(np.exp(log_ghat(deg, params, x)))


# ---------------------------------------------------------------- g

def eval_g(m: int, params: EnsembleParams, x) -> complex:
    """g_m(x) from its defining two-term formula (binomials as Gamma ratios)."""
    n, L = params.n, params.L
    x = complex(x)
    if x == 0:
        raise SingularityError("g_m has 1/x prefactors; x = 0 is excluded")
    lb = log_binom_coeffs(m, params)
    k = np.arange(m + 1)
    s = np.sum((m + 1 - k) * np.exp(lb + k * np.log(x)))
    return (x - L / n) / x * s + L * (m + 1) / (n * x) * math.exp(lb[0])


def pivots(depth: int, params: EnsembleParams, x) -> np.ndarray:
    """Pivots d_0..d_depth of the scaled moment matrix (complex x allowed)."""
    n, L = params.n, params.L
    x = complex(x)
    d = np.empty(depth + 1, dtype=complex)
    d[0] = L + 2 + n * x
    for p in range(1, depth + 1):
        d[p] = -x * (p + L) * (n - p - 1) / d[p - 1] + p + L + 2 + x * (n - p)
    return d


def log_g_seq(mmax: int, params: EnsembleParams, x) -> np.ndarray:
    """Complex logs of g_0..g_mmax via r_p = prod_{i<p} d_i."""
    n, L = params.n, params.L
    d = pivots(max(mmax - 1, 0), params, x)
    logr = np.concatenate(([0.0], np.cumsum(np.log(d[:mmax]))))
    p = np.arange(mmax + 1, dtype=float)
    return logr + gammaln(L + n + 1) - gammaln(n + 1) - gammaln(L + p + 1)


# ---------------------------------------------------------------- moment matrix and LDU

def moment_entry(i: int, j: int, params: EnsembleParams, a) -> complex:
    """Entry (i, j) of M = int conj(z)^i z^j omega(z | a, conj a) dA."""
    n, L = params.n, params.L
    if i < 0 or j < 0 or i > n - 2:
        raise DomainError("moment index outside band")
    a = complex(a)
    base = math.exp(gammaln(n - i - 1) + gammaln(i + L + 1) - gammaln(n + L + 1))
    if i == j:
        mu = i + L + 2 + (n - i) * abs(a) ** 2
    elif j == i + 1:
        mu = -(i + L + 1) * a
    elif i == j + 1:
        mu = -(n - i - 1) * a.conjugate()
    else:
        return 0j
    return base * mu


@dataclass(frozen=True)
class LduFactors:
    """Pivots of the tridiagonal mu = L D U with x = |a|^2.

    ell[p] and u[p] (p >= 1) are the coefficients of conj(a) and a in the
    off-diagonal entries, so ell_p = conj(a) * ell[p] and u_p = a * u[p].
    """

    d: np.ndarray
    ell: np.ndarray
    u: np.ndarray
    x: float


def ldu_decompose(depth: int, params: EnsembleParams, x: float) -> LduFactors:
    n, L = params.n, params.L
    if depth > n - 2:
        raise DomainError("LDU depth must be <= n - 2")
    if x < 0:
        raise DomainError("x = |a|^2 must be nonnegative")
    d = pivots(depth, params, x).real
    if np.any(d <= 0):
        raise BreakdownError("nonpositive pivot in LDU recurrence")
    p = np.arange(depth, dtype=float)
    u = np.concatenate(([0.0], -(p + L + 1) / d[:-1]))
    ell = np.concatenate(([0.0], -(n - p - 2) / d[:-1]))
    return LduFactors(d=d, ell=ell, u=u, x=float(x))


@dataclass(frozen=True)
class PolyFamily:
    """Monic biorthogonal family for the weight conditioned at a.

    P[k, j] is the coefficient of z^j in P_k, Q likewise, norms[k] = h_k.
    """

    base_point: complex
    degree: int
    P: np.ndarray
    Q: np.ndarray
    norms: np.ndarray = field(repr=False)

    def eval_P(self, k: int, z) -> complex:
        return complex(np.polyval(self.P[k, : k + 1][::-1], z))

    def eval_Q(self, k: int, z) -> complex:
        return complex(np.polyval(self.Q[k, : k + 1][::-1], z))


def _log_h(k: np.ndarray, params: EnsembleParams, lg: np.ndarray) -> np.ndarray:
    n, L = params.n, params.L
    return gammaln(k + L + 2) + gammaln(n - k - 1) - gammaln(n + L + 1) + lg[k + 1] - lg[k]


def build_poly_family(maxdeg: int, params: EnsembleParams, a) -> PolyFamily:
    """P_k from conj(L^{-1}) rows and Q_k from U^{-1} columns."""
    n, L = params.n, params.L
    if maxdeg > n - 2:
        raise DomainError("maxdeg must be <= n - 2")
    a = complex(a)
    x = abs(a) ** 2
    size = maxdeg + 1
    k = np.arange(size)
    if x == 0:
        P = np.eye(size, dtype=complex)
        h = np.exp(np.log(L + k + 2) + gammaln(n - k - 1) + gammaln(L + k + 1) - gammaln(n + L + 1))
        return PolyFamily(a, maxdeg, P, P.copy(), h)
    lg = log_g_seq(size, params, x).real
    ratio = np.exp(lg[None, :] - lg[:, None])   # g_j / g_k at [k, j]
    # L^{-1}[k, j] = conj(a)^{k-j} g_j/g_k and U^{-1}[j, k] = a^{k-j} g_j/g_k, j <= k
    Linv = np.zeros((size, size), dtype=complex)
    Uinv = np.zeros((size, size), dtype=complex)
    for kk in range(size):
        for j in range(kk + 1):
            Linv[kk, j] = a.conjugate() ** (kk - j) * ratio[kk, j]
            Uinv[j, kk] = a ** (kk - j) * ratio[kk, j]
    P = np.conj(Linv)
    Q = Uinv.T.copy()
    h = np.exp(_log_h(k, params, lg))
    return PolyFamily(a, maxdeg, P, Q, h)


def three_term_residual(k: int, params: EnsembleParams, a, z) -> complex:
    """z P_k - P_{k+1} - b_k P_k - z c_k P_{k-1}; zero up to rounding.

    The residual polynomial is assembled coefficient-wise and evaluated once.
    """
    a, z = complex(a), complex(z)
    if k < 1:
        raise DomainError("three-term recurrence needs k >= 1")
    fam = build_poly_family(k + 1, params, a)
    if a == 0:
        b_k = c_k = 0.0
    else:
        lg = log_g_seq(k + 2, params, abs(a) ** 2).real
        b_k = -a * math.exp(lg[k] - lg[k + 1])
        c_k = a * math.exp(lg[k - 1] - lg[k])
    res = np.zeros(k + 2, dtype=complex)
    res[1:] += fam.P[k, : k + 1]
    res -= fam.P[k + 1, : k + 2]
    res[: k + 1] -= b_k * fam.P[k, : k + 1]
    res[1:k + 1] -= c_k * fam.P[k - 1, :k]
    return complex(np.polyval(res[::-1], z))


# ---------------------------------------------------------------- Phi and alpha

def _check_phi_point(params: EnsembleParams, x: complex):
    if x == 0 or abs(params.n * x - params.L) < 1e-14 * max(1.0, params.L):
        raise SingularityError("Phi is singular at x = 0 and x = L/n")


def phi_closed(q: int, params: EnsembleParams, x) -> complex:
    """Phi_q from its closed form in terms of g_{q+1}."""
    n, L = params.n, params.L
    x = complex(x)
    _check_phi_point(params, x)
    den = x * (x - L / n)
    c0 = math.exp(gammaln(n + 1) + gammaln(L + 1) - gammaln(n + L + 1))
    return c0 * ((n - 1) * x - (L + 1)) / den + (-(n - q - 2) * x + L + q + 2) / (den * eval_g(q + 1, params, x))


def phi_terms_log(q: int, params: EnsembleParams, lg: np.ndarray, x) -> np.ndarray:
    """Complex logs of the summands of Phi_q given logs of g_0..g_{q+1}."""
    n, L = params.n, params.L
    j = np.arange(q + 1, dtype=float)
    return (gammaln(n + L + 1) - gammaln(j + L + 2) - gammaln(n - j - 1)
            + j * _clog(complex(x)) - lg[1 : q + 2] - lg[: q + 1])


def phi_direct(q: int, params: EnsembleParams, x) -> complex:
    """Phi_q from its defining sum with g from the two-term formula."""
    n, L = params.n, params.L
    x = complex(x)
    _check_phi_point(params, x)
    if q > n - 3:
        raise DomainError("phi needs q <= n - 3")
    g = np.array([eval_g(j, params, x) for j in range(q + 2)])
    j = np.arange(q + 1, dtype=float)
    coef = np.exp(gammaln(n + L + 1) - gammaln(j + L + 2) - gammaln(n - j - 1))
    return complex(np.sum(coef * x ** j / (g[1:] * g[:-1])))


def alpha_closed(m: int, params: EnsembleParams, x, w) -> complex:
    """Closed form of sum_{s<=m} g_s(x) w^s."""
    n, L = params.n, params.L
    x, w = complex(x), complex(w)
    if w == 1:
        raise SingularityError("alpha closed form is singular at w = 1")
    _check_phi_point(params, x)
    pre = (x - L / n) / x
    qxw = eval_qhat(m, params, x * w, x)
    qxx = eval_qhat(m, params, x, x)
    bm = math.exp(gammaln(L + n + 1) - gammaln(L + m + 1) - gammaln(n - m))
    return pre * (qxw / (1 - w) ** 2
                  - (x * w) ** (m + 1) * bm / ((1 - w) * (1 + x))
                  - w ** (m + 1) * (L + m + 1 - (n - m - 1) * x) * qxx / ((1 + x) * (1 - w))
                  - w ** (m + 1) * qxx / (1 - w) ** 2)


def partition_bridge(params: EnsembleParams, x: float) -> tuple[float, float]:
    """(N!/Z_N prod_{j<=N-2} h_j, n g_{N-1}(x)) computed by separate routes.

    Z_N = N! prod_{j<N} Gamma(n-j)Gamma(j+L+1)/Gamma(n+L+1) for the radial weight.
    """
    N, n, L = params.N, params.n, params.L
    j = np.arange(N - 1)
    lg = log_g_seq(N, params, x).real
    log_h = _log_h(j, params, lg) if N > 1 else np.zeros(0)
    jj = np.arange(N)
    log_z = np.sum(gammaln(n - jj) + gammaln(jj + L + 1) - gammaln(n + L + 1))
    lhs = math.exp(float(np.sum(log_h)) - log_z)
    rhs = n * eval_g(N - 1, params, x).real
    return lhs, rhs
