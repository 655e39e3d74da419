"""Finite-N overlap kernels.

Reduced kernels are handled as complex logarithms throughout: for the
weak regime n grows like N^2 and the weights underflow long before the
kernel values they multiply would overflow.  Determinants are assembled
after pulling row and column scales out of the kernel matrix.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import gammaln

from .special import clog_sum
from .structures import (
    EnsembleParams,
    SingularityError,
    log_g_seq,
    log_qhat,
    phi_terms_log,
)

# coincidence band for the simplified route, in microscopic units
COINCIDENCE_TOL = 1e-3


class ConsistencyError(ArithmeticError):
    pass


class DegenerateError(ZeroDivisionError):
    pass


@dataclass(frozen=True)
class WeightedPoint:
    """A point with its 'conjugate' carried as an independent value."""

    z: complex
    zbar: complex

    @classmethod
    def physical(cls, z) -> "WeightedPoint":
        z = complex(z)
        return cls(z, z.conjugate())

    @property
    def is_physical(self) -> bool:
        return self.zbar == self.z.conjugate()

    def rotated(self, theta: float) -> "WeightedPoint":
        e = complex(math.cos(theta), math.sin(theta))
        return WeightedPoint(self.z * e, self.zbar * e.conjugate())


@dataclass(frozen=True)
class KernelEval:
    value: complex
    method: str
    regularized: bool = False


def _pt(p) -> WeightedPoint:
    return p if isinstance(p, WeightedPoint) else WeightedPoint.physical(p)


def _log(x: complex) -> complex:
    x = complex(x)
    if x == 0:
        return complex(-np.inf)
    return complex(np.log(x))


# ---------------------------------------------------------------- weights

def log_weight(z: complex, zbar: complex, params: EnsembleParams) -> complex:
    """log of (z zbar)^L (1 + z zbar)^{-(n+L+1)}, i.e. log e^{-NQ} continued."""
    t = complex(z) * complex(zbar)
    out = -(params.m + 1) * _log(1 + t)
    if params.L:
        out += params.L * _log(t)
    return out


def gaussian_free_weight(z, params: EnsembleParams) -> float:
    """e^{-NQ(z)} = |z|^{2L} (1+|z|^2)^{-(n+L+1)}."""
    r2 = abs(complex(z)) ** 2
    if r2 == 0:
        return 0.0 if params.L > 0 else 1.0
    return math.exp(params.L * math.log(r2) - (params.m + 1) * math.log1p(r2))


def weight_omega(z, u, v, params: EnsembleParams) -> complex:
    """((z-u)(zbar-v) + (1+uv)(1+z zbar)/(n+L)) e^{-NQ(z)}."""
    p = _pt(z)
    u, v = complex(u), complex(v)
    fac = (p.z - u) * (p.zbar - v) + (1 + u * v) * (1 + p.z * p.zbar) / params.m
    return fac * np.exp(log_weight(p.z, p.zbar, params))


def _half_log_omega_hat(u: complex, params: EnsembleParams) -> complex:
    """L log u - (n+L+1)/2 log(1+|u|^2); omega_hat(u,v) = exp of the sum over u, v
    up to the branch of (uv)^L."""
    out = -0.5 * (params.m + 1) * math.log1p(abs(u) ** 2)
    if params.L:
        out = out + params.L * _log(u)
    return complex(out)


def omega_hat(u, v, params: EnsembleParams) -> complex:
    """(uv)^L / ((1+|u|^2)(1+|v|^2))^{(n+L+1)/2}, principal branch for (uv)^L."""
    u, v = complex(u), complex(v)
    uv = u * v
    L = params.L
    if L and L != int(L) and uv.real < 0 and abs(uv.imag) < 1e-14 * abs(uv):
        warnings.warn("omega_hat: uv on the negative real axis with non-integer L", RuntimeWarning, stacklevel=2)
    lg = -0.5 * (params.m + 1) * (math.log1p(abs(u) ** 2) + math.log1p(abs(v) ** 2))
    if L:
        if uv == 0:
            return 0j
        lg = lg + L * np.log(uv)
    return complex(np.exp(lg))


def _omega_factor(z: WeightedPoint, lam: complex, lamb: complex, params: EnsembleParams) -> complex:
    return (z.z - lam) * (z.zbar - lamb) + (1 + lam * lamb) * (1 + z.z * z.zbar) / params.m


def varpi(z, w, lam, params: EnsembleParams) -> complex:
    zp, wp, lp = _pt(z), _pt(w), _pt(lam)
    return complex(np.sqrt(_omega_factor(zp, lp.z, lp.zbar, params)) * np.sqrt(_omega_factor(wp, lp.z, lp.zbar, params)))


# ---------------------------------------------------------------- standard kernel

def _log_isue_inv_norms(N: int, params: EnsembleParams) -> np.ndarray:
    k = np.arange(N, dtype=float)
    return gammaln(params.m + 1) - gammaln(params.n - k) - gammaln(k + params.L + 1)


def log_reduced_KN(zb: complex, w: complex, params: EnsembleParams, order: int | None = None) -> complex:
    """log of sum_{k<N} (zb w)^k / h_k for the unperturbed spherical weight."""
    N = params.N if order is None else order
    c = _log_isue_inv_norms(N, params)
    y = complex(zb) * complex(w)
    if y == 0:
        return complex(c[0])
    return clog_sum(c + np.arange(N) * np.log(y))


def kernel_KN(z, w, params: EnsembleParams) -> complex:
    """Correlation kernel of the eigenvalue process, with its weights."""
    z, w = complex(z), complex(w)
    if params.L and (z == 0 or w == 0):
        return 0j
    lw = 0.5 * (log_weight(z, z.conjugate(), params) + log_weight(w, w.conjugate(), params))
    return complex(np.exp(log_reduced_KN(z.conjugate(), w, params) + lw))


def one_point_density(z, params: EnsembleParams) -> float:
    return kernel_KN(z, z, params).real


# ---------------------------------------------------------------- reduced overlap kernel

def _log_tails(order: int, params: EnsembleParams, lg: np.ndarray, x: complex) -> np.ndarray:
    """log T_m = log sum_{j=m}^{order-1} phi_j, for m = 0..order-1."""
    terms = phi_terms_log(order - 1, params, lg, x)
    out = np.empty(order, dtype=complex)
    for m in range(order):
        out[m] = clog_sum(terms[m:])
    return out


def log_GN_terms(order: int, params: EnsembleParams, x: complex, logy: complex, logz: complex) -> complex:
    """log G_order(x | y, z) from the double sum, with log y and log z given."""
    lg = log_g_seq(order, params, x)
    tails = _log_tails(order, params, lg, x)
    s = np.arange(order)
    with np.errstate(invalid="ignore"):
        ly = lg[:order] + np.where(s == 0, 0.0, s * logy)
        lz = lg[:order] + np.where(s == 0, 0.0, s * logz)
    mx = np.maximum.outer(s, s)
    return clog_sum(ly[:, None] + lz[None, :] + tails[mx])


def GN_direct(x, y, zz, params: EnsembleParams) -> complex:
    """G_N(x | y, z) as the double sum over s, t < N with inner tails."""
    x = complex(x)
    n, L = params.n, params.L
    if x == 0:
        raise SingularityError("G_N is evaluated at x = lambda lambda-bar != 0")
    if params.N > n - 2 + 1e-12:
        raise SingularityError("G_N needs N <= n - 2")
    return complex(np.exp(log_GN_terms(params.N, params, x, _log(y), _log(zz))))


def _log_origin_kernel(zb: complex, w: complex, order: int, params: EnsembleParams) -> complex:
    n, L = params.n, params.L
    k = np.arange(order, dtype=float)
    c = gammaln(n + L + 1) - np.log(L + k + 2) - gammaln(n - k - 1) - gammaln(L + k + 1)
    y = zb * w
    if y == 0:
        return complex(c[0])
    return clog_sum(c + k * np.log(y))


def _micro_scale2(lam: complex, lamb: complex, params: EnsembleParams) -> float:
    return (params.m + 1) / abs(1 + lam * lamb) ** 2


def _log_reduced_direct(zb, w, lam, lamb, order, params) -> complex:
    if lam == 0 and lamb == 0:
        return _log_origin_kernel(zb, w, order, params)
    x = lam * lamb
    return log_GN_terms(order, params, x, _log(zb) - _log(lamb), _log(w) - _log(lam))


def _log_reduced_simplified(zb, w, lam, lamb, M, params) -> complex:
    """log of the reduced kernel from the H + I + II + III representation."""
    n, L = params.n, params.L
    x = lam * lamb
    u = zb - lamb
    v = w - lam
    hw = lambda a: _half_log_omega_hat(a, params)
    lw = lambda a, b: hw(a) + hw(b)

    def lP(m, y, a, b):
        return log_qhat(m, params, y, x) + lw(a, b)

    l0 = lP(M, x, lamb, lam).real
    P = lambda m, y, a, b: complex(np.exp(lP(m, y, a, b) - l0))

    Px = {m: P(m, x, lamb, lam) for m in (M - 1, M, M + 1)}
    zw = zb * w

    def QN(m):
        return (P(m, lamb * w, lamb, w) * P(m, zb * lam, zb, lam)
                - (1 - u * v / (1 + x)) * Px[m] * P(m, zw, zb, w))

    ghat = (M + L + 1) * Px[M + 1] - x * (n - M - 1) * Px[M]
    H = (1 + x) / (u * u * v * v * ghat) * ((M + L + 1) * QN(M + 1) - (n - M - 1) * x * QN(M))

    den1 = (1 + zw) * u * v
    I = ((L + M) * P(M, zw, zb, w) + (n - M - 1 - zw) * P(M - 1, zw, zb, w)) / den1
    if L:
        lc = gammaln(L + n + 1) - gammaln(n + 1) - gammaln(L)
        I -= n * (1 + x) / (n * x - L) * complex(np.exp(lc + lw(zb, w) - l0)) / den1

    lT = gammaln(L + n + 1) - gammaln(L + M + 1) - gammaln(n - M) + M * (_log(zb) + _log(w)) + lw(zb, w) - l0
    T = complex(np.exp(lT)) / (u * v * ghat)
    # x = lambda lambda-bar multiplies this term; without it the two routes disagree
    II = -(n - M - 1) * x * T * (Px[M - 1] - Px[M] / (n - M))
    III = T * ((n - M - 1) * (L + M + 1) / (n - M) * Px[M] - zw * Px[M + 1])

    total = H + I + II + III
    return _log(total) + l0 - lw(zb, w)


def log_reduced_kernel(zb, w, lam, lamb, order: int, params: EnsembleParams, method: str = "direct"):
    """(log K(zb, w | lam, lamb), method used, regularized flag)."""
    zb, w, lam, lamb = complex(zb), complex(w), complex(lam), complex(lamb)
    if method == "direct":
        return _log_reduced_direct(zb, w, lam, lamb, order, params), "direct", False
    if method != "simplified":
        raise ValueError(f"unknown method {method!r}")
    s2 = _micro_scale2(lam, lamb, params)
    if abs(zb - lamb) * abs(w - lam) * s2 < COINCIDENCE_TOL or (lam == 0 and lamb == 0):
        return _log_reduced_direct(zb, w, lam, lamb, order, params), "simplified", True
    if params.L and (zb == 0 or w == 0):
        return _log_reduced_direct(zb, w, lam, lamb, order, params), "simplified", True
    return _log_reduced_simplified(zb, w, lam, lamb, order, params), "simplified", False


def reduced_kernel(zb, w, lam, lamb, params: EnsembleParams, method: str = "direct", order: int | None = None) -> complex:
    order = params.N if order is None else order
    return complex(np.exp(log_reduced_kernel(zb, w, lam, lamb, order, params, method)[0]))


def K11_finite(z, w, lam, params: EnsembleParams, method: str = "direct") -> KernelEval:
    zp, wp, lp = _pt(z), _pt(w), _pt(lam)
    lk, used, reg = log_reduced_kernel(zp.zbar, wp.z, lp.z, lp.zbar, params.N, params, method)
    vp = np.sqrt(_omega_factor(zp, lp.z, lp.zbar, params)) * np.sqrt(_omega_factor(wp, lp.z, lp.zbar, params))
    lwt = 0.5 * (log_weight(zp.z, zp.zbar, params) + log_weight(wp.z, wp.zbar, params))
    return KernelEval(complex(vp * np.exp(lk + lwt)), used, reg)


def K12_finite(z, w, u, v, params: EnsembleParams, method: str = "direct") -> complex:
    """Off-diagonal kernel conditioned at (u, v-bar)."""
    zp, wp, up, vp = _pt(z), _pt(w), _pt(u), _pt(v)
    lam, lamb = up.z, vp.zbar
    order = params.N
    lk = lambda a, b: log_reduced_kernel(a, b, lam, lamb, order, params, method)[0]
    k_uv = lk(up.zbar, vp.z)
    if not np.isfinite(k_uv.real):
        raise DegenerateError(f"reduced kernel vanishes at conditioning pair ({up.z}, {vp.z})")
    # 2x2 determinant divided by K(u-bar, v), in units of exp(k_uv)
    k_uw = np.exp(lk(up.zbar, wp.z) - k_uv)
    k_zv = np.exp(lk(zp.zbar, vp.z) - k_uv)
    schur = np.exp(lk(zp.zbar, wp.z)) - np.exp(k_uv + np.log(k_uw * k_zv)) if k_uw * k_zv != 0 else np.exp(lk(zp.zbar, wp.z))
    fac = np.sqrt(_omega_factor(zp, lam, lamb, params)) * np.sqrt(_omega_factor(wp, lam, lamb, params))
    lwt = 0.5 * (log_weight(zp.z, zp.zbar, params) + log_weight(wp.z, wp.zbar, params))
    return complex(fac * schur * np.exp(lwt))


# ---------------------------------------------------------------- determinants

def _log_det_scaled(rows: Sequence[complex], cols: Sequence[complex], logK: np.ndarray):
    """log det of exp(logK) after removing row/col scales; returns complex log."""
    k = logK.shape[0]
    if k == 0:
        return 0j
    r = np.asarray(rows, dtype=complex)
    c = np.asarray(cols, dtype=complex)
    scaled = logK - r[:, None] - c[None, :]
    ref = np.max(scaled.real)
    det = np.linalg.det(np.exp(scaled - ref))
    return _log(det) + k * ref + np.sum(r) + np.sum(c)


def _log_half_weights(p: WeightedPoint, params):
    return _half_log_omega_hat(p.zbar, params), _half_log_omega_hat(p.z, params)


def log_D11_core(pts: Sequence[WeightedPoint], params: EnsembleParams, method: str = "direct") -> complex:
    """Complex log of D11 with every point given as an independent (z, zbar) pair.

    Physical input gives the diagonal conditional overlap density; swapped
    conjugates give the transformed object used by the decoupling identity.
    """
    N, n = params.N, params.n
    p1 = pts[0]
    x = p1.z * p1.zbar
    lg = log_g_seq(N - 1, params, x)
    out = _log(n) + lg[N - 1] + log_weight(p1.z, p1.zbar, params)
    rest = pts[1:]
    if not rest:
        return out
    if N < 2:
        raise ValueError("k must not exceed N")
    lam, lamb = p1.z, p1.zbar
    k = len(rest)
    logK = np.empty((k, k), dtype=complex)
    for i, pi in enumerate(rest):
        for j, pj in enumerate(rest):
            logK[i, j] = log_reduced_kernel(pi.zbar, pj.z, lam, lamb, N - 1, params, method)[0]
    rows = [_half_log_omega_hat(p.zbar, params) for p in rest]
    cols = [_half_log_omega_hat(p.z, params) for p in rest]
    # kernel entries carry 1/omega_hat scaling, so remove its negative
    out += _log_det_scaled([-r for r in rows], [-c for c in cols], logK)
    for p in rest:
        out += _log(_omega_factor(p, lam, lamb, params)) + log_weight(p.z, p.zbar, params)
    return out


def _real_or_raise(logv: complex, what: str, tol: float = 1e-9) -> float:
    if not np.isfinite(logv.real):
        return 0.0
    v = complex(np.exp(logv))
    if abs(v.imag) > tol * abs(v):
        raise ConsistencyError(f"{what} has imaginary residue {v.imag:.3e} (value {v.real:.6e})")
    return v.real


def _check_cfg(pts, params):
    if len(pts) < 1 or len(pts) > params.N:
        raise ValueError("configuration size must satisfy 1 <= k <= N")
    for i in range(len(pts)):
        for j in range(i):
            if abs(pts[i].z - pts[j].z) < 1e-12:
                raise ValueError("configuration points must be pairwise distinct")


def D11_finite(cfg, params: EnsembleParams, method: str = "direct") -> float:
    pts = [_pt(p) for p in cfg]
    _check_cfg(pts, params)
    return _real_or_raise(log_D11_core(pts, params, method), "D11")


def log_D12_core(pts: Sequence[WeightedPoint], params: EnsembleParams, method: str = "direct") -> complex:
    """Complex log of -D12 through the off-diagonal kernel route."""
    N, n, m = params.N, params.n, params.m
    p1, p2 = pts[0], pts[1]
    lam, lamb = p1.z, p2.zbar
    x12 = lam * lamb
    lg = log_g_seq(N - 1, params, x12)
    lk = lambda a, b: log_reduced_kernel(a, b, lam, lamb, N - 1, params, method)[0]
    k12 = lk(p1.zbar, p2.z)
    # (1+|z1|^2)(1+|z2|^2) restores the sum rule sum_j O_1j = 1; see notes
    out = (_log(n) + lg[N - 1] - _log(m) + _log(1 + p1.z * p1.zbar) + _log(1 + p2.z * p2.zbar)
           + log_weight(p1.z, p1.zbar, params) + log_weight(p2.z, p2.zbar, params) + k12)
    rest = pts[2:]
    if not rest:
        return out
    k = len(rest)
    # Schur complement entries K(zb_i, z_j) - K(zb_i, z2) K(z1b, z_j) / K(z1b, z2)
    logM = np.empty((k, k), dtype=complex)
    a_i = [lk(p.zbar, p2.z) for p in rest]
    b_j = [lk(p1.zbar, p.z) for p in rest]
    for i, pi in enumerate(rest):
        for j, pj in enumerate(rest):
            kij = lk(pi.zbar, pj.z)
            corr = a_i[i] + b_j[j] - k12
            ref = max(kij.real, corr.real)
            val = np.exp(kij - ref) - np.exp(corr - ref)
            logM[i, j] = _log(val) + ref
    rows = [_half_log_omega_hat(p.zbar, params) for p in rest]
    cols = [_half_log_omega_hat(p.z, params) for p in rest]
    out += _log_det_scaled([-r for r in rows], [-c for c in cols], logM)
    for p in rest:
        out += _log(_omega_factor(p, lam, lamb, params)) + log_weight(p.z, p.zbar, params)
    return out


def D12_finite(cfg, params: EnsembleParams, method: str = "direct") -> complex:
    """Off-diagonal conditional overlap density, sign included.

    Complex in general, already for k = 2.  Real when every point is real,
    and conjugating the configuration conjugates the value.
    """
    pts = [_pt(p) for p in cfg]
    _check_cfg(pts, params)
    if len(pts) < 2:
        raise ValueError("D12 needs at least two points")
    lv = log_D12_core(pts, params, method)
    if not np.isfinite(lv.real):
        return 0j
    return -complex(np.exp(lv))


def transformed_D11(cfg, params: EnsembleParams, method: str = "direct") -> complex:
    """D11 with the conjugates of the first two points exchanged."""
    pts = [_pt(p) for p in cfg]
    p1, p2 = pts[0], pts[1]
    swapped = [WeightedPoint(p1.z, p2.zbar), WeightedPoint(p2.z, p1.zbar)] + pts[2:]
    return complex(np.exp(log_D11_core(swapped, params, method)))


def decoupling_D12(cfg, params: EnsembleParams, method: str = "direct") -> complex:
    """D12 from the transformed D11 and the explicit decoupling prefactor."""
    pts = [_pt(p) for p in cfg]
    z1, z2 = pts[0].z, pts[1].z
    e = params.m + 1
    a = abs(1 + z1 * z2.conjugate()) ** 2
    den = a - params.m * abs(z1 - z2) ** 2
    if abs(den) < 1e-14 * max(a, 1.0):
        raise SingularityError("decoupling prefactor has a pole on |1+z1 z2b|^2 = (n+L)|z1-z2|^2")
    lpre = e * math.log(a) - (e - 1) * (math.log1p(abs(z1) ** 2) + math.log1p(abs(z2) ** 2))
    return complex(-np.exp(lpre) * transformed_D11(pts, params, method) / den)


def decouple_check(z1, z2, rest, params: EnsembleParams) -> float:
    """Relative deviation between the decoupling route and the kernel route.

    The transform route is evaluated with the direct reduced kernel and the
    kernel route with the simplified one, so no evaluation is shared.
    """
    cfg = [_pt(z1), _pt(z2)] + [_pt(p) for p in rest]
    a = decoupling_D12(cfg, params, method="direct")
    b = D12_finite(cfg, params, method="simplified")
    return abs(a - b) / abs(b)


# ---------------------------------------------------------------- conditional expectations

def cond_exp_O11(z, params: EnsembleParams) -> float:
    """E[O11 | lambda_1 = z] = D11^{(N,1)}(z) / R_{N,1}(z), weights cancelled."""
    z = complex(z)
    x = abs(z) ** 2
    lg = log_g_seq(params.N - 1, params, x)
    num = math.log(params.n) + lg[params.N - 1].real
    den = log_reduced_KN(z.conjugate(), z, params).real
    return math.exp(num - den)


def two_point_density(z1, z2, params: EnsembleParams) -> float:
    z1, z2 = complex(z1), complex(z2)
    k11 = kernel_KN(z1, z1, params)
    k22 = kernel_KN(z2, z2, params)
    k12 = kernel_KN(z1, z2, params)
    return (k11 * k22 - abs(k12) ** 2).real


def cond_exp_O12(z1, z2, params: EnsembleParams, method: str = "direct") -> float:
    """E[O12 | lambda_1 = z1, lambda_2 = z2] = D12^{(N,2)} / R_{N,2}."""
    z1, z2 = complex(z1), complex(z2)
    den = two_point_density(z1, z2, params)
    if not den > 0:
        raise DegenerateError("two-point density vanishes")
    return D12_finite([z1, z2], params, method).real / den


def quenched_O11(lams, params: EnsembleParams) -> float:
    lams = np.asarray(lams, dtype=complex)
    l1, rest = lams[0], lams[1:]
    d2 = np.abs(l1 - rest) ** 2
    if np.any(d2 == 0):
        raise DegenerateError("coincident eigenvalues")
    return float(np.prod(1 + (1 + abs(l1) ** 2) * (1 + np.abs(rest) ** 2) / (params.m * d2)))


def quenched_O12(lams, params: EnsembleParams) -> complex:
    lams = np.asarray(lams, dtype=complex)
    l1, l2, rest = lams[0], lams[1], lams[2:]
    d12 = abs(l1 - l2) ** 2
    if d12 == 0 or np.any(rest == l1) or np.any(rest == l2):
        raise DegenerateError("coincident eigenvalues")
    fac = 1 + (1 + l1 * l2.conjugate()) * (1 + np.abs(rest) ** 2) / (params.m * (l1 - rest) * np.conj(l2 - rest))
    pre = (1 + abs(l1) ** 2) * (1 + abs(l2) ** 2) / (params.m * d12)
    return complex(-np.prod(fac) * pre)
