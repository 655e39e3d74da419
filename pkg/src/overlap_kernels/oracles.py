"""Brute-force reference computations.

Nothing here goes through the simplified kernel route.  The area element
is dA = d^2 z / pi throughout, the normalization under which the spherical
norms are h_j = Gamma(j+L+1) Gamma(n-j) / Gamma(n+L+1).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import permutations
from typing import Callable, Sequence

import numpy as np
from scipy import integrate
from scipy.special import gammaln, roots_jacobi

from .special import ConvergenceError, F, L_rho, calL_rho, mittag_leffler, rgamma
from .structures import EnsembleParams, PolyFamily, log_qhat


# ---------------------------------------------------------------- plane quadrature

@dataclass(frozen=True)
class QuadratureSpec:
    r_max: float | None = None
    tol: float = 1e-10
    max_refine: int = 6
    degree: int = 8          # max polynomial degree in z or zbar, sets angular nodes
    origin_power: float = 0.0  # integrand ~ |z|^(2 origin_power) near 0
    radial_nodes: int = 24


def _plane_rule(nr: int, nth: int, spec: QuadratureSpec):
    """Nodes z and weights for int f dA over the disk r < r_max (or the plane).

    s = r^2/(1+r^2) maps the plane to [0, 1); the |z|^(2L) behaviour at the
    origin is absorbed into a Gauss-Jacobi weight s^L.
    """
    beta = spec.origin_power
    x, wx = roots_jacobi(nr, 0.0, beta)
    smax = 1.0 if spec.r_max is None else spec.r_max ** 2 / (1 + spec.r_max ** 2)
    s = 0.5 * (1 + x) * smax
    # int_0^smax g(s) ds = (smax/2)^(1+beta) int (1+x)^beta g / s^beta dx
    ws = wx * (smax / 2) ** (1 + beta) / s ** beta
    r = np.sqrt(s / (1 - s))
    th = 2 * np.pi * np.arange(nth) / nth
    z = (r[:, None] * np.exp(1j * th[None, :])).ravel()
    # dA = d(r^2) dtheta / (2 pi), d(r^2) = ds / (1-s)^2
    w = (ws / (1 - s) ** 2)[:, None] * np.full(nth, 1.0 / nth)[None, :]
    return z, w.ravel()


def quad_plane(integrand: Callable, spec: QuadratureSpec = QuadratureSpec(), dim: int = 1) -> complex:
    """int f dA^dim by a tensor rule refined until two levels agree within tol.

    integrand takes dim arrays of complex points and is vectorized.
    """
    nth = 4 * spec.degree + 8
    nr = spec.radial_nodes
    prev = None
    for _ in range(spec.max_refine):
        z, w = _plane_rule(nr, nth, spec)
        if dim == 1:
            val = complex(np.sum(w * integrand(z)))
        elif dim == 2:
            Z1, Z2 = np.meshgrid(z, z, indexing="ij")
            val = complex(np.sum(np.outer(w, w) * integrand(Z1, Z2)))
        else:
            raise ValueError("quad_plane supports dim 1 or 2")
        if prev is not None and abs(val - prev) <= spec.tol * max(1.0, abs(val)):
            return val
        prev = val
        nr *= 2
        if dim == 1:
            nth = nth + nth // 2
    raise ConvergenceError(f"quad_plane did not settle after {spec.max_refine} refinements")


def radial_quad(g: Callable[[float], float], r_max: float = np.inf, tol: float = 1e-12) -> float:
    """int g(|z|) dA = 2 int_0^r_max g(r) r dr, for radially symmetric g."""
    val, _ = integrate.quad(lambda r: 2 * g(r) * r, 0, r_max, epsabs=tol, epsrel=tol, limit=200)
    return val


# ---------------------------------------------------------------- weights, written out again

def spherical_weight(z, params: EnsembleParams):
    z = np.asarray(z, dtype=complex)
    a2 = np.abs(z) ** 2
    with np.errstate(divide="ignore"):
        lw = -(params.m + 1) * np.log1p(a2)
        if params.L:
            lw = lw + params.L * np.log(a2)
    return np.exp(lw)


def deformed_weight(z, u, v, params: EnsembleParams):
    z = np.asarray(z, dtype=complex)
    fac = (z - u) * (np.conj(z) - v) + (1 + u * v) * (1 + np.abs(z) ** 2) / params.m
    return fac * spherical_weight(z, params)


def _spec_for(params: EnsembleParams, degree: int, tol: float = 1e-12) -> QuadratureSpec:
    return QuadratureSpec(tol=tol, degree=degree, origin_power=float(params.L), radial_nodes=32)


# ---------------------------------------------------------------- Gram-Schmidt

def moment_matrix_quad(maxdeg: int, params: EnsembleParams, a) -> np.ndarray:
    a = complex(a)
    size = maxdeg + 1
    spec = _spec_for(params, 2 * maxdeg + 2)
    M = np.empty((size, size), dtype=complex)
    for i in range(size):
        for j in range(size):
            M[i, j] = quad_plane(lambda z: np.conj(z) ** i * z ** j * deformed_weight(z, a, a.conjugate(), params), spec)
    return M


def gram_schmidt_reference(maxdeg: int, params: EnsembleParams, a) -> PolyFamily:
    """Monic orthogonal polynomials from a quadrature moment matrix via Cholesky."""
    if maxdeg > 6:
        raise ValueError("gram_schmidt_reference is limited to maxdeg <= 6")
    a = complex(a)
    M = moment_matrix_quad(maxdeg, params, a)
    M = 0.5 * (M + M.conj().T)
    if np.linalg.cond(M) > 1e13:
        raise ArithmeticError("moment matrix too ill-conditioned for Gram-Schmidt")
    C = np.linalg.cholesky(M)           # M = C C^H, C lower
    d = np.real(np.diag(C))
    Lf = C / d[None, :]                 # unit lower
    Linv = np.linalg.inv(Lf)
    P = np.conj(Linv)
    return PolyFamily(a, maxdeg, P, P.copy(), d ** 2)


def gram_matrix(fam: PolyFamily, params: EnsembleParams, spec: QuadratureSpec | None = None) -> np.ndarray:
    """G[j, k] = int conj(P_j) Q_k omega(z | a, conj a) dA."""
    a = fam.base_point
    deg = fam.degree
    spec = spec or _spec_for(params, 2 * deg + 2, tol=1e-11)
    G = np.empty((deg + 1, deg + 1), dtype=complex)
    for j in range(deg + 1):
        pj = fam.P[j, : j + 1][::-1]
        for k in range(deg + 1):
            qk = fam.Q[k, : k + 1][::-1]
            G[j, k] = quad_plane(
                lambda z: np.conj(np.polyval(pj, z)) * np.polyval(qk, z) * deformed_weight(z, a, a.conjugate(), params),
                spec,
            )
    return G


# ---------------------------------------------------------------- brute-force D

def _log_ZN(params: EnsembleParams) -> float:
    """log N! prod h_j with h_j from plane quadrature of |z|^{2j} e^{-NQ}."""
    N = params.N
    spec = _spec_for(params, 2 * N)
    hs = [quad_plane(lambda z: np.abs(z) ** (2 * j) * spectral_w(z), spec).real
          for j in range(N)
          for spectral_w in [lambda z: spherical_weight(z, params)]]
    return math.lgamma(N + 1) + float(np.sum(np.log(hs)))


def _vdm2(zs: Sequence) -> np.ndarray:
    out = 1.0
    for i in range(len(zs)):
        for j in range(i + 1, len(zs)):
            out = out * np.abs(zs[i] - zs[j]) ** 2
    return out


def _integrand_D11(fixed, free, params):
    z1 = fixed[0]
    others = list(fixed[1:]) + list(free)
    m = params.m
    val = spherical_weight(z1, params)
    for zj in others:
        val = val * (np.abs(z1 - zj) ** 2 + (1 + abs(z1) ** 2) * (1 + np.abs(zj) ** 2) / m) * spherical_weight(zj, params)
    return val * _vdm2(others)


def _integrand_D12(fixed, free, params, corrected):
    z1, z2 = fixed[0], fixed[1]
    others = list(fixed[2:]) + list(free)
    m = params.m
    val = -spherical_weight(z1, params) * spherical_weight(z2, params) / m
    if corrected:
        val = val * (1 + abs(z1) ** 2) * (1 + abs(z2) ** 2)
    for zj in others:
        pair = (z1 - zj) * np.conj(z2 - zj) + (1 + z1 * np.conj(z2)) * (1 + np.abs(zj) ** 2) / m
        val = val * pair * np.conj(z1 - zj) * (z2 - zj) * spherical_weight(zj, params)
    return val * _vdm2(others)


def brute_force_D(cfg: Sequence[complex], params: EnsembleParams, which: str = "D11",
                  spec: QuadratureSpec | None = None, corrected: bool = True) -> complex:
    """D11 or D12 straight from the defining integral (N - k <= 2 free points).

    corrected=False drops the factor (1+|z1|^2)(1+|z2|^2) from the D12
    integrand; that variant does not match the determinantal formula and is
    kept only to show the factor is needed.
    """
    cfg = [complex(z) for z in cfg]
    N, k = params.N, len(cfg)
    free = N - k
    if free < 0 or free > 2:
        raise ValueError("brute_force_D handles 0 <= N - k <= 2")
    if which not in ("D11", "D12"):
        raise ValueError(which)
    if which == "D12" and k < 2:
        raise ValueError("D12 needs k >= 2")
    pref = math.exp(math.lgamma(N + 1) - math.lgamma(N - k + 1) - _log_ZN(params))
    f = (lambda fx, fr: _integrand_D11(fx, fr, params)) if which == "D11" else \
        (lambda fx, fr: _integrand_D12(fx, fr, params, corrected))
    if free == 0:
        return pref * complex(f(cfg, []))
    spec = spec or _spec_for(params, 2 * N + 2)
    if free == 1:
        return pref * quad_plane(lambda z: f(cfg, [z]), spec)
    return pref * quad_plane(lambda z, w: f(cfg, [z, w]), spec, dim=2)


def overlap_sum_rule(z1: complex, params: EnsembleParams, tol: float = 1e-10) -> tuple[float, float]:
    """(int D12^{(N,2)}(z1, z) dA(z), R1(z1) - D11^{(N,1)}(z1)); equal since sum_j O_1j = 1."""
    from .finite import D11_finite, D12_finite, one_point_density

    z1 = complex(z1)
    spec = QuadratureSpec(tol=tol, degree=2 * params.N + 2, origin_power=float(params.L), radial_nodes=32)

    def g(zs):
        return np.array([D12_finite([z1, z], params, "direct").real if z != z1 else 0.0 for z in zs])

    lhs = quad_plane(g, spec).real
    rhs = one_point_density(z1, params) - D11_finite([z1], params, "direct")
    return lhs, rhs


# ---------------------------------------------------------------- asymptotic checks

def _qhat_normalized(spec, N: int, k: int, ze, et, ch) -> complex:
    """q-hat_{N-1+k}(zb w | |lam|^2) with the co-cycle-carrying factors removed."""
    from .limits import map_point, regime_to_params

    P = regime_to_params(spec, N)
    z, w, lam = (map_point(spec, P, t) for t in (ze, et, ch))
    y = z.conjugate() * w
    lq = log_qhat(N - 1 + k, P, y, abs(lam) ** 2)
    if spec.kind == "singular":
        return complex(np.exp(lq - P.L * math.log(P.m + 1)))
    return complex(np.exp(lq + P.L * np.log(y) - P.m * np.log1p(y)))


def qhat_limit(spec, ze, et, ch) -> complex:
    zb = np.conj(complex(ze))
    s = zb + et
    ch = complex(ch)
    if spec.kind == "bulk":
        return 1.0 + 0j
    if spec.kind == "edge":
        v = F(s)
        if spec.edge_side == "inner":
            v = v - np.exp(-0.5 * s * s) / (math.sqrt(2 * math.pi) * (ch + ch.conjugate()))
        return complex(v)
    if spec.kind == "weak":
        r = spec.rho / math.sqrt(2)
        return complex(L_rho(s, spec.rho) + np.exp(-0.5 * (s + r) ** 2) / (math.sqrt(2 * math.pi) * (ch + ch.conjugate() + r)))
    L = spec.L_fixed
    cc = abs(ch) ** 2
    return complex(((cc - L) * mittag_leffler(1.0, L + 1.0, zb * et) + rgamma(L)) / (cc - L))


def asymptotic_qhat_check(regime, Nladder: Sequence[int], grid: Sequence[tuple]) -> list[tuple[int, int, float]]:
    """Rows (N, k, max error over grid) for k = 0, 1, 2.

    The finite side is q-hat times (zb w)^L / (1 + zb w)^{n+L} (strong and
    weak regimes) or q-hat / (n+L+1)^L (singular); both strip the weight
    and the co-cycle, leaving the bracketed factor of the asymptotic form.
    """
    rows = []
    for N in Nladder:
        for k in (0, 1, 2):
            err = max(abs(_qhat_normalized(regime, N, k, *g) - qhat_limit(regime, *g)) for g in grid)
            rows.append((int(N), k, float(err)))
    return rows


def doubling_ratios(errors: Sequence[float]) -> list[float]:
    return [errors[i + 1] / errors[i] for i in range(len(errors) - 1)]


# ---------------------------------------------------------------- convergence scans

def local_scale(z: complex, params: EnsembleParams) -> float:
    """N delta_N evaluated at the point itself."""
    return (params.m + 1) / (1 + abs(z) ** 2) ** 2


def convergence_scan(regime, Nladder: Sequence[int], grid=None, chi: complex = 0.25,
                     normalization: str = "local") -> list[tuple[int, float]]:
    """Sup over a (zeta, eta) grid of |K11^(N)/scale - K11^limit|.

    normalization="local" divides by sqrt(N delta_N(z) N delta_N(w)), the
    density at the two points; "fixed" divides by N delta_N(p).  The two
    differ by a factor 1 + O(N^{-1/2}) of the form h(zeta) h(eta).
    """
    from .finite import K11_finite
    from .limits import LimitKernel, delta_N, map_point, regime_to_params

    g = np.linspace(-1.0, 1.0, 5) if grid is None else np.asarray(grid)
    lk = LimitKernel(regime)
    lim = {(i, j): lk.K11(a, b, chi) for i, a in enumerate(g) for j, b in enumerate(g)}
    out = []
    for N in Nladder:
        P = regime_to_params(regime, N)
        lam = map_point(regime, P, chi)
        pts = [map_point(regime, P, a) for a in g]
        fixed = N * delta_N(regime.base_point, P)
        err = 0.0
        for i, z in enumerate(pts):
            for j, w in enumerate(pts):
                if normalization == "local":
                    sc = math.sqrt(local_scale(z, P) * local_scale(w, P))
                else:
                    sc = fixed
                val = K11_finite(z, w, lam, P, "direct").value / sc
                err = max(err, abs(val - lim[(i, j)]))
        out.append((int(N), float(err)))
    return out


def front_scan(regime, Nladder: Sequence[int], zetas: Sequence[complex]) -> list[tuple[int, float]]:
    """Sup over zetas of |D11^{(N,1)} / (N^q N delta_N(p)) - front factor|."""
    from .finite import D11_finite
    from .limits import LimitKernel, delta_N, map_point, regime_to_params

    lk = LimitKernel(regime)
    out = []
    for N in Nladder:
        P = regime_to_params(regime, N)
        sc = N ** regime.q_exponent * N * delta_N(regime.base_point, P)
        err = max(abs(D11_finite([map_point(regime, P, t)], P, "direct") / sc - lk.front11(complex(t))) for t in zetas)
        out.append((int(N), float(err)))
    return out


def weak_to_bulk_recovery(rho: float, zetas: Sequence[complex]) -> float:
    """max |(2/rho^2) calL_rho(zeta + zeta-bar) - 1|; the bulk factor at p = 1 reduces to 1."""
    return max(abs(2.0 / rho ** 2 * complex(calL_rho(complex(t) + complex(t).conjugate(), rho)) - 1.0) for t in zetas)


def varpi_scan(regime, Nladder: Sequence[int], zeta, eta, chi) -> list[tuple[int, float]]:
    """|varpi^(n,L) * N delta_N(p) - varpi_limit| at mapped points."""
    from .finite import varpi
    from .limits import delta_N, map_point, regime_to_params, varpi_limit

    ref = varpi_limit(zeta, eta, chi)
    out = []
    for N in Nladder:
        P = regime_to_params(regime, N)
        z, w, lam = (map_point(regime, P, t) for t in (zeta, eta, chi))
        out.append((int(N), abs(varpi(z, w, lam, P) * N * delta_N(regime.base_point, P) - ref)))
    return out
