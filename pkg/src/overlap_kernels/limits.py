"""Scaling limits of the overlap kernels in the four regimes.

Reduced kernels are holomorphic in (zeta-bar, eta) for fixed conditioning
pair (chi, chi-bar).  They are written with the removable factor
((zeta-bar - chi-bar)(eta - chi))^2 in the denominator, so near the
conditioning point we evaluate by a Cauchy contour average instead.

Weights are split symmetrically between the two kernel arguments,
w(zeta)^{1/2} w(eta)^{1/2}.  On the diagonal this is the usual weight;
off the diagonal it is the form that finite-N kernels actually converge to.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import gammaln, rgamma

from .special import (
    SQRT2,
    SQRT2PI,
    DomainError,
    F,
    L_rho,
    calF,
    calL_rho,
    dF,
    mittag_leffler,
)
from .structures import EnsembleParams

COINCIDENCE_TOL = 1e-3
_TORUS_R = 1.5
_TORUS_M = 40
_CIRCLE_M = 24

KINDS = ("bulk", "edge", "weak", "singular")


# ---------------------------------------------------------------- regimes

@dataclass(frozen=True)
class RegimeSpec:
    kind: str
    a: float = 0.0
    b: float = 1.0
    edge_side: str = "outer"
    theta: float = 0.0
    rho: float = 1.0
    L_fixed: float = 1.0
    p: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown regime kind {self.kind!r}")
        if self.kind in ("bulk", "edge"):
            if self.a < 0 or self.b <= 0:
                raise ValueError("strong regimes need a >= 0 and b > 0")
            if self.kind == "edge" and self.edge_side not in ("outer", "inner"):
                raise ValueError("edge_side must be 'outer' or 'inner'")
            if self.kind == "edge" and self.edge_side == "inner" and self.a == 0:
                raise ValueError("no inner edge when a = 0")
        if self.kind == "weak" and not self.rho > 0:
            raise ValueError("rho must be positive")
        if self.kind == "singular" and (not self.L_fixed > 0 or not self.b > 0):
            raise ValueError("singular regime needs L > 0 and b > 0")
        if self.kind == "bulk":
            p = self.base_point
            lo, hi = math.sqrt(self.a / (self.b + 1)), math.sqrt((self.a + 1) / self.b)
            if not lo < p < hi:
                raise ValueError(f"bulk point p={p} outside ({lo}, {hi})")

    @property
    def sign(self) -> int:
        return -1 if (self.kind == "edge" and self.edge_side == "inner") else 1

    @property
    def base_point(self) -> float:
        if self.kind == "weak":
            return 1.0
        if self.kind == "singular":
            return 0.0
        if self.kind == "edge":
            if self.edge_side == "outer":
                return math.sqrt((self.a + 1) / self.b)
            return math.sqrt(self.a / (self.b + 1))
        if self.p is None:
            # midpoint of the droplet annulus in the squared radius
            return math.sqrt(0.5 * (self.a / (self.b + 1) + (self.a + 1) / self.b))
        return float(self.p)

    @property
    def q_exponent(self) -> float:
        return {"bulk": 1.0, "edge": 0.5, "weak": 0.0, "singular": 1.0}[self.kind]


def regime_to_params(spec: RegimeSpec, Nval: int) -> EnsembleParams:
    N = int(Nval)
    if spec.kind in ("bulk", "edge"):
        return EnsembleParams(N, (spec.b + 1) * N, spec.a * N)
    if spec.kind == "weak":
        n = N * N / spec.rho ** 2
        L = n - N
        if L < 0:
            raise DomainError(f"weak regime needs N >= rho^2, got N={N}, rho={spec.rho}")
        return EnsembleParams(N, n, L)
    return EnsembleParams(N, (spec.b + 1) * N, spec.L_fixed)


@dataclass(frozen=True)
class DropletSpec:
    r1: float
    r2: float
    density_at: Callable[[float], float] = field(repr=False, compare=False)


def delta_N(p: float, params: EnsembleParams, Nval: int | None = None) -> float:
    N = params.N if Nval is None else Nval
    return (params.n + params.L + 1) / N / (1 + p * p) ** 2


def droplet(params: EnsembleParams, Nval: int | None = None) -> DropletSpec:
    N = params.N if Nval is None else Nval
    r1 = math.sqrt(params.L / params.n)
    r2 = math.sqrt((N + params.L) / (params.n - N))
    return DropletSpec(r1, r2, lambda p: delta_N(p, params, N))


def map_point(spec: RegimeSpec, params: EnsembleParams, zeta) -> complex:
    """z = e^{i theta}(p + s zeta / sqrt(N delta_N(p)))."""
    p = spec.base_point
    s = math.sqrt(params.N * delta_N(p, params))
    return complex(np.exp(1j * spec.theta) * (p + spec.sign * complex(zeta) / s))


# ---------------------------------------------------------------- coincidence

def _contour(f, zb0, w0, chib, chi):
    """Value of a holomorphic f(zb, w) at (zb0, w0) from contour nodes."""
    u0, v0 = zb0 - chib, w0 - chi
    au, av = abs(u0), abs(v0)
    if au <= 0.5 and av <= 0.5:
        th = 2 * np.pi * (np.arange(_TORUS_M) + 0.5) / _TORUS_M
        e = _TORUS_R * np.exp(1j * th)
        U, V = np.meshgrid(e, e, indexing="ij")
        vals = f(chib + U, chi + V)
        wts = (U / (U - u0)) * (V / (V - v0))
        return complex(np.mean(vals * wts))
    th = 2 * np.pi * (np.arange(_CIRCLE_M) + 0.5) / _CIRCLE_M
    if au > av:
        r = min(_TORUS_R, 1.0 / au)
        V = r * np.exp(1j * th)
        return complex(np.mean(f(np.full_like(V, zb0), chi + V) * V / (V - v0)))
    r = min(_TORUS_R, 1.0 / av)
    U = r * np.exp(1j * th)
    return complex(np.mean(f(chib + U, np.full_like(U, w0)) * U / (U - u0)))


def _regularized(generic, zb, w, chi, chib, tol=COINCIDENCE_TOL):
    """Evaluate generic(zb, w) elementwise, switching to the contour path in the band."""
    zb = np.asarray(zb, dtype=complex)
    w = np.asarray(w, dtype=complex)
    shape = np.broadcast_shapes(zb.shape, w.shape)
    zb, w = (np.broadcast_to(t, shape).reshape(-1) for t in (zb, w))
    near = np.abs(zb - chib) * np.abs(w - chi) < tol
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.asarray(generic(zb, w), dtype=complex)
    out = np.array(np.broadcast_to(out, zb.shape), dtype=complex)
    for idx in np.nonzero(near)[0]:
        out[idx] = _contour(generic, zb[idx], w[idx], chib, chi)
    out = out.reshape(shape)
    return (complex(out) if out.ndim == 0 else out), bool(np.any(near))


# ---------------------------------------------------------------- varpi limit

def varpi_limit(zeta, eta, chi, zetab=None, etab=None, chib=None):
    """sqrt((1+(zb-chib)(zeta-chi))(1+(etab-chib)(eta-chi)))."""
    zeta, eta, chi = complex(zeta), complex(eta), complex(chi)
    zetab = zeta.conjugate() if zetab is None else complex(zetab)
    etab = eta.conjugate() if etab is None else complex(etab)
    chib = chi.conjugate() if chib is None else complex(chib)
    return complex(np.sqrt(1 + (zetab - chib) * (zeta - chi)) * np.sqrt(1 + (etab - chib) * (eta - chi)))


# ---------------------------------------------------------------- bulk

def _kb_generic(x):
    return ((x - 1) * np.exp(x) + 1) / (x * x)


def kb_of_x(x):
    """d/dx (e^x - 1)/x, with its series near x = 0."""
    x = np.asarray(x, dtype=complex)
    out = np.empty_like(x)
    small = np.abs(x) < 1e-2
    with np.errstate(divide="ignore", invalid="ignore"):
        out[~small] = _kb_generic(x[~small])
    xs = x[small]
    # sum_{k>=1} k x^{k-1}/(k+1)!
    acc = np.zeros_like(xs)
    term = np.ones_like(xs)
    for k in range(1, 12):
        acc += k * term / math.factorial(k + 1)
        term = term * xs
    out[small] = acc
    return complex(out) if out.ndim == 0 else out


def reduced_bulk(zb, w, chi, chib):
    return kb_of_x((np.asarray(zb) - chib) * (np.asarray(w) - chi))


def bulk_front(a: float, b: float, p: float) -> float:
    p2 = p * p
    return b * (b + 1) / (a + b + 1) * (p2 - a / (b + 1)) * ((a + 1) / b - p2) / p2


# ---------------------------------------------------------------- edge

def c_s(a: float, b: float, side: str = "outer") -> float:
    if side == "outer":
        return math.sqrt((a + b + 1) / (2 * math.pi * (a + 1) * b))
    if side == "inner":
        if a <= 0:
            raise DomainError("inner edge needs a > 0")
        return math.sqrt((a + b + 1) / (2 * math.pi * a * (b + 1)))
    raise ValueError(side)


def edge_H(a, b, c, d, f):
    """H(a,b,c,d,f) with the x-derivative taken in closed form."""
    a, b, c, d, f = (np.asarray(t, dtype=complex) for t in (a, b, c, d, f))
    ef = np.exp(-f)
    B0 = ef * F(b) * F(c) - F(d) * F(a) + f * F(d) * F(a)
    dB = ef * (dF(b) * F(c) + F(b) * dF(c)) - F(d) * dF(a) - dF(d) * F(a) + f * F(d) * dF(a)
    den = calF(a)
    if np.any(np.abs(den) < 1e-300):
        raise ZeroDivisionError("edge_H: calF(a) vanishes")
    out = -SQRT2PI * (a * B0 + dB) / den
    return complex(out) if np.ndim(out) == 0 else out


def _edge_bracket(a, b, c, d, f, x):
    """The bracketed function of x whose derivative enters H; for tests."""
    return np.exp((a + x) ** 2 / 2) * (np.exp(-f) * F(b + x) * F(c + x) - F(d + x) * F(a + x) + f * F(d) * F(a + x))


def reduced_edge(zb, w, chi, chib):
    zb = np.asarray(zb, dtype=complex)
    w = np.asarray(w, dtype=complex)
    u, v = zb - chib, w - chi
    H = edge_H(chib + chi, zb + chi, chib + w, zb + w, u * v)
    return np.exp(zb * w) * H / (u * u * v * v)


# ---------------------------------------------------------------- weak

def _r(rho):
    return rho / SQRT2


def weak_A(a, b, c, d, f, rho):
    r = _r(rho)
    return (r + a) * (r - a) * (np.exp(f) * (f - 1) * L_rho(a, rho) * L_rho(d, rho) + L_rho(b, rho) * L_rho(c, rho))


def weak_B(a, b, c, rho):
    r = _r(rho)
    return L_rho(b, rho) * ((a + r) * np.exp(-0.5 * (c - r) ** 2) - (a - r) * np.exp(-0.5 * (c + r) ** 2)) / SQRT2PI


def weak_C(a, b, rho):
    r = _r(rho)
    return (np.exp(-0.5 * (a - r) ** 2 - 0.5 * (b + r) ** 2) + np.exp(-0.5 * (a + r) ** 2 - 0.5 * (b - r) ** 2)) / (2 * np.pi)


def weak_H(a, b, c, d, f, rho):
    a, b, c, d, f = (np.asarray(t, dtype=complex) for t in (a, b, c, d, f))
    ef = np.exp(f)
    out = (weak_A(a, b, c, d, f, rho) + weak_B(a, b, c, rho) + weak_B(a, c, b, rho)
           + f * ef * weak_B(a, d, a, rho) - ef * weak_B(a, d, a, rho) - ef * weak_B(a, a, d, rho)
           + weak_C(b, c, rho) - ef * weak_C(a, d, rho))
    return complex(out) if out.ndim == 0 else out


def reduced_weak(zb, w, chi, chib, rho):
    zb = np.asarray(zb, dtype=complex)
    w = np.asarray(w, dtype=complex)
    u, v = zb - chib, w - chi
    Hr = weak_H(chib + chi, zb + chi, chib + w, zb + w, u * v, rho)
    return Hr / (u * u * v * v * calL_rho(chi + chib, rho))


# ---------------------------------------------------------------- singular

def calE_single(x, L):
    """E_{1,L}(x | x) = (x - L) E_{1,L+1}(x) + 1/Gamma(L)."""
    x = np.asarray(x, dtype=complex)
    out = (x - L) * mittag_leffler(1.0, L + 1.0, x) + rgamma(L)
    return complex(out) if np.ndim(out) == 0 else out


def singular_S(zc, ce, ze, cc, f, L):
    # last term carries E(zeta-bar eta), not E(chi-bar chi): only then is S = O(f^2)
    E = lambda t: mittag_leffler(1.0, L + 1.0, t)
    Ezc, Ece, Eze, Ecc = E(zc), E(ce), E(ze), E(cc)
    out = ((cc - L) * (Ezc * Ece - (1 - f) * Eze * Ecc)
           + rgamma(L) * (Ezc + Ece - Eze - Ecc + f * Eze))
    return complex(out) if np.ndim(out) == 0 else out


def reduced_singular(zb, w, chi, chib, L):
    zb = np.asarray(zb, dtype=complex)
    w = np.asarray(w, dtype=complex)
    u, v = zb - chib, w - chi
    cc = chib * chi
    S = singular_S(zb * chi, chib * w, zb * w, cc, u * v, L)
    den = (cc - L) * mittag_leffler(1.0, L + 1.0, cc) + rgamma(L)
    return S / (u * u * v * v * den)


# ---------------------------------------------------------------- generic assembly

class LimitKernel:
    """Reduced kernel, half-weights and front factors of one regime."""

    def __init__(self, spec: RegimeSpec):
        self.spec = spec

    # reduced kernel K(zb, w | chi, chib)
    def reduced(self, zb, w, chi, chib, regularize=True):
        k = self.spec.kind
        if k == "bulk":
            return reduced_bulk(zb, w, chi, chib), False
        if k == "edge":
            g = lambda a, b: reduced_edge(a, b, chi, chib)
        elif k == "weak":
            g = lambda a, b: reduced_weak(a, b, chi, chib, self.spec.rho)
        else:
            g = lambda a, b: reduced_singular(a, b, chi, chib, self.spec.L_fixed)
        if not regularize:
            with np.errstate(divide="ignore", invalid="ignore"):
                out = np.asarray(g(np.asarray(zb, dtype=complex), np.asarray(w, dtype=complex)))
            return (complex(out) if out.ndim == 0 else out), False
        return _regularized(g, zb, w, chi, chib)

    # log of the one-point weight w(z, zbar | chi, chib)
    def log_weight(self, z, zbar, chi, chib):
        k = self.spec.kind
        if k in ("bulk", "weak"):
            return -(zbar - chib) * (z - chi)
        if k == "edge":
            return -zbar * z
        L = self.spec.L_fixed
        y = complex(zbar) * complex(z)
        if y == 0:
            return -np.inf
        return L * np.log(y) - y

    def varpi_factor(self, z, zbar, chi, chib):
        return 1 + (zbar - chib) * (z - chi)

    def K11(self, zeta, eta, chi, zetab=None, etab=None, chib=None):
        zeta, eta, chi = complex(zeta), complex(eta), complex(chi)
        zetab = zeta.conjugate() if zetab is None else complex(zetab)
        etab = eta.conjugate() if etab is None else complex(etab)
        chib = chi.conjugate() if chib is None else complex(chib)
        red, _ = self.reduced(zetab, eta, chi, chib)
        l1 = self.log_weight(zeta, zetab, chi, chib)
        l2 = self.log_weight(eta, etab, chi, chib)
        if np.real(l1) == -np.inf or np.real(l2) == -np.inf:
            return 0j
        lw = 0.5 * (l1 + l2)
        vp = np.sqrt(self.varpi_factor(zeta, zetab, chi, chib)) * np.sqrt(self.varpi_factor(eta, etab, chi, chib))
        return complex(red * vp * np.exp(lw))

    def front11(self, z1: complex) -> complex:
        s = self.spec
        t = z1 + z1.conjugate()
        if s.kind == "bulk":
            return bulk_front(s.a, s.b, s.base_point)
        if s.kind == "edge":
            return c_s(s.a, s.b, s.edge_side) * calF(t)
        if s.kind == "weak":
            return calL_rho(t, s.rho)
        L = s.L_fixed
        x = abs(z1) ** 2
        return x ** (L - 1) * calE_single(x, L) * math.exp(-x)

    def front12(self, z1: complex, z2: complex) -> complex:
        """Prefactor of the off-diagonal limit times the reduced kernel at (z1b, z2 | z1, z2b)."""
        s = self.spec
        chi, chib = z1, z2.conjugate()
        red, _ = self.reduced(z1.conjugate(), z2, chi, chib)
        if s.kind == "bulk":
            return -bulk_front(s.a, s.b, s.base_point) * red
        if s.kind == "edge":
            # e^{z1b z2} inside the reduced kernel combines with this into e^{-|z1-z2|^2}
            lw = -abs(z1) ** 2 - abs(z2) ** 2 + z1 * chib
            return -c_s(s.a, s.b, s.edge_side) * calF(z1 + chib) * red * np.exp(lw)
        if s.kind == "weak":
            return -calL_rho(z1 + chib, s.rho) * red
        L = s.L_fixed
        y = z1 * chib
        return -calE_single(y, L) * abs(z1) ** (2 * L) * abs(z2) ** (2 * L) / y * math.exp(-abs(z1) ** 2 - abs(z2) ** 2) * red

    # -------------------------------------------------------- determinants

    def _det_block(self, pts, chi, chib, schur_with=None):
        k = len(pts)
        if k == 0:
            return 1.0 + 0j
        zbs = np.array([p.conjugate() for p in pts])
        zs = np.array(pts, dtype=complex)
        red, _ = self.reduced(zbs[:, None], zs[None, :], chi, chib)
        red = np.asarray(red, dtype=complex).reshape(k, k)
        if schur_with is not None:
            u, v = schur_with
            kuv, _ = self.reduced(np.conj(u), v, chi, chib)
            a_i, _ = self.reduced(zbs, np.full(k, v), chi, chib)
            b_j, _ = self.reduced(np.full(k, np.conj(u)), zs, chi, chib)
            red = red - np.outer(np.atleast_1d(a_i), np.atleast_1d(b_j)) / kuv
        diag = np.array([self.log_weight(z, z.conjugate(), chi, chib) for z in pts])
        vp = np.array([self.varpi_factor(z, z.conjugate(), chi, chib) for z in pts])
        return complex(np.linalg.det(red) * np.prod(vp) * np.exp(np.sum(diag)))

    def D11(self, cfg: Sequence[complex]) -> float:
        cfg = [complex(z) for z in cfg]
        z1 = cfg[0]
        val = self.front11(z1) * self._det_block(cfg[1:], z1, z1.conjugate())
        return complex(val).real

    def D12(self, cfg: Sequence[complex]) -> complex:
        cfg = [complex(z) for z in cfg]
        z1, z2 = cfg[0], cfg[1]
        chi, chib = z1, z2.conjugate()
        val = self.front12(z1, z2)
        if len(cfg) > 2:
            val = val * self._det_block(cfg[2:], chi, chib, schur_with=(z1, z2))
        return complex(val)


# thin functional wrappers

def _lk(kind, **kw) -> LimitKernel:
    return LimitKernel(RegimeSpec(kind, **kw))


def K11_bulk(zeta, eta, chi) -> complex:
    return _lk("bulk", a=0.0, b=1.0, p=0.5).K11(zeta, eta, chi)


def D11_bulk(cfg, a, b, p) -> float:
    return _lk("bulk", a=a, b=b, p=p).D11(cfg)


def D12_bulk(cfg, a, b, p) -> complex:
    return _lk("bulk", a=a, b=b, p=p).D12(cfg)


def K11_edge(zeta, eta, chi) -> complex:
    return _lk("edge").K11(zeta, eta, chi)


def D11_edge(cfg, spec: RegimeSpec) -> float:
    return LimitKernel(spec).D11(cfg)


def D12_edge(cfg, spec: RegimeSpec) -> complex:
    return LimitKernel(spec).D12(cfg)


def K11_weak(zeta, eta, chi, rho) -> complex:
    return _lk("weak", rho=rho).K11(zeta, eta, chi)


def D11_weak(cfg, rho) -> float:
    return _lk("weak", rho=rho).D11(cfg)


def D12_weak(cfg, rho) -> complex:
    return _lk("weak", rho=rho).D12(cfg)


def K11_singular(zeta, eta, chi, L) -> complex:
    return _lk("singular", L_fixed=L).K11(zeta, eta, chi)


def D11_singular(cfg, L) -> float:
    return _lk("singular", L_fixed=L).D11(cfg)


def D12_singular(cfg, L) -> complex:
    return _lk("singular", L_fixed=L).D12(cfg)


# ---------------------------------------------------------------- Psi functions

def _psi_bulk12(z):
    s = abs(complex(z)) ** 2
    if s < 1e-4:
        # s^2 Psi = (1 - (1+s)e^{-s})/(1 - e^{-s}); expand both in s
        num = s * s / 2 - s ** 3 / 3 + s ** 4 / 8
        den = s - s * s / 2 + s ** 3 / 6
        return num / den / s ** 2
    return (1 - (1 + s) * math.exp(-s)) / (1 - math.exp(-s)) / s ** 2


def psi(kind: str, args, rho: float | None = None, L: float | None = None) -> complex:
    args = [complex(t) for t in args]
    if kind == "bulk12":
        return _psi_bulk12(args[0])
    if kind == "edge11":
        return complex(calF(args[0]) / F(args[0]))
    if kind == "edge12":
        a, b, c, d, f = args
        g = abs(f) ** 2
        return complex(-edge_H(a, b, c, d, -g) * math.exp(-g) * calF(a) / (g * g * (F(b) * F(c) - math.exp(-g) * F(a) * F(d))))
    if kind == "weak11":
        return complex(calL_rho(args[0], rho) / L_rho(args[0], rho))
    if kind == "weak12":
        a, b, c, d, f = args
        g = abs(f) ** 2
        num = weak_H(a, b, c, d, -g, rho)
        den = g * g * (L_rho(b, rho) * L_rho(c, rho) - math.exp(-g) * L_rho(a, rho) * L_rho(d, rho))
        return complex(-num / den)
    if kind == "sing11":
        x = abs(args[0]) ** 2
        return complex(calE_single(x, L) / (x * mittag_leffler(1.0, 1.0 + L, x)))
    if kind == "sing12":
        a, b, c, d, f = args
        g = abs(f) ** 2
        E = lambda t: mittag_leffler(1.0, 1.0 + L, t)
        return complex(-singular_S(a, b, c, d, -g, L) / (a * g * (E(b) * E(c) - E(a) * E(d))))
    raise ValueError(f"unknown psi kind {kind!r}")
