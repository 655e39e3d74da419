"""Scalar special functions used by the finite-N and limiting kernels.

Everything here accepts numpy arrays and broadcasts.  Gamma ratios are
formed in the log domain and exponentiated once.
"""
from __future__ import annotations

import math
import warnings

import numpy as np
from scipy import special as sc

SQRT2 = math.sqrt(2.0)
SQRT2PI = math.sqrt(2.0 * math.pi)

ERFC_BAND = 30.0


class DomainError(ValueError):
    """Argument outside the domain of a special function."""


class ConvergenceError(RuntimeError):
    pass


def log_gamma(x):
    """Natural log of Gamma(x) for x > 0."""
    xa = np.asarray(x, dtype=float)
    if np.any(~(xa > 0)):
        raise DomainError(f"log_gamma needs x > 0, got {x!r}")
    out = sc.gammaln(xa)
    return float(out) if out.ndim == 0 else out


def gamma_log_ratio(numer, denom) -> float:
    """sum(log Gamma(numer)) - sum(log Gamma(denom))."""
    numer = [float(v) for v in numer]
    denom = [float(v) for v in denom]
    for v in numer + denom:
        if not v > 0:
            raise DomainError(f"gamma_log_ratio needs positive arguments, got {v!r}")
    # fsum keeps the antisymmetry under swapping the lists exact
    return math.fsum([float(sc.gammaln(v)) for v in numer] + [-float(sc.gammaln(v)) for v in denom])


def erfc_complex(z):
    """Complementary error function on complex arguments.

    Delegates to scipy's Faddeeva-based erfc.  A warning is issued when
    |Im z| leaves the band where the accuracy contract is checked.
    """
    za = np.asarray(z, dtype=complex)
    if np.any(np.abs(za.imag) > ERFC_BAND):
        warnings.warn("erfc_complex: |Im z| > 30, accuracy not guaranteed", RuntimeWarning, stacklevel=2)
    out = sc.erfc(za)
    return complex(out) if out.ndim == 0 else out


def F(x):
    """F(x) = erfc(x / sqrt 2) / 2, the Gaussian upper tail."""
    return 0.5 * erfc_complex(np.asarray(x, dtype=complex) / SQRT2)


def dF(x):
    """Derivative of F."""
    x = np.asarray(x, dtype=complex)
    return -np.exp(-0.5 * x * x) / SQRT2PI


def calF(x):
    """exp(-x^2/2) - sqrt(2 pi) x F(x)."""
    x = np.asarray(x, dtype=complex)
    out = np.exp(-0.5 * x * x) - SQRT2PI * x * F(x)
    return complex(out) if out.ndim == 0 else out


def L_rho(z, rho):
    """Gaussian mass of the window [-rho/sqrt2, rho/sqrt2] seen from z.

    Same value as 1 - F(z + r) - F(r - z) with r = rho/sqrt2, but the form
    is picked per point so that no two numbers near 1 get subtracted.
    """
    if not rho > 0:
        raise DomainError("rho must be positive")
    z = np.asarray(z, dtype=complex)
    r = rho / SQRT2
    lo = -r - z
    hi = r - z
    mid = 1.0 - F(z + r) - F(r - z)
    left = F(lo) - F(hi)          # both tails small when z << -r
    right = F(-hi) - F(-lo)       # both tails small when z >> r
    out = np.where(z.real < -r, left, np.where(z.real > r, right, mid))
    return complex(out) if out.ndim == 0 else out


def calL_rho(z, rho):
    z = np.asarray(z, dtype=complex)
    r = rho / SQRT2
    out = ((z + r) * np.exp(-0.5 * (z - r) ** 2)
           - (z - r) * (SQRT2PI * (z + r) * L_rho(z, rho) + np.exp(-0.5 * (z + r) ** 2))) / SQRT2PI
    return complex(out) if out.ndim == 0 else out


def mittag_leffler(a, b, z, tol=1e-16, max_terms=100_000):
    """E_{a,b}(z) = sum_k z^k / Gamma(a k + b), by direct summation.

    Terms are generated in log form, so large Gamma values never appear.
    Summation stops once the terms are decreasing and the current term is
    below tol * (1 + |partial sum|).
    """
    if a < 1 or b <= 0:
        raise DomainError("mittag_leffler needs a >= 1 and b > 0")
    z = np.asarray(z, dtype=complex)
    flat = z.ravel()
    total = np.zeros_like(flat)
    logz = np.log(np.where(flat == 0, 1.0, flat))
    zero = flat == 0
    total += 1.0 / sc.gamma(b) if b < 170 else np.exp(-sc.gammaln(b))
    absz = np.abs(flat)
    done = zero.copy()
    k = 0
    while not np.all(done):
        k += 1
        if k > max_terms:
            raise ConvergenceError("mittag_leffler: series did not converge")
        lg = sc.gammaln(a * k + b)
        term = np.exp(k * logz - lg)
        term = np.where(done, 0.0, term)
        total += term
        # ratio of consecutive term sizes; below 1/2 the tail is bounded by 2|term|
        ratio = absz / np.exp(sc.gammaln(a * (k + 1) + b) - lg)
        small = 2.0 * np.abs(term) <= tol * (1.0 + np.abs(total))
        done |= small & (ratio < 0.5)
    out = total.reshape(z.shape)
    return complex(out) if out.ndim == 0 else out


def rgamma(c):
    return sc.rgamma(c)


def calE(c, z, x):
    """(x - c) E_{1,c+1}(z) + 1/Gamma(c)."""
    if not c > 0:
        raise DomainError("calE needs c > 0")
    x = np.asarray(x, dtype=complex)
    out = (x - c) * mittag_leffler(1.0, c + 1.0, z) + sc.rgamma(c)
    return complex(out) if np.ndim(out) == 0 else out


def reg_incomplete_gamma_P(c, z):
    """Regularized lower incomplete gamma P(c, z)."""
    if not c > 0:
        raise DomainError("P(c, z) needs c > 0")
    za = np.asarray(z, dtype=float)
    if np.any(za < 0):
        raise DomainError("P(c, z) needs z >= 0")
    out = sc.gammainc(c, za)
    return float(out) if out.ndim == 0 else out


def clog_sum(logs, axis=None):
    """log(sum(exp(logs))) for complex logs; -inf when the sum vanishes."""
    logs = np.asarray(logs, dtype=complex)
    if logs.size == 0:
        return complex(-np.inf)
    m = np.max(logs.real, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    s = np.sum(np.exp(logs - m), axis=axis, keepdims=True)
    with np.errstate(divide="ignore"):
        out = np.log(s) + m
    if axis is None:
        return complex(out.ravel()[0])
    return np.squeeze(out, axis=axis)
