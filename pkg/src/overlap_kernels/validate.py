"""A fast suite of cross-checks, each comparing two independent routes.

Used by `overlap-kernels validate`.  Every check returns a residual and the
tolerance it is held to; the whole suite takes a few seconds.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class CheckResult:
    name: str
    residual: float
    tol: float

    @property
    def ok(self) -> bool:
        return bool(np.isfinite(self.residual) and self.residual <= self.tol)


def _random_disc(rng, k, radius=1.3):
    r = radius * np.sqrt(rng.random(k))
    t = 2 * np.pi * rng.random(k)
    return [complex(v) for v in r * np.exp(1j * t)]


def check_moments():
    from .oracles import quad_plane, spherical_weight, _spec_for
    from .special import gamma_log_ratio
    from .structures import EnsembleParams

    P = EnsembleParams(4, 9, 1)
    spec = _spec_for(P, 8)
    err = 0.0
    for k in range(4):
        got = quad_plane(lambda z: np.abs(z) ** (2 * k) * spherical_weight(z, P), spec).real
        want = math.exp(gamma_log_ratio([k + P.L + 1, P.n - k], [P.L + P.n + 1]))
        err = max(err, abs(got - want) / want)
    return CheckResult("weight_moments", err, 1e-8)


def check_gram():
    from .oracles import gram_matrix
    from .structures import EnsembleParams, build_poly_family

    P = EnsembleParams(6, 10, 2)
    fam = build_poly_family(4, P, 0.7 + 0.3j)
    G = gram_matrix(fam, P)
    h = np.asarray(fam.norms[:5])
    err = float(np.max(np.abs(G - np.diag(h)) / np.maximum(1.0, np.abs(h))[:, None]))
    return CheckResult("orthogonality", err, 1e-6)


def check_kernel_identity(rng):
    from .finite import K11_finite
    from .structures import EnsembleParams

    err = 0.0
    for N in (3, 8):
        P = EnsembleParams(N, 3 * N, N / 2)
        for _ in range(10):
            z, w, lam = _random_disc(rng, 3)
            d = K11_finite(z, w, lam, P, "direct").value
            s = K11_finite(z, w, lam, P, "simplified").value
            err = max(err, abs(d - s) / abs(d))
    return CheckResult("kernel_direct_vs_simplified", err, 1e-9)


def check_decoupling(rng):
    from .finite import decouple_check
    from .structures import EnsembleParams

    err = 0.0
    for N, k in ((3, 2), (4, 3)):
        P = EnsembleParams(N, N + 3, 1)
        for _ in range(5):
            pts = _random_disc(rng, k, 1.0)
            err = max(err, decouple_check(pts[0], pts[1], pts[2:], P))
    return CheckResult("decoupling", err, 1e-9)


def check_hermitian(rng):
    from .finite import K11_finite
    from .structures import EnsembleParams

    P = EnsembleParams(5, 12, 2.5)
    err = 0.0
    for _ in range(10):
        z, w, lam = _random_disc(rng, 3)
        a = K11_finite(z, w, lam, P).value
        b = K11_finite(w, z, lam, P).value
        err = max(err, abs(a - b.conjugate()) / abs(a))
    return CheckResult("kernel_hermitian", err, 1e-10)


def check_rotation(rng):
    from .finite import D11_finite, D12_finite
    from .structures import EnsembleParams

    P = EnsembleParams(5, 11, 1.5)
    err = 0.0
    for _ in range(5):
        pts = _random_disc(rng, 3, 1.0)
        e = complex(math.cos(0.9), math.sin(0.9))
        rot = [p * e for p in pts]
        a, b = D11_finite(pts, P), D11_finite(rot, P)
        err = max(err, abs(a - b) / abs(a))
        a, b = D12_finite(pts, P), D12_finite(rot, P)
        err = max(err, abs(a - b) / abs(a))
    return CheckResult("rotational_covariance", err, 1e-10)


def check_positivity(rng):
    from .finite import D11_finite, cond_exp_O11, one_point_density
    from .structures import EnsembleParams

    P = EnsembleParams(6, 14, 3)
    worst = 0.0
    for z in _random_disc(rng, 20, 2.0):
        if D11_finite([z], P) <= 0 or one_point_density(z, P) < 0:
            worst = math.inf
        worst = max(worst, 1.0 - cond_exp_O11(z, P))
    return CheckResult("positivity", max(worst, 0.0), 0.0)


def check_partition_bridge():
    from .structures import EnsembleParams, partition_bridge

    err = 0.0
    for P in (EnsembleParams(4, 9, 1), EnsembleParams(7, 15.5, 2.5)):
        for x in (0.2, 1.0, 3.0):
            a, b = partition_bridge(P, x)
            err = max(err, abs(a - b) / abs(b))
    return CheckResult("partition_bridge", err, 1e-10)


def check_sum_rule():
    from .oracles import overlap_sum_rule
    from .structures import EnsembleParams

    lhs, rhs = overlap_sum_rule(0.4 + 0.3j, EnsembleParams(3, 6, 1))
    return CheckResult("overlap_sum_rule", abs(lhs - rhs) / abs(rhs), 1e-8)


def check_brute_force():
    from .finite import D11_finite
    from .oracles import brute_force_D
    from .structures import EnsembleParams

    P = EnsembleParams(2, 5, 1)
    z = 0.3 + 0.4j
    a = brute_force_D([z], P, "D11").real
    b = D11_finite([z], P)
    return CheckResult("brute_force_D11", abs(a - b) / abs(b), 1e-6)


def check_quenched_small():
    from .finite import quenched_O11
    from .structures import EnsembleParams

    # N = 1: the empty product
    return CheckResult("quenched_N1", abs(quenched_O11([0.3 + 0.1j], EnsembleParams(1, 3, 1)) - 1.0), 0.0)


def check_bulk_scan():
    from .limits import RegimeSpec
    from .oracles import convergence_scan

    rows = convergence_scan(RegimeSpec("bulk", a=1.0, b=1.0, p=1.0), [25, 50])
    return CheckResult("bulk_scan_decreasing", max(0.0, rows[1][1] - rows[0][1]), 0.0)


def check_weak_to_bulk():
    from .oracles import weak_to_bulk_recovery

    return CheckResult("weak_to_bulk", weak_to_bulk_recovery(50.0, np.linspace(-0.5, 0.5, 11)), 1e-3)


def run_suite(seed: int = 0) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    return [
        check_moments(),
        check_gram(),
        check_kernel_identity(rng),
        check_decoupling(rng),
        check_hermitian(rng),
        check_rotation(rng),
        check_positivity(rng),
        check_partition_bridge(),
        check_sum_rule(),
        check_brute_force(),
        check_quenched_small(),
        check_bulk_scan(),
        check_weak_to_bulk(),
    ]
