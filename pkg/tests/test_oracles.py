import math

import numpy as np
import pytest

from overlap_kernels.finite import D11_finite, D12_finite, cond_exp_O11, one_point_density
from overlap_kernels.limits import RegimeSpec
from overlap_kernels.oracles import (
    QuadratureSpec,
    asymptotic_qhat_check,
    brute_force_D,
    convergence_scan,
    doubling_ratios,
    gram_matrix,
    gram_schmidt_reference,
    overlap_sum_rule,
    quad_plane,
    radial_quad,
    spherical_weight,
    _spec_for,
)
from overlap_kernels.special import ConvergenceError
from overlap_kernels.structures import EnsembleParams, build_poly_family

GRID = [(0.3, -0.5, 0.7), (0.3 + 0.4j, -0.5 + 0.1j, 0.7 - 0.2j)]


def test_quad_plane_mass():
    for n, L in ((5, 0), (7, 2), (9.5, 1.5)):
        P = EnsembleParams(1, n, L)
        v = quad_plane(lambda z: spherical_weight(z, P), _spec_for(P, 2)).real
        ref = math.exp(math.lgamma(L + 1) + math.lgamma(n) - math.lgamma(L + n + 1))
        assert abs(v - ref) < 1e-10 * ref


def test_quad_plane_odd_integrand():
    P = EnsembleParams(1, 6, 1)
    assert abs(quad_plane(lambda z: z * spherical_weight(z, P), _spec_for(P, 3))) < 1e-14


def test_quad_plane_vs_radial():
    P = EnsembleParams(1, 8, 2.5)
    g = lambda r: r ** 3 * (1 + r * r) ** -5 * spherical_weight(r, P)
    a = quad_plane(lambda z: g(np.abs(z)), _spec_for(P, 4)).real
    b = radial_quad(g)
    assert abs(a - b) < 1e-10 * b


def test_quad_plane_nonconvergence():
    spec = QuadratureSpec(tol=1e-16, max_refine=2, radial_nodes=4, degree=1)
    with pytest.raises(ConvergenceError):
        quad_plane(lambda z: np.cos(40 * np.abs(z)) / (1 + np.abs(z) ** 4), spec)


def test_orthogonality_pair():
    P = EnsembleParams(6, 10, 2)
    fam = build_poly_family(5, P, 0.7 + 0.3j)
    G = gram_matrix(fam, P)
    assert abs(G[2, 3]) < 1e-6
    assert np.max(np.abs(G - np.diag(fam.norms)) / np.maximum(1, fam.norms)[:, None]) < 1e-6


def test_gram_schmidt_origin():
    P = EnsembleParams(3, 10, 2)
    ref = gram_schmidt_reference(4, P, 0)
    assert np.max(np.abs(ref.P - np.eye(5))) < 1e-12


def test_gram_schmidt_degree_limit():
    with pytest.raises(ValueError):
        gram_schmidt_reference(7, EnsembleParams(3, 20, 2), 0.3)


def test_brute_force_D11_N2():
    P = EnsembleParams(2, 5, 1)
    for z in (0.3 + 0.4j, 1.2 - 0.1j):
        a = brute_force_D([z], P, "D11").real
        assert abs(a - D11_finite([z], P)) < 1e-6 * abs(a)


def test_brute_force_D12_N3():
    P = EnsembleParams(3, 6, 1)
    cfg = [0.3 + 0.2j, -0.5 + 0.1j]
    a = brute_force_D(cfg, P, "D12")
    b = D12_finite(cfg, P)
    assert abs(a - b) < 1e-5 * abs(a)


def test_brute_force_D12_needs_sphere_factor():
    # the off-diagonal definition without (1+|z1|^2)(1+|z2|^2) does not match the determinantal formula
    P = EnsembleParams(3, 6, 1)
    cfg = [0.3 + 0.2j, -0.5 + 0.1j]
    bare = brute_force_D(cfg, P, "D12", corrected=False)
    corrected = brute_force_D(cfg, P, "D12")
    ratio = corrected / bare
    assert ratio == pytest.approx((1 + abs(cfg[0]) ** 2) * (1 + abs(cfg[1]) ** 2), rel=1e-12)


@pytest.mark.parametrize("which", ["D11", "D12"])
def test_brute_force_no_integration(which):
    P = EnsembleParams(3, 5, 1)
    cfg = [0.3 + 0.2j, -0.5 + 0.1j, 0.2 - 0.6j]
    a = brute_force_D(cfg, P, which)
    b = D11_finite(cfg, P) if which == "D11" else D12_finite(cfg, P)
    assert abs(a - b) < 1e-9 * abs(a)


@pytest.mark.parametrize("N,n,L,k", [(3, 6.5, 0.5, 2), (4, 7, 1.5, 3), (4, 7, 1.5, 2)])
def test_brute_force_more(N, n, L, k):
    P = EnsembleParams(N, n, L)
    cfg = [0.4 + 0.1j, -0.2 + 0.7j, 0.9 - 0.3j][:k]
    assert abs(brute_force_D(cfg, P, "D11") - D11_finite(cfg, P)) < 1e-8 * abs(D11_finite(cfg, P))
    assert abs(brute_force_D(cfg, P, "D12") - D12_finite(cfg, P)) < 1e-8 * abs(D12_finite(cfg, P))


def test_brute_force_validation():
    P = EnsembleParams(4, 7, 1)
    with pytest.raises(ValueError):
        brute_force_D([0.1], P, "D11")
    with pytest.raises(ValueError):
        brute_force_D([0.1, 0.2, 0.3], P, "D13")
    with pytest.raises(ValueError):
        brute_force_D([0.1], EnsembleParams(2, 7, 1), "D12")


def test_cond_exp_quadrature_N2():
    P = EnsembleParams(2, 5, 1)
    z = 0.6 - 0.3j
    ratio = brute_force_D([z], P, "D11").real / one_point_density(z, P)
    assert abs(ratio - cond_exp_O11(z, P)) < 1e-6 * ratio


@pytest.mark.parametrize("z1", [0.4 + 0.3j, 1.1])
def test_overlap_sum_rule(z1):
    lhs, rhs = overlap_sum_rule(z1, EnsembleParams(4, 8, 1))
    assert abs(lhs - rhs) < 1e-9 * abs(rhs)


def test_qhat_bulk_rate():
    rows = asymptotic_qhat_check(RegimeSpec("bulk", a=1, b=1, p=1.0), [25, 50, 100, 200], GRID)
    for k in (0, 1, 2):
        errs = [e for N, kk, e in rows if kk == k]
        assert all(b < a for a, b in zip(errs, errs[1:]))
        assert errs[-1] < 1e-6


def test_qhat_outer_rate():
    rows = asymptotic_qhat_check(RegimeSpec("edge", a=1, b=1), [50, 100, 200, 400], GRID)
    for k in (0, 1, 2):
        errs = [e for N, kk, e in rows if kk == k]
        for r in doubling_ratios(errs):
            assert abs(r - 1 / math.sqrt(2)) < 0.3 / math.sqrt(2)


@pytest.mark.parametrize("spec", [RegimeSpec("edge", a=1, b=1, edge_side="inner"), RegimeSpec("weak", rho=1.5),
                                  RegimeSpec("singular", b=1, L_fixed=2)], ids=["inner", "weak", "singular"])
def test_qhat_other_regimes_decrease(spec):
    rows = asymptotic_qhat_check(spec, [25, 50, 100, 200], GRID)
    for k in (0, 1, 2):
        errs = [e for N, kk, e in rows if kk == k]
        assert all(b < a for a, b in zip(errs, errs[1:]))


def test_convergence_scan_fixed_normalization_decreases():
    rows = convergence_scan(RegimeSpec("bulk", a=1, b=1, p=1.0), [25, 50, 100], normalization="fixed")
    errs = [e for _, e in rows]
    assert all(b < a for a, b in zip(errs, errs[1:]))
