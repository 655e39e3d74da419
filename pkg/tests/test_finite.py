import cmath
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from overlap_kernels.finite import (
    ConsistencyError,
    DegenerateError,
    D11_finite,
    D12_finite,
    GN_direct,
    K11_finite,
    K12_finite,
    WeightedPoint,
    cond_exp_O11,
    cond_exp_O12,
    decouple_check,
    decoupling_D12,
    gaussian_free_weight,
    kernel_KN,
    omega_hat,
    one_point_density,
    quenched_O11,
    quenched_O12,
    two_point_density,
    varpi,
    weight_omega,
)
from overlap_kernels.oracles import quad_plane, radial_quad, _spec_for
from overlap_kernels.structures import EnsembleParams, SingularityError, eval_g

disc = st.builds(lambda r, t: r * cmath.exp(1j * t), st.floats(0.05, 1.6), st.floats(0, 2 * math.pi))


def test_gaussian_free_weight():
    assert gaussian_free_weight(0, EnsembleParams(2, 5, 1)) == 0
    assert gaussian_free_weight(0, EnsembleParams(2, 5, 0)) == 1
    P = EnsembleParams(2, 9, 1)
    spec = _spec_for(P, 8)
    for k in range(4):
        got = quad_plane(lambda z: np.abs(z) ** (2 * k) * np.vectorize(lambda t: gaussian_free_weight(t, P))(z), spec).real
        ref = math.gamma(k + 2) * math.gamma(9 - k) / math.gamma(11)
        assert abs(got - ref) < 1e-8 * ref


def test_weight_omega():
    P = EnsembleParams(2, 6, 0)
    assert abs(weight_omega(0, 0, 0, P) - 1 / 6) < 1e-15
    P = EnsembleParams(3, 7, 1.5)
    lam = 0.3 - 0.4j
    v = weight_omega(0.5 + 0.2j, lam, lam.conjugate(), P)
    assert abs(v.imag) < 1e-15 and v.real >= 0


@settings(max_examples=30, deadline=None)
@given(disc, disc, disc)
def test_weight_omega_factorization(z, w, lam):
    # omega(z) = varpi(z, z | lam) * omega_hat(zbar, z), recomposed from separate pieces
    P = EnsembleParams(3, 8, 2)
    lhs = weight_omega(z, lam, lam.conjugate(), P)
    rhs = varpi(z, z, lam, P) * omega_hat(z.conjugate(), z, P)
    assert abs(lhs - rhs) < 1e-12 * max(abs(lhs), 1e-300)


def test_omega_hat_and_varpi():
    P = EnsembleParams(3, 8, 2.5)
    v = omega_hat(0.7, 0.7, P)
    assert abs(v.imag) == 0 and v.real > 0
    z = 0.4 - 0.9j
    assert abs(omega_hat(z.conjugate(), z, P) - gaussian_free_weight(z, P)) < 1e-14
    lam = 0.6 + 0.1j
    ref = (1 + abs(lam) ** 2) ** 2 / P.m
    assert abs(varpi(lam, lam, lam, P) - ref) < 1e-14


def test_omega_hat_branch_warning():
    P = EnsembleParams(3, 8, 2.5)
    with pytest.warns(RuntimeWarning):
        omega_hat(-0.5, 0.5, P)


def test_kernel_KN():
    P = EnsembleParams(6, 12, 2)
    for r in np.linspace(0, 3, 13):
        assert one_point_density(r, P) >= 0
    total = radial_quad(lambda r: one_point_density(r, P))
    assert abs(total - 6) < 1e-6
    P1 = EnsembleParams(1, 5, 0)
    z = 0.3 + 0.8j
    assert abs(kernel_KN(z, z, P1) - 5 * (1 + abs(z) ** 2) ** -6) < 1e-15


def test_GN_symmetry_and_N2():
    P = EnsembleParams(5, 11, 1.5)
    x, y, z = 0.8, 0.3 + 0.2j, -0.4 + 0.6j
    assert GN_direct(x, y, z, P) == pytest.approx(GN_direct(x, z, y, P), rel=1e-14)
    P2 = EnsembleParams(2, 7, 1.5)
    n, L = P2.n, P2.L
    g = [eval_g(s, P2, x) for s in range(3)]
    c = [math.exp(math.lgamma(n + L + 1) - math.lgamma(k + L + 2) - math.lgamma(n - k - 1)) for k in range(2)]
    phi = [c[k] * x ** k / (g[k + 1] * g[k]) for k in range(2)]
    hand = g[0] ** 2 * (phi[0] + phi[1]) + g[0] * g[1] * (y + z) * phi[1] + g[1] ** 2 * y * z * phi[1]
    assert abs(GN_direct(x, y, z, P2) - hand) < 1e-12 * abs(hand)
    with pytest.raises(SingularityError):
        GN_direct(0, y, z, P)


@settings(max_examples=40, deadline=None)
@given(disc, disc, disc, st.integers(2, 10))
def test_direct_equals_simplified(z, w, lam, N):
    P = EnsembleParams(N, 3 * N, N / 2)
    d = K11_finite(z, w, lam, P, "direct")
    s = K11_finite(z, w, lam, P, "simplified")
    assert abs(d.value - s.value) <= 1e-9 * abs(d.value)


@settings(max_examples=40, deadline=None)
@given(disc, disc, disc)
def test_hermitian_symmetry(z, w, lam):
    P = EnsembleParams(5, 12, 2.5)
    a = K11_finite(z, w, lam, P).value
    b = K11_finite(w, z, lam, P).value
    assert abs(a - b.conjugate()) <= 1e-10 * abs(a)


def test_diagonal_positivity():
    P = EnsembleParams(6, 15, 3)
    lam = 0.7 + 0.3j
    for r in np.linspace(0.1, 2.5, 9):
        for t in np.linspace(0, 2 * np.pi, 7):
            z = r * cmath.exp(1j * t)
            v = K11_finite(z, z, lam, P).value
            assert v.real >= 0 and abs(v.imag) <= 1e-12 * abs(v)


def test_regularized_path():
    P = EnsembleParams(8, 20, 4)
    lam = 0.8 + 0.2j
    w = lam + 1e-5
    s = K11_finite(lam + 2e-5j, w, lam, P, "simplified")
    d = K11_finite(lam + 2e-5j, w, lam, P, "direct")
    assert s.regularized and not d.regularized
    assert abs(s.value - d.value) < 1e-12 * abs(d.value)
    # just outside the band both routes are generic and still agree
    z = lam + 0.05
    s = K11_finite(z, lam - 0.04j, lam, P, "simplified")
    assert not s.regularized
    assert abs(s.value - K11_finite(z, lam - 0.04j, lam, P, "direct").value) < 1e-9 * abs(s.value)


def test_method_validation():
    with pytest.raises(ValueError):
        K11_finite(0.1, 0.2, 0.3, EnsembleParams(3, 6, 1), "other")


def test_K12():
    P = EnsembleParams(5, 11, 2)
    u, v = 0.4 + 0.3j, -0.2 + 0.5j
    assert abs(K12_finite(u, v, u, v, P)) < 1e-14
    z, w = 0.7 - 0.1j, 0.1 + 0.9j
    e = cmath.exp(0.77j)
    a = K12_finite(z, w, u, v, P)
    b = K12_finite(z * e, w * e, u * e, v * e, P)
    assert np.isfinite(a) and abs(abs(a) - abs(b)) < 1e-10 * abs(a)


@settings(max_examples=25, deadline=None)
@given(st.lists(disc, min_size=1, max_size=4), st.floats(0, 2 * math.pi))
def test_rotation_covariance(pts, theta):
    P = EnsembleParams(5, 11, 1.5)
    if min((abs(a - b) for i, a in enumerate(pts) for b in pts[i + 1:]), default=1) < 1e-2:
        return
    e = cmath.exp(1j * theta)
    rot = [p * e for p in pts]
    a, b = D11_finite(pts, P), D11_finite(rot, P)
    assert abs(a - b) <= 1e-10 * abs(a)
    assert abs(cond_exp_O11(pts[0], P) - cond_exp_O11(rot[0], P)) <= 1e-10 * cond_exp_O11(pts[0], P)
    if len(pts) >= 2:
        a, b = D12_finite(pts, P), D12_finite(rot, P)
        assert abs(a - b) <= 1e-10 * abs(a)


@settings(max_examples=25, deadline=None)
@given(st.lists(disc, min_size=1, max_size=4))
def test_D11_positive(pts):
    assume(min((abs(a - b) for i, a in enumerate(pts) for b in pts[i + 1:]), default=1) > 1e-3)
    P = EnsembleParams(6, 13, 2)
    assert D11_finite(pts, P) > 0


def test_D12_reality():
    P = EnsembleParams(4, 9, 1)
    # real configurations are fixed by conjugation, so D12 is real there
    v = D12_finite([0.3, -0.5], P)
    assert abs(v.imag) < 1e-12 * abs(v)
    v = D12_finite([0.3, -0.5, 0.8], P)
    assert abs(v.imag) < 1e-12 * abs(v)
    # generic configurations carry a genuine imaginary part (confirmed by quadrature in test_oracles)
    v = D12_finite([0.3 + 0.2j, -0.5 + 0.1j], P)
    assert abs(v.imag) > 1e-3 * abs(v)
    c = [0.3 + 0.2j, -0.5 + 0.1j, 0.2 - 0.7j]
    assert D12_finite([z.conjugate() for z in c], P) == pytest.approx(D12_finite(c, P).conjugate(), rel=1e-12)


@pytest.mark.parametrize("N,k", [(4, 2), (3, 3), (4, 3), (5, 4)])
def test_decoupling(N, k):
    rng = np.random.default_rng(100 + N * 10 + k)
    P = EnsembleParams(N, N + 4, 1.5)
    for _ in range(5):
        pts = list(0.9 * np.sqrt(rng.random(k)) * np.exp(2j * np.pi * rng.random(k)))
        assert decouple_check(pts[0], pts[1], pts[2:], P) < 1e-9


def test_decoupling_coincidence_sequence():
    P = EnsembleParams(4, 8, 1)
    z1 = 0.3 + 0.2j
    ratios = []
    for h in (1e-2, 1e-3, 1e-4):
        z2 = z1 + h * cmath.exp(0.4j)
        a = decoupling_D12([z1, z2], P)
        b = D12_finite([z1, z2], P, "simplified")
        ratios.append(a / b)
    assert abs(ratios[-1] - 1) < 1e-6


def test_decoupling_pole():
    P = EnsembleParams(3, 5, 0)
    # |1 + z1 z2b|^2 = (n+L)|z1 - z2|^2 along z1 = 0, |z2| = 1/sqrt(5)
    with pytest.raises(SingularityError):
        decoupling_D12([0, 1 / math.sqrt(5)], P)


def test_cond_exp_O11():
    P = EnsembleParams(7, 16, 2)
    for r in np.linspace(0.05, 3, 20):
        assert cond_exp_O11(r, P) >= 1


def test_cond_exp_O12_and_degenerate():
    P = EnsembleParams(4, 9, 1)
    z1, z2 = 0.4 + 0.1j, -0.3 + 0.5j
    ref = D12_finite([z1, z2], P).real / two_point_density(z1, z2, P)
    assert cond_exp_O12(z1, z2, P) == pytest.approx(ref, rel=1e-14)
    assert cond_exp_O12(z1, z2, P) < 0
    with pytest.raises(DegenerateError):
        cond_exp_O12(z1, z1, P)


def test_quenched():
    P = EnsembleParams(1, 3, 1)
    assert quenched_O11([0.3 + 0.4j], P) == 1
    P = EnsembleParams(4, 9, 1)
    lams = [0.1 + 0.2j, -0.5, 0.7j, 1.1 - 0.3j]
    assert quenched_O11(lams, P) >= 1
    v = quenched_O12(lams, P)
    assert np.isfinite(v)
    with pytest.raises(DegenerateError):
        quenched_O11([0.1, 0.1], P)
    with pytest.raises(DegenerateError):
        quenched_O12([0.1, 0.1, 0.3], P)


def test_weighted_point():
    p = WeightedPoint.physical(0.3 + 0.4j)
    assert p.is_physical
    q = p.rotated(1.0)
    assert q.is_physical or abs(q.zbar - q.z.conjugate()) < 1e-16
    assert not WeightedPoint(0.3, 0.1).is_physical
