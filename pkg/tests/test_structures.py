import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from overlap_kernels.special import DomainError
from overlap_kernels.structures import (
    BreakdownError,
    EnsembleParams,
    SingularityError,
    alpha_closed,
    build_poly_family,
    eval_g,
    eval_ghat,
    eval_q,
    eval_qhat,
    ldu_decompose,
    log_g_seq,
    moment_entry,
    partition_bridge,
    phi_closed,
    phi_direct,
    pivots,
    three_term_residual,
)

G5_12_3_08 = 22128.1788          # exact rational, checked in 40-digit arithmetic
QFULL_7_25 = 699.24072265625
ALPHA_REF = complex(337.5993809066666666666666666666666666667, 195.2582583466666666666666666666666666667)


def binom(a, b):
    return math.exp(math.lgamma(a + 1) - math.lgamma(b + 1) - math.lgamma(a - b + 1))


def test_params_validation():
    with pytest.raises(DomainError):
        EnsembleParams(0, 3, 1)
    with pytest.raises(DomainError):
        EnsembleParams(4, 3, 1)
    with pytest.raises(DomainError):
        EnsembleParams(2, 3, 4)
    with pytest.raises(DomainError):
        EnsembleParams(2, 3, -1)
    P = EnsembleParams(3, 7.5, 2.5)
    assert P.m == 10
    assert P.with_N(5).N == 5


def test_eval_g_examples():
    P = EnsembleParams(4, 12, 3)
    assert abs(eval_g(0, P, 0.37) - binom(15, 3)) < 1e-10 * binom(15, 3)
    x = P.L / P.n
    assert abs(eval_g(6, P, x) - 7 * binom(15, 3)) < 1e-10 * binom(15, 3)
    assert abs(eval_g(5, P, 0.8) - G5_12_3_08) < 1e-12 * G5_12_3_08
    with pytest.raises(SingularityError):
        eval_g(2, P, 0)


def test_eval_q_examples():
    P = EnsembleParams(3, 7, 2.5)
    assert abs(eval_q(4, P, 0) - binom(9.5, 2.5)) < 1e-12 * binom(9.5, 2.5)
    assert abs(eval_q(0, P, 3.3) - binom(9.5, 2.5)) < 1e-12 * binom(9.5, 2.5)
    assert abs(eval_q(7, P, 1) - QFULL_7_25) < 1e-12 * QFULL_7_25
    with pytest.raises(DomainError):
        eval_q(8, P, 1)


def test_eval_qhat_examples():
    P0 = EnsembleParams(3, 8, 0)
    assert eval_qhat(4, P0, 0.3 + 0.1j, 0.5) == eval_q(4, P0, 0.3 + 0.1j)
    P = EnsembleParams(3, 8, 2)
    assert abs(eval_qhat(5, P, 0, 1) - 60.0) < 1e-12 * 60
    # simple pole at x = L/n
    x0 = 0.25
    v1 = abs(eval_qhat(3, P, 0.5, x0 + 1e-4))
    v2 = abs(eval_qhat(3, P, 0.5, x0 + 1e-5))
    assert 9 < v2 / v1 < 11
    with pytest.raises(SingularityError):
        eval_qhat(3, P, 0.5, x0)


def test_eval_ghat():
    P = EnsembleParams(3, 15, 4)
    for x in (0.3, 1.1, 2.7):
        for deg in range(11):
            g = eval_g(deg, P, x)
            bridge = (x - P.L / P.n) / (x * (1 + x)) * eval_ghat(deg, P, x)
            assert abs(g - bridge) < 1e-10 * abs(g)
            assert abs(eval_ghat(deg, P, x).imag) < 1e-12 * abs(eval_ghat(deg, P, x))
    P0 = EnsembleParams(1, 4, 0)
    ref = 1 * eval_q(1, P0, 1) - 1 * 3 * eval_q(0, P0, 1)
    assert abs(eval_ghat(0, P0, 1) - ref) < 1e-12 * abs(ref)


def test_moment_entries():
    P = EnsembleParams(3, 10, 2)
    a = 0.6 + 0.2j
    assert moment_entry(0, 3, P, a) == 0
    assert moment_entry(4, 1, P, a) == 0
    ref = (P.L + 2) * math.gamma(P.n - 1) * math.gamma(P.L + 1) / math.gamma(P.n + P.L + 1)
    assert abs(moment_entry(0, 0, P, 0) - ref) < 1e-14 * ref
    with pytest.raises(DomainError):
        moment_entry(9, 9, P, a)


def test_moment_matrix_vs_quadrature():
    from overlap_kernels.oracles import moment_matrix_quad

    P = EnsembleParams(3, 10, 2)
    a = 0.6 + 0.2j
    M = moment_matrix_quad(4, P, a)
    ref = np.array([[moment_entry(i, j, P, a) for j in range(5)] for i in range(5)])
    assert np.max(np.abs(M - ref)) < 1e-8


def test_ldu_examples():
    P = EnsembleParams(3, 14, 3)
    x = 0.9
    f = ldu_decompose(9, P, x)
    assert abs(f.d[0] - (P.L + 2 + P.n * x)) < 1e-14
    # r_{p+1} = prod d_i = n!(L+p+1)!/(L+n)! g_{p+1}(x), compared against the two-term g
    logr = np.cumsum(np.log(f.d))
    for p in range(9):
        ref = math.lgamma(P.n + 1) + math.lgamma(P.L + p + 2) - math.lgamma(P.L + P.n + 1) + math.log(eval_g(p + 1, P, x).real)
        assert abs(logr[p] - ref) < 1e-10 * abs(ref) + 1e-12
    f0 = ldu_decompose(6, P, 0.0)
    assert np.allclose(f0.d, np.arange(7) + P.L + 2, rtol=0, atol=1e-14)
    with pytest.raises(DomainError):
        ldu_decompose(13, P, x)


def test_ldu_reconstructs_moment_matrix():
    P = EnsembleParams(3, 12, 1.5)
    a = 0.5 - 0.7j
    depth = 6
    f = ldu_decompose(depth, P, abs(a) ** 2)
    size = depth + 1
    Lm = np.eye(size, dtype=complex)
    Um = np.eye(size, dtype=complex)
    for p in range(1, size):
        Lm[p, p - 1] = np.conj(a) * f.ell[p]
        Um[p - 1, p] = a * f.u[p]
    mu = Lm @ np.diag(f.d) @ Um
    ref = np.zeros((size, size), dtype=complex)
    x = abs(a) ** 2
    for i in range(size):
        ref[i, i] = i + P.L + 2 + (P.n - i) * x
        if i + 1 < size:
            ref[i, i + 1] = -(i + P.L + 1) * a
            ref[i + 1, i] = -(P.n - (i + 1) - 1) * np.conj(a)
    assert np.max(np.abs(mu - ref)) < 1e-12 * np.max(np.abs(ref))


def test_ldu_breakdown():
    # pivots go nonpositive only for unphysical parameter combinations; force it
    P = EnsembleParams(2, 3, 0)
    with pytest.raises((BreakdownError, DomainError)):
        ldu_decompose(2, P, 1.0)


@settings(max_examples=30, deadline=None)
@given(st.floats(2.5, 20), st.floats(0, 6), st.floats(0.05, 4))
def test_r_recurrence(n, L, x):
    P = EnsembleParams(1, n + L + 12, L)
    lg = log_g_seq(11, P, x).real
    nn = P.n
    logr = lg - (math.lgamma(L + nn + 1) - math.lgamma(nn + 1) - np.array([math.lgamma(L + p + 1) for p in range(12)]))
    r = np.exp(logr)
    for p in range(1, 11):
        rhs = ((nn - p) * x + p + L + 2) * r[p] - x * (p + L) * (nn - p - 1) * r[p - 1]
        assert abs(r[p + 1] - rhs) < 1e-10 * max(abs(r[p + 1]), abs(rhs))


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 4), st.integers(0, 12))
def test_g_bridge_property(x, m):
    P = EnsembleParams(2, 17.5, 2.5)
    g = eval_g(m, P, x)
    assert abs(g * x * (1 + x) - (x - P.L / P.n) * eval_ghat(m, P, x)) < 1e-10 * abs(g * x * (1 + x))


def test_poly_family_monomials_at_origin():
    P = EnsembleParams(3, 10, 2)
    fam = build_poly_family(5, P, 0)
    assert np.array_equal(fam.P, np.eye(6))
    k = np.arange(6)
    h = [(P.L + kk + 2) * math.gamma(P.n - kk - 1) * math.gamma(P.L + kk + 1) / math.gamma(P.n + P.L + 1) for kk in k]
    assert np.allclose(fam.norms, h, rtol=1e-13)


def test_poly_family_monic_positive():
    fam = build_poly_family(6, EnsembleParams(3, 11, 2.5), 0.4 + 0.8j)
    for k in range(7):
        assert fam.P[k, k] == 1
        assert fam.Q[k, k] == 1
    assert np.all(fam.norms > 0)


def test_poly_family_vs_gram_schmidt():
    from overlap_kernels.oracles import gram_schmidt_reference

    P = EnsembleParams(3, 10, 2)
    a = 0.7 + 0.3j
    fam = build_poly_family(5, P, a)
    ref = gram_schmidt_reference(5, P, a)
    assert np.max(np.abs(fam.P - ref.P)) < 1e-9
    assert np.max(np.abs(fam.Q - ref.Q)) < 1e-9
    assert np.max(np.abs(fam.norms - ref.norms) / fam.norms) < 1e-9


@settings(max_examples=20, deadline=None)
@given(st.floats(-1.2, 1.2), st.floats(-1.2, 1.2))
def test_Q_family_relation(re, im):
    # with the Hermitian form at (a, conj a) the second family coincides with P;
    # swapping a and conj a alone is not enough, the coefficients conjugate too
    a = complex(re, im)
    P = EnsembleParams(4, 9, 1.5)
    fam = build_poly_family(4, P, a)
    other = build_poly_family(4, P, a.conjugate())
    assert np.max(np.abs(fam.Q - fam.P)) < 1e-12
    assert np.max(np.abs(fam.Q - np.conj(other.P))) < 1e-12


def test_Q_family_relation_reference():
    from overlap_kernels.oracles import gram_schmidt_reference

    ref = gram_schmidt_reference(4, EnsembleParams(4, 9, 1.5), 0.5 - 0.6j)
    assert np.max(np.abs(ref.Q - ref.P)) < 1e-9


def test_three_term_examples():
    P = EnsembleParams(3, 15, 2)
    assert three_term_residual(3, P, 0, 1.3 - 0.4j) == 0
    z = 1 + 2j
    assert abs(three_term_residual(6, P, 0.4 - 0.9j, z)) <= 1e-10 * (1 + abs(z)) ** 7


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 8), st.floats(0.1, 1.5), st.floats(0, 2 * math.pi), st.complex_numbers(max_magnitude=2),
       st.floats(0, 4))
def test_three_term_property(k, r, t, z, L):
    P = EnsembleParams(2, 14 + L, L)
    a = r * complex(math.cos(t), math.sin(t))
    assert abs(three_term_residual(k, P, a, z)) <= 1e-10 * (1 + abs(z)) ** (k + 1) * max(1.0, r) ** (k + 1)


def test_phi_routes():
    P = EnsembleParams(3, 14, 3)
    for x in (0.5, 1.2, 3.0):
        for q in range(9):
            a, b = phi_closed(q, P, x), phi_direct(q, P, x)
            assert abs(a - b) < 1e-10 * abs(b)
            assert abs(a.imag) < 1e-12 * abs(a)
    x = 0.9
    g0, g1 = eval_g(0, P, x), eval_g(1, P, x)
    single = math.exp(math.lgamma(P.n + P.L + 1) - math.lgamma(P.L + 2) - math.lgamma(P.n - 1)) / (g1 * g0)
    assert abs(phi_direct(0, P, x) - single) < 1e-13 * abs(single)
    with pytest.raises(SingularityError):
        phi_closed(2, P, P.L / P.n)


def test_alpha_closed():
    P = EnsembleParams(3, 12, 2)
    assert abs(alpha_closed(0, P, 0.7, 0.3 + 0.1j) - eval_g(0, P, 0.7)) < 1e-10 * abs(eval_g(0, P, 0.7))
    assert abs(alpha_closed(4, P, 0.7, 0.3 + 0.1j) - ALPHA_REF) < 1e-10 * abs(ALPHA_REF)
    assert abs(alpha_closed(5, P, 0.7, 1e-9) - eval_g(0, P, 0.7)) < 1e-7 * abs(eval_g(0, P, 0.7))
    with pytest.raises(SingularityError):
        alpha_closed(3, P, 0.7, 1)


@pytest.mark.parametrize("N,n,L", [(2, 5, 1), (4, 9, 1), (7, 15.5, 2.5), (12, 30, 0)])
def test_partition_bridge(N, n, L):
    P = EnsembleParams(N, n, L)
    for x in (0.2, 1.0, 3.0):
        a, b = partition_bridge(P, x)
        assert abs(a - b) < 1e-10 * abs(b)


def test_pivots_complex_argument():
    # pivots accept complex x for the transformed (non-physical) evaluations
    d = pivots(4, EnsembleParams(2, 9, 1), 0.3 + 0.2j)
    assert d.dtype == complex and np.all(np.isfinite(d))
