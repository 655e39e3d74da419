"""Monte Carlo sampling of the induced spherical ensemble and its overlaps.

G = U W^{1/2} with W = A^{-1/2} X^H X A^{-1/2}, X an (N+L) x N Ginibre
matrix, A = V^H V with V an n x N Ginibre matrix and U Haar.  With these
shapes the eigenvalue density is prop. to |z|^{2L} (1+|z|^2)^{-(n+L+1)}
per eigenvalue (times |Vandermonde|^2); the shapes are configurable.

Sample i always uses the random stream SeedSequence(seed, spawn_key=(i, attempt)),
so results do not depend on how samples are split across workers.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .structures import EnsembleParams

GAP_TOL = 1e-10
MAX_ATTEMPTS = 8


class DegeneracyError(ArithmeticError):
    pass


@dataclass(frozen=True)
class SampleConfig:
    params: EnsembleParams
    n_samples: int
    seed: int = 0
    workers: int = 1
    x_rows: int | None = None       # rows of X; default N + L
    wishart_dof: int | None = None  # rows of V; default n

    def __post_init__(self):
        p = self.params
        if self.n_samples < 1:
            raise ValueError("n_samples must be positive")
        if self.workers < 1:
            raise ValueError("workers must be positive")
        if not (0 <= self.seed < 2 ** 64):
            raise ValueError("seed must be a 64-bit unsigned integer")
        if p.n != int(p.n) or p.L != int(p.L):
            raise ValueError("the matrix sampler needs integer n and L")
        if self.rows_x < p.N or self.rows_v < p.N:
            raise ValueError("X and V need at least N rows")

    @property
    def rows_x(self) -> int:
        return int(self.x_rows if self.x_rows is not None else self.params.N + self.params.L)

    @property
    def rows_v(self) -> int:
        return int(self.wishart_dof if self.wishart_dof is not None else self.params.n)


@dataclass
class OverlapBatch:
    eigenvalues: list = field(default_factory=list)
    diag_overlaps: list = field(default_factory=list)
    offdiag: list | None = None
    resampled: int = 0


def _rng(seed: int, i: int, attempt: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i, attempt)))


def ginibre(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    return (rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))) / math.sqrt(2)


def haar_unitary(rng: np.random.Generator, N: int) -> np.ndarray:
    Q, R = np.linalg.qr(ginibre(rng, N, N))
    d = np.diag(R)
    return Q * (d / np.abs(d))[None, :]


def _herm_power(A: np.ndarray, p: float) -> np.ndarray:
    w, V = np.linalg.eigh(A)
    if np.any(w <= 0):
        raise np.linalg.LinAlgError("matrix not positive definite")
    return (V * w ** p) @ V.conj().T


def sample_matrix(cfg: SampleConfig, rng: np.random.Generator) -> np.ndarray:
    N = cfg.params.N
    X = ginibre(rng, cfg.rows_x, N)
    V = ginibre(rng, cfg.rows_v, N)
    A = V.conj().T @ V
    try:
        Ais = _herm_power(A, -0.5)
    except np.linalg.LinAlgError:
        V = ginibre(rng, cfg.rows_v, N)
        Ais = _herm_power(V.conj().T @ V, -0.5)
    Y = X @ Ais
    W = Y.conj().T @ Y
    W = 0.5 * (W + W.conj().T)
    return haar_unitary(rng, N) @ _herm_power(W, 0.5)


def sample_isue(cfg: SampleConfig) -> list[np.ndarray]:
    return [sample_matrix(cfg, _rng(cfg.seed, i)) for i in range(cfg.n_samples)]


def min_relative_gap(lam: np.ndarray) -> float:
    if len(lam) < 2:
        return math.inf
    d = np.abs(lam[:, None] - lam[None, :])
    np.fill_diagonal(d, np.inf)
    return float(d.min() / max(1.0, np.abs(lam).max()))


def eig_overlaps(G: np.ndarray):
    """Eigenvalues and the full overlap matrix O[j, k] = (L_j^H L_k)(R_j^H R_k).

    Right eigenvectors are the columns of P, left ones the rows of P^{-1}.
    """
    lam, P = np.linalg.eig(G)
    if min_relative_gap(lam) < GAP_TOL:
        raise DegeneracyError("near-degenerate spectrum")
    Pinv = np.linalg.inv(P)
    # L_j is row j of P^{-1} (as a column vector, L_j^t G = lam_j L_j^t)
    LL = np.conj(Pinv) @ Pinv.T        # [j, k] = L_j^H L_k
    RR = P.conj().T @ P                # [j, k] = R_j^H R_k
    return lam, LL * RR


def _one_sample(cfg: SampleConfig, i: int, want_offdiag: bool):
    for attempt in range(MAX_ATTEMPTS):
        rng = _rng(cfg.seed, i, attempt)
        try:
            lam, O = eig_overlaps(sample_matrix(cfg, rng))
            return lam, O if want_offdiag else np.real(np.diag(O)), attempt
        except DegeneracyError:
            continue
    raise DegeneracyError(f"sample {i}: degenerate after {MAX_ATTEMPTS} attempts")


def _chunk(args):
    cfg, lo, hi, want = args
    return [_one_sample(cfg, i, want) for i in range(lo, hi)]


def _ranges(n: int, parts: int):
    step = -(-n // parts)
    return [(lo, min(n, lo + step)) for lo in range(0, n, step)]


def run_samples(cfg: SampleConfig, want_offdiag: bool = False):
    """List of (eigenvalues, overlaps, resample count) in sample order."""
    jobs = [(cfg, lo, hi, want_offdiag) for lo, hi in _ranges(cfg.n_samples, cfg.workers)]
    if cfg.workers == 1 or len(jobs) == 1:
        parts = [_chunk(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
            parts = list(ex.map(_chunk, jobs))
    return [r for part in parts for r in part]


def overlap_batch(cfg: SampleConfig, want_offdiag: bool = False) -> OverlapBatch:
    out = OverlapBatch(offdiag=[] if want_offdiag else None)
    for s, (lam, O, att) in enumerate(run_samples(cfg, want_offdiag)):
        out.resampled += att
        out.eigenvalues.append(lam)
        if want_offdiag:
            out.diag_overlaps.append(np.real(np.diag(O)))
            N = len(lam)
            out.offdiag.append([(j, k, complex(O[j, k])) for j in range(N) for k in range(N) if j != k])
        else:
            out.diag_overlaps.append(O)
    return out


# ---------------------------------------------------------------- quenched formulas, in array form

def _quenched_diag_all(lam: np.ndarray, m: float) -> np.ndarray:
    a = 1 + np.abs(lam) ** 2
    d2 = np.abs(lam[:, None] - lam[None, :]) ** 2
    np.fill_diagonal(d2, 1.0)
    fac = 1 + np.outer(a, a) / (m * d2)
    np.fill_diagonal(fac, 1.0)
    return np.prod(fac, axis=1)


def _quenched_off(lam: np.ndarray, j: int, k: int, m: float) -> complex:
    l1, l2 = lam[j], lam[k]
    rest = np.delete(lam, [j, k])
    pre = -(1 + abs(l1) ** 2) * (1 + abs(l2) ** 2) / (m * abs(l1 - l2) ** 2)
    fac = 1 + (1 + l1 * np.conj(l2)) * (1 + np.abs(rest) ** 2) / (m * (l1 - rest) * np.conj(l2 - rest))
    return complex(pre * np.prod(fac))


def mc_quenched_ratio(cfg: SampleConfig, offdiag: bool = False) -> tuple[float, float]:
    """Mean and standard error over samples of O / quenched(O), averaged within a sample.

    Diagonal: all N eigenvalues.  Off-diagonal: the pair (0, 1) in eig order, real part.
    """
    if cfg.n_samples < 100:
        raise ValueError("need at least 100 samples")
    m = cfg.params.m
    vals = []
    for lam, O, _ in run_samples(cfg, want_offdiag=offdiag):
        if offdiag:
            vals.append((O[0, 1] / _quenched_off(lam, 0, 1, m)).real)
        else:
            vals.append(float(np.mean(O / _quenched_diag_all(lam, m))))
    v = np.asarray(vals)
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(len(v)))


def draw_X(rng: np.random.Generator, m: float, size) -> np.ndarray:
    """Density (m+1)/(1+x)^{m+2} on x > 0 by inversion."""
    u = rng.random(size)
    return (1 - u) ** (-1.0 / (m + 1)) - 1


def mc_prop21_distribution(cfg: SampleConfig):
    """Two-sample KS on log O11: direct overlaps vs the product representation.

    One eigenvalue per sample, picked uniformly from a stream independent of
    the matrix.  Returns scipy's KS result (statistic, pvalue).
    """
    m = cfg.params.m
    direct, synth = [], []
    for s, (lam, O, _) in enumerate(run_samples(cfg)):
        rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(s, 10 ** 6)))
        j = int(rng.integers(len(lam)))
        others = np.delete(lam, j)
        c = (1 + abs(lam[j]) ** 2) * (1 + np.abs(others) ** 2) / np.abs(lam[j] - others) ** 2
        synth.append(float(np.sum(np.log1p(c * draw_X(rng, m, len(others))))))
        direct.append(math.log(O[j]))
    return stats.ks_2samp(direct, synth)


@dataclass(frozen=True)
class ProfileRow:
    lo: float
    hi: float
    count: int
    mean: float
    stderr: float
    analytic: float
    flagged: bool


def mc_conditional_profile(cfg: SampleConfig, bins) -> list[ProfileRow]:
    """Radially binned E[O_jj | |lambda_j| in bin] against the analytic bin average.

    The analytic value is int D11 r dr / int R1 r dr over the bin, i.e.
    cond_exp_O11 averaged with the one-point density.
    """
    from scipy import integrate

    from .finite import D11_finite, one_point_density

    def bin_average(lo, hi):
        num = integrate.quad(lambda r: D11_finite([r], cfg.params) * r, lo, hi, epsrel=1e-10)[0]
        den = integrate.quad(lambda r: one_point_density(r, cfg.params) * r, lo, hi, epsrel=1e-10)[0]
        return num / den

    edges = np.asarray(bins, dtype=float)
    nb = len(edges) - 1
    acc = [[] for _ in range(nb)]
    for lam, O, _ in run_samples(cfg):
        idx = np.searchsorted(edges, np.abs(lam), side="right") - 1
        for b, o in zip(idx, O):
            if 0 <= b < nb:
                acc[b].append(o)
    rows = []
    for b in range(nb):
        lo, hi = float(edges[b]), float(edges[b + 1])
        ana = bin_average(lo, hi)
        v = np.asarray(acc[b])
        if len(v) < 2:
            rows.append(ProfileRow(lo, hi, len(v), math.nan, math.nan, ana, True))
            continue
        rows.append(ProfileRow(lo, hi, len(v), float(v.mean()), float(v.std(ddof=1) / math.sqrt(len(v))), ana, False))
    return rows


def radial_ks(cfg: SampleConfig) -> tuple[float, float]:
    """KS distance between sampled |lambda| and the analytic radial law.

    The analytic CDF of |lambda| is (1/N) sum_k I_{s}(k+L+1, n-k) with
    s = r^2/(1+r^2), since each |z|^2-moment band is a beta-prime law.
    """
    from scipy.special import betainc

    p = cfg.params
    N, n, L = p.N, p.n, p.L
    k = np.arange(N)

    def cdf(r):
        s = r * r / (1 + r * r)
        return np.mean(betainc(k + L + 1, n - k, s))

    radii = np.concatenate([np.abs(lam) for lam, _, _ in run_samples(cfg)])
    res = stats.kstest(radii, np.vectorize(cdf))
    return float(res.statistic), float(res.pvalue)


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("OVERLAP_KERNELS_WORKERS", "1")))
    except ValueError:
        return 1
