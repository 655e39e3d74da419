"""Eigenvector-overlap kernels of the induced spherical unitary ensemble.

Finite-N overlap kernels and conditional overlap densities, their scaling
limits in the strongly and weakly non-unitary and singular-origin regimes,
a matrix sampler with overlap extraction, and the oracles that cross-check
all of them.
"""

__version__ = "0.1.0"

from .special import DomainError, ConvergenceError
from .structures import EnsembleParams, PolyFamily, build_poly_family
from .finite import (
    KernelEval,
    WeightedPoint,
    K11_finite,
    K12_finite,
    D11_finite,
    D12_finite,
    cond_exp_O11,
    cond_exp_O12,
    quenched_O11,
    quenched_O12,
)
from .limits import LimitKernel, RegimeSpec, regime_to_params, psi
from .sampler import OverlapBatch, SampleConfig, overlap_batch

__all__ = [
    "__version__",
    "DomainError",
    "ConvergenceError",
    "EnsembleParams",
    "PolyFamily",
    "build_poly_family",
    "KernelEval",
    "WeightedPoint",
    "K11_finite",
    "K12_finite",
    "D11_finite",
    "D12_finite",
    "cond_exp_O11",
    "cond_exp_O12",
    "quenched_O11",
    "quenched_O12",
    "LimitKernel",
    "RegimeSpec",
    "regime_to_params",
    "psi",
    "OverlapBatch",
    "SampleConfig",
    "overlap_batch",
]
