"""Numerical kernels: random streams, QR, eigensolvers, log-gamma, quadrature."""

from .linalg import (
    DegenerateInputError,
    RealSymTridiag,
    SolverFailure,
    bisect_eigenvalues,
    eig_hermitian,
    eig_sym_tridiag,
    hermitian_tridiagonalize,
    householder_qr,
    phase_normalize,
)
from .quadrature import QuadratureError, QuadResult, integrate, quad_adaptive
from .rng import RngStream, gaussian
from .special import gamma_ratio, log_gamma

__all__ = [
    "DegenerateInputError",
    "QuadResult",
    "QuadratureError",
    "RealSymTridiag",
    "RngStream",
    "SolverFailure",
    "bisect_eigenvalues",
    "eig_hermitian",
    "eig_sym_tridiag",
    "gamma_ratio",
    "gaussian",
    "hermitian_tridiagonalize",
    "householder_qr",
    "integrate",
    "log_gamma",
    "phase_normalize",
    "quad_adaptive",
]
