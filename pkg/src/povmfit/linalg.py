"""Dense complex-matrix substrate: Hermitian eigendecomposition, regularized
inverse square roots, Kronecker products and trace inner products.

All routines operate on ``numpy`` arrays with ``complex128`` entries and are
pure functions, safe for concurrent use.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import DimensionError, NumericError

HERMITICITY_TOL = 1e-8


class EigenDecomposition(NamedTuple):
    """Eigenvalues in ascending order and the matching orthonormal eigenvectors."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce to a 2-D complex128 array, rejecting non-finite entries."""
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} contains non-finite entries")
    return m


def hermitize(a: np.ndarray) -> np.ndarray:
    """Return the Hermitian part (A + A^dag) / 2."""
    return 0.5 * (a + a.conj().T)


def herm_eig(h) -> EigenDecomposition:
    """Eigendecomposition of a Hermitian matrix.

    The input is symmetrized as (H + H^dag)/2 before decomposition to absorb
    round-off drift, but a Hermiticity defect beyond ``HERMITICITY_TOL`` is
    rejected.
    """
    h = as_matrix(h, "herm_eig input")
    if h.shape[0] != h.shape[1]:
        raise DimensionError(f"herm_eig needs a square matrix, got {h.shape}")
    defect = np.abs(h - h.conj().T).max() if h.size else 0.0
    if defect > HERMITICITY_TOL:
        raise ValueError(f"input is not Hermitian (defect {defect:.3e})")
    try:
        w, v = np.linalg.eigh(hermitize(h))
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK rarely fails
        raise NumericError(f"Hermitian eigensolver did not converge: {exc}") from exc
    return EigenDecomposition(w, v)


def inv_sqrt_psd(s, delta: float = 1e-8) -> np.ndarray:
    """Regularized inverse square root of a Hermitian PSD matrix.

    Eigenvalues are clipped from below at ``delta`` before inversion, so
    near-singular and slightly negative spectra are absorbed by design:
    returns V diag(1/sqrt(max(lam, delta))) V^dag.
    """
    if delta <= 0:
        raise ValueError(f"delta must be positive, got {delta}")
    w, v = herm_eig(s)
    scale = 1.0 / np.sqrt(np.maximum(w, delta))
    return hermitize((v * scale) @ v.conj().T)


def kron_product(a, b) -> np.ndarray:
    """Kronecker product A (x) B with shape (rA*rB, cA*cB)."""
    return np.kron(as_matrix(a, "kron A"), as_matrix(b, "kron B"))


def trace_product(a, b) -> complex:
    """Tr(A B) without forming the product: sum over A[m, n] * B[n, m]."""
    a = as_matrix(a, "trace_product A")
    b = as_matrix(b, "trace_product B")
    if a.shape[1] != b.shape[0] or a.shape[0] != b.shape[1]:
        raise DimensionError(
            f"trace_product needs shapes (p, q) and (q, p), got {a.shape} and {b.shape}"
        )
    return complex(np.sum(a * b.T))
