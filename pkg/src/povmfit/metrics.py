"""Reconstruction-quality metrics and the linear-inversion baseline.

The operator metric is the squared Frobenius norm Tr[(A-B)^dag (A-B)]
(labelled ``frobenius_sq`` in reports: the benchmark convention carries no
square root). The distribution metric is the discrete Wasserstein distance
with unit spacing between outcome labels.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DimensionError
from .linalg import hermitize
from .povm import PovmSet
from .probes import ProbabilityTable, ProbeEnsemble


def frobenius_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Squared Frobenius distance Tr[(A-B)^dag (A-B)] = sum |A_mn - B_mn|^2."""
    a = np.asarray(a, dtype=np.complex128)
    b = np.asarray(b, dtype=np.complex128)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    diff = a - b
    return float(np.sum(diff.real**2 + diff.imag**2))


def wasserstein_distance(p_ref: np.ndarray, p_est: np.ndarray,
                         norm_tol: float = 1e-6) -> float:
    """Discrete Wasserstein distance between two outcome distributions.

    With outcome labels x_i = i the spacing is 1 and the distance reduces to
    the sum of absolute cumulative differences through index k-1.
    """
    p_ref = np.asarray(p_ref, dtype=np.float64)
    p_est = np.asarray(p_est, dtype=np.float64)
    if p_ref.shape != p_est.shape or p_ref.ndim != 1:
        raise DimensionError(f"need equal-length vectors, got {p_ref.shape} vs {p_est.shape}")
    for name, p in (("p_ref", p_ref), ("p_est", p_est)):
        if p.min() < -norm_tol:
            raise ValueError(f"{name} has negative entries (min {p.min():.3e})")
        if abs(p.sum() - 1.0) > norm_tol:
            raise ValueError(f"{name} does not sum to 1 (sum {p.sum():.8f})")
    cum = np.cumsum(p_ref - p_est)
    return float(np.abs(cum[:-1]).sum()) if cum.shape[0] > 1 else 0.0


@dataclass
class MetricRecord:
    """Per-element and per-probe distances with their summary statistics."""

    frobenius: np.ndarray
    wasserstein: np.ndarray

    @property
    def mean_frobenius(self) -> float:
        return float(np.mean(self.frobenius))

    @property
    def std_frobenius(self) -> float:
        return float(np.std(self.frobenius))

    @property
    def mean_wasserstein(self) -> float:
        return float(np.mean(self.wasserstein))

    @property
    def std_wasserstein(self) -> float:
        return float(np.std(self.wasserstein))

    def save_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["element_or_probe", "kind", "value"])
            for i, v in enumerate(self.frobenius):
                writer.writerow([i, "frobenius_sq", format(v, ".17g")])
            writer.writerow(["mean", "frobenius_sq", format(self.mean_frobenius, ".17g")])
            writer.writerow(["std", "frobenius_sq", format(self.std_frobenius, ".17g")])
            for j, v in enumerate(self.wasserstein):
                writer.writerow([j, "wasserstein", format(v, ".17g")])
            writer.writerow(["mean", "wasserstein", format(self.mean_wasserstein, ".17g")])
            writer.writerow(["std", "wasserstein", format(self.std_wasserstein, ".17g")])


def score_reconstruction(ref: PovmSet, est: PovmSet, probes: ProbeEnsemble,
                         ref_columns: np.ndarray | None = None) -> MetricRecord:
    """Score an estimate against the reference POVM, index-aligned.

    No outcome permutation matching is attempted: with known probes the
    outcome labels are fixed by the data rows. ``ref_columns`` may carry
    precomputed Born columns of the reference to avoid recomputation.
    """
    if ref.dim != est.dim or ref.n_outcomes != est.n_outcomes:
        raise DimensionError(
            f"POVM shapes differ: ({ref.n_outcomes}, {ref.dim}) vs "
            f"({est.n_outcomes}, {est.dim})"
        )
    if probes.dim != ref.dim:
        raise DimensionError(f"probe dimension {probes.dim} does not match POVM {ref.dim}")
    diff = ref.elements - est.elements
    frob = np.einsum("iab,iab->i", diff.conj(), diff).real
    if ref_columns is None:
        ref_columns = kernels.born_matrix(
            np.ascontiguousarray(ref.elements), np.ascontiguousarray(probes.states)
        )
    est_columns = kernels.born_matrix(
        np.ascontiguousarray(est.elements), np.ascontiguousarray(probes.states)
    )
    cum = np.cumsum(ref_columns - est_columns, axis=0)
    wass = np.abs(cum[:-1]).sum(axis=0) if cum.shape[0] > 1 else np.zeros(cum.shape[1])
    return MetricRecord(frobenius=frob, wasserstein=wass)


def hermitian_basis(d: int) -> np.ndarray:
    """Orthonormal (Hilbert-Schmidt) basis of d x d Hermitian matrices."""
    basis = np.zeros((d * d, d, d), dtype=np.complex128)
    idx = 0
    for a in range(d):
        basis[idx, a, a] = 1.0
        idx += 1
    inv_sqrt2 = 1.0 / np.sqrt(2.0)
    for a in range(d):
        for b in range(a + 1, d):
            basis[idx, a, b] = inv_sqrt2
            basis[idx, b, a] = inv_sqrt2
            idx += 1
            basis[idx, a, b] = -1j * inv_sqrt2
            basis[idx, b, a] = 1j * inv_sqrt2
            idx += 1
    return basis


@dataclass
class LinearInversionResult:
    """Unconstrained per-outcome least-squares estimates and diagnostics."""

    estimates: np.ndarray
    condition_number: float
    rank: int
    rank_deficient: bool
    residual_norms: np.ndarray


def linear_inversion_baseline(table: ProbabilityTable,
                              probes: ProbeEnsemble) -> LinearInversionResult:
    """Per-outcome least-squares inversion of p[i, j] = Tr(Pi_i rho_j).

    Each outcome is solved independently over Hermitian operators expressed in
    an orthonormal Hermitian basis. Informationally complete probes give the
    exact minimizer; otherwise the minimum-norm solution is returned and the
    result is flagged rank-deficient. The sensing-matrix condition number is
    reported either way.
    """
    if table.n_probes != probes.n_states:
        raise DimensionError(
            f"table has {table.n_probes} probe columns but ensemble holds "
            f"{probes.n_states} states"
        )
    d = probes.dim
    basis = hermitian_basis(d)
    sensing = kernels.born_matrix(
        np.ascontiguousarray(basis), np.ascontiguousarray(probes.states)
    ).T  # (J, d^2): rows are probes, columns basis coefficients
    coeffs, _, rank, singular = np.linalg.lstsq(sensing, table.values.T, rcond=None)
    cond = float(singular[0] / singular[-1]) if singular[-1] > 0 else np.inf
    estimates = np.einsum("ai,abc->ibc", coeffs, basis)
    estimates = np.array([hermitize(m) for m in estimates])
    residuals = np.linalg.norm(sensing @ coeffs - table.values.T, axis=0)
    return LinearInversionResult(
        estimates=estimates,
        condition_number=cond,
        rank=int(rank),
        rank_deficient=bool(rank < d * d),
        residual_norms=residuals,
    )
