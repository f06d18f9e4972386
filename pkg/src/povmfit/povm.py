"""POVM sets: construction, validation and serialization.

A k-outcome measurement on a d-dimensional system is a set of k Hermitian
positive semidefinite d x d effects that sum to the identity. Constructors
cover every measurement scenario used by the benchmarks: random full-rank
sets, Pauli projectors, photon detection and photon counting.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError
from .linalg import hermitize, inv_sqrt_psd

# Rows are the eigenvectors of the single-qubit Pauli operators, +1 first.
_PAULI_EIGENVECTORS = {
    "X": np.array([[1, 1], [1, -1]], dtype=np.complex128) / np.sqrt(2.0),
    "Y": np.array([[1, 1j], [1, -1j]], dtype=np.complex128) / np.sqrt(2.0),
    "Z": np.array([[1, 0], [0, 1]], dtype=np.complex128),
}


@dataclass
class PovmSet:
    """Ordered set of measurement effects, stored as a (k, d, d) array."""

    dim: int
    elements: np.ndarray
    label: str = ""

    def __post_init__(self):
        self.elements = np.asarray(self.elements, dtype=np.complex128)
        if self.elements.ndim != 3 or self.elements.shape[1:] != (self.dim, self.dim):
            raise DimensionError(
                f"elements must have shape (k, {self.dim}, {self.dim}), "
                f"got {self.elements.shape}"
            )
        if not np.all(np.isfinite(self.elements)):
            raise ValueError("POVM elements contain non-finite entries")

    @property
    def n_outcomes(self) -> int:
        return self.elements.shape[0]

    def __iter__(self):
        return iter(self.elements)

    def to_json_dict(self) -> dict:
        return _matrices_to_json(self.dim, self.elements)

    @classmethod
    def from_json_dict(cls, data: dict, label: str = "") -> "PovmSet":
        dim, mats = _matrices_from_json(data)
        return cls(dim=dim, elements=mats, label=label)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh)

    @classmethod
    def load(cls, path, label: str = "") -> "PovmSet":
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh), label=label)


@dataclass
class ValidityReport:
    """Worst-case defects of a candidate POVM set at a given tolerance."""

    hermiticity_defect: float
    min_eigenvalue: float
    completeness_defect: float
    tol: float
    is_valid: bool = field(init=False)

    def __post_init__(self):
        self.is_valid = (
            self.hermiticity_defect <= self.tol
            and self.min_eigenvalue >= -self.tol
            and self.completeness_defect <= self.tol
        )


def validate_povm(povm: PovmSet, tol: float = 1e-8) -> ValidityReport:
    """Report Hermiticity, positivity and completeness defects of a POVM set."""
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    mats = povm.elements
    herm = float(np.abs(mats - mats.conj().transpose(0, 2, 1)).max())
    min_eig = float(min(np.linalg.eigvalsh(hermitize(m)).min() for m in mats))
    total = mats.sum(axis=0)
    comp = float(np.abs(total - np.eye(povm.dim)).max())
    return ValidityReport(herm, min_eig, comp, tol)


def random_povm_set(k: int, d: int, seed: int) -> PovmSet:
    """Random full-rank POVM set from normalized Ginibre factors.

    Draws k complex d x d matrices with i.i.d. standard complex Gaussian
    entries and sandwiches the Cholesky products with S^{-1/2},
    S = sum_i T_i^dag T_i, which yields a valid set by construction.
    Deterministic for a given seed.
    """
    if k < 1 or d < 1:
        raise ValueError(f"need k >= 1 and d >= 1, got k={k}, d={d}")
    rng = np.random.default_rng(seed)
    factors = (rng.standard_normal((k, d, d)) + 1j * rng.standard_normal((k, d, d)))
    factors /= np.sqrt(2.0)
    s_total = np.einsum("iab,iac->bc", factors.conj(), factors)
    m = inv_sqrt_psd(s_total, 1e-8)
    elements = np.array([hermitize(m @ (t.conj().T @ t) @ m) for t in factors])
    return PovmSet(dim=d, elements=elements, label=f"random_k{k}_d{d}")


def pauli_projector_set(pauli_string: str, n_qubits: int | None = None) -> PovmSet:
    """Rank-1 projectors onto tensor products of single-qubit Pauli eigenvectors.

    ``pauli_string`` holds one basis label from {X, Y, Z} per qubit. Outcomes
    are ordered lexicographically over per-qubit eigenvalues, +1 before -1;
    for "Z"*N this is the computational basis in the usual bit order.
    """
    pauli_string = pauli_string.upper()
    if n_qubits is not None and len(pauli_string) != n_qubits:
        raise ValueError(
            f"pauli string {pauli_string!r} does not match {n_qubits} qubits"
        )
    if not pauli_string:
        raise ValueError("pauli string must be non-empty")
    for c in pauli_string:
        if c not in _PAULI_EIGENVECTORS:
            raise ValueError(f"invalid Pauli basis label {c!r} (use X, Y or Z)")
    n = len(pauli_string)
    d = 2**n
    elements = np.empty((d, d, d), dtype=np.complex128)
    for idx in range(d):
        vec = np.array([1.0], dtype=np.complex128)
        for pos, c in enumerate(pauli_string):
            bit = (idx >> (n - 1 - pos)) & 1
            vec = np.kron(vec, _PAULI_EIGENVECTORS[c][bit])
        elements[idx] = np.outer(vec, vec.conj())
    return PovmSet(dim=d, elements=elements, label=f"pauli_{pauli_string}")


def photon_detection_povm(dim: int) -> PovmSet:
    """Two-outcome click/no-click set: vacuum projector and its complement."""
    if dim < 2:
        raise ValueError(f"photon detection needs dim >= 2, got {dim}")
    elements = np.zeros((2, dim, dim), dtype=np.complex128)
    elements[0, 0, 0] = 1.0
    elements[1] = np.eye(dim) - elements[0]
    return PovmSet(dim=dim, elements=elements, label=f"photon_detection_{dim}")


def photon_counting_povm(dim: int) -> PovmSet:
    """Rank-1 Fock projectors |n><n| in photon-number order."""
    if dim < 1:
        raise ValueError(f"photon counting needs dim >= 1, got {dim}")
    elements = np.zeros((dim, dim, dim), dtype=np.complex128)
    for i in range(dim):
        elements[i, i, i] = 1.0
    return PovmSet(dim=dim, elements=elements, label=f"photon_counting_{dim}")


def _matrices_to_json(dim: int, mats: np.ndarray) -> dict:
    """Fixed serialization schema: {dim, k, elements}, row-major [re, im] pairs."""
    elements = [
        [[float(z.real), float(z.imag)] for z in m.reshape(-1)] for m in mats
    ]
    return {"dim": int(dim), "k": int(mats.shape[0]), "elements": elements}


def _matrices_from_json(data: dict) -> tuple[int, np.ndarray]:
    dim = int(data["dim"])
    k = int(data["k"])
    raw = data["elements"]
    if len(raw) != k:
        raise ValueError(f"element count {len(raw)} does not match k={k}")
    mats = np.empty((k, dim, dim), dtype=np.complex128)
    for i, flat in enumerate(raw):
        if len(flat) != dim * dim:
            raise DimensionError(
                f"element {i} has {len(flat)} entries, expected {dim * dim}"
            )
        arr = np.array([complex(re, im) for re, im in flat], dtype=np.complex128)
        mats[i] = arr.reshape(dim, dim)
    return dim, mats
