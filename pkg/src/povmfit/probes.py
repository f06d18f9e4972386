"""Probe-state ensembles and synthetic measurement data.

Covers tensor-product qubit probes, truncated coherent-state grids, the
depolarizing noise channel and exact Born-rule probability tables.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from . import kernels
from .errors import DimensionError
from .povm import PovmSet, _matrices_from_json, _matrices_to_json

# Single-qubit probe states |0><0|, |1><1|, |+><+|, |+i><+i|.
_QUBIT_PROBES = [
    np.array([[1, 0], [0, 0]], dtype=np.complex128),
    np.array([[0, 0], [0, 1]], dtype=np.complex128),
    np.array([[1, 1], [1, 1]], dtype=np.complex128) / 2.0,
    np.array([[1, -1j], [1j, 1]], dtype=np.complex128) / 2.0,
]


@dataclass
class ProbeEnsemble:
    """Ordered collection of probe density matrices, stored as (J, d, d)."""

    dim: int
    states: np.ndarray
    label: str = ""

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=np.complex128)
        if self.states.ndim != 3 or self.states.shape[1:] != (self.dim, self.dim):
            raise DimensionError(
                f"states must have shape (J, {self.dim}, {self.dim}), "
                f"got {self.states.shape}"
            )

    @property
    def n_states(self) -> int:
        return self.states.shape[0]

    def to_json_dict(self) -> dict:
        return _matrices_to_json(self.dim, self.states)

    @classmethod
    def from_json_dict(cls, data: dict, label: str = "") -> "ProbeEnsemble":
        dim, mats = _matrices_from_json(data)
        return cls(dim=dim, states=mats, label=label)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh)

    @classmethod
    def load(cls, path, label: str = "") -> "ProbeEnsemble":
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh), label=label)


@dataclass
class ProbabilityTable:
    """Outcome-by-probe probability matrix p[i, j] with i-major CSV layout."""

    values: np.ndarray
    label: str = ""

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise DimensionError(f"values must be 2-D, got shape {self.values.shape}")

    @property
    def n_outcomes(self) -> int:
        return self.values.shape[0]

    @property
    def n_probes(self) -> int:
        return self.values.shape[1]

    def save_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["outcome", "probe", "probability"])
            for i in range(self.n_outcomes):
                for j in range(self.n_probes):
                    writer.writerow([i, j, format(self.values[i, j], ".17g")])

    @classmethod
    def load_csv(cls, path, label: str = "") -> "ProbabilityTable":
        rows = []
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            for rec in reader:
                rows.append(
                    (int(rec["outcome"]), int(rec["probe"]), float(rec["probability"]))
                )
        if not rows:
            raise ValueError(f"no probability rows in {path}")
        k = max(r[0] for r in rows) + 1
        j = max(r[1] for r in rows) + 1
        values = np.zeros((k, j))
        for i, jj, p in rows:
            values[i, jj] = p
        return cls(values=values, label=label)


@dataclass
class NoiseSpec:
    """Probe-noise model; ``strength`` is the depolarizing mixing weight."""

    kind: str = "none"
    strength: float = 0.0

    def __post_init__(self):
        if self.kind not in ("none", "depolarizing"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if not 0.0 <= self.strength <= 1.0:
            raise ValueError(f"noise strength must lie in [0, 1], got {self.strength}")


def dv_probe_ensemble(n_qubits: int) -> ProbeEnsemble:
    """All 4^N tensor products of the four single-qubit probe states.

    Ordering is lexicographic over per-qubit indices with the first qubit as
    the most significant digit.
    """
    if n_qubits < 1:
        raise ValueError(f"need n_qubits >= 1, got {n_qubits}")
    d = 2**n_qubits
    count = 4**n_qubits
    states = np.empty((count, d, d), dtype=np.complex128)
    for idx in range(count):
        digits = []
        x = idx
        for _ in range(n_qubits):
            digits.append(x % 4)
            x //= 4
        digits.reverse()
        rho = np.array([[1.0]], dtype=np.complex128)
        for dig in digits:
            rho = np.kron(rho, _QUBIT_PROBES[dig])
        states[idx] = rho
    return ProbeEnsemble(dim=d, states=states, label=f"dv_{n_qubits}q")


def coherent_state_vector(alpha: complex, dim: int) -> np.ndarray:
    """Truncated coherent state, renormalized to unit norm.

    Amplitudes are evaluated in log space so that large |alpha| (far beyond
    the cutoff) neither under- nor overflows.
    """
    if dim < 1:
        raise ValueError(f"need dim >= 1, got {dim}")
    vec = np.zeros(dim, dtype=np.complex128)
    r = abs(alpha)
    if r == 0.0:
        vec[0] = 1.0
        return vec
    n = np.arange(dim)
    log_mag = -0.5 * r * r + n * np.log(r) - 0.5 * gammaln(n + 1.0)
    mag = np.exp(log_mag - log_mag.max())
    vec[:] = mag * np.exp(1j * n * np.angle(alpha))
    return vec / np.linalg.norm(vec)


def coherent_probe_grid(alpha_max: float, points_per_axis: int, dim: int) -> ProbeEnsemble:
    """Coherent probes on a square grid of amplitudes alpha = x + i y.

    Both axes take ``points_per_axis`` equally spaced values over
    [-alpha_max, alpha_max]; states are emitted row-major over (x, y).
    """
    if points_per_axis < 1:
        raise ValueError(f"need points_per_axis >= 1, got {points_per_axis}")
    axis = (
        np.linspace(-alpha_max, alpha_max, points_per_axis)
        if points_per_axis > 1
        else np.array([0.0])
    )
    states = np.empty((points_per_axis**2, dim, dim), dtype=np.complex128)
    idx = 0
    for x in axis:
        for y in axis:
            vec = coherent_state_vector(x + 1j * y, dim)
            states[idx] = np.outer(vec, vec.conj())
            idx += 1
    return ProbeEnsemble(
        dim=dim, states=states, label=f"coherent_a{alpha_max}_p{points_per_axis}"
    )


def depolarize(rho: np.ndarray, strength: float) -> np.ndarray:
    """Depolarizing channel rho -> (1 - strength) rho + strength I/d."""
    if not 0.0 <= strength <= 1.0:
        raise ValueError(f"strength must lie in [0, 1], got {strength}")
    rho = np.asarray(rho, dtype=np.complex128)
    d = rho.shape[-1]
    eye = np.eye(d, dtype=np.complex128)
    return (1.0 - strength) * rho + (strength / d) * eye


def depolarized_dual(povm: PovmSet, strength: float) -> PovmSet:
    """The POVM whose clean-probe data equals the noisy-probe data.

    For the unital depolarizing channel, Tr(Pi rho~) = Tr(Pi~ rho) with
    Pi~ = (1 - strength) Pi + strength Tr(Pi) I/d.
    """
    eye = np.eye(povm.dim, dtype=np.complex128)
    elements = np.array(
        [
            (1.0 - strength) * m + strength * (np.trace(m).real / povm.dim) * eye
            for m in povm.elements
        ]
    )
    return PovmSet(dim=povm.dim, elements=elements, label=f"{povm.label}_dual")


def generate_dataset(
    povm: PovmSet, probes: ProbeEnsemble, noise: NoiseSpec | None = None
) -> ProbabilityTable:
    """Exact Born-rule probability table p[i, j] = Tr(Pi_i rho_j).

    With depolarizing noise configured, probabilities are computed on the
    depolarized probes; no finite-shot sampling is applied.
    """
    if povm.dim != probes.dim:
        raise DimensionError(
            f"POVM dimension {povm.dim} does not match probe dimension {probes.dim}"
        )
    states = probes.states
    if noise is not None and noise.kind == "depolarizing" and noise.strength > 0.0:
        states = depolarize(states, noise.strength)
    values = kernels.born_matrix(
        np.ascontiguousarray(povm.elements), np.ascontiguousarray(states)
    )
    return ProbabilityTable(values=values, label=f"{povm.label}|{probes.label}")
