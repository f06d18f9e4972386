import numpy as np
import pytest

from povmfit.errors import DimensionError
from povmfit.metrics import (
    frobenius_distance,
    hermitian_basis,
    linear_inversion_baseline,
    score_reconstruction,
    wasserstein_distance,
)
from povmfit.povm import pauli_projector_set, random_povm_set
from povmfit.probes import (
    ProbeEnsemble,
    depolarized_dual,
    dv_probe_ensemble,
    generate_dataset,
)

from conftest import ginibre


class TestFrobenius:
    def test_zero_for_equal(self, rng):
        a = ginibre(rng, (3, 3))
        assert frobenius_distance(a, a) == 0.0

    def test_orthogonal_projectors(self):
        # diag(1, -1) difference: sum of squares = 2
        p0 = np.diag([1.0, 0.0])
        p1 = np.diag([0.0, 1.0])
        assert frobenius_distance(p0, p1) == pytest.approx(2.0, abs=1e-12)

    def test_entrywise_oracle(self, rng):
        a, b = ginibre(rng, (4, 4)), ginibre(rng, (4, 4))
        expected = float(np.sum(np.abs(a - b) ** 2))
        assert abs(frobenius_distance(a, b) - expected) <= 1e-12

    def test_symmetric(self, rng):
        a, b = ginibre(rng, (3, 3)), ginibre(rng, (3, 3))
        assert frobenius_distance(a, b) == pytest.approx(frobenius_distance(b, a), abs=1e-12)

    def test_positive_unless_equal(self, rng):
        a = ginibre(rng, (3, 3))
        b = a.copy()
        b[0, 0] += 1e-5
        assert frobenius_distance(a, b) > 0.0

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            frobenius_distance(np.eye(2), np.eye(3))


class TestWasserstein:
    def test_identical(self):
        p = np.array([0.2, 0.3, 0.5])
        assert wasserstein_distance(p, p) == 0.0

    def test_two_outcome_swap(self):
        assert wasserstein_distance(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == pytest.approx(
            1.0, abs=1e-12
        )

    def test_three_outcome_shift(self):
        # mass moved two steps: |1-0| + |1-0| = 2
        got = wasserstein_distance(np.array([1.0, 0.0, 0.0]), np.array([0.0, 0.0, 1.0]))
        assert got == pytest.approx(2.0, abs=1e-12)

    def test_triangle_inequality(self, rng):
        for _ in range(20):
            p = rng.dirichlet(np.ones(6))
            q = rng.dirichlet(np.ones(6))
            r = rng.dirichlet(np.ones(6))
            dpq = wasserstein_distance(p, q)
            dqr = wasserstein_distance(q, r)
            dpr = wasserstein_distance(p, r)
            assert dpr <= dpq + dqr + 1e-12

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            wasserstein_distance(np.array([1.0]), np.array([0.5, 0.5]))

    def test_unnormalized_rejected(self):
        with pytest.raises(ValueError):
            wasserstein_distance(np.array([0.5, 0.4]), np.array([0.5, 0.5]))
        with pytest.raises(ValueError):
            wasserstein_distance(np.array([-0.1, 1.1]), np.array([0.5, 0.5]))


class TestScoreReconstruction:
    def test_zero_for_identical(self):
        povm = pauli_projector_set("ZZ")
        probes = dv_probe_ensemble(2)
        record = score_reconstruction(povm, povm, probes)
        assert record.mean_frobenius == 0.0
        assert record.mean_wasserstein == 0.0
        assert record.frobenius.shape == (4,)
        assert record.wasserstein.shape == (16,)

    def test_depolarized_dual_closed_form(self):
        # distance to the dual is strength^2 * Avg_i Tr[(Pi - Tr(Pi) I/d)^2]
        povm = pauli_projector_set("ZZ")
        probes = dv_probe_ensemble(2)
        d = povm.dim
        for strength in (0.1, 0.5, 0.9):
            dual = depolarized_dual(povm, strength)
            record = score_reconstruction(povm, dual, probes)
            per_element = [
                np.trace(
                    (m - np.trace(m).real * np.eye(d) / d).conj().T
                    @ (m - np.trace(m).real * np.eye(d) / d)
                ).real
                for m in povm.elements
            ]
            expected = strength**2 * np.mean(per_element)
            assert record.mean_frobenius == pytest.approx(expected, rel=1e-12)

    def test_wasserstein_toy_instance(self):
        # 2-outcome, 2-probe instance enumerated by hand
        ref = pauli_projector_set("Z")
        est_elements = np.array([np.diag([0.8, 0.1]), np.diag([0.2, 0.9])], dtype=complex)
        from povmfit.povm import PovmSet

        est = PovmSet(dim=2, elements=est_elements)
        probes = ProbeEnsemble(
            dim=2,
            states=np.array([np.diag([1.0, 0.0 + 0j]), np.diag([0.0, 1.0 + 0j])]),
        )
        record = score_reconstruction(ref, est, probes)
        # probe 0: ref column (1, 0), est (0.8, 0.2): |1 - 0.8| = 0.2
        # probe 1: ref column (0, 1), est (0.1, 0.9): |0 - 0.1| = 0.1
        assert record.wasserstein == pytest.approx([0.2, 0.1], abs=1e-12)
        assert record.mean_wasserstein == pytest.approx(0.15, abs=1e-12)

    def test_dimension_guard(self):
        with pytest.raises(DimensionError):
            score_reconstruction(
                pauli_projector_set("Z"), pauli_projector_set("ZZ"), dv_probe_ensemble(1)
            )


class TestHermitianBasis:
    def test_orthonormal(self):
        basis = hermitian_basis(3)
        assert basis.shape == (9, 3, 3)
        gram = np.einsum("iab,jba->ij", basis, basis).real
        assert np.abs(gram - np.eye(9)).max() <= 1e-12

    def test_hermitian(self):
        basis = hermitian_basis(4)
        assert np.abs(basis - basis.conj().transpose(0, 2, 1)).max() == 0.0


class TestLinearInversion:
    def test_exact_recovery_one_qubit(self):
        povm = pauli_projector_set("Z")
        probes = dv_probe_ensemble(1)
        table = generate_dataset(povm, probes)
        result = linear_inversion_baseline(table, probes)
        assert not result.rank_deficient
        for got, want in zip(result.estimates, povm.elements):
            assert np.abs(got - want).max() <= 1e-10

    def test_exact_recovery_random_two_qubit(self):
        povm = random_povm_set(5, 4, seed=21)
        probes = dv_probe_ensemble(2)
        table = generate_dataset(povm, probes)
        result = linear_inversion_baseline(table, probes)
        for got, want in zip(result.estimates, povm.elements):
            assert np.abs(got - want).max() <= 1e-9

    def test_completeness_preserved_by_exact_inversion(self):
        povm = random_povm_set(3, 2, seed=8)
        probes = dv_probe_ensemble(1)
        table = generate_dataset(povm, probes)
        result = linear_inversion_baseline(table, probes)
        total = result.estimates.sum(axis=0)
        assert np.abs(total - np.eye(2)).max() <= 1e-9

    def test_rank_deficient_flagged(self):
        povm = pauli_projector_set("Z")
        probes = ProbeEnsemble(dim=2, states=np.array([np.eye(2, dtype=complex) / 2]))
        table = generate_dataset(povm, probes)
        result = linear_inversion_baseline(table, probes)
        assert result.rank_deficient
        assert result.rank < 4

    def test_condition_number_reported(self):
        povm = pauli_projector_set("Z")
        probes = dv_probe_ensemble(1)
        table = generate_dataset(povm, probes)
        result = linear_inversion_baseline(table, probes)
        assert np.isfinite(result.condition_number)
        assert result.condition_number >= 1.0
