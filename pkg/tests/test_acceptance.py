"""Acceptance suite.

Each test runs one numbered acceptance criterion at its pinned tolerance and
prints a single PASS/FAIL line (run with ``pytest tests/test_acceptance.py -v -s``
to see the lines for passing tests too). Wall-clock numbers are printed for
information only; no test gates on absolute seconds.
"""

import json
import time

import numpy as np
import pytest

from povmfit.cli import main as cli_main
from povmfit.engine import (
    HonestFactors,
    OptimConfig,
    StiefelPoint,
    fit,
    grad_eval,
    povm_from_params,
    stiefel_retract_step,
)
from povmfit.metrics import (
    frobenius_distance,
    linear_inversion_baseline,
    score_reconstruction,
    wasserstein_distance,
)
from povmfit.povm import (
    pauli_projector_set,
    photon_counting_povm,
    photon_detection_povm,
    random_povm_set,
    validate_povm,
)
from povmfit.probes import (
    NoiseSpec,
    coherent_probe_grid,
    depolarized_dual,
    dv_probe_ensemble,
    generate_dataset,
)

from conftest import ginibre
from test_engine_grad import fd_gradient, grad_as_stack, make_batch


def report(cid: str, passed: bool, detail: str) -> None:
    print(f"[{'PASS' if passed else 'FAIL'}] acceptance {cid}: {detail}")


# ---------------------------------------------------------------------------
# shared expensive runs
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def computational_basis_runs():
    """HONEST-MLE and SM-MSE on the 4-qubit computational-basis scenario,
    1500 iterations each with the defaults (m = 50, n = k)."""
    povm = pauli_projector_set("Z" * 4)
    probes = dv_probe_ensemble(4)
    table = generate_dataset(povm, probes)
    out = {}
    for parameterization, loss in (("HONEST", "MLE"), ("SM", "MSE")):
        cfg = OptimConfig(
            parameterization=parameterization, loss=loss,
            state_batch=50, max_iters=1500, seed=0,
        )
        t0 = time.perf_counter()
        est, trace = fit(table, probes, cfg, reference=povm, metric_every=25)
        elapsed = time.perf_counter() - t0
        record = score_reconstruction(povm, est, probes)
        out[f"{parameterization}-{loss}"] = (record, trace, elapsed)
    return out


# ---------------------------------------------------------------------------
# criteria
# ---------------------------------------------------------------------------

def test_a01_gradient_oracle():
    """Gradients match central finite differences of the loss on >= 20
    random instances (k, d <= 4, both losses, both parameterizations)."""
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst = 0.0
    count = 0
    for parameterization in ("SM", "HONEST"):
        for loss in ("MSE", "MLE"):
            for _ in range(5):
                k = int(rng.integers(2, 5))
                d = int(rng.integers(2, 5))
                m = int(rng.integers(2, 5))
                cfg = OptimConfig(parameterization=parameterization, loss=loss)
                params = (
                    StiefelPoint.random(k, d, rng)
                    if parameterization == "SM"
                    else HonestFactors.random(k, d, rng)
                )
                batch = make_batch(rng, k, m, d)
                fd = fd_gradient(params, batch, cfg)
                got = grad_as_stack(params, grad_eval(params, batch, cfg))
                rel = np.abs(got - fd).max() / max(np.abs(fd).max(), 1e-12)
                worst = max(worst, rel)
                count += 1
    elapsed = time.perf_counter() - t0
    passed = worst <= 1e-5
    report("1", passed,
           f"{count} instances, worst relative error {worst:.3e} "
           f"(tolerance 1e-5), {elapsed:.1f}s")
    assert passed


def test_a02_manifold_preservation():
    """1000 retraction steps from a random start keep the orthonormality
    defect within 1e-8."""
    rng = np.random.default_rng(7)
    point = StiefelPoint.random(8, 4, rng)
    worst = 0.0
    for _ in range(1000):
        grad = ginibre(rng, point.stacked.shape)
        point = stiefel_retract_step(point, grad, 0.05)
        worst = max(worst, point.manifold_defect())
    passed = worst <= 1e-8
    report("2", passed, f"max defect over 1000 steps {worst:.3e} (tolerance 1e-8)")
    assert passed


def test_a03_normalized_path_validity():
    """Every iterate of a 500-step normalized-path fit (k=8, d=4) emits a
    POVM that validates at 1e-7."""
    povm = random_povm_set(8, 4, seed=99)
    probes = dv_probe_ensemble(2)
    table = generate_dataset(povm, probes)
    cfg = OptimConfig(parameterization="HONEST", loss="MLE",
                      state_batch=16, max_iters=500, seed=0)
    failures = []

    def check(it, params):
        rep = validate_povm(povm_from_params(params, cfg.clip_delta), 1e-7)
        if not rep.is_valid:
            failures.append(it)

    fit(table, probes, cfg, callback=check)
    passed = not failures
    report("3", passed,
           "all 500 iterates valid at 1e-7" if passed
           else f"invalid iterates: {failures[:5]}...")
    assert passed


def test_a04_computational_basis_reconstruction(computational_basis_runs):
    """4-qubit computational basis, HONEST-MLE, m=50, 1500 iterations:
    mean frobenius_sq <= 1e-8 and mean Wasserstein <= 1e-5."""
    record, _, elapsed = computational_basis_runs["HONEST-MLE"]
    passed = record.mean_frobenius <= 1e-8 and record.mean_wasserstein <= 1e-5
    report("4", passed,
           f"mean frobenius_sq {record.mean_frobenius:.3e} (<= 1e-8), "
           f"mean wasserstein {record.mean_wasserstein:.3e} (<= 1e-5), "
           f"{elapsed:.1f}s")
    assert passed


def test_a05_method_ordering(computational_basis_runs):
    """On the same scenario and budget, HONEST-MLE beats SM-MSE and SM-MSE
    plateaus above 1e-5."""
    honest, _, _ = computational_basis_runs["HONEST-MLE"]
    sm, _, _ = computational_basis_runs["SM-MSE"]
    passed = (honest.mean_frobenius < sm.mean_frobenius) and (sm.mean_frobenius > 1e-5)
    report("5", passed,
           f"HONEST-MLE {honest.mean_frobenius:.3e} < SM-MSE {sm.mean_frobenius:.3e}, "
           f"SM-MSE above 1e-5")
    assert passed


def test_a06_photon_detection():
    """Photon detection (dim=32, alpha_max=5, 32x32 grid), HONEST-MLE,
    1000 iterations: mean frobenius_sq <= 1e-5."""
    povm = photon_detection_povm(32)
    probes = coherent_probe_grid(5.0, 32, 32)
    table = generate_dataset(povm, probes)
    cfg = OptimConfig(parameterization="HONEST", loss="MLE",
                      state_batch=50, max_iters=1000, seed=0)
    t0 = time.perf_counter()
    est, _ = fit(table, probes, cfg, reference=povm, metric_every=100)
    elapsed = time.perf_counter() - t0
    record = score_reconstruction(povm, est, probes)
    passed = record.mean_frobenius <= 1e-5
    report("6", passed,
           f"mean frobenius_sq {record.mean_frobenius:.3e} (<= 1e-5), {elapsed:.1f}s")
    assert passed


def test_a07_photon_counting():
    """Photon counting (dim=32, alpha_max=9), HONEST-MLE, 10000 iterations:
    final mean frobenius_sq <= 1e-2 with a decreasing average trend over the
    last 2000 iterations."""
    povm = photon_counting_povm(32)
    probes = coherent_probe_grid(9.0, 32, 32)
    table = generate_dataset(povm, probes)
    cfg = OptimConfig(parameterization="HONEST", loss="MLE",
                      state_batch=50, max_iters=10000, seed=0)
    t0 = time.perf_counter()
    est, trace = fit(table, probes, cfg, reference=povm, metric_every=50)
    elapsed = time.perf_counter() - t0
    record = score_reconstruction(povm, est, probes)

    window = [
        (i, v)
        for i, v in zip(trace.iterations, trace.avg_frobenius)
        if v is not None and i >= cfg.max_iters - 2000
    ]
    half = len(window) // 2
    first = float(np.mean([v for _, v in window[:half]]))
    second = float(np.mean([v for _, v in window[half:]]))
    final_ok = record.mean_frobenius <= 1e-2
    trend_ok = second <= first
    passed = final_ok and trend_ok
    report("7", passed,
           f"final mean frobenius_sq {record.mean_frobenius:.3e} (<= 1e-2), "
           f"last-2000 trend {first:.3e} -> {second:.3e} "
           f"({'down' if trend_ok else 'up'}), {elapsed:.1f}s")
    assert passed


def test_a08_agreement_with_linear_inversion():
    """One-qubit noiseless IC data: the SGD fit (HONEST-MLE, 2000 iterations)
    and the linear-inversion baseline agree with the truth and each other,
    per-element frobenius_sq <= 1e-6."""
    povm = random_povm_set(2, 2, seed=12)
    probes = dv_probe_ensemble(1)
    table = generate_dataset(povm, probes)
    cfg = OptimConfig(parameterization="HONEST", loss="MLE",
                      state_batch=4, max_iters=2000, seed=0)
    est, _ = fit(table, probes, cfg)
    inversion = linear_inversion_baseline(table, probes)
    worst = 0.0
    for i in range(povm.n_outcomes):
        worst = max(
            worst,
            frobenius_distance(est.elements[i], povm.elements[i]),
            frobenius_distance(inversion.estimates[i], povm.elements[i]),
            frobenius_distance(est.elements[i], inversion.estimates[i]),
        )
    passed = worst <= 1e-6
    report("8", passed, f"worst per-element frobenius_sq {worst:.3e} (<= 1e-6)")
    assert passed


def test_a09_depolarizing_self_consistency():
    """Fits on depolarized 2-qubit data recover the noise-dual POVM within
    per-element frobenius_sq <= 1e-6, and the error against the ideal POVM
    matches the closed-form quadratic-in-strength expression within 10%."""
    povm = pauli_projector_set("ZZ")
    probes = dv_probe_ensemble(2)
    d = povm.dim
    per_element_spread = np.mean([
        np.trace(
            (m - np.trace(m).real * np.eye(d) / d).conj().T
            @ (m - np.trace(m).real * np.eye(d) / d)
        ).real
        for m in povm.elements
    ])
    all_ok = True
    details = []
    for strength in (0.1, 0.5, 0.9):
        table = generate_dataset(povm, probes, NoiseSpec("depolarizing", strength))
        cfg = OptimConfig(parameterization="HONEST", loss="MLE",
                          state_batch=16, max_iters=2000, seed=0)
        est, _ = fit(table, probes, cfg)
        dual = depolarized_dual(povm, strength)
        worst_dual = max(
            frobenius_distance(est.elements[i], dual.elements[i])
            for i in range(povm.n_outcomes)
        )
        ideal_err = score_reconstruction(povm, est, probes).mean_frobenius
        expected = strength**2 * per_element_spread
        ratio = ideal_err / expected
        ok = worst_dual <= 1e-6 and abs(ratio - 1.0) <= 0.10
        all_ok &= ok
        details.append(
            f"strength {strength}: dual err {worst_dual:.2e}, "
            f"ideal err ratio {ratio:.4f}"
        )
    report("9", all_ok, "; ".join(details))
    assert all_ok


def test_a10_metric_hand_values():
    """Hand-derived metric examples reproduce exactly (tolerance 1e-12)."""
    checks = [
        (frobenius_distance(np.diag([1.0, 0.0]), np.diag([0.0, 1.0])), 2.0),
        (frobenius_distance(np.eye(3), np.eye(3)), 0.0),
        (wasserstein_distance(np.array([1.0, 0.0]), np.array([0.0, 1.0])), 1.0),
        (wasserstein_distance(np.array([1.0, 0.0, 0.0]), np.array([0.0, 0.0, 1.0])), 2.0),
        (wasserstein_distance(np.array([0.3, 0.7]), np.array([0.3, 0.7])), 0.0),
    ]
    worst = max(abs(got - want) for got, want in checks)
    passed = worst <= 1e-12
    report("10", passed, f"{len(checks)} hand values, worst deviation {worst:.1e}")
    assert passed


def test_a11_deterministic_traces(tmp_path):
    """Two benchmark runs with identical seeds in deterministic mode produce
    byte-identical trace CSVs."""
    config = {
        "scenario": "computational_basis",
        "n_qubits": 2,
        "optimizer": {
            "parameterization": "HONEST", "loss": "MLE",
            "max_iters": 120, "state_batch": 16,
        },
        "repeats": 2,
        "base_seed": 3,
        "metric_every": 20,
    }
    blobs = []
    for name in ("run_a", "run_b"):
        cfg_path = tmp_path / f"{name}.json"
        cfg = dict(config, out_prefix=str(tmp_path / name))
        cfg_path.write_text(json.dumps(cfg))
        code = cli_main(["benchmark", "--config", str(cfg_path), "--deterministic"])
        assert code == 0
        blobs.append([
            (tmp_path / f"{name}_rep{r}_trace.csv").read_bytes() for r in range(2)
        ])
    passed = blobs[0] == blobs[1]
    report("11", passed, "trace CSVs byte-identical across repeated runs")
    assert passed
