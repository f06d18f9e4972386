"""Reproducible end-to-end experiment pipelines.

A scenario config describes the measurement to reconstruct, the probe
ensemble, optional probe noise and the optimizer; ``run_experiment`` executes
seeded repeats of build -> simulate -> fit -> score and persists traces,
fitted POVMs, metric tables and a summary report.
"""

from __future__ import annotations

import dataclasses
import json
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .engine import OptimConfig, TraceLog, fit
from .errors import ConfigError
from .metrics import MetricRecord, score_reconstruction
from .povm import (
    PovmSet,
    pauli_projector_set,
    photon_counting_povm,
    photon_detection_povm,
    random_povm_set,
)
from .probes import (
    NoiseSpec,
    ProbeEnsemble,
    coherent_probe_grid,
    dv_probe_ensemble,
    generate_dataset,
)

SCENARIOS = (
    "random_povm",
    "pauli_projective",
    "computational_basis",
    "photon_detection",
    "photon_counting",
)

SUMMARY_COLUMNS = (
    "scenario", "param", "method", "repeat",
    "mean_frob", "std_frob", "mean_wass", "std_wass", "iters", "seconds",
)


@dataclass
class ExperimentConfig:
    """One benchmark scenario plus its optimizer and output settings."""

    scenario: str
    n_qubits: int = 1
    k: int = 4
    dim: int = 32
    alpha_max: float | None = None
    grid_points: int = 32
    pauli_string: str | None = None
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    optimizer: OptimConfig = field(default_factory=OptimConfig)
    repeats: int = 1
    base_seed: int = 0
    out_prefix: str = "povmfit_run"
    deterministic: bool = False
    metric_every: int = 10

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(
                f"unknown scenario {self.scenario!r}; choose from {', '.join(SCENARIOS)}"
            )
        if self.repeats < 1:
            raise ConfigError(f"repeats must be >= 1, got {self.repeats}")
        if self.scenario in ("random_povm", "pauli_projective", "computational_basis"):
            if self.n_qubits < 1:
                raise ConfigError(f"n_qubits must be >= 1, got {self.n_qubits}")
        if self.scenario == "random_povm" and self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if self.scenario in ("photon_detection", "photon_counting"):
            if self.dim < 2:
                raise ConfigError(f"dim must be >= 2, got {self.dim}")
            if self.grid_points < 1:
                raise ConfigError(f"grid_points must be >= 1, got {self.grid_points}")

    @property
    def resolved_alpha_max(self) -> float:
        if self.alpha_max is not None:
            return self.alpha_max
        return 9.0 if self.scenario == "photon_counting" else 5.0

    @property
    def method(self) -> str:
        return f"{self.optimizer.parameterization}-{self.optimizer.loss}"

    def scenario_param(self) -> str:
        if self.scenario == "random_povm":
            return f"N={self.n_qubits},k={self.k}"
        if self.scenario in ("pauli_projective", "computational_basis"):
            return f"N={self.n_qubits}"
        return f"dim={self.dim},alpha={self.resolved_alpha_max:g}"

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        try:
            if "noise" in data and not isinstance(data["noise"], NoiseSpec):
                data["noise"] = NoiseSpec(**data["noise"])
            if "optimizer" in data and not isinstance(data["optimizer"], OptimConfig):
                data["optimizer"] = OptimConfig(**data["optimizer"])
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(f"bad experiment config: {exc}") from exc

    @classmethod
    def from_json_file(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        raw.pop("sweep", None)
        return cls.from_dict(raw)


def build_scenario(config: ExperimentConfig, seed: int) -> tuple[PovmSet, ProbeEnsemble]:
    """Construct the ground-truth POVM and probe ensemble for one repeat."""
    s = config.scenario
    if s == "random_povm":
        d = 2**config.n_qubits
        return random_povm_set(config.k, d, seed), dv_probe_ensemble(config.n_qubits)
    if s == "pauli_projective":
        string = config.pauli_string
        if string is None:
            rng = np.random.default_rng(seed)
            string = "".join(rng.choice(list("XYZ"), size=config.n_qubits))
        return pauli_projector_set(string, config.n_qubits), dv_probe_ensemble(config.n_qubits)
    if s == "computational_basis":
        return (
            pauli_projector_set("Z" * config.n_qubits, config.n_qubits),
            dv_probe_ensemble(config.n_qubits),
        )
    probes = coherent_probe_grid(config.resolved_alpha_max, config.grid_points, config.dim)
    if s == "photon_detection":
        return photon_detection_povm(config.dim), probes
    return photon_counting_povm(config.dim), probes


@dataclass
class RunReport:
    """Aggregated results of all repeats of one experiment."""

    config: ExperimentConfig
    rows: list
    trace_paths: list
    povm_paths: list
    metric_paths: list
    seeds: list
    total_seconds: float


def _ensure_parent(prefix: str) -> None:
    parent = os.path.dirname(prefix)
    if parent:
        os.makedirs(parent, exist_ok=True)


def run_experiment(config: ExperimentConfig) -> RunReport:
    """Execute every repeat of the configured pipeline and persist artifacts.

    Repeat r derives its seed as ``base_seed + r`` and that seed drives the
    scenario construction (random POVMs, sampled Pauli strings) as well as
    the optimizer; outputs land under ``out_prefix``.
    """
    _ensure_parent(config.out_prefix)
    rows, trace_paths, povm_paths, metric_paths, seeds = [], [], [], [], []
    started = time.perf_counter()
    for r in range(config.repeats):
        seed = config.base_seed + r
        seeds.append(seed)
        truth, probes = build_scenario(config, seed)
        table = generate_dataset(truth, probes, config.noise)
        optimizer = dataclasses.replace(config.optimizer, seed=seed)
        t0 = time.perf_counter()
        est, trace = fit(
            table, probes, optimizer,
            reference=truth, metric_every=config.metric_every,
        )
        repeat_seconds = time.perf_counter() - t0
        record = score_reconstruction(truth, est, probes)

        trace_path = f"{config.out_prefix}_rep{r}_trace.csv"
        trace.save_csv(trace_path, deterministic=config.deterministic)
        povm_path = f"{config.out_prefix}_rep{r}_povm.json"
        est.save(povm_path)
        metric_path = f"{config.out_prefix}_rep{r}_metrics.csv"
        record.save_csv(metric_path)
        trace_paths.append(trace_path)
        povm_paths.append(povm_path)
        metric_paths.append(metric_path)

        rows.append({
            "scenario": config.scenario,
            "param": config.scenario_param(),
            "method": config.method,
            "repeat": r,
            "mean_frob": record.mean_frobenius,
            "std_frob": record.std_frobenius,
            "mean_wass": record.mean_wasserstein,
            "std_wass": record.std_wasserstein,
            "iters": config.optimizer.max_iters,
            "seconds": repeat_seconds,
        })
    return RunReport(
        config=config,
        rows=rows,
        trace_paths=trace_paths,
        povm_paths=povm_paths,
        metric_paths=metric_paths,
        seeds=seeds,
        total_seconds=time.perf_counter() - started,
    )


def _format_cell(column: str, value, deterministic: bool) -> str:
    if column == "seconds":
        return "" if deterministic else format(value, ".3f")
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def write_summary_csv(rows: list, path: str, deterministic: bool = False) -> None:
    """Summary table with a stable column order and 17-digit floats."""
    with open(path, "w", newline="") as fh:
        fh.write(",".join(SUMMARY_COLUMNS) + "\n")
        for row in rows:
            fh.write(
                ",".join(_format_cell(c, row[c], deterministic) for c in SUMMARY_COLUMNS)
                + "\n"
            )


def run_sweep(base: ExperimentConfig, sweep: dict) -> tuple[list, list]:
    """Grid sweep over qubit number, element count, noise strength and method.

    ``sweep`` maps any of ``n_qubits``, ``k``, ``strength`` (depolarizing
    noise weight) and ``methods`` (strings like "HONEST-MLE") to value lists;
    unspecified axes keep the base config's value. Returns the concatenated
    summary rows and the per-combination reports.
    """
    known = {"n_qubits", "k", "strength", "methods"}
    unknown = set(sweep) - known
    if unknown:
        raise ConfigError(f"unknown sweep axes: {', '.join(sorted(unknown))}")
    n_values = sweep.get("n_qubits", [base.n_qubits])
    k_values = sweep.get("k", [base.k])
    strengths = sweep.get("strength", [base.noise.strength])
    methods = sweep.get("methods", [base.method])

    rows, reports = [], []
    for n in n_values:
        for k in k_values:
            for strength in strengths:
                for method in methods:
                    try:
                        parameterization, loss = method.split("-")
                    except ValueError:
                        raise ConfigError(
                            f"method {method!r} must look like 'HONEST-MLE'"
                        ) from None
                    noise = NoiseSpec(
                        kind="depolarizing" if strength > 0 else "none",
                        strength=float(strength),
                    )
                    optimizer = dataclasses.replace(
                        base.optimizer, parameterization=parameterization, loss=loss
                    )
                    tag = f"N{n}_k{k}_lam{strength:g}_{method}"
                    combo = dataclasses.replace(
                        base,
                        n_qubits=int(n),
                        k=int(k),
                        noise=noise,
                        optimizer=optimizer,
                        out_prefix=f"{base.out_prefix}_{tag}",
                    )
                    report = run_experiment(combo)
                    rows.extend(report.rows)
                    reports.append(report)
    return rows, reports


def emit_report(report: RunReport, fmt: str = "csv") -> list:
    """Write the aggregate report as CSV (summary table) and/or JSON."""
    if fmt not in ("csv", "json"):
        raise ConfigError(f"unknown report format {fmt!r}")
    _ensure_parent(report.config.out_prefix)
    paths = []
    if fmt == "csv":
        path = f"{report.config.out_prefix}_summary.csv"
        write_summary_csv(report.rows, path, report.config.deterministic)
        paths.append(path)
    else:
        path = f"{report.config.out_prefix}_report.json"
        payload = {
            "config": report.config.to_dict(),
            "rows": report.rows,
            "seeds": report.seeds,
            "trace_paths": report.trace_paths,
            "povm_paths": report.povm_paths,
            "metric_paths": report.metric_paths,
            "total_seconds": None if report.config.deterministic else report.total_seconds,
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=1)
        paths.append(path)
    return paths
