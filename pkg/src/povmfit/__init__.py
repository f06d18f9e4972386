"""POVM reconstruction from probe-state data via mini-batch SGD."""

from .engine import (
    HonestFactors,
    OptimConfig,
    StiefelPoint,
    TraceLog,
    adam_step,
    fit,
    grad_eval,
    honest_renormalize,
    loss_eval,
    povm_from_params,
    sample_minibatch,
    stiefel_retract_step,
)
from .experiments import ExperimentConfig, RunReport, emit_report, run_experiment
from .kernels import backend_name
from .metrics import (
    MetricRecord,
    frobenius_distance,
    linear_inversion_baseline,
    score_reconstruction,
    wasserstein_distance,
)
from .povm import (
    PovmSet,
    ValidityReport,
    pauli_projector_set,
    photon_counting_povm,
    photon_detection_povm,
    random_povm_set,
    validate_povm,
)
from .probes import (
    NoiseSpec,
    ProbabilityTable,
    ProbeEnsemble,
    coherent_probe_grid,
    depolarize,
    depolarized_dual,
    dv_probe_ensemble,
    generate_dataset,
)

__version__ = "0.1.0"

__all__ = [
    "ExperimentConfig",
    "HonestFactors",
    "MetricRecord",
    "NoiseSpec",
    "OptimConfig",
    "PovmSet",
    "ProbabilityTable",
    "ProbeEnsemble",
    "RunReport",
    "StiefelPoint",
    "TraceLog",
    "ValidityReport",
    "adam_step",
    "backend_name",
    "coherent_probe_grid",
    "depolarize",
    "depolarized_dual",
    "dv_probe_ensemble",
    "emit_report",
    "fit",
    "frobenius_distance",
    "generate_dataset",
    "grad_eval",
    "honest_renormalize",
    "linear_inversion_baseline",
    "loss_eval",
    "pauli_projector_set",
    "photon_counting_povm",
    "photon_detection_povm",
    "povm_from_params",
    "random_povm_set",
    "run_experiment",
    "sample_minibatch",
    "score_reconstruction",
    "stiefel_retract_step",
    "validate_povm",
    "wasserstein_distance",
]
