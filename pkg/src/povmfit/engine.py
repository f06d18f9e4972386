"""Mini-batch SGD reconstruction of POVM sets.

Two parameterizations keep every iterate physically valid:

* ``SM`` - the k factor blocks are stacked into a column-orthonormal
  (k d) x d matrix; positivity comes from the Cholesky products
  ``Pi_i = T_i^dag T_i`` and completeness from orthonormality, preserved by a
  Cayley-transform retraction (computed with the Sherman-Morrison-Woodbury
  identity) under vanilla gradient descent with geometric learning-rate decay.
* ``HONEST`` - free complex factors are normalized through the clipped
  inverse square root of ``S = sum_i T_i^dag T_i``; Adam updates the factors
  and a renormalization step re-imposes completeness after every iteration.

Both paths consume exact Wirtinger gradients dL/d(conj T) supplied by the
kernel backends; the HONEST gradient differentiates through the
normalization, so it vanishes exactly at an interpolating optimum.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ConfigError, DimensionError, NumericError
from .linalg import hermitize, inv_sqrt_psd
from .povm import PovmSet
from .probes import ProbabilityTable, ProbeEnsemble

SM = "SM"
HONEST = "HONEST"
MSE = "MSE"
MLE = "MLE"

DEFAULT_ETA = {SM: 0.05, HONEST: 0.01}
ZERO_GRAD_GUARD = 1e-14


@dataclass
class OptimConfig:
    """Hyperparameters of one fit.

    ``eta`` defaults to 0.05 for SM and 0.01 for HONEST when left unset;
    ``decay_alpha`` multiplies the learning rate each iteration (SM only);
    ``state_batch``/``povm_batch`` are the per-iteration probe and outcome
    counts (``povm_batch=None`` selects every outcome).
    """

    parameterization: str = HONEST
    loss: str = MLE
    eta: float | None = None
    decay_alpha: float = 0.99
    state_batch: int = 50
    povm_batch: int | None = None
    max_iters: int = 1000
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    clip_delta: float = 1e-8
    l1_weight: float = 0.0
    nuclear_weight: float = 0.0
    mle_floor: float = 1e-12
    seed: int = 0

    def __post_init__(self):
        if self.parameterization not in (SM, HONEST):
            raise ConfigError(f"unknown parameterization {self.parameterization!r}")
        if self.loss not in (MSE, MLE):
            raise ConfigError(f"unknown loss {self.loss!r}")
        if self.eta is not None and self.eta <= 0:
            raise ConfigError(f"eta must be positive, got {self.eta}")
        if not 0.0 < self.decay_alpha <= 1.0:
            raise ConfigError(f"decay_alpha must lie in (0, 1], got {self.decay_alpha}")
        if self.state_batch < 1:
            raise ConfigError(f"state_batch must be >= 1, got {self.state_batch}")
        if self.povm_batch is not None and self.povm_batch < 1:
            raise ConfigError(f"povm_batch must be >= 1, got {self.povm_batch}")
        if self.max_iters < 1:
            raise ConfigError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.l1_weight < 0 or self.nuclear_weight < 0:
            raise ConfigError("regularization weights must be >= 0")
        for name in ("adam_eps", "clip_delta", "mle_floor"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("adam_beta1", "adam_beta2"):
            if not 0.0 <= getattr(self, name) < 1.0:
                raise ConfigError(f"{name} must lie in [0, 1)")

    @property
    def resolved_eta(self) -> float:
        return self.eta if self.eta is not None else DEFAULT_ETA[self.parameterization]


@dataclass
class StiefelPoint:
    """Vertical stack [T_1; ...; T_k] with orthonormal columns."""

    stacked: np.ndarray
    k: int
    d: int

    def __post_init__(self):
        self.stacked = np.ascontiguousarray(self.stacked, dtype=np.complex128)
        if self.stacked.shape != (self.k * self.d, self.d):
            raise DimensionError(
                f"stacked shape {self.stacked.shape} does not match "
                f"(k*d, d) = ({self.k * self.d}, {self.d})"
            )

    @classmethod
    def random(cls, k: int, d: int, rng: np.random.Generator) -> "StiefelPoint":
        """QR-orthonormalized Ginibre start."""
        raw = _ginibre(rng, (k * d, d))
        q, r = np.linalg.qr(raw)
        sign = np.sign(np.diag(r).real)
        sign[sign == 0] = 1.0
        return cls(stacked=q * sign, k=k, d=d)

    def block(self, i: int) -> np.ndarray:
        return self.stacked[i * self.d:(i + 1) * self.d]

    def manifold_defect(self) -> float:
        """Max-entry deviation of T^dag T from the identity."""
        gram = self.stacked.conj().T @ self.stacked
        return float(np.abs(gram - np.eye(self.d)).max())


@dataclass
class HonestFactors:
    """Free complex factors T_i of shape (r_i, d); r_i = d unless rank-controlled."""

    factors: list
    d: int

    def __post_init__(self):
        self.factors = [np.ascontiguousarray(t, dtype=np.complex128) for t in self.factors]
        for i, t in enumerate(self.factors):
            if t.ndim != 2 or t.shape[1] != self.d:
                raise DimensionError(
                    f"factor {i} must have {self.d} columns, got shape {t.shape}"
                )

    @property
    def k(self) -> int:
        return len(self.factors)

    @classmethod
    def random(cls, k: int, d: int, rng: np.random.Generator,
               ranks: list | None = None) -> "HonestFactors":
        """Ginibre factors scaled by 1/sqrt(k d) so that S starts near identity."""
        if ranks is None:
            ranks = [d] * k
        scale = 1.0 / np.sqrt(k * d)
        return cls(factors=[scale * _ginibre(rng, (r, d)) for r in ranks], d=d)

    def stack(self) -> tuple[np.ndarray, np.ndarray]:
        offsets = np.zeros(self.k + 1, dtype=np.int64)
        np.cumsum([t.shape[0] for t in self.factors], out=offsets[1:])
        return np.ascontiguousarray(np.vstack(self.factors)), offsets

    @classmethod
    def from_stack(cls, t_stack: np.ndarray, offsets: np.ndarray, d: int) -> "HonestFactors":
        blocks = [t_stack[offsets[i]:offsets[i + 1]].copy() for i in range(len(offsets) - 1)]
        return cls(factors=blocks, d=d)


@dataclass
class AdamState:
    """Bias-corrected moment accumulators, kept per real/imag entry."""

    m1: np.ndarray
    m2: np.ndarray
    step: int = 0

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "AdamState":
        return cls(m1=np.zeros((2, rows, cols)), m2=np.zeros((2, rows, cols)))


@dataclass
class Batch:
    """One mini-batch: selected outcome/probe indices plus their data."""

    outcome_idx: np.ndarray
    probe_idx: np.ndarray
    pvals: np.ndarray
    probes: np.ndarray | None = None


@dataclass
class TraceLog:
    """Per-iteration convergence records emitted by :func:`fit`."""

    iterations: list = field(default_factory=list)
    losses: list = field(default_factory=list)
    avg_frobenius: list = field(default_factory=list)
    avg_wasserstein: list = field(default_factory=list)
    elapsed_ms: list = field(default_factory=list)

    def append(self, iteration, loss, frob=None, wass=None, elapsed=0.0):
        self.iterations.append(int(iteration))
        self.losses.append(float(loss))
        self.avg_frobenius.append(None if frob is None else float(frob))
        self.avg_wasserstein.append(None if wass is None else float(wass))
        self.elapsed_ms.append(float(elapsed))

    def save_csv(self, path, deterministic: bool = False) -> None:
        """Write the trace; deterministic mode leaves wall-clock fields empty."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iter", "loss", "avg_frobenius", "avg_wasserstein", "elapsed_ms"])
            for it, loss, fr, wa, ms in zip(
                self.iterations, self.losses, self.avg_frobenius,
                self.avg_wasserstein, self.elapsed_ms,
            ):
                writer.writerow([
                    it,
                    format(loss, ".17g"),
                    "" if fr is None else format(fr, ".17g"),
                    "" if wa is None else format(wa, ".17g"),
                    "" if deterministic else format(ms, ".3f"),
                ])


def _ginibre(rng: np.random.Generator, shape) -> np.ndarray:
    """Matrix of i.i.d. standard complex Gaussian entries."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def _params_stack(params) -> tuple[np.ndarray, np.ndarray, int, bool]:
    """Stacked factors, block offsets, dimension and the sandwich flag."""
    if isinstance(params, StiefelPoint):
        offsets = np.arange(params.k + 1, dtype=np.int64) * params.d
        return params.stacked, offsets, params.d, False
    if isinstance(params, HonestFactors):
        t_stack, offsets = params.stack()
        return t_stack, offsets, params.d, True
    raise TypeError(f"unsupported parameter object {type(params).__name__}")


def povm_from_params(params, clip_delta: float = 1e-8) -> PovmSet:
    """Materialize the valid POVM encoded by either parameterization."""
    t_stack, offsets, d, sandwich = _params_stack(params)
    k = len(offsets) - 1
    elements = np.empty((k, d, d), dtype=np.complex128)
    for i in range(k):
        block = t_stack[offsets[i]:offsets[i + 1]]
        elements[i] = block.conj().T @ block
    if sandwich:
        m = inv_sqrt_psd(t_stack.conj().T @ t_stack, clip_delta)
        elements = m @ elements @ m
    elements = 0.5 * (elements + elements.conj().transpose(0, 2, 1))
    return PovmSet(dim=d, elements=elements)


def sample_minibatch(table: ProbabilityTable, m: int, n: int,
                     rng: np.random.Generator,
                     probes: ProbeEnsemble | None = None) -> Batch:
    """Uniformly sample m probe and n outcome indices without replacement.

    The batch covers the full Cartesian product of the sampled indices.
    Deterministic for a given generator state.
    """
    if m > table.n_probes:
        raise ValueError(f"state batch {m} exceeds probe count {table.n_probes}")
    if n > table.n_outcomes:
        raise ValueError(f"povm batch {n} exceeds outcome count {table.n_outcomes}")
    probe_idx = rng.choice(table.n_probes, size=m, replace=False)
    outcome_idx = rng.choice(table.n_outcomes, size=n, replace=False)
    pvals = table.values[np.ix_(outcome_idx, probe_idx)]
    states = probes.states[probe_idx] if probes is not None else None
    return Batch(outcome_idx=outcome_idx.astype(np.int64),
                 probe_idx=probe_idx.astype(np.int64),
                 pvals=np.ascontiguousarray(pvals),
                 probes=states)


def _penalty_loss_grad(t_stack, offsets, d, sandwich, config: OptimConfig):
    """L1 and nuclear (= trace, for PSD) penalties over all emitted effects.

    Both act on the valid POVM elements. The subgradient of the entry-wise L1
    term uses the complex sign with sign(0) = 0; for the normalized path the
    chain through S^{-1/2} reuses the divided-difference construction.
    """
    k = len(offsets) - 1
    gram = np.empty((k, d, d), dtype=np.complex128)
    for i in range(k):
        block = t_stack[offsets[i]:offsets[i + 1]]
        gram[i] = block.conj().T @ block
    if sandwich:
        total = hermitize(t_stack.conj().T @ t_stack)
        lam, vec = np.linalg.eigh(total)
        msqrt = (vec * (1.0 / np.sqrt(np.maximum(lam, config.clip_delta)))) @ vec.conj().T
        effects = msqrt @ gram @ msqrt
    else:
        effects = gram

    value = 0.0
    carriers = np.zeros_like(gram)
    if config.l1_weight > 0:
        mags = np.abs(effects)
        value += config.l1_weight * float(mags.sum())
        signs = np.divide(effects, mags, out=np.zeros_like(effects), where=mags > 0)
        carriers += config.l1_weight * signs
    if config.nuclear_weight > 0:
        value += config.nuclear_weight * float(np.trace(effects, axis1=1, axis2=2).real.sum())
        carriers += config.nuclear_weight * np.eye(d)[None]

    grad = np.zeros_like(t_stack)
    if sandwich:
        inner = msqrt @ carriers @ msqrt
        half = ((carriers @ msqrt) @ gram).sum(axis=0)
        chain = half + half.conj().T
        from .kernels.numpy_backend import _loewner_inv_sqrt

        loewner = _loewner_inv_sqrt(lam, config.clip_delta)
        corr = vec @ ((vec.conj().T @ chain @ vec) * loewner) @ vec.conj().T
        corr = 0.5 * (corr + corr.conj().T)
        inner = inner + corr[None]
    else:
        inner = carriers
    for i in range(k):
        block = t_stack[offsets[i]:offsets[i + 1]]
        grad[offsets[i]:offsets[i + 1]] = block @ inner[i]
    return value, grad


def _batch_loss_grad(params, batch: Batch, config: OptimConfig):
    """Loss and full-size stacked gradient for one batch."""
    if batch.probes is None:
        raise ValueError("batch must carry probe states (pass probes to sample_minibatch)")
    if batch.pvals.size == 0:
        raise ValueError("empty batch")
    t_stack, offsets, d, sandwich = _params_stack(params)
    loss_code = kernels.MSE if config.loss == MSE else kernels.MLE
    loss, grad = kernels.loss_and_grad(
        np.ascontiguousarray(t_stack),
        offsets,
        np.ascontiguousarray(batch.outcome_idx, dtype=np.int64),
        np.ascontiguousarray(batch.probes),
        np.ascontiguousarray(batch.pvals),
        loss_code,
        config.mle_floor,
        config.clip_delta,
        sandwich,
    )
    if config.l1_weight > 0 or config.nuclear_weight > 0:
        pval, pgrad = _penalty_loss_grad(t_stack, offsets, d, sandwich, config)
        loss += pval
        grad = grad + pgrad
    return loss, grad


def loss_eval(params, batch: Batch, config: OptimConfig) -> float:
    """Mini-batch loss at the given parameters (regularizers included)."""
    return _batch_loss_grad(params, batch, config)[0]


def grad_eval(params, batch: Batch, config: OptimConfig):
    """Wirtinger gradient dL/d(conj T), shaped like the parameter object."""
    _, grad = _batch_loss_grad(params, batch, config)
    if isinstance(params, StiefelPoint):
        return grad
    _, offsets = params.stack()
    return [grad[offsets[i]:offsets[i + 1]] for i in range(params.k)]


def stiefel_retract_step(point: StiefelPoint, grad: np.ndarray, eta: float) -> StiefelPoint:
    """One Cayley-retraction step along a normalized gradient.

    Builds A = [G~, T], B = [T, -G~] from the normalized gradient
    G~ = G / ||G||, applies the Sherman-Morrison-Woodbury form of the Cayley
    transform and steps T <- T - eta A (I + eta/2 B^dag A)^{-1} B^dag T.
    A vanishing gradient (norm below 1e-14) returns the point unchanged.
    """
    if eta <= 0:
        raise ValueError(f"eta must be positive, got {eta}")
    gnorm = float(np.linalg.norm(grad))
    if gnorm < ZERO_GRAD_GUARD:
        return point
    x = point.stacked
    gt = grad / gnorm
    a = np.concatenate([gt, x], axis=1)
    b = np.concatenate([x, -gt], axis=1)
    mid = np.eye(2 * point.d, dtype=np.complex128) + (eta / 2.0) * (b.conj().T @ a)
    try:
        sol = np.linalg.solve(mid, b.conj().T @ x)
    except np.linalg.LinAlgError as exc:
        raise NumericError(
            f"singular Cayley system (condition estimate {np.linalg.cond(mid):.3e})"
        ) from exc
    return StiefelPoint(stacked=x - eta * (a @ sol), k=point.k, d=point.d)


def adam_step(state: AdamState, factors: HonestFactors, grads, eta: float,
              config: OptimConfig) -> tuple[AdamState, HonestFactors]:
    """Standard Adam with bias correction, applied entry-wise to the real and
    imaginary parts independently."""
    t_stack, offsets = factors.stack()
    if isinstance(grads, (list, tuple)):
        g_stack = np.vstack(grads)
    else:
        g_stack = np.asarray(grads)
    if g_stack.shape != t_stack.shape:
        raise DimensionError(
            f"gradient shape {g_stack.shape} does not match factors {t_stack.shape}"
        )
    g = np.stack([g_stack.real, g_stack.imag])
    step = state.step + 1
    m1 = config.adam_beta1 * state.m1 + (1.0 - config.adam_beta1) * g
    m2 = config.adam_beta2 * state.m2 + (1.0 - config.adam_beta2) * (g * g)
    m1_hat = m1 / (1.0 - config.adam_beta1**step)
    m2_hat = m2 / (1.0 - config.adam_beta2**step)
    update = eta * m1_hat / (np.sqrt(m2_hat) + config.adam_eps)
    new_stack = t_stack - (update[0] + 1j * update[1])
    return (
        AdamState(m1=m1, m2=m2, step=step),
        HonestFactors.from_stack(new_stack, offsets, factors.d),
    )


def honest_renormalize(factors: HonestFactors, clip_delta: float = 1e-8) -> HonestFactors:
    """Right-multiply every factor by S^{-1/2} so the products sum to identity."""
    t_stack, offsets = factors.stack()
    m = inv_sqrt_psd(t_stack.conj().T @ t_stack, clip_delta)
    return HonestFactors.from_stack(t_stack @ m, offsets, factors.d)


def initial_params(config: OptimConfig, k: int, d: int,
                   rng: np.random.Generator, ranks: list | None = None):
    """Seeded generic start for either parameterization."""
    if config.parameterization == SM:
        return StiefelPoint.random(k, d, rng)
    return HonestFactors.random(k, d, rng, ranks=ranks)


def fit(table: ProbabilityTable, probes: ProbeEnsemble, config: OptimConfig,
        init=None, reference: PovmSet | None = None, metric_every: int = 10,
        callback=None) -> tuple[PovmSet, TraceLog]:
    """Run the full mini-batch SGD loop and return the fitted POVM and trace.

    Every iteration samples a fresh mini-batch, evaluates the gradient and
    applies the parameterization's update rule (SM: Cayley retraction with
    learning rate eta * alpha^t; HONEST: Adam followed by renormalization).
    Metric snapshots against ``reference`` are recorded every ``metric_every``
    iterations; ``callback(iteration, params)`` runs after each update.
    """
    if table.n_probes != probes.n_states:
        raise DimensionError(
            f"table has {table.n_probes} probe columns but ensemble holds "
            f"{probes.n_states} states"
        )
    k = table.n_outcomes
    d = probes.dim
    m = min(config.state_batch, table.n_probes)
    n = k if config.povm_batch is None else min(config.povm_batch, k)
    rng = np.random.default_rng(config.seed)
    params = init if init is not None else initial_params(config, k, d, rng)

    adam_state = None
    if isinstance(params, HonestFactors):
        t_stack, _ = params.stack()
        adam_state = AdamState.zeros(*t_stack.shape)

    ref_columns = None
    if reference is not None:
        ref_columns = kernels.born_matrix(
            np.ascontiguousarray(reference.elements), np.ascontiguousarray(probes.states)
        )

    trace = TraceLog()
    eta = config.resolved_eta
    start = time.perf_counter()
    for it in range(config.max_iters):
        batch = sample_minibatch(table, m, n, rng, probes)
        loss, grad = _batch_loss_grad(params, batch, config)
        if not np.isfinite(loss):
            trace.append(it, loss, elapsed=(time.perf_counter() - start) * 1e3)
            raise NumericError(f"non-finite loss {loss!r} at iteration {it}")
        if isinstance(params, StiefelPoint):
            params = stiefel_retract_step(params, grad, eta * config.decay_alpha**it)
        else:
            adam_state, params = adam_step(adam_state, params, grad, eta, config)
            params = honest_renormalize(params, config.clip_delta)

        frob = wass = None
        if reference is not None and (it % metric_every == 0 or it == config.max_iters - 1):
            est = povm_from_params(params, config.clip_delta)
            frob, wass = _snapshot_metrics(reference, est, probes, ref_columns)
        trace.append(it, loss, frob, wass, (time.perf_counter() - start) * 1e3)
        if callback is not None:
            callback(it, params)

    final = povm_from_params(params, config.clip_delta)
    final.label = table.label
    return final, trace


def _snapshot_metrics(reference: PovmSet, est: PovmSet, probes: ProbeEnsemble,
                      ref_columns: np.ndarray) -> tuple[float, float]:
    """Mean squared-Frobenius over elements, mean Wasserstein over probes."""
    diff = reference.elements - est.elements
    frob = float(np.einsum("iab,iab->i", diff.conj(), diff).real.mean())
    est_columns = kernels.born_matrix(
        np.ascontiguousarray(est.elements), np.ascontiguousarray(probes.states)
    )
    cum = np.cumsum(ref_columns - est_columns, axis=0)
    wass = float(np.abs(cum[:-1]).sum(axis=0).mean()) if cum.shape[0] > 1 else 0.0
    return frob, wass
