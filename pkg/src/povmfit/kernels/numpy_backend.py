"""Pure-numpy implementations of the hot per-iteration kernels.

The fused kernel evaluates one mini-batch loss and its Wirtinger gradient
(dL/d(conj T)) for POVM factors stored as a vertical stack of per-element
blocks; block i occupies rows ``offsets[i]:offsets[i+1]`` of ``t_stack``.

Two parameterization paths share the kernel:

* plain Cholesky products ``Pi_i = T_i^dag T_i`` (``sandwich=False``), used on
  the orthonormally-stacked manifold where completeness is structural;
* normalized products ``Pi_i = M T_i^dag T_i M`` with ``M = S^{-1/2}``,
  ``S = sum_l T_l^dag T_l`` (``sandwich=True``). Here the gradient
  differentiates through the clipped inverse square root via the
  divided-difference (Daleckii-Krein) representation, which couples every
  block: unselected blocks still receive the S-chain term.
"""

import numpy as np

MSE = 0
MLE = 1


def _loewner_inv_sqrt(lam: np.ndarray, clip: float) -> np.ndarray:
    """First divided differences of g(x) = max(x, clip)^(-1/2) on a spectrum.

    For unclipped pairs the closed form -1/(sqrt(a b) (sqrt a + sqrt b)) is
    exact and avoids the cancellation the raw quotient suffers for
    near-degenerate eigenvalues.
    """
    lam_c = np.maximum(lam, clip)
    sq = np.sqrt(lam_c)
    f = -1.0 / (sq[:, None] * sq[None, :] * (sq[:, None] + sq[None, :]))
    below = lam < clip
    if np.any(below):
        g = 1.0 / sq
        num = g[:, None] - g[None, :]
        diff = lam[:, None] - lam[None, :]
        quot = np.divide(num, diff, out=np.zeros_like(num), where=np.abs(diff) > 0)
        f = np.where(below[:, None] | below[None, :], quot, f)
    return f


def loss_and_grad(t_stack, offsets, sel, probes, pvals, loss_code, mle_floor,
                  clip_delta, sandwich):
    """Mini-batch loss and stacked Wirtinger gradient.

    Parameters
    ----------
    t_stack : (P, d) complex128 vertical stack of all k factor blocks
    offsets : (k+1,) int64 block boundaries into ``t_stack``
    sel : (n,) int64 distinct outcome indices in the batch
    probes : (m, d, d) complex128 probe density matrices of the batch
    pvals : (n, m) float64 target probabilities for the selected pairs
    loss_code : MSE (0) or MLE (1)
    mle_floor : clamp for predicted probabilities inside the log
    clip_delta : eigenvalue clip for the inverse square root
    sandwich : normalize through S^{-1/2} (True) or use raw T^dag T (False)
    """
    k = offsets.shape[0] - 1
    n = sel.shape[0]
    m, d = probes.shape[0], probes.shape[1]
    n_pairs = n * m

    gram = np.empty((n, d, d), dtype=np.complex128)
    for a, i in enumerate(sel):
        block = t_stack[offsets[i]:offsets[i + 1]]
        gram[a] = block.conj().T @ block

    if sandwich:
        total = t_stack.conj().T @ t_stack
        total = 0.5 * (total + total.conj().T)
        lam, vec = np.linalg.eigh(total)
        inv_sqrt = (vec * (1.0 / np.sqrt(np.maximum(lam, clip_delta)))) @ vec.conj().T
        rho = inv_sqrt @ probes @ inv_sqrt
    else:
        rho = probes

    q = (gram.reshape(n, d * d) @ rho.transpose(0, 2, 1).reshape(m, d * d).T).real
    if loss_code == MSE:
        resid = pvals - q
        loss = float(np.mean(resid * resid))
        coeff = (-2.0 / n_pairs) * resid
    else:
        q_safe = np.maximum(q, mle_floor)
        loss = float(np.mean(-pvals * np.log(q_safe)))
        coeff = -(pvals / q_safe) / n_pairs

    weighted = (coeff @ rho.reshape(m, d * d)).reshape(n, d, d)

    grad = np.zeros_like(t_stack)
    if sandwich:
        weighted_raw = (coeff @ probes.reshape(m, d * d)).reshape(n, d, d)
        half = ((weighted_raw @ inv_sqrt) @ gram).sum(axis=0)
        chain = half + half.conj().T
        loewner = _loewner_inv_sqrt(lam, clip_delta)
        correction = vec @ ((vec.conj().T @ chain @ vec) * loewner) @ vec.conj().T
        correction = 0.5 * (correction + correction.conj().T)
        for i in range(k):
            block = t_stack[offsets[i]:offsets[i + 1]]
            grad[offsets[i]:offsets[i + 1]] = block @ correction
    for a, i in enumerate(sel):
        block = t_stack[offsets[i]:offsets[i + 1]]
        grad[offsets[i]:offsets[i + 1]] += block @ weighted[a]
    return loss, grad


def born_matrix(effects, probes):
    """Probability matrix q[i, j] = Re Tr(effects[i] @ probes[j])."""
    k, d = effects.shape[0], effects.shape[1]
    n = probes.shape[0]
    flat = probes.transpose(0, 2, 1).reshape(n, d * d)
    return (effects.reshape(k, d * d) @ flat.T).real
