"""Numba-compiled implementations of the hot per-iteration kernels.

Semantics match :mod:`povmfit.kernels.numpy_backend` exactly; the equivalence
is pinned by tests. Heavy contractions go through matmul (BLAS) even here;
the JIT wins come from fusing the surrounding element-wise work and from
cutting per-call overhead on small dimensions.
"""

import numpy as np
from numba import njit

MSE = 0
MLE = 1


@njit(cache=True)
def _loewner_inv_sqrt(lam, clip):
    d = lam.shape[0]
    f = np.empty((d, d), dtype=np.float64)
    for a in range(d):
        la = lam[a]
        ga = 1.0 / np.sqrt(max(la, clip))
        for b in range(d):
            lb = lam[b]
            gb = 1.0 / np.sqrt(max(lb, clip))
            if la >= clip and lb >= clip:
                f[a, b] = -ga * gb / (1.0 / ga + 1.0 / gb)
            else:
                diff = la - lb
                f[a, b] = (ga - gb) / diff if abs(diff) > 0.0 else 0.0
    return f


@njit(cache=True)
def _transposed_flat(mats):
    """(m, d, d) -> (d*d, m) with column j holding mats[j].T row-major."""
    m = mats.shape[0]
    d = mats.shape[1]
    out = np.empty((d * d, m), dtype=np.complex128)
    for j in range(m):
        for a in range(d):
            for b in range(d):
                out[b * d + a, j] = mats[j, a, b]
    return out


@njit(cache=True)
def loss_and_grad(t_stack, offsets, sel, probes, pvals, loss_code, mle_floor,
                  clip_delta, sandwich):
    k = offsets.shape[0] - 1
    n = sel.shape[0]
    m = probes.shape[0]
    d = probes.shape[1]
    n_pairs = n * m

    if sandwich:
        total = np.conj(t_stack).T @ t_stack
        total = 0.5 * (total + np.conj(total).T)
        lam, vec_raw = np.linalg.eigh(total)
        vec = np.ascontiguousarray(vec_raw)
        vec_h = np.ascontiguousarray(np.conj(vec).T)
        scaled = np.empty((d, d), dtype=np.complex128)
        for b in range(d):
            s = 1.0 / np.sqrt(max(lam[b], clip_delta))
            for a in range(d):
                scaled[a, b] = vec[a, b] * s
        inv_sqrt = scaled @ vec_h
        rho = np.empty_like(probes)
        for j in range(m):
            rho[j] = inv_sqrt @ np.ascontiguousarray(probes[j]) @ inv_sqrt
    else:
        lam = np.empty(0, dtype=np.float64)
        vec = np.empty((0, 0), dtype=np.complex128)
        vec_h = vec
        inv_sqrt = vec
        rho = probes

    gram = np.empty((n, d, d), dtype=np.complex128)
    gram_flat = np.empty((n, d * d), dtype=np.complex128)
    for a in range(n):
        i = sel[a]
        block = np.ascontiguousarray(t_stack[offsets[i]:offsets[i + 1], :])
        g = np.conj(block).T @ block
        gram[a] = g
        gram_flat[a] = g.reshape(d * d)

    # q[a, j] = Re Tr(gram[a] rho[j]) as one GEMM against transposed probes
    q_c = gram_flat @ _transposed_flat(rho)
    coeff = np.empty((n, m), dtype=np.complex128)
    loss = 0.0
    if loss_code == MSE:
        for a in range(n):
            for j in range(m):
                resid = pvals[a, j] - q_c[a, j].real
                loss += resid * resid
                coeff[a, j] = (-2.0 / n_pairs) * resid
    else:
        for a in range(n):
            for j in range(m):
                q_safe = max(q_c[a, j].real, mle_floor)
                loss += -pvals[a, j] * np.log(q_safe)
                coeff[a, j] = -(pvals[a, j] / q_safe) / n_pairs
    loss /= n_pairs

    rho_flat = rho.reshape(m, d * d)
    weighted = (coeff @ rho_flat).reshape(n, d, d)

    grad = np.zeros_like(t_stack)
    if sandwich:
        weighted_raw = (coeff @ probes.reshape(m, d * d)).reshape(n, d, d)
        half = np.zeros((d, d), dtype=np.complex128)
        for a in range(n):
            half += (np.ascontiguousarray(weighted_raw[a]) @ inv_sqrt) @ gram[a]
        chain = half + np.conj(half).T
        loewner = _loewner_inv_sqrt(lam, clip_delta)
        inner = vec_h @ chain @ vec
        for r in range(d):
            for c in range(d):
                inner[r, c] *= loewner[r, c]
        correction = vec @ inner @ vec_h
        correction = 0.5 * (correction + np.conj(correction).T)
        for i in range(k):
            block = np.ascontiguousarray(t_stack[offsets[i]:offsets[i + 1], :])
            grad[offsets[i]:offsets[i + 1], :] = block @ correction
    for a in range(n):
        i = sel[a]
        block = np.ascontiguousarray(t_stack[offsets[i]:offsets[i + 1], :])
        grad[offsets[i]:offsets[i + 1], :] += block @ np.ascontiguousarray(weighted[a])
    return loss, grad


@njit(cache=True)
def born_matrix(effects, probes):
    k = effects.shape[0]
    d = effects.shape[1]
    n = probes.shape[0]
    q_c = effects.reshape(k, d * d) @ _transposed_flat(probes)
    out = np.empty((k, n), dtype=np.float64)
    for i in range(k):
        for j in range(n):
            out[i, j] = q_c[i, j].real
    return out
