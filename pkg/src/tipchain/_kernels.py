"""Compiled Chebyshev recursion for blocks of complex vectors.

Complex blocks are handled through their float64 view, i.e. columns
interleaved as (re0, im0, re1, im1, ...); the scaled Hamiltonian is real so
it acts on every float column independently.
"""

import numpy as np
from numba import config, njit, prange

# skip the TBB probe: an outdated system TBB only produces a warning
config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]


@njit(parallel=True, cache=True)
def _apply(indptr, indices, data, src, dst, prev, out, scale, cr, ci):
    # dst[i] = scale * (X src)[i] - prev[i]  (prev may alias dst)
    # out[i] += (cr + i ci) * dst[i]
    n, m = src.shape
    for i in prange(n):
        acc = np.zeros(m)
        for p in range(indptr[i], indptr[i + 1]):
            v = data[p]
            j = indices[p]
            for c in range(m):
                acc[c] += v * src[j, c]
        for c in range(0, m, 2):
            a = scale * acc[c] - prev[i, c]
            b = scale * acc[c + 1] - prev[i, c + 1]
            dst[i, c] = a
            dst[i, c + 1] = b
            out[i, c] += cr * a - ci * b
            out[i, c + 1] += cr * b + ci * a


def chebyshev_series(indptr, indices, data, psi, coeffs):
    """``sum_k coeffs[k] T_k(X) psi`` with ``X`` given in CSR form.

    ``psi`` is a C-contiguous complex128 array of shape (n,) or (n, r).
    """
    shape = psi.shape
    psi = np.ascontiguousarray(psi, dtype=np.complex128).reshape(shape[0], -1)
    f = psi.view(np.float64)
    t_prev = f.copy()
    t_cur = np.zeros_like(f)
    out = np.zeros_like(f)
    zero = np.zeros_like(f)
    out.view(np.complex128)[:] = coeffs[0] * psi
    if len(coeffs) > 1:
        c1 = coeffs[1]
        _apply(indptr, indices, data, t_prev, t_cur, zero, out, 1.0, c1.real, c1.imag)
        for ck in coeffs[2:]:
            # t_prev becomes T_{k}; safe in place since row i only reads t_cur
            _apply(indptr, indices, data, t_cur, t_prev, t_prev, out, 2.0, ck.real, ck.imag)
            t_prev, t_cur = t_cur, t_prev
    return out.view(np.complex128).reshape(shape)
