# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled training kernels: PCG32 stream, skip-gram epoch, LSTM layer passes.

Signatures mirror _kernels_py exactly; the PCG32 integer streams are
bit-identical, so a fixed seed drives the same trajectory on either backend
(floating-point sums may differ in the last bits).  Matrix products go
through BLAS; everything elementwise is fused here.
"""

import numpy as np

from libc.math cimport exp, expf, log1p, tanh, tanhf
from libc.stdint cimport int32_t, int64_t, uint32_t, uint64_t
from scipy.linalg.cython_blas cimport dgemm, sgemm

BACKEND_NAME = "compiled"

ctypedef fused floating:
    float
    double

cdef uint64_t PCG_MULT = 6364136223846793005ULL


cdef inline uint32_t pcg32_next(uint64_t *state, uint64_t inc) noexcept nogil:
    cdef uint64_t old = state[0]
    cdef uint32_t xorshifted, rot
    state[0] = old * PCG_MULT + inc
    xorshifted = <uint32_t>(((old >> 18) ^ old) >> 27)
    rot = <uint32_t>(old >> 59)
    return (xorshifted >> rot) | (xorshifted << ((0 - rot) & 31))


cdef inline uint64_t pcg32_randint(uint64_t *state, uint64_t inc, uint64_t n) noexcept nogil:
    return (<uint64_t>pcg32_next(state, inc) * n) >> 32


def rng_fill_u32(uint64_t[::1] state, uint32_t[::1] out):
    """Debug/init hook: fill `out` with raw PCG32 draws, advancing `state`."""
    cdef uint64_t s = state[0]
    cdef uint64_t inc = state[1]
    cdef Py_ssize_t k
    with nogil:
        for k in range(out.shape[0]):
            out[k] = pcg32_next(&s, inc)
    state[0] = s


cdef inline double softplus(double z) noexcept nogil:
    # log(1 + exp(z)) without overflow
    if z > 0.0:
        return z + log1p(exp(-z))
    return log1p(exp(z))


def sgns_train_epoch(float[:, ::1] inp, float[:, ::1] out,
                     int32_t[::1] sent_flat, int64_t[::1] offsets, int32_t[::1] table,
                     int window, int negative, uint64_t[::1] rng_state,
                     long long words_done, long long total_words, double lr0, double lr_min):
    """One skip-gram negative-sampling epoch; see _kernels_py for the contract."""
    cdef uint64_t s = rng_state[0]
    cdef uint64_t inc = rng_state[1]
    cdef Py_ssize_t D = inp.shape[1]
    cdef uint64_t table_size = <uint64_t>table.shape[0]
    cdef uint64_t uwindow = <uint64_t>window
    cdef double loss_sum = 0.0
    cdef long long pairs = 0
    cdef double lr, z, sgm, g
    cdef Py_ssize_t si, pos, pos2, lo, hi, k, d, n
    cdef int radius
    cdef int32_t center, context, neg
    cdef float *v
    cdef float *u
    acc_arr = np.zeros(D, dtype=np.float64)
    cdef double[::1] acc = acc_arr

    with nogil:
        for si in range(offsets.shape[0] - 1):
            lo = offsets[si]
            hi = offsets[si + 1]
            n = hi - lo
            for pos in range(n):
                center = sent_flat[lo + pos]
                lr = lr0 + (lr_min - lr0) * (<double>words_done / <double>total_words)
                if lr < lr_min:
                    lr = lr_min
                radius = 1 + <int>pcg32_randint(&s, inc, uwindow)
                v = &inp[center, 0]
                for pos2 in range(max(0, pos - radius), min(n, pos + radius + 1)):
                    if pos2 == pos:
                        continue
                    context = sent_flat[lo + pos2]
                    for d in range(D):
                        acc[d] = 0.0
                    # positive pair
                    u = &out[context, 0]
                    z = 0.0
                    for d in range(D):
                        z += <double>u[d] * <double>v[d]
                    loss_sum += softplus(-z)
                    sgm = 1.0 / (1.0 + exp(-z))
                    g = 1.0 - sgm
                    for d in range(D):
                        acc[d] += g * <double>u[d]
                        u[d] = <float>(<double>u[d] + (lr * g) * <double>v[d])
                    # negatives: draws matching the positive are skipped
                    for k in range(negative):
                        neg = table[pcg32_randint(&s, inc, table_size)]
                        if neg == context:
                            continue
                        u = &out[neg, 0]
                        z = 0.0
                        for d in range(D):
                            z += <double>u[d] * <double>v[d]
                        loss_sum += softplus(z)
                        sgm = 1.0 / (1.0 + exp(-z))
                        g = -sgm
                        for d in range(D):
                            acc[d] += g * <double>u[d]
                            u[d] = <float>(<double>u[d] + (lr * g) * <double>v[d])
                    for d in range(D):
                        v[d] = <float>(<double>v[d] + lr * acc[d])
                    pairs += 1
                words_done += 1
    rng_state[0] = s
    return loss_sum, pairs, words_done


cdef inline void gemm_rm(floating *A, floating *B, floating *C,
                         int m, int k, int n, bint transA, bint transB,
                         floating alpha, floating beta) noexcept nogil:
    """Row-major C(m,n) = alpha * op(A) op(B) + beta * C via column-major BLAS.

    transA/transB refer to the row-major math: op(A) is (m,k), stored (k,m)
    when transA; op(B) is (k,n), stored (n,k) when transB.
    """
    cdef char ca, cb
    cdef int lda, ldb
    # BLAS computes C^T = op(B)^T op(A)^T in column-major terms
    cb = b'T' if transB else b'N'
    ca = b'T' if transA else b'N'
    ldb = k if transB else n
    lda = m if transA else k
    if floating is float:
        sgemm(&cb, &ca, &n, &m, &k, &alpha, B, &ldb, A, &lda, &beta, C, &n)
    else:
        dgemm(&cb, &ca, &n, &m, &k, &alpha, B, &ldb, A, &lda, &beta, C, &n)


cdef inline floating fsigmoid(floating z) noexcept nogil:
    if floating is float:
        return <float>1.0 / (<float>1.0 + expf(-z))
    else:
        return 1.0 / (1.0 + exp(-z))


cdef inline floating ftanh(floating z) noexcept nogil:
    if floating is float:
        return tanhf(z)
    else:
        return tanh(z)


def lstm_layer_forward(floating[:, :, ::1] X, floating[:, ::1] Wx,
                       floating[:, ::1] Wh, floating[::1] b):
    """Unroll one LSTM layer over a time-major (T, B, D_in) batch."""
    cdef Py_ssize_t T = X.shape[0]
    cdef Py_ssize_t B = X.shape[1]
    cdef Py_ssize_t Din = X.shape[2]
    cdef Py_ssize_t Hd = Wh.shape[0]
    dtype = np.float32 if floating is float else np.float64
    H_arr = np.empty((T, B, Hd), dtype=dtype)
    C_arr = np.empty((T, B, Hd), dtype=dtype)
    I_arr = np.empty((T, B, Hd), dtype=dtype)
    F_arr = np.empty((T, B, Hd), dtype=dtype)
    G_arr = np.empty((T, B, Hd), dtype=dtype)
    O_arr = np.empty((T, B, Hd), dtype=dtype)
    Z_arr = np.empty((B, 4 * Hd), dtype=dtype)
    cdef floating[:, :, ::1] H = H_arr
    cdef floating[:, :, ::1] C = C_arr
    cdef floating[:, :, ::1] I = I_arr
    cdef floating[:, :, ::1] F = F_arr
    cdef floating[:, :, ::1] G = G_arr
    cdef floating[:, :, ::1] O = O_arr
    cdef floating[:, ::1] Z = Z_arr
    cdef Py_ssize_t t, bi, h
    cdef floating iv, fv, gv, ov, cv, cprev
    cdef int mi = <int>B, ki, ni = <int>(4 * Hd)
    with nogil:
        for t in range(T):
            ki = <int>Din
            gemm_rm(&X[t, 0, 0], &Wx[0, 0], &Z[0, 0], mi, ki, ni, 0, 0,
                    <floating>1.0, <floating>0.0)
            if t > 0:
                ki = <int>Hd
                gemm_rm(&H[t - 1, 0, 0], &Wh[0, 0], &Z[0, 0], mi, ki, ni, 0, 0,
                        <floating>1.0, <floating>1.0)
            for bi in range(B):
                for h in range(Hd):
                    iv = fsigmoid(Z[bi, h] + b[h])
                    fv = fsigmoid(Z[bi, Hd + h] + b[Hd + h])
                    gv = ftanh(Z[bi, 2 * Hd + h] + b[2 * Hd + h])
                    ov = fsigmoid(Z[bi, 3 * Hd + h] + b[3 * Hd + h])
                    cprev = C[t - 1, bi, h] if t > 0 else <floating>0.0
                    cv = fv * cprev + iv * gv
                    I[t, bi, h] = iv
                    F[t, bi, h] = fv
                    G[t, bi, h] = gv
                    O[t, bi, h] = ov
                    C[t, bi, h] = cv
                    H[t, bi, h] = ov * ftanh(cv)
    return H_arr, C_arr, I_arr, F_arr, G_arr, O_arr


def lstm_layer_backward(floating[:, :, ::1] X, floating[:, ::1] Wx, floating[:, ::1] Wh,
                        floating[:, :, ::1] I, floating[:, :, ::1] F, floating[:, :, ::1] G,
                        floating[:, :, ::1] O, floating[:, :, ::1] C, floating[:, :, ::1] H,
                        floating[:, :, ::1] dH_out, bint compute_dx):
    """Backward pass through the unrolled layer (all arrays time-major)."""
    cdef Py_ssize_t T = X.shape[0]
    cdef Py_ssize_t B = X.shape[1]
    cdef Py_ssize_t Din = X.shape[2]
    cdef Py_ssize_t Hd = Wh.shape[0]
    dtype = np.float32 if floating is float else np.float64
    dWx_arr = np.zeros((Din, 4 * Hd), dtype=dtype)
    dWh_arr = np.zeros((Hd, 4 * Hd), dtype=dtype)
    db_arr = np.zeros(4 * Hd, dtype=dtype)
    dX_arr = np.zeros((T, B, Din), dtype=dtype) if compute_dx else None
    dZ_arr = np.empty((B, 4 * Hd), dtype=dtype)
    dh_arr = np.zeros((B, Hd), dtype=dtype)
    dc_arr = np.zeros((B, Hd), dtype=dtype)
    cdef floating[:, ::1] dWx = dWx_arr
    cdef floating[:, ::1] dWh = dWh_arr
    cdef floating[::1] db = db_arr
    cdef floating[:, :, ::1] dX = dX_arr if compute_dx else dZ_arr[None, :, :]
    cdef floating[:, ::1] dZ = dZ_arr
    cdef floating[:, ::1] dh_rec = dh_arr
    cdef floating[:, ::1] dc = dc_arr
    cdef Py_ssize_t t, bi, h
    cdef floating iv, fv, gv, ov, cv, tc, dhv, dcv, dov, div, dgv, dfv, cprev
    cdef int mi = <int>B, ni = <int>(4 * Hd), ki
    with nogil:
        for t in range(T - 1, -1, -1):
            for bi in range(B):
                for h in range(Hd):
                    iv = I[t, bi, h]
                    fv = F[t, bi, h]
                    gv = G[t, bi, h]
                    ov = O[t, bi, h]
                    cv = C[t, bi, h]
                    tc = ftanh(cv)
                    dhv = dH_out[t, bi, h] + dh_rec[bi, h]
                    dov = dhv * tc
                    dcv = dc[bi, h] + dhv * ov * (<floating>1.0 - tc * tc)
                    div = dcv * gv
                    dgv = dcv * iv
                    cprev = C[t - 1, bi, h] if t > 0 else <floating>0.0
                    dfv = dcv * cprev
                    dZ[bi, h] = div * iv * (<floating>1.0 - iv)
                    dZ[bi, Hd + h] = dfv * fv * (<floating>1.0 - fv)
                    dZ[bi, 2 * Hd + h] = dgv * (<floating>1.0 - gv * gv)
                    dZ[bi, 3 * Hd + h] = dov * ov * (<floating>1.0 - ov)
                    dc[bi, h] = dcv * fv
            # dWx += X[t]^T dZ ; dWh += H[t-1]^T dZ ; db += column sums
            ki = <int>B
            gemm_rm(&X[t, 0, 0], &dZ[0, 0], &dWx[0, 0], <int>Din, ki, ni, 1, 0,
                    <floating>1.0, <floating>1.0)
            if t > 0:
                gemm_rm(&H[t - 1, 0, 0], &dZ[0, 0], &dWh[0, 0], <int>Hd, ki, ni, 1, 0,
                        <floating>1.0, <floating>1.0)
            for bi in range(B):
                for h in range(4 * Hd):
                    db[h] += dZ[bi, h]
            if compute_dx:
                gemm_rm(&dZ[0, 0], &Wx[0, 0], &dX[t, 0, 0], mi, ni, <int>Din, 0, 1,
                        <floating>1.0, <floating>0.0)
            gemm_rm(&dZ[0, 0], &Wh[0, 0], &dh_rec[0, 0], mi, ni, <int>Hd, 0, 1,
                    <floating>1.0, <floating>0.0)
    return dX_arr, dWx_arr, dWh_arr, db_arr
