"""Pure numpy fallback for the hot training kernels.

Mirrors the compiled extension (_kernels) function for function.  The two
backends consume identical PCG32 integer streams, so fixed seeds give the
same training trajectory up to float summation order.
"""

import numpy as np
from scipy.special import expit

from .rng import Pcg32

BACKEND_NAME = "pure"


def rng_fill_u32(state, out):
    """Debug hook: fill `out` with raw PCG32 draws, advancing `state`."""
    rng = Pcg32(0)
    rng.set_state_array(state)
    for k in range(out.shape[0]):
        out[k] = rng.next_u32()
    state[0] = rng.state
    state[1] = rng.inc


def _softplus(z: float) -> float:
    # log(1 + exp(z)) without overflow
    if z > 0.0:
        return z + np.log1p(np.exp(-z))
    return np.log1p(np.exp(z))


def sgns_pair_update(inp, out, center, context, negatives, lr):
    """One negative-sampling SGD step on the embedding tables, in place.

    Ascends log s(u_ctx.v) + sum log s(-u_neg.v) where v is the center row
    of the input table and u rows live in the output table.  All gradients
    use pre-update values; returns the pair loss before the update.
    """
    v = inp[center]
    acc = np.zeros_like(v)
    loss = 0.0

    z = float(np.dot(out[context], v))
    loss += _softplus(-z)
    g = 1.0 - expit(z)
    acc += g * out[context]
    out[context] += (lr * g) * v

    for neg in negatives:
        z = float(np.dot(out[neg], v))
        loss += _softplus(z)
        g = -expit(z)
        acc += g * out[neg]
        out[neg] += (lr * g) * v

    inp[center] += lr * acc
    return loss


def sgns_train_epoch(inp, out, sent_flat, offsets, table, window, negative,
                     rng_state, words_done, total_words, lr0, lr_min):
    """One skip-gram epoch over an index-encoded corpus.

    Per center word a context radius is drawn uniformly from 1..window and
    `negative` table draws are taken per pair (draws equal to the positive
    context are skipped).  The learning rate decays linearly over the global
    word counter.  Returns (loss_sum, pair_count, words_done).
    """
    rng = Pcg32(0)
    rng.set_state_array(rng_state)
    table_size = len(table)
    loss_sum = 0.0
    pairs = 0
    for s in range(len(offsets) - 1):
        sent = sent_flat[offsets[s]:offsets[s + 1]]
        n = len(sent)
        for pos in range(n):
            center = int(sent[pos])
            lr = lr0 + (lr_min - lr0) * (words_done / total_words)
            if lr < lr_min:
                lr = lr_min
            radius = 1 + rng.randint(window)
            lo = max(0, pos - radius)
            hi = min(n, pos + radius + 1)
            for pos2 in range(lo, hi):
                if pos2 == pos:
                    continue
                context = int(sent[pos2])
                negatives = []
                for _ in range(negative):
                    neg = int(table[rng.randint(table_size)])
                    if neg != context:
                        negatives.append(neg)
                loss_sum += sgns_pair_update(inp, out, center, context, negatives, lr)
                pairs += 1
            words_done += 1
    rng_state[0] = rng.state
    rng_state[1] = rng.inc
    return loss_sum, pairs, words_done


def lstm_layer_forward(X, Wx, Wh, b):
    """Unroll one LSTM layer over a time-major (T, B, D_in) batch.

    Initial states are zero.  Returns (H, C, I, F, G, O): hidden states,
    cell states and gate activations per step, each (T, B, H), cached for
    the backward pass.
    """
    T, B, _ = X.shape
    Hd = Wh.shape[0]
    dt = X.dtype
    H = np.empty((T, B, Hd), dtype=dt)
    C = np.empty((T, B, Hd), dtype=dt)
    I = np.empty((T, B, Hd), dtype=dt)
    F = np.empty((T, B, Hd), dtype=dt)
    G = np.empty((T, B, Hd), dtype=dt)
    O = np.empty((T, B, Hd), dtype=dt)
    h = np.zeros((B, Hd), dtype=dt)
    c = np.zeros((B, Hd), dtype=dt)
    for t in range(T):
        Z = X[t] @ Wx + h @ Wh + b
        i = expit(Z[:, :Hd])
        f = expit(Z[:, Hd:2 * Hd])
        g = np.tanh(Z[:, 2 * Hd:3 * Hd])
        o = expit(Z[:, 3 * Hd:])
        c = f * c + i * g
        h = o * np.tanh(c)
        I[t] = i
        F[t] = f
        G[t] = g
        O[t] = o
        C[t] = c
        H[t] = h
    return H, C, I, F, G, O


def lstm_layer_backward(X, Wx, Wh, I, F, G, O, C, H, dH_out, compute_dx):
    """Backpropagate through the unrolled layer (all arrays time-major).

    dH_out carries the upstream gradient on every step's hidden state.
    Returns (dX or None, dWx, dWh, db).
    """
    T, B, Din = X.shape
    Hd = Wh.shape[0]
    dt = X.dtype
    dWx = np.zeros_like(Wx)
    dWh = np.zeros_like(Wh)
    db = np.zeros(4 * Hd, dtype=dt)
    dX = np.zeros_like(X) if compute_dx else None
    dh_rec = np.zeros((B, Hd), dtype=dt)
    dc = np.zeros((B, Hd), dtype=dt)
    zeros = np.zeros((B, Hd), dtype=dt)
    for t in range(T - 1, -1, -1):
        i, f, g, o, c = I[t], F[t], G[t], O[t], C[t]
        tanh_c = np.tanh(c)
        dh = dH_out[t] + dh_rec
        do = dh * tanh_c
        dc = dc + dh * o * (1.0 - tanh_c * tanh_c)
        di = dc * g
        dg = dc * i
        c_prev = C[t - 1] if t > 0 else zeros
        df = dc * c_prev
        dZ = np.empty((B, 4 * Hd), dtype=dt)
        dZ[:, :Hd] = di * i * (1.0 - i)
        dZ[:, Hd:2 * Hd] = df * f * (1.0 - f)
        dZ[:, 2 * Hd:3 * Hd] = dg * (1.0 - g * g)
        dZ[:, 3 * Hd:] = do * o * (1.0 - o)
        h_prev = H[t - 1] if t > 0 else zeros
        dWx += X[t].T @ dZ
        dWh += h_prev.T @ dZ
        db += dZ.sum(axis=0)
        if compute_dx:
            dX[t] = dZ @ Wx.T
        dh_rec = dZ @ Wh.T
        dc = dc * f
    return dX, dWx, dWh, db
