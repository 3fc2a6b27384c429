"""Compiled-vs-pure kernel agreement, and the epoch kernel against its
per-pair composition."""

import os
import subprocess
import sys

import numpy as np
import pytest

from georgian_wsd import _kernels_py as pure
from georgian_wsd import backend
from georgian_wsd.embeddings import sgns_pair_step  # noqa: F401  (semantics under test)
from georgian_wsd.rng import Pcg32

compiled = pytest.importorskip("georgian_wsd._kernels")


def _sgns_inputs(V=30, D=8, n_tokens=300, seed=1):
    rs = np.random.RandomState(seed)
    inp = ((rs.rand(V, D) - 0.5) / D).astype(np.float32)
    out = np.zeros((V, D), dtype=np.float32)
    lens = []
    remaining = n_tokens
    while remaining > 0:
        n = min(remaining, 1 + rs.randint(12))
        lens.append(n)
        remaining -= n
    flat = rs.randint(0, V, sum(lens)).astype(np.int32)
    offsets = np.zeros(len(lens) + 1, dtype=np.int64)
    np.cumsum(lens, out=offsets[1:])
    table = rs.randint(0, V, 500).astype(np.int32)
    return inp, out, flat, offsets, table


def test_rng_streams_identical():
    s1 = Pcg32(42, 3).state_array()
    s2 = Pcg32(42, 3).state_array()
    a = np.empty(4096, np.uint32)
    b = np.empty(4096, np.uint32)
    compiled.rng_fill_u32(s1, a)
    pure.rng_fill_u32(s2, b)
    assert np.array_equal(a, b)
    assert np.array_equal(s1, s2)


@pytest.mark.parametrize("dtype,tol", [(np.float32, 1e-5), (np.float64, 1e-10)])
def test_lstm_layer_parity(dtype, tol):
    rs = np.random.RandomState(0)
    T, B, Din, H = 7, 5, 6, 4
    X = rs.standard_normal((T, B, Din)).astype(dtype)
    Wx = (rs.standard_normal((Din, 4 * H)) * 0.4).astype(dtype)
    Wh = (rs.standard_normal((H, 4 * H)) * 0.4).astype(dtype)
    b = (rs.standard_normal(4 * H) * 0.2).astype(dtype)
    fc = compiled.lstm_layer_forward(X, Wx, Wh, b)
    fp = pure.lstm_layer_forward(X, Wx, Wh, b)
    for name, xc, xp in zip("HCIFGO", fc, fp):
        np.testing.assert_allclose(xc, xp, rtol=tol, atol=tol, err_msg=name)
    dH = rs.standard_normal((T, B, H)).astype(dtype)
    Hs, Cs, Is, Fs, Gs, Os = fc
    gc = compiled.lstm_layer_backward(X, Wx, Wh, Is, Fs, Gs, Os, Cs, Hs, dH, True)
    Hs, Cs, Is, Fs, Gs, Os = fp
    gp = pure.lstm_layer_backward(X, Wx, Wh, Is, Fs, Gs, Os, Cs, Hs, dH, True)
    for name, xc, xp in zip(("dX", "dWx", "dWh", "db"), gc, gp):
        np.testing.assert_allclose(xc, xp, rtol=tol, atol=tol, err_msg=name)


def test_lstm_backward_skips_dx_when_disabled():
    rs = np.random.RandomState(1)
    T, B, Din, H = 3, 2, 4, 3
    X = rs.standard_normal((T, B, Din)).astype(np.float32)
    Wx = rs.standard_normal((Din, 4 * H)).astype(np.float32)
    Wh = rs.standard_normal((H, 4 * H)).astype(np.float32)
    b = np.zeros(4 * H, np.float32)
    for impl in (compiled, pure):
        Hs, Cs, Is, Fs, Gs, Os = impl.lstm_layer_forward(X, Wx, Wh, b)
        dH = np.ones((T, B, H), np.float32)
        dX, dWx, dWh, db = impl.lstm_layer_backward(X, Wx, Wh, Is, Fs, Gs, Os, Cs, Hs, dH, False)
        assert dX is None
        assert dWx.shape == Wx.shape


def test_sgns_epoch_parity():
    i1, o1, flat, offsets, table = _sgns_inputs()
    i2, o2 = i1.copy(), o1.copy()
    s1 = Pcg32(9, 3).state_array()
    s2 = Pcg32(9, 3).state_array()
    total = int(flat.shape[0]) * 2
    r1 = compiled.sgns_train_epoch(i1, o1, flat, offsets, table, 5, 3, s1, 0, total, 0.025, 1e-4)
    r2 = pure.sgns_train_epoch(i2, o2, flat, offsets, table, 5, 3, s2, 0, total, 0.025, 1e-4)
    assert r1[1] == r2[1]  # pair counts
    assert r1[2] == r2[2]  # word counters
    assert np.array_equal(s1, s2)  # identical RNG consumption
    assert abs(r1[0] - r2[0]) <= 1e-6 * abs(r2[0])
    np.testing.assert_allclose(i1, i2, rtol=1e-4, atol=1e-7)
    np.testing.assert_allclose(o1, o2, rtol=1e-4, atol=1e-7)


def test_pure_epoch_equals_pair_step_replay():
    """The epoch kernel is, by contract, this exact loop over sgns_pair_step."""
    inp, out, flat, offsets, table = _sgns_inputs(n_tokens=120, seed=3)
    inp2, out2 = inp.copy(), out.copy()
    window, negative = 4, 2
    lr0, lr_min = 0.05, 1e-4
    total = int(flat.shape[0])

    state = Pcg32(17, 3).state_array()
    pure.sgns_train_epoch(inp, out, flat, offsets, table, window, negative,
                          state, 0, total, lr0, lr_min)

    from georgian_wsd.embeddings import EmbeddingMatrix, Vocabulary

    words = ["w%d" % i for i in range(inp2.shape[0])]
    matrix = EmbeddingMatrix(
        vocab=Vocabulary(words=words, index={w: i for i, w in enumerate(words)},
                         counts={w: 1 for w in words}, min_count=1),
        input_vectors=inp2, output_vectors=out2)
    rng = Pcg32(17, 3)
    words_done = 0
    for si in range(len(offsets) - 1):
        sent = flat[offsets[si]:offsets[si + 1]]
        for pos in range(len(sent)):
            lr = lr0 + (lr_min - lr0) * (words_done / total)
            lr = max(lr, lr_min)
            radius = 1 + rng.randint(window)
            for pos2 in range(max(0, pos - radius), min(len(sent), pos + radius + 1)):
                if pos2 == pos:
                    continue
                negs = []
                for _ in range(negative):
                    neg = int(table[rng.randint(len(table))])
                    if neg != int(sent[pos2]):
                        negs.append(neg)
                sgns_pair_step(int(sent[pos]), int(sent[pos2]), negs, lr, matrix)
            words_done += 1

    assert np.array_equal(inp, inp2)
    assert np.array_equal(out, out2)


def test_backend_name_reported():
    assert backend.BACKEND in ("compiled", "pure")
    assert backend.backend_name() == backend.BACKEND


def test_forcing_pure_backend():
    env = dict(os.environ, WSD_BACKEND="pure")
    code = "from georgian_wsd import backend; print(backend.BACKEND)"
    got = subprocess.run([sys.executable, "-c", code], env=env,
                         capture_output=True, text=True)
    assert got.stdout.strip() == "pure"


def test_forcing_compiled_backend():
    env = dict(os.environ, WSD_BACKEND="compiled")
    code = "from georgian_wsd import backend; print(backend.BACKEND)"
    got = subprocess.run([sys.executable, "-c", code], env=env,
                         capture_output=True, text=True)
    assert got.stdout.strip() == "compiled"
