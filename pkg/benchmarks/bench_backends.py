"""Compare the compiled kernels against the pure numpy fallback.

Runs the two hot paths (skip-gram epoch, LSTM forward+backward) through
both backends on identical inputs, checks they agree, and reports throughput.

    python benchmarks/bench_backends.py [--quick]
"""

import argparse
import time

import numpy as np

from georgian_wsd import _kernels_py as pure
from georgian_wsd import synthetic
from georgian_wsd.rng import Pcg32

try:
    from georgian_wsd import _kernels as compiled
except ImportError:
    compiled = None


def bench_sgns(impl, n_windows, epochs, dim):
    examples = synthetic.make_dataset(n_windows, seed=1)
    vocab = {}
    sents = []
    for ex in examples:
        ids = []
        for tok in ex.window.tokens:
            ids.append(vocab.setdefault(tok, len(vocab)))
        sents.append(ids)
    V = len(vocab)
    flat = np.array([w for s in sents for w in s], dtype=np.int32)
    offsets = np.zeros(len(sents) + 1, dtype=np.int64)
    np.cumsum([len(s) for s in sents], out=offsets[1:])
    table = np.arange(V, dtype=np.int32).repeat(50)
    rs = np.random.RandomState(0)
    inp = ((rs.rand(V, dim) - 0.5) / dim).astype(np.float32)
    out = np.zeros((V, dim), dtype=np.float32)
    state = Pcg32(3, 3).state_array()
    total = int(flat.shape[0]) * epochs
    words_done = 0
    pairs = 0
    started = time.perf_counter()
    for _ in range(epochs):
        _, p, words_done = impl.sgns_train_epoch(
            inp, out, flat, offsets, table, 10, 5, state, words_done, total, 0.025, 1e-4)
        pairs += p
    elapsed = time.perf_counter() - started
    return pairs / elapsed, inp


def bench_lstm(impl, batches, B=16, T=13, D=128, H=64):
    rs = np.random.RandomState(0)
    X = rs.standard_normal((T, B, D)).astype(np.float32)
    Wx1 = (rs.standard_normal((D, 4 * H)) * 0.05).astype(np.float32)
    Wh1 = (rs.standard_normal((H, 4 * H)) * 0.05).astype(np.float32)
    b1 = np.zeros(4 * H, np.float32)
    Wx2 = (rs.standard_normal((H, 4 * H)) * 0.05).astype(np.float32)
    Wh2 = (rs.standard_normal((H, 4 * H)) * 0.05).astype(np.float32)
    b2 = np.zeros(4 * H, np.float32)
    dH2 = rs.standard_normal((T, B, H)).astype(np.float32)
    started = time.perf_counter()
    sink = 0.0
    for _ in range(batches):
        f1 = impl.lstm_layer_forward(X, Wx1, Wh1, b1)
        f2 = impl.lstm_layer_forward(f1[0], Wx2, Wh2, b2)
        H2s, C2, I2, F2, G2, O2 = f2
        dH1, dWx2, dWh2, db2 = impl.lstm_layer_backward(
            f1[0], Wx2, Wh2, I2, F2, G2, O2, C2, H2s, dH2, True)
        H1s, C1, I1, F1, G1, O1 = f1
        _, dWx1, dWh1, db1 = impl.lstm_layer_backward(
            X, Wx1, Wh1, I1, F1, G1, O1, C1, H1s, dH1, False)
        sink += float(db1[0])
    elapsed = time.perf_counter() - started
    return batches * B / elapsed, sink


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--quick", action="store_true", help="smaller workloads")
    args = parser.parse_args()

    if compiled is None:
        print("compiled backend not built; run pip install -e . --no-build-isolation")
        return 1

    n_windows = 500 if args.quick else 2000
    epochs = 2 if args.quick else 5
    batches = 100 if args.quick else 400

    print("== skip-gram epoch (window 10, 5 negatives, dim 128) ==")
    fast, inp_fast = bench_sgns(compiled, n_windows, epochs, 128)
    slow, inp_slow = bench_sgns(pure, n_windows, epochs, 128)
    agree = np.allclose(inp_fast, inp_slow, rtol=1e-4, atol=1e-6)
    print("compiled: %11.0f pairs/s" % fast)
    print("pure:     %11.0f pairs/s" % slow)
    print("speedup:  %10.1fx   (results agree: %s)" % (fast / slow, agree))

    print("== LSTM fwd+bwd (B=16, T=13, 128->64->64) ==")
    fast, _ = bench_lstm(compiled, batches)
    slow, _ = bench_lstm(pure, batches)
    print("compiled: %11.0f examples/s" % fast)
    print("pure:     %11.0f examples/s" % slow)
    print("speedup:  %10.1fx" % (fast / slow))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
