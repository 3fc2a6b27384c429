import math

import numpy as np
import pytest

from georgian_wsd import embeddings
from georgian_wsd.embeddings import (
    EmbeddingConfig,
    EmbeddingMatrix,
    Vocabulary,
    build_negative_table,
    build_vocabulary,
    load_embeddings,
    nearest_neighbors,
    save_embeddings,
    sgns_pair_step,
    train_embeddings,
)
from georgian_wsd.formats import FormatError

W = [chr(0x10D0 + i) * 2 for i in range(20)]  # distinct Georgian-ish tokens


def _write_corpus(path, sentences):
    path.write_text("\n".join(" ".join(s) for s in sentences) + "\n", encoding="utf-8")


def _matrix(V, D, seed=0, zero_out=True):
    rs = np.random.RandomState(seed)
    vocab = Vocabulary(words=W[:V], index={w: i for i, w in enumerate(W[:V])},
                       counts={w: 10 for w in W[:V]}, min_count=1)
    inp = ((rs.rand(V, D) - 0.5) / D).astype(np.float32)
    out = np.zeros((V, D), np.float32) if zero_out else ((rs.rand(V, D) - 0.5)).astype(np.float32)
    return EmbeddingMatrix(vocab=vocab, input_vectors=inp, output_vectors=out)


class TestVocabulary:
    def test_min_count_boundary(self, tmp_path):
        sentences = [[W[0]] * 10, [W[1]] * 9, [W[2]] * 11]
        path = tmp_path / "c.txt"
        _write_corpus(path, sentences)
        vocab = build_vocabulary(path, 10)
        assert W[0] in vocab.index
        assert W[1] not in vocab.index
        assert W[2] in vocab.index

    def test_ordering_count_desc_then_lex(self, tmp_path):
        path = tmp_path / "c.txt"
        _write_corpus(path, [[W[3]] * 5 + [W[1]] * 5 + [W[2]] * 7])
        vocab = build_vocabulary(path, 1)
        assert vocab.words == [W[2], W[1], W[3]]

    def test_recount_oracle(self, tmp_path):
        # independent recount with a plain dict over the raw file
        rs = np.random.RandomState(4)
        sentences = [[W[rs.randint(8)] for _ in range(rs.randint(1, 12))] for _ in range(100)]
        path = tmp_path / "c.txt"
        _write_corpus(path, sentences)
        expected = {}
        for line in path.read_text(encoding="utf-8").splitlines():
            for tok in line.split():
                expected[tok] = expected.get(tok, 0) + 1
        vocab = build_vocabulary(path, 1)
        assert vocab.counts == expected

    def test_empty_vocabulary(self, tmp_path):
        path = tmp_path / "c.txt"
        _write_corpus(path, [[W[0]]])
        with pytest.raises(ValueError, match="min_count"):
            build_vocabulary(path, 2)


class TestPairStep:
    def test_zero_vectors(self):
        m = _matrix(5, 4)
        m.input_vectors[:] = 0.0
        n_neg = 3
        loss = sgns_pair_step(0, 1, [2, 3, 4][:n_neg], 0.1, m)
        assert loss == pytest.approx((1 + n_neg) * math.log(2.0), rel=1e-6)
        # sigma(0)=0.5 everywhere and all output rows are zero, so the
        # input gradient vanishes and output rows move by 0
        assert np.all(m.input_vectors == 0.0)
        assert np.all(m.output_vectors == 0.0)

    def test_hand_computed_2d_step(self):
        # independent scalar computation of one update at float64
        v = np.array([0.4, -0.2])
        u_pos = np.array([0.1, 0.3])
        u_neg = np.array([-0.5, 0.2])
        lr = 0.1
        zp = float(v @ u_pos)
        zn = float(v @ u_neg)
        sp = 1 / (1 + math.exp(-zp))
        sn = 1 / (1 + math.exp(-zn))
        want_loss = -math.log(sp) - math.log(1 - sn)
        want_u_pos = u_pos + lr * (1 - sp) * v
        want_u_neg = u_neg + lr * (-sn) * v
        want_v = v + lr * ((1 - sp) * u_pos + (-sn) * u_neg)

        vocab = Vocabulary(words=["a", "b", "c"], index={"a": 0, "b": 1, "c": 2},
                           counts={"a": 1, "b": 1, "c": 1}, min_count=1)
        m = EmbeddingMatrix(vocab=vocab,
                            input_vectors=np.array([v, [0, 0], [0, 0]], dtype=np.float64),
                            output_vectors=np.array([[0, 0], u_pos, u_neg], dtype=np.float64))
        loss = sgns_pair_step(0, 1, [2], lr, m)
        assert loss == pytest.approx(want_loss, rel=1e-12)
        np.testing.assert_allclose(m.output_vectors[1], want_u_pos, rtol=1e-12)
        np.testing.assert_allclose(m.output_vectors[2], want_u_neg, rtol=1e-12)
        np.testing.assert_allclose(m.input_vectors[0], want_v, rtol=1e-12)

    def test_gradient_matches_finite_differences(self):
        # oracle: central differences of an independently coded objective
        rs = np.random.RandomState(11)
        D = 8
        for trial in range(20):
            inp = rs.randn(3, D) * 0.5
            out = rs.randn(5, D) * 0.5
            center, context, negs = 1, 2, [3, 4]

            def objective(inp_a, out_a):
                z = out_a[context] @ inp_a[center]
                val = np.log1p(np.exp(-z))
                for neg in negs:
                    zn = out_a[neg] @ inp_a[center]
                    val += np.log1p(np.exp(zn))
                return val

            # analytic gradient recovered from the update with lr=1:
            # rows move by +grad(logL) = -grad(loss)
            vocab = Vocabulary(words=list("abcde"), index={c: i for i, c in enumerate("abcde")},
                               counts={c: 1 for c in "abcde"}, min_count=1)
            m = EmbeddingMatrix(vocab=vocab, input_vectors=inp.copy(), output_vectors=out.copy())
            sgns_pair_step(center, context, negs, 1.0, m)
            grad_inp = -(m.input_vectors - inp)
            grad_out = -(m.output_vectors - out)

            eps = 1e-6
            for arr, grad, name in ((inp, grad_inp, "inp"), (out, grad_out, "out")):
                it = np.nditer(arr, flags=["multi_index"])
                while not it.finished:
                    ij = it.multi_index
                    a_plus, a_minus = arr.copy(), arr.copy()
                    a_plus[ij] += eps
                    a_minus[ij] -= eps
                    if name == "inp":
                        num = (objective(a_plus, out) - objective(a_minus, out)) / (2 * eps)
                    else:
                        num = (objective(inp, a_plus) - objective(inp, a_minus)) / (2 * eps)
                    ana = grad[ij]
                    rel = abs(ana - num) / max(abs(ana), abs(num), 1e-8)
                    assert rel < 1e-5, "trial %d %s[%s]: %g vs %g" % (trial, name, ij, ana, num)
                    it.iternext()

    def test_update_uses_pre_update_values(self):
        # the input-row gradient must use the old output rows, so running the
        # analytic formula independently reproduces the update exactly
        rs = np.random.RandomState(3)
        m = _matrix(6, 4, zero_out=False)
        v0 = m.input_vectors[0].copy()
        u1 = m.output_vectors[1].copy()
        u2 = m.output_vectors[2].copy()
        lr = 0.5
        sgns_pair_step(0, 1, [2], lr, m)
        sp = 1 / (1 + np.exp(-float(u1 @ v0)))
        sn = 1 / (1 + np.exp(-float(u2 @ v0)))
        want_v = v0 + np.float32(lr) * ((1 - sp) * u1 + (-sn) * u2).astype(np.float32)
        np.testing.assert_allclose(m.input_vectors[0], want_v, rtol=1e-6)


class TestNegativeTable:
    def test_table_size_and_coverage(self):
        counts = np.array([100, 50, 10])
        table = build_negative_table(counts, 1000)
        assert table.shape == (1000,)
        frac = [np.mean(table == i) for i in range(3)]
        powed = counts**0.75
        want = powed / powed.sum()
        np.testing.assert_allclose(frac, want, atol=0.01)


class TestTrainEmbeddings:
    def _corpus(self, tmp_path):
        # A always next to B; C appears in unrelated sentences
        sents = []
        for k in range(80):
            sents.append([W[0], W[1], W[5 + k % 3]])
            sents.append([W[2], W[8 + k % 3], W[11 + k % 3]])
        path = tmp_path / "c.txt"
        _write_corpus(path, sents)
        return path

    def test_cooccurrence_orders_cosine(self, tmp_path):
        path = self._corpus(tmp_path)
        cfg = EmbeddingConfig(dimension=16, window=2, min_count=1, epochs=10,
                              negative_samples=5, table_size=10000, seed=1)
        m = train_embeddings(path, cfg)
        a, b, c = (m.input_vectors[m.vocab.index[W[i]]] for i in (0, 1, 2))

        def cos(x, y):
            return float(x @ y / (np.linalg.norm(x) * np.linalg.norm(y)))

        assert cos(a, b) > cos(a, c)

    def test_zero_epochs_returns_init(self, tmp_path):
        path = self._corpus(tmp_path)
        cfg0 = EmbeddingConfig(dimension=8, min_count=1, epochs=0, table_size=1000, seed=9)
        m0 = train_embeddings(path, cfg0)
        init = embeddings.init_matrix(build_vocabulary(path, 1), cfg0)
        assert np.array_equal(m0.input_vectors, init.input_vectors)
        assert np.all(m0.output_vectors == 0.0)

    def test_seeded_determinism_bitwise(self, tmp_path):
        path = self._corpus(tmp_path)
        cfg = EmbeddingConfig(dimension=8, window=3, min_count=1, epochs=3,
                              table_size=1000, seed=77)
        m1 = train_embeddings(path, cfg)
        m2 = train_embeddings(path, cfg)
        assert np.array_equal(m1.input_vectors, m2.input_vectors)
        assert np.array_equal(m1.output_vectors, m2.output_vectors)

    def test_epoch_loss_decreases(self, tmp_path):
        path = self._corpus(tmp_path)
        losses = []
        cfg = EmbeddingConfig(dimension=16, window=2, min_count=1, epochs=20,
                              table_size=10000, seed=5)
        train_embeddings(path, cfg, progress=lambda e, loss: losses.append(loss))
        assert len(losses) == 20
        assert losses[-1] < losses[0]
        assert all(l > 0 for l in losses)


class TestEmbeddingFile:
    def test_roundtrip_bitwise(self, tmp_path):
        m = _matrix(5, 3, zero_out=False)
        path = tmp_path / "e.bin"
        save_embeddings(m, path)
        got = load_embeddings(path)
        assert got.vocab == m.vocab
        assert np.array_equal(got.input_vectors, m.input_vectors)
        assert np.array_equal(got.output_vectors, m.output_vectors)

    def test_wrong_magic(self, tmp_path):
        path = tmp_path / "e.bin"
        path.write_bytes(b"NOPE" + b"\x00" * 64)
        with pytest.raises(FormatError, match="magic"):
            load_embeddings(path)

    def test_truncated(self, tmp_path):
        m = _matrix(4, 3)
        path = tmp_path / "e.bin"
        save_embeddings(m, path)
        data = path.read_bytes()
        path.write_bytes(data[:-5])
        with pytest.raises(FormatError, match="truncated"):
            load_embeddings(path)

    def test_payload_size_arithmetic(self, tmp_path):
        # V=3, D=2: each tableholds 3*2*4 bytes; header and vocab sizes are fixed
        m = _matrix(3, 2)
        path = tmp_path / "e.bin"
        save_embeddings(m, path)
        vocab_bytes = sum(4 + len(w.encode("utf-8")) + 8 for w in m.vocab.words)
        expected = 4 + 4 + 16 + vocab_bytes + 3 * 2 * 4 + 1 + 3 * 2 * 4
        assert path.stat().st_size == expected

    def test_output_table_optional(self, tmp_path):
        m = _matrix(3, 2, zero_out=False)
        path = tmp_path / "e.bin"
        save_embeddings(m, path, include_output=False)
        got = load_embeddings(path)
        assert np.all(got.output_vectors == 0.0)
        assert np.array_equal(got.input_vectors, m.input_vectors)


class TestNearestNeighbors:
    def test_self_excluded(self):
        m = _matrix(6, 4, zero_out=False)
        got = nearest_neighbors(m, W[0], 5)
        assert W[0] not in [w for w, _ in got]

    def test_planted_duplicate_is_rank_one(self):
        m = _matrix(6, 4, zero_out=False)
        m.input_vectors[3] = m.input_vectors[0] * 2.0  # same direction
        got = nearest_neighbors(m, W[0], 3)
        assert got[0][0] == W[3]
        assert got[0][1] == pytest.approx(1.0, abs=1e-6)

    def test_matches_exhaustive_scan(self):
        rs = np.random.RandomState(8)
        V, D = 20, 6
        vocab = Vocabulary(words=W[:V], index={w: i for i, w in enumerate(W[:V])},
                           counts={w: 1 for w in W[:V]}, min_count=1)
        vecs = rs.randn(V, D).astype(np.float32)
        m = EmbeddingMatrix(vocab=vocab, input_vectors=vecs, output_vectors=np.zeros_like(vecs))
        got = nearest_neighbors(m, W[4], 5)
        # oracle: full pairwise cosine scan in float64
        q = vecs[4].astype(np.float64)
        sims = []
        for i in range(V):
            if i == 4:
                continue
            x = vecs[i].astype(np.float64)
            sims.append((float(q @ x / (np.linalg.norm(q) * np.linalg.norm(x))), i))
        sims.sort(key=lambda t: (-t[0], t[1]))
        want = [(W[i], s) for s, i in sims[:5]]
        assert [w for w, _ in got] == [w for w, _ in want]
        np.testing.assert_allclose([s for _, s in got], [s for _, s in want], rtol=1e-9)

    def test_oov_word(self):
        m = _matrix(3, 2)
        with pytest.raises(KeyError, match="not in vocabulary"):
            nearest_neighbors(m, "zzz", 2)
