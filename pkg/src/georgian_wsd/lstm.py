"""Two-layer LSTM sense classifier trained by backpropagation through time.

Architecture: 13-step input of word vectors -> 64-unit LSTM -> 64-unit LSTM
-> softmax over the sense classes, reading only the final hidden state.
Both LSTM layers keep their gate weights stacked per layer in (i, f, g, o)
order: W_x is (D_in, 4H), W_h is (H, 4H), b is (4H,).
"""

import math
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from . import backend
from .formats import FormatError, read_exact
from .rng import Pcg32, STREAM_LSTM_INIT, STREAM_LSTM_SHUFFLE

MAGIC = b"WSDM"
FORMAT_VERSION = 1

DEFAULT_INPUT_DIM = 128
DEFAULT_HIDDEN = 64
DEFAULT_CLASSES = 3
DEFAULT_SEQ_LEN = 13

GATE_ORDER = "ifgo"


@dataclass
class LstmLayerParams:
    Wx: np.ndarray  # (D_in, 4H)
    Wh: np.ndarray  # (H, 4H)
    b: np.ndarray  # (4H,)

    @property
    def hidden(self) -> int:
        return self.Wh.shape[0]

    @property
    def input_dim(self) -> int:
        return self.Wx.shape[0]

    def gate(self, which: str, table: str = "Wx") -> np.ndarray:
        """Slice one gate's block out of the stacked arrays."""
        g = GATE_ORDER.index(which)
        H = self.hidden
        arr = getattr(self, table)
        if table == "b":
            return arr[g * H:(g + 1) * H]
        return arr[:, g * H:(g + 1) * H]


@dataclass
class LstmModel:
    layer1: LstmLayerParams
    layer2: LstmLayerParams
    softmax_W: np.ndarray  # (H, C)
    softmax_b: np.ndarray  # (C,)
    sequence_length: int = DEFAULT_SEQ_LEN

    @property
    def input_dim(self) -> int:
        return self.layer1.input_dim

    @property
    def hidden(self) -> int:
        return self.layer1.hidden

    @property
    def n_classes(self) -> int:
        return self.softmax_W.shape[1]

    @property
    def dtype(self):
        return self.layer1.Wx.dtype

    def param_arrays(self) -> list:
        """All trainable arrays in a fixed order (gradients align with this)."""
        return [
            self.layer1.Wx, self.layer1.Wh, self.layer1.b,
            self.layer2.Wx, self.layer2.Wh, self.layer2.b,
            self.softmax_W, self.softmax_b,
        ]

    def copy_params(self) -> list:
        return [a.copy() for a in self.param_arrays()]

    def load_param_arrays(self, arrays) -> None:
        for dst, src in zip(self.param_arrays(), arrays):
            dst[...] = src


@dataclass
class ClassifierTrainConfig:
    max_epochs: int = 40
    batch_size: int = 16
    learning_rate: float = 0.001
    optimizer: str = "adam"  # or "sgd"
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    early_stopping_patience: int | None = 5  # None disables early stopping
    gradient_clip_norm: float = 5.0
    seed: int = 42

    def __post_init__(self):
        if self.max_epochs < 1 or self.batch_size < 1 or self.learning_rate <= 0:
            raise ValueError("max_epochs, batch_size and learning_rate must be positive")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError("optimizer must be adam or sgd")
        if self.early_stopping_patience is not None:
            if not 0 < self.early_stopping_patience < self.max_epochs:
                raise ValueError("patience must lie in 1..max_epochs-1")


@dataclass
class TrainingHistory:
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    val_accuracy: list = field(default_factory=list)
    best_epoch: int = 0  # 1-based epoch of minimum validation loss
    stopped_early: bool = False


def _glorot(state, shape, fan_in, fan_out, dtype):
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    raw = np.empty(int(np.prod(shape)), dtype=np.uint32)
    backend.rng_fill_u32(state, raw)
    vals = (raw.astype(np.float64) * 2.0**-32 * 2.0 - 1.0) * limit
    return vals.astype(dtype).reshape(shape)


def _init_layer(state, input_dim, hidden, dtype) -> LstmLayerParams:
    Wx = np.empty((input_dim, 4 * hidden), dtype=dtype)
    Wh = np.empty((hidden, 4 * hidden), dtype=dtype)
    b = np.zeros(4 * hidden, dtype=dtype)
    for g in range(4):
        Wx[:, g * hidden:(g + 1) * hidden] = _glorot(state, (input_dim, hidden), input_dim, hidden, dtype)
        Wh[:, g * hidden:(g + 1) * hidden] = _glorot(state, (hidden, hidden), hidden, hidden, dtype)
    b[hidden:2 * hidden] = 1.0  # forget gate starts open
    return LstmLayerParams(Wx=Wx, Wh=Wh, b=b)


def new_model(input_dim=DEFAULT_INPUT_DIM, hidden=DEFAULT_HIDDEN, n_classes=DEFAULT_CLASSES,
              seq_len=DEFAULT_SEQ_LEN, seed=42, dtype=np.float32) -> LstmModel:
    """Glorot-uniform weights from the seed; forget-gate biases at 1.0."""
    state = Pcg32(seed, STREAM_LSTM_INIT).state_array()
    layer1 = _init_layer(state, input_dim, hidden, dtype)
    layer2 = _init_layer(state, hidden, hidden, dtype)
    softmax_W = _glorot(state, (hidden, n_classes), hidden, n_classes, dtype)
    softmax_b = np.zeros(n_classes, dtype=dtype)
    return LstmModel(layer1=layer1, layer2=layer2, softmax_W=softmax_W,
                     softmax_b=softmax_b, sequence_length=seq_len)


def parameter_count(model: LstmModel) -> int:
    return sum(a.size for a in model.param_arrays())


def embed_window(window, matrix, seq_len=None) -> np.ndarray:
    """Window tokens -> (seq_len, D) rows of word vectors.

    Short windows are left-padded with zero rows so the last token lands on
    the final step; out-of-vocabulary tokens map to the zero vector.
    """
    seq_len = DEFAULT_SEQ_LEN if seq_len is None else seq_len
    D = matrix.dimension
    if len(window.tokens) > seq_len:
        raise ValueError("window of %d tokens exceeds sequence length %d" % (len(window.tokens), seq_len))
    X = np.zeros((seq_len, D), dtype=matrix.input_vectors.dtype)
    offset = seq_len - len(window.tokens)
    for t, tok in enumerate(window.tokens):
        wid = matrix.vocab.index.get(tok)
        if wid is not None:
            X[offset + t] = matrix.input_vectors[wid]
    return X


def lstm_cell_forward(x, h_prev, c_prev, params: LstmLayerParams):
    """Single-step cell update; returns (h, c, cache of gate activations)."""
    H = params.hidden
    z = x @ params.Wx + h_prev @ params.Wh + params.b
    i = expit(z[:H])
    f = expit(z[H:2 * H])
    g = np.tanh(z[2 * H:3 * H])
    o = expit(z[3 * H:])
    c = f * c_prev + i * g
    h = o * np.tanh(c)
    cache = {"i": i, "f": f, "g": g, "o": o, "c": c, "c_prev": c_prev, "h_prev": h_prev, "x": x}
    return h, c, cache


def _forward_batch(model: LstmModel, X):
    """Both layers over a (B, T, D) batch; returns (probs, caches).

    Kernels run time-major, so the batch is transposed to (T, B, D) once.
    """
    Xt = np.ascontiguousarray(np.transpose(X, (1, 0, 2)))
    l1, l2 = model.layer1, model.layer2
    H1, C1, I1, F1, G1, O1 = backend.lstm_layer_forward(Xt, l1.Wx, l1.Wh, l1.b)
    H2, C2, I2, F2, G2, O2 = backend.lstm_layer_forward(H1, l2.Wx, l2.Wh, l2.b)
    hlast = H2[-1]
    logits = hlast @ model.softmax_W + model.softmax_b
    zmax = logits.max(axis=1, keepdims=True)
    expz = np.exp(logits - zmax)
    probs = expz / expz.sum(axis=1, keepdims=True)
    caches = {
        "X": Xt, "H1": H1, "C1": C1, "I1": I1, "F1": F1, "G1": G1, "O1": O1,
        "H2": H2, "C2": C2, "I2": I2, "F2": F2, "G2": G2, "O2": O2,
        "logits": logits, "probs": probs,
    }
    return probs, caches


def forward(model: LstmModel, x):
    """Class probabilities for one (T, D) input matrix."""
    x = np.asarray(x, dtype=model.dtype)
    if x.shape != (model.sequence_length, model.input_dim):
        raise ValueError("input shape %r, expected %r" % (x.shape, (model.sequence_length, model.input_dim)))
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite values in forward input")
    probs, caches = _forward_batch(model, x[None, :, :])
    return probs[0], caches


def _loss_and_grads_arrays(model: LstmModel, X, y, clip_norm=None):
    """Mean cross-entropy and gradients for every parameter, BPTT over both layers."""
    B = X.shape[0]
    probs, cc = _forward_batch(model, X)
    logits = cc["logits"]
    zmax = logits.max(axis=1, keepdims=True)
    logsumexp = np.log(np.exp(logits - zmax).sum(axis=1)) + zmax[:, 0]
    loss = float(np.mean(logsumexp - logits[np.arange(B), y]))
    if not math.isfinite(loss):
        raise FloatingPointError("non-finite training loss")

    dlogits = probs.copy()
    dlogits[np.arange(B), y] -= 1.0
    dlogits /= B
    hlast = cc["H2"][-1]
    dWs = hlast.T @ dlogits
    dbs = dlogits.sum(axis=0)
    dH2 = np.zeros_like(cc["H2"])
    dH2[-1] = dlogits @ model.softmax_W.T

    l1, l2 = model.layer1, model.layer2
    dH1, dWx2, dWh2, db2 = backend.lstm_layer_backward(
        cc["H1"], l2.Wx, l2.Wh, cc["I2"], cc["F2"], cc["G2"], cc["O2"], cc["C2"], cc["H2"], dH2, True)
    _, dWx1, dWh1, db1 = backend.lstm_layer_backward(
        cc["X"], l1.Wx, l1.Wh, cc["I1"], cc["F1"], cc["G1"], cc["O1"], cc["C1"], cc["H1"], dH1, False)

    grads = [dWx1, dWh1, db1, dWx2, dWh2, db2, dWs, dbs]
    if clip_norm is not None:
        total = math.sqrt(sum(float(np.sum(g.astype(np.float64) ** 2)) for g in grads))
        if total > clip_norm:
            scale = clip_norm / total  # python float: keeps each gradient's dtype
            grads = [g * scale for g in grads]
    return loss, grads


def loss_and_gradients(model: LstmModel, batch, clip_norm=None):
    """batch: list of ((T, D) input, label). Returns (loss, gradient list).

    Gradients align with model.param_arrays(); when clip_norm is given the
    global L2 norm is clipped before returning.
    """
    if not batch:
        raise ValueError("batch must be non-empty")
    X = np.stack([np.asarray(x, dtype=model.dtype) for x, _ in batch])
    y = np.array([label for _, label in batch], dtype=np.int64)
    if y.min() < 0 or y.max() >= model.n_classes:
        raise ValueError("labels must lie in 0..%d" % (model.n_classes - 1))
    return _loss_and_grads_arrays(model, X, y, clip_norm)


def predict(model: LstmModel, window, matrix):
    """(label, probs) for one sentence window; ties resolve to the lowest class."""
    probs, _ = forward(model, embed_window(window, matrix, model.sequence_length))
    return int(np.argmax(probs)), probs


def _batched_eval(model: LstmModel, X, y, batch=256):
    """(mean loss, accuracy) over an example array, without gradients."""
    n = X.shape[0]
    loss_sum = 0.0
    correct = 0
    for s in range(0, n, batch):
        xs = X[s:s + batch]
        ys = y[s:s + batch]
        probs, cc = _forward_batch(model, xs)
        logits = cc["logits"]
        zmax = logits.max(axis=1, keepdims=True)
        logsumexp = np.log(np.exp(logits - zmax).sum(axis=1)) + zmax[:, 0]
        loss_sum += float(np.sum(logsumexp - logits[np.arange(len(ys)), ys]))
        correct += int(np.sum(np.argmax(probs, axis=1) == ys))
    return loss_sum / n, correct / n


class _AdamState:
    def __init__(self, params, beta1, beta2, eps):
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0

    def update(self, params, grads, lr):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        # bias correction folded into the step size
        step = lr * math.sqrt(1.0 - b2**self.t) / (1.0 - b1**self.t)
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g)
            p -= step * m / (np.sqrt(v) + self.eps)


def examples_to_arrays(examples, matrix, seq_len=DEFAULT_SEQ_LEN):
    """LabeledExamples -> (X, y) arrays ready for the trainer."""
    X = np.stack([embed_window(ex.window, matrix, seq_len) for ex in examples])
    y = np.array([ex.label for ex in examples], dtype=np.int64)
    return X, y


def train(train_examples, val_examples, matrix, config: ClassifierTrainConfig,
          hidden=DEFAULT_HIDDEN, seq_len=DEFAULT_SEQ_LEN, n_classes=None, log=None):
    """Train the classifier with mini-batches and validation early stopping.

    val_examples may be None/empty only when early stopping is disabled
    (early_stopping_patience=None); the best-validation-loss weights are
    restored before returning.  log, when given, receives one line per epoch.
    """
    if not train_examples:
        raise ValueError("training set is empty")
    labels = [ex.label for ex in train_examples] + [ex.label for ex in (val_examples or [])]
    if min(labels) < 0:
        raise ValueError("classifier labels must be senses 0..K-1 (drop OTHER first)")
    if n_classes is None:
        n_classes = max(labels) + 1
    use_val = bool(val_examples)
    if not use_val and config.early_stopping_patience is not None:
        raise ValueError("early stopping needs a validation set")

    X_train, y_train = examples_to_arrays(train_examples, matrix, seq_len)
    if use_val:
        X_val, y_val = examples_to_arrays(val_examples, matrix, seq_len)

    model = new_model(matrix.dimension, hidden, n_classes, seq_len, seed=config.seed)
    params = model.param_arrays()
    adam = _AdamState(params, config.adam_beta1, config.adam_beta2, config.adam_eps) \
        if config.optimizer == "adam" else None

    shuffle_rng = Pcg32(config.seed, STREAM_LSTM_SHUFFLE)
    history = TrainingHistory()
    best_val = math.inf
    best_params = None
    best_epoch = 0
    bad_epochs = 0
    n = len(train_examples)

    for epoch in range(1, config.max_epochs + 1):
        order = list(range(n))
        shuffle_rng.shuffle(order)
        loss_sum = 0.0
        for bi, start in enumerate(range(0, n, config.batch_size)):
            idx = order[start:start + config.batch_size]
            try:
                loss, grads = _loss_and_grads_arrays(
                    model, X_train[idx], y_train[idx], config.gradient_clip_norm)
            except FloatingPointError as exc:
                raise FloatingPointError("epoch %d batch %d: %s" % (epoch, bi, exc)) from exc
            loss_sum += loss * len(idx)
            if adam is not None:
                adam.update(params, grads, config.learning_rate)
            else:
                for p, g in zip(params, grads):
                    p -= (config.learning_rate * g).astype(p.dtype)
        train_loss = loss_sum / n
        history.train_loss.append(train_loss)

        if use_val:
            val_loss, val_acc = _batched_eval(model, X_val, y_val)
            history.val_loss.append(val_loss)
            history.val_accuracy.append(val_acc)
            if log is not None:
                log("epoch %d: train_loss=%.6f val_loss=%.6f val_acc=%.4f" % (epoch, train_loss, val_loss, val_acc))
            if val_loss < best_val:
                best_val = val_loss
                best_params = model.copy_params()
                best_epoch = epoch
                bad_epochs = 0
            else:
                bad_epochs += 1
                if config.early_stopping_patience is not None and bad_epochs >= config.early_stopping_patience:
                    history.stopped_early = True
                    break
        else:
            if log is not None:
                log("epoch %d: train_loss=%.6f" % (epoch, train_loss))

    if use_val and best_params is not None:
        model.load_param_arrays(best_params)
        history.best_epoch = best_epoch
    else:
        history.best_epoch = len(history.train_loss)
    return model, history


def save_model(model: LstmModel, path) -> None:
    """Binary model file: WSDM magic, dims, then per-gate tensors in i,f,g,o order."""
    H = model.hidden
    with open(path, "wb") as out:
        out.write(MAGIC)
        out.write(struct.pack("<I", FORMAT_VERSION))
        out.write(struct.pack("<IIII", model.input_dim, H, model.n_classes, model.sequence_length))
        for layer in (model.layer1, model.layer2):
            for g in GATE_ORDER:
                out.write(np.ascontiguousarray(layer.gate(g, "Wx"), dtype="<f4").tobytes())
                out.write(np.ascontiguousarray(layer.gate(g, "Wh"), dtype="<f4").tobytes())
                out.write(np.ascontiguousarray(layer.gate(g, "b"), dtype="<f4").tobytes())
        out.write(np.ascontiguousarray(model.softmax_W, dtype="<f4").tobytes())
        out.write(np.ascontiguousarray(model.softmax_b, dtype="<f4").tobytes())


def _read_f32(fh, shape, what):
    n = int(np.prod(shape))
    return np.frombuffer(read_exact(fh, n * 4, what), dtype="<f4").reshape(shape).copy()


def load_model(path) -> LstmModel:
    with open(path, "rb") as fh:
        magic = read_exact(fh, 4, "magic")
        if magic != MAGIC:
            raise FormatError("bad magic %r, expected %r" % (magic, MAGIC))
        (version,) = struct.unpack("<I", read_exact(fh, 4, "version"))
        if version != FORMAT_VERSION:
            raise FormatError("unsupported model format version %d" % version)
        d_in, H, C, T = struct.unpack("<IIII", read_exact(fh, 16, "dims"))
        layers = []
        for input_dim in (d_in, H):
            Wx = np.empty((input_dim, 4 * H), dtype=np.float32)
            Wh = np.empty((H, 4 * H), dtype=np.float32)
            b = np.empty(4 * H, dtype=np.float32)
            for g in range(4):
                Wx[:, g * H:(g + 1) * H] = _read_f32(fh, (input_dim, H), "W_x gate %d" % g)
                Wh[:, g * H:(g + 1) * H] = _read_f32(fh, (H, H), "W_h gate %d" % g)
                b[g * H:(g + 1) * H] = _read_f32(fh, (H,), "bias gate %d" % g)
            layers.append(LstmLayerParams(Wx=Wx, Wh=Wh, b=b))
        softmax_W = _read_f32(fh, (H, C), "softmax weights")
        softmax_b = _read_f32(fh, (C,), "softmax bias")
        extra = fh.read(1)
        if extra:
            raise FormatError("trailing bytes after model payload")
    return LstmModel(layer1=layers[0], layer2=layers[1], softmax_W=softmax_W,
                     softmax_b=softmax_b, sequence_length=T)
