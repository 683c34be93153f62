"""Encoder-decoder LSTM over (x, y, dt) triples, written directly in numpy.

The encoder folds the input window into a final ``(h, c)`` state. The
decoder starts from that state and receives the encoder's final hidden
vector as its input at every step, so all ``w_out`` outputs are produced
from one query. A linear readout maps each decoder hidden state to a
normalised ``(x, y, dt)`` triple.

Gate rows in every weight matrix are ordered ``[input, forget, cell,
output]``. All arithmetic is float64.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from evtraj.events import SENSOR_HEIGHT, SENSOR_WIDTH
from evtraj.tracker import TRACK_DTYPE

log = logging.getLogger(__name__)

PARAM_NAMES = (
    "encoder.W_ih",
    "encoder.W_hh",
    "encoder.b",
    "decoder.W_ih",
    "decoder.W_hh",
    "decoder.b",
    "readout.W",
    "readout.b",
)


class TrainingDivergedError(FloatingPointError):
    """Raised when the training loss becomes NaN or infinite."""


def sigmoid(z):
    # tanh form avoids overflow warnings for large |z|
    return 0.5 * (1.0 + np.tanh(0.5 * z))


@dataclass
class LstmLayerParams:
    W_ih: np.ndarray
    W_hh: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.W_ih = np.asarray(self.W_ih, dtype=np.float64)
        self.W_hh = np.asarray(self.W_hh, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)
        h4, _ = self.W_ih.shape
        if h4 % 4 or self.W_hh.shape != (h4, h4 // 4) or self.b.shape != (h4,):
            raise ValueError(
                f"inconsistent LSTM shapes W_ih={self.W_ih.shape} "
                f"W_hh={self.W_hh.shape} b={self.b.shape}"
            )

    @property
    def input_size(self) -> int:
        return self.W_ih.shape[1]

    @property
    def hidden_size(self) -> int:
        return self.W_hh.shape[1]

    @classmethod
    def initialize(cls, input_size: int, hidden_size: int, rng: np.random.Generator) -> "LstmLayerParams":
        """Uniform(-1/sqrt(H), 1/sqrt(H)) weights, forget-gate bias 1."""
        k = 1.0 / math.sqrt(hidden_size)
        W_ih = rng.uniform(-k, k, size=(4 * hidden_size, input_size))
        W_hh = rng.uniform(-k, k, size=(4 * hidden_size, hidden_size))
        b = np.zeros(4 * hidden_size)
        b[hidden_size : 2 * hidden_size] = 1.0
        return cls(W_ih, W_hh, b)

    @classmethod
    def zeros(cls, input_size: int, hidden_size: int) -> "LstmLayerParams":
        return cls(
            np.zeros((4 * hidden_size, input_size)),
            np.zeros((4 * hidden_size, hidden_size)),
            np.zeros(4 * hidden_size),
        )


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


@dataclass(frozen=True)
class NormalizationSpec:
    """Per-channel scales mapping (px, px, ms) to network units."""

    x_scale: float = 1.0 / SENSOR_WIDTH
    y_scale: float = 1.0 / SENSOR_HEIGHT
    dt_scale: float = 1.0 / 50.0

    def __post_init__(self):
        for s in (self.x_scale, self.y_scale, self.dt_scale):
            if not (math.isfinite(s) and s > 0):
                raise ValueError(f"normalisation scales must be positive and finite, got {s}")

    @property
    def scales(self) -> np.ndarray:
        return np.array([self.x_scale, self.y_scale, self.dt_scale])

    def normalize(self, triples) -> np.ndarray:
        return np.asarray(triples, dtype=np.float64) * self.scales

    def denormalize(self, triples) -> np.ndarray:
        return np.asarray(triples, dtype=np.float64) / self.scales


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    epochs: int = 200
    batch_size: int = 128
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    # keep the parameters of the epoch with the lowest validation loss
    restore_best: bool = False

    def __post_init__(self):
        if not (self.learning_rate >= 0 and math.isfinite(self.learning_rate)):
            raise ValueError("learning_rate must be finite and non-negative")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")


@dataclass
class Seq2SeqModel:
    encoder: LstmLayerParams
    decoder: LstmLayerParams
    W_out: np.ndarray
    b_out: np.ndarray
    norm: NormalizationSpec = field(default_factory=NormalizationSpec)
    optimizer: AdamState = field(default_factory=AdamState)

    def __post_init__(self):
        self.W_out = np.asarray(self.W_out, dtype=np.float64)
        self.b_out = np.asarray(self.b_out, dtype=np.float64)
        H = self.encoder.hidden_size
        if self.decoder.input_size != H or self.decoder.hidden_size != H:
            raise ValueError("decoder must take and keep the encoder's hidden size")
        if self.W_out.shape != (self.b_out.shape[0], H):
            raise ValueError(f"readout shape {self.W_out.shape} does not match hidden size {H}")

    @classmethod
    def create(cls, input_size: int = 3, hidden_size: int = 25, output_size: int = 3, seed: int = 0,
               norm: Optional[NormalizationSpec] = None) -> "Seq2SeqModel":
        rng = np.random.default_rng(seed)
        enc = LstmLayerParams.initialize(input_size, hidden_size, rng)
        dec = LstmLayerParams.initialize(hidden_size, hidden_size, rng)
        k = 1.0 / math.sqrt(hidden_size)
        W_out = rng.uniform(-k, k, size=(output_size, hidden_size))
        return cls(enc, dec, W_out, np.zeros(output_size), norm or NormalizationSpec())

    @classmethod
    def zeros(cls, input_size: int = 3, hidden_size: int = 25, output_size: int = 3) -> "Seq2SeqModel":
        return cls(
            LstmLayerParams.zeros(input_size, hidden_size),
            LstmLayerParams.zeros(hidden_size, hidden_size),
            np.zeros((output_size, hidden_size)),
            np.zeros(output_size),
        )

    @property
    def hidden_size(self) -> int:
        return self.encoder.hidden_size

    @property
    def input_size(self) -> int:
        return self.encoder.input_size

    @property
    def output_size(self) -> int:
        return self.b_out.shape[0]

    def params(self) -> dict[str, np.ndarray]:
        """Live references to every parameter array, in checkpoint order."""
        return {
            "encoder.W_ih": self.encoder.W_ih,
            "encoder.W_hh": self.encoder.W_hh,
            "encoder.b": self.encoder.b,
            "decoder.W_ih": self.decoder.W_ih,
            "decoder.W_hh": self.decoder.W_hh,
            "decoder.b": self.decoder.b,
            "readout.W": self.W_out,
            "readout.b": self.b_out,
        }

    def copy(self) -> "Seq2SeqModel":
        opt = self.optimizer
        return Seq2SeqModel(
            LstmLayerParams(self.encoder.W_ih.copy(), self.encoder.W_hh.copy(), self.encoder.b.copy()),
            LstmLayerParams(self.decoder.W_ih.copy(), self.decoder.W_hh.copy(), self.decoder.b.copy()),
            self.W_out.copy(),
            self.b_out.copy(),
            self.norm,
            AdamState(opt.beta1, opt.beta2, opt.eps, opt.step,
                      {k: a.copy() for k, a in opt.m.items()},
                      {k: a.copy() for k, a in opt.v.items()}),
        )


# ---------------------------------------------------------------------------
# single cell
# ---------------------------------------------------------------------------


class CellCache(NamedTuple):
    x: np.ndarray
    h: np.ndarray
    c: np.ndarray
    i: np.ndarray
    f: np.ndarray
    g: np.ndarray
    o: np.ndarray
    tanh_c: np.ndarray


def _check_finite(name, a):
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite values")


def lstm_cell_forward(params: LstmLayerParams, x, h, c):
    """One LSTM step. Accepts single vectors or ``(batch, n)`` rows.

    Returns ``(h_new, c_new, cache)``; the cache feeds ``lstm_cell_backward``.
    """
    x = np.asarray(x, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    H = params.hidden_size
    if x.shape[-1] != params.input_size or h.shape[-1] != H or c.shape != h.shape:
        raise ValueError(
            f"dimension mismatch: x{x.shape} h{h.shape} c{c.shape} for I={params.input_size}, H={H}"
        )
    for name, a in (("x", x), ("h", h), ("c", c)):
        _check_finite(name, a)
    z = x @ params.W_ih.T + h @ params.W_hh.T + params.b
    i = sigmoid(z[..., :H])
    f = sigmoid(z[..., H : 2 * H])
    g = np.tanh(z[..., 2 * H : 3 * H])
    o = sigmoid(z[..., 3 * H :])
    c_new = f * c + i * g
    tanh_c = np.tanh(c_new)
    h_new = o * tanh_c
    return h_new, c_new, CellCache(x, h, c, i, f, g, o, tanh_c)


def lstm_cell_backward(params: LstmLayerParams, cache: CellCache, dh, dc):
    """Backpropagate ``dL/dh_new`` and ``dL/dc_new`` through one step.

    Returns ``(dx, dh_prev, dc_prev, grads)`` where ``grads`` holds
    ``W_ih``, ``W_hh`` and ``b`` gradients summed over the batch.
    """
    x, h, c, i, f, g, o, tc = cache
    do = dh * tc
    dc = dc + dh * o * (1.0 - tc * tc)
    dz = np.concatenate(
        [dc * g * i * (1.0 - i), dc * c * f * (1.0 - f), dc * i * (1.0 - g * g), do * o * (1.0 - o)],
        axis=-1,
    )
    dz2 = np.atleast_2d(dz)
    grads = {
        "W_ih": dz2.T @ np.atleast_2d(x),
        "W_hh": dz2.T @ np.atleast_2d(h),
        "b": dz2.sum(axis=0),
    }
    return dz @ params.W_ih, dz @ params.W_hh, dc * f, grads


# ---------------------------------------------------------------------------
# encoder / decoder with cached activations
# ---------------------------------------------------------------------------


def _as_batch(seq, width, name):
    a = np.asarray(seq, dtype=np.float64)
    single = a.ndim == 2
    if single:
        a = a[None]
    if a.ndim != 3 or a.shape[-1] != width:
        raise ValueError(f"{name} must have shape (T, {width}) or (B, T, {width}), got {np.shape(seq)}")
    if a.shape[1] < 1:
        raise ValueError(f"{name} must contain at least one step")
    _check_finite(name, a)
    return a, single


def _gate_scale(H):
    # sigmoid(z) = 0.5 + 0.5 * tanh(z / 2); halving by a power of two is exact
    return np.repeat(np.array([0.5, 0.5, 1.0, 0.5]), H)[:, None]


# Internally every activation is stored feature-major, ``(features, batch)``,
# so each gate block is a contiguous run of rows.


def _run_layer(params: LstmLayerParams, proj, h, c, steps):
    """Unroll one LSTM layer.

    ``proj`` is ``W_ih @ x + b`` with shape ``(T, 4H, B)``, or ``(4H, B)``
    when the input is the same at every step; ``h`` and ``c`` are
    ``(H, B)``. All four gates go through a single ``tanh`` per step.
    """
    H = params.hidden_size
    B = h.shape[1]
    scale = _gate_scale(H)
    W_hh = params.W_hh * scale
    proj = proj * scale
    acts = np.empty((steps, 4 * H, B))
    hs = np.empty((steps + 1, H, B))
    cs = np.empty((steps + 1, H, B))
    tcs = np.empty((steps, H, B))
    hs[0], cs[0] = h, c
    const = proj.ndim == 2
    z = np.empty((4 * H, B))
    for t in range(steps):
        np.matmul(W_hh, hs[t], out=z)
        z += proj if const else proj[t]
        np.tanh(z, out=z)
        a = acts[t]
        np.multiply(z, 0.5, out=a)
        a += 0.5
        a[2 * H : 3 * H] = z[2 * H : 3 * H]
        np.multiply(a[H : 2 * H], cs[t], out=cs[t + 1])
        cs[t + 1] += a[:H] * a[2 * H : 3 * H]
        np.tanh(cs[t + 1], out=tcs[t])
        np.multiply(a[3 * H :], tcs[t], out=hs[t + 1])
    return acts, hs, cs, tcs


def _backprop_layer(params: LstmLayerParams, acts, hs, cs, tcs, dh_out, dh, dc):
    """Reverse pass through an unrolled layer.

    ``dh_out`` is the ``(T, H, B)`` external gradient on each hidden
    output, or None. Returns the per-step gate gradients ``dz`` with shape
    ``(T, 4H, B)`` and the gradients on the initial ``(h, c)``.
    """
    steps, H4, B = acts.shape
    H = H4 // 4
    i, f, g, o = acts[:, :H], acts[:, H : 2 * H], acts[:, 2 * H : 3 * H], acts[:, 3 * H :]
    # local derivatives that do not depend on the incoming gradient
    fac = np.empty((steps, 3, H, B))
    fac[:, 0] = g * i * (1.0 - i)
    fac[:, 1] = cs[:-1] * f * (1.0 - f)
    fac[:, 2] = i * (1.0 - g * g)
    out_fac = tcs * o * (1.0 - o)
    cell_fac = o * (1.0 - tcs * tcs)

    W_hhT = params.W_hh.T.copy()
    dz = np.empty_like(acts)
    dz4 = dz.reshape(steps, 4, H, B)
    dh = dh.copy()
    dc = dc.copy()
    for t in range(steps - 1, -1, -1):
        if dh_out is not None:
            dh += dh_out[t]
        dc += dh * cell_fac[t]
        np.multiply(dc, fac[t], out=dz4[t, :3])
        np.multiply(dh, out_fac[t], out=dz4[t, 3])
        dc *= f[t]
        np.matmul(W_hhT, dz[t], out=dh)
    return dz, dh, dc


class _ForwardCache(NamedTuple):
    XT: np.ndarray
    enc: tuple
    dec: tuple
    u: np.ndarray


def _forward(model: Seq2SeqModel, X: np.ndarray, w_out: int):
    """Batched forward pass; ``X`` is ``(B, T, I)``, returns ``(B, w_out, O)``."""
    B = X.shape[0]
    H = model.hidden_size
    enc, dec = model.encoder, model.decoder
    XT = np.ascontiguousarray(X.transpose(1, 2, 0))  # (T, I, B)
    proj = enc.W_ih @ XT + enc.b[:, None]
    zeros = np.zeros((H, B))
    e_acts, e_hs, e_cs, e_tcs = _run_layer(enc, proj, zeros, zeros, X.shape[1])
    u = e_hs[-1]
    d_proj = dec.W_ih @ u + dec.b[:, None]
    d_acts, d_hs, d_cs, d_tcs = _run_layer(dec, d_proj, u, e_cs[-1], w_out)
    Y = model.W_out @ d_hs[1:] + model.b_out[:, None]  # (w_out, O, B)
    cache = _ForwardCache(XT, (e_acts, e_hs, e_cs, e_tcs), (d_acts, d_hs, d_cs, d_tcs), u)
    return Y.transpose(2, 0, 1), cache


def _backward(model: Seq2SeqModel, cache: _ForwardCache, dY: np.ndarray) -> dict[str, np.ndarray]:
    """Gradients of every parameter given ``dL/dY`` of shape ``(B, w_out, O)``."""
    XT, (e_acts, e_hs, e_cs, e_tcs), (d_acts, d_hs, d_cs, d_tcs), u = cache
    enc, dec = model.encoder, model.decoder
    dYt = np.ascontiguousarray(dY.transpose(1, 2, 0))  # (w_out, O, B)

    hdec = d_hs[1:]
    g_Wout = np.tensordot(dYt, hdec, axes=([0, 2], [0, 2]))
    g_bout = dYt.sum(axis=(0, 2))
    dh_out = model.W_out.T @ dYt

    zeros = np.zeros_like(u)
    dz_dec, dh0, dc0 = _backprop_layer(dec, d_acts, d_hs, d_cs, d_tcs, dh_out, zeros, zeros)
    dz_sum = dz_dec.sum(axis=0)
    dh_enc = dh0 + dec.W_ih.T @ dz_sum

    dz_enc, _, _ = _backprop_layer(enc, e_acts, e_hs, e_cs, e_tcs, None, dh_enc, dc0)
    return {
        "encoder.W_ih": np.tensordot(dz_enc, XT, axes=([0, 2], [0, 2])),
        "encoder.W_hh": np.tensordot(dz_enc, e_hs[:-1], axes=([0, 2], [0, 2])),
        "encoder.b": dz_enc.sum(axis=(0, 2)),
        "decoder.W_ih": dz_sum @ u.T,
        "decoder.W_hh": np.tensordot(dz_dec, d_hs[:-1], axes=([0, 2], [0, 2])),
        "decoder.b": dz_sum.sum(axis=1),
        "readout.W": g_Wout,
        "readout.b": g_bout,
    }


# ---------------------------------------------------------------------------
# public model operations
# ---------------------------------------------------------------------------


def encode(model: Seq2SeqModel, input_seq):
    """Fold a normalised ``(w_in, 3)`` window (or a batch) into ``(h, c)``."""
    X, single = _as_batch(input_seq, model.input_size, "input_seq")
    B = X.shape[0]
    H = model.hidden_size
    proj = model.encoder.W_ih @ X.transpose(1, 2, 0) + model.encoder.b[:, None]
    zeros = np.zeros((H, B))
    _, hs, cs, _ = _run_layer(model.encoder, proj, zeros, zeros, X.shape[1])
    h, c = hs[-1].T, cs[-1].T
    return (h[0], c[0]) if single else (h, c)


def decode(model: Seq2SeqModel, init_state, w_out: int) -> np.ndarray:
    """Unroll the decoder ``w_out`` steps from an encoder state.

    Returns normalised ``(w_out, 3)`` triples, or ``(B, w_out, 3)`` for a
    batched state.
    """
    if int(w_out) != w_out or w_out < 1:
        raise ValueError(f"w_out must be an integer >= 1, got {w_out}")
    h, c = (np.asarray(s, dtype=np.float64) for s in init_state)
    single = h.ndim == 1
    h, c = np.atleast_2d(h), np.atleast_2d(c)
    if h.shape != c.shape or h.shape[1] != model.hidden_size:
        raise ValueError(f"state shapes {h.shape}, {c.shape} do not match hidden size {model.hidden_size}")
    _check_finite("state", h)
    _check_finite("state", c)
    dec = model.decoder
    u = np.ascontiguousarray(h.T)
    _, hs, _, _ = _run_layer(dec, dec.W_ih @ u + dec.b[:, None], u, np.ascontiguousarray(c.T), int(w_out))
    Y = (model.W_out @ hs[1:] + model.b_out[:, None]).transpose(2, 0, 1)
    return Y[0] if single else Y


def forward(model: Seq2SeqModel, input_seq, w_out: int) -> np.ndarray:
    """``decode(encode(input_seq), w_out)`` on normalised triples."""
    X, single = _as_batch(input_seq, model.input_size, "input_seq")
    if int(w_out) != w_out or w_out < 1:
        raise ValueError(f"w_out must be an integer >= 1, got {w_out}")
    Y, _ = _forward(model, X, int(w_out))
    return Y[0] if single else Y


def mse_loss(pred, target) -> float:
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {target.shape}")
    diff = pred - target
    return float(np.mean(diff * diff))


def loss_and_grads(model: Seq2SeqModel, input_seq, target_seq, count: Optional[int] = None):
    """MSE loss and its exact gradients by backpropagation through time.

    The squared errors are summed and divided by ``count * w_out * 3``;
    ``count`` defaults to the batch size, which gives the plain mean.
    """
    X, _ = _as_batch(input_seq, model.input_size, "input_seq")
    T, _ = _as_batch(target_seq, model.output_size, "target_seq")
    if T.shape[0] != X.shape[0]:
        raise ValueError(f"batch mismatch: {X.shape[0]} inputs vs {T.shape[0]} targets")
    n = X.shape[0] if count is None else count
    denom = n * T.shape[1] * T.shape[2]
    Y, cache = _forward(model, X, T.shape[1])
    diff = Y - T
    loss = float(np.sum(diff * diff) / denom)
    grads = _backward(model, cache, (2.0 / denom) * diff)
    return loss, grads


def backward(model: Seq2SeqModel, input_seq, target_seq, count: Optional[int] = None) -> dict[str, np.ndarray]:
    return loss_and_grads(model, input_seq, target_seq, count)[1]


def adam_step(state: AdamState, params: dict, grads: dict, lr: float) -> dict:
    """Bias-corrected Adam update applied in place to ``params``."""
    for k, p in params.items():
        if k not in grads or np.shape(grads[k]) != p.shape:
            raise ValueError(f"gradient for {k!r} missing or mis-shaped")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    for k, p in params.items():
        g = grads[k]
        if k not in state.m:
            state.m[k] = np.zeros_like(p)
            state.v[k] = np.zeros_like(p)
        m = state.m[k]
        v = state.v[k]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params


# ---------------------------------------------------------------------------
# training and inference
# ---------------------------------------------------------------------------


@dataclass
class LossCurve:
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    val_spatial_rmse: list = field(default_factory=list)


def _spatial_rmse(model: Seq2SeqModel, pred_n, target_n) -> float:
    scales = model.norm.scales[:2]
    d = (pred_n[..., :2] - target_n[..., :2]) / scales
    return float(np.sqrt(np.mean(np.sum(d * d, axis=-1))))


def train(model: Seq2SeqModel, train_set, val_set, config: TrainConfig = TrainConfig(),
          progress: bool = False):
    """Mini-batch Adam on the MSE of normalised triples.

    ``train_set`` and ``val_set`` are ``WindowSet``-like objects exposing
    ``inputs`` and ``targets`` arrays in raw units (px, px, ms). Batches are
    reshuffled every epoch from ``config.seed``. The model is updated in
    place and also returned with the per-epoch ``LossCurve``.
    """
    if len(train_set.inputs) == 0 or len(val_set.inputs) == 0:
        raise ValueError("training and validation sets must be non-empty")
    Xn = model.norm.normalize(train_set.inputs)
    Yn = model.norm.normalize(train_set.targets)
    Xv = model.norm.normalize(val_set.inputs)
    Yv = model.norm.normalize(val_set.targets)
    w_out = Yn.shape[1]

    model.optimizer.beta1 = config.beta1
    model.optimizer.beta2 = config.beta2
    model.optimizer.eps = config.eps
    params = model.params()
    rng = np.random.default_rng(config.seed)
    curve = LossCurve()
    best = None
    N = len(Xn)
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(N)
        total = 0.0
        for start in range(0, N, config.batch_size):
            idx = order[start : start + config.batch_size]
            loss, grads = loss_and_grads(model, Xn[idx], Yn[idx])
            if not math.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite loss {loss} at epoch {epoch}, batch {start // config.batch_size}"
                )
            adam_step(model.optimizer, params, grads, config.learning_rate)
            total += loss * len(idx)
        pred_v = forward(model, Xv, w_out)
        val = mse_loss(pred_v, Yv)
        if not math.isfinite(val):
            raise TrainingDivergedError(f"non-finite validation loss at epoch {epoch}")
        curve.train_loss.append(total / N)
        curve.val_loss.append(val)
        curve.val_spatial_rmse.append(_spatial_rmse(model, pred_v, Yv))
        if config.restore_best and (best is None or val < best[0]):
            best = (val, {k: p.copy() for k, p in params.items()})
        if progress:
            log.info("epoch %d train %.6g val %.6g val_rmse %.3f px", epoch,
                     curve.train_loss[-1], val, curve.val_spatial_rmse[-1])
    if best is not None:
        for k, p in params.items():
            p[...] = best[1][k]
    return model, curve


PREDICTION_DTYPE = np.dtype([("x", "<f8"), ("y", "<f8"), ("t", "<f8")])


def window_triples(points: np.ndarray, prev_t: Optional[int] = None) -> np.ndarray:
    """``(x, y, dt_ms)`` triples for consecutive track points.

    The first dt is measured from ``prev_t`` (the sample preceding the
    window) or is 0 when there is none.
    """
    t = points["t"].astype(np.int64)
    dt = np.empty(len(t))
    dt[1:] = np.diff(t) / 1000.0
    dt[0] = 0.0 if prev_t is None else (t[0] - prev_t) / 1000.0
    return np.stack([points["x"], points["y"], dt], axis=1)


def arrival_times(t_last_us, dt_ms) -> np.ndarray:
    """Absolute arrival times (µs) from per-step predicted intervals (ms)."""
    return np.asarray(t_last_us, dtype=np.float64)[..., None] + 1000.0 * np.cumsum(dt_ms, axis=-1)


def predict(model: Seq2SeqModel, recent_track, w_in: int, w_out: int) -> np.ndarray:
    """Predict the next ``w_out`` points after the last ``w_in`` observations.

    Returns an array with fields ``x, y`` (px) and ``t`` (absolute arrival
    time in µs, float) for each predicted point.
    """
    pts = recent_track.points if hasattr(recent_track, "points") else np.asarray(recent_track)
    if pts.dtype != TRACK_DTYPE:
        from evtraj.tracker import as_track_array

        pts = as_track_array(pts)
    if len(pts) < w_in:
        raise ValueError(f"need at least {w_in} points, got {len(pts)}")
    window = pts[len(pts) - w_in :]
    prev_t = int(pts["t"][len(pts) - w_in - 1]) if len(pts) > w_in else None
    triples = window_triples(window, prev_t)
    out = model.norm.denormalize(forward(model, model.norm.normalize(triples), w_out))
    pred = np.empty(w_out, dtype=PREDICTION_DTYPE)
    pred["x"], pred["y"] = out[:, 0], out[:, 1]
    pred["t"] = arrival_times(int(window["t"][-1]), out[:, 2])
    return pred
