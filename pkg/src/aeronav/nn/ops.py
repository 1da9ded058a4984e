"""Dense neural building blocks with hand-derived backward passes.

Everything is 64-bit and deterministic: a layer is a pure function of its
inputs and parameters, and each `*_backward` companion consumes the cache its
forward pass produced.  No autodiff graph — every gradient here is written out
by hand and verified against central finite differences in the test suite.

Public layer entry points accept either a bare (rows, cols) float64 ndarray or
a Tensor2 wrapper and return the same flavor they were given.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_NEG_INF = -1e30   # additive mask value; keeps exp() finite


# ------------------------------------------------------------------- tensors

@dataclass(frozen=True, eq=False)
class Tensor2:
    """A validated row-major 2-D float64 value."""

    rows: int
    cols: int
    data: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(np.asarray(self.data, dtype=np.float64))
        if arr.ndim == 1:
            arr = arr.reshape(self.rows, self.cols)
        if arr.shape != (self.rows, self.cols):
            raise ValueError(
                f"data shape {arr.shape} != ({self.rows}, {self.cols})")
        if not np.all(np.isfinite(arr)):
            raise ValueError("tensor entries must be finite")
        object.__setattr__(self, "data", arr)

    @classmethod
    def wrap(cls, arr: np.ndarray) -> "Tensor2":
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"expected 2-D array, got ndim={arr.ndim}")
        return cls(rows=arr.shape[0], cols=arr.shape[1], data=arr)

    @property
    def array(self) -> np.ndarray:
        return self.data


def _unwrap(x) -> tuple[np.ndarray, bool]:
    if isinstance(x, Tensor2):
        return x.data, True
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D input, got ndim={arr.ndim}")
    return arr, False


def _rewrap(arr: np.ndarray, wrapped: bool):
    return Tensor2.wrap(arr) if wrapped else arr


# ------------------------------------------------------------- activations

def sigmoid(x: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function."""
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


# ----------------------------------------------------------------- softmax

def softmax_rows(x):
    """Row-wise softmax with max subtraction for overflow safety."""
    arr, wrapped = _unwrap(x)
    shifted = arr - arr.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=1, keepdims=True)
    return _rewrap(out, wrapped)


def softmax_rows_backward(y: np.ndarray, dy: np.ndarray) -> np.ndarray:
    """Gradient through a row softmax, given its output y."""
    inner = (dy * y).sum(axis=1, keepdims=True)
    return y * (dy - inner)


# ------------------------------------------------------------------ linear

def linear(x: np.ndarray, w: np.ndarray, b: np.ndarray | None = None) -> np.ndarray:
    """Affine map x @ w (+ b); b is a (1, out) row vector."""
    if x.shape[1] != w.shape[0]:
        raise ValueError(f"linear: input cols {x.shape[1]} != weight rows {w.shape[0]}")
    out = x @ w
    if b is not None:
        out = out + b
    return out


def linear_backward(x: np.ndarray, w: np.ndarray, dy: np.ndarray
                    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns (dx, dw, db)."""
    dx = dy @ w.T
    dw = x.T @ dy
    db = dy.sum(axis=0, keepdims=True)
    return dx, dw, db


# -------------------------------------------------------------- layer norm

def layer_norm(x: np.ndarray, gamma: np.ndarray, beta: np.ndarray,
               eps: float = 1e-5) -> tuple[np.ndarray, dict]:
    """Per-row normalization with learnable scale/shift; returns (y, cache)."""
    mu = x.mean(axis=1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    y = gamma * xhat + beta
    return y, {"xhat": xhat, "inv": inv, "gamma": gamma}


def layer_norm_backward(cache: dict, dy: np.ndarray
                        ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns (dx, dgamma, dbeta)."""
    xhat, inv, gamma = cache["xhat"], cache["inv"], cache["gamma"]
    d = xhat.shape[1]
    dgamma = (dy * xhat).sum(axis=0, keepdims=True)
    dbeta = dy.sum(axis=0, keepdims=True)
    dxhat = dy * gamma
    dx = (inv / d) * (d * dxhat
                      - dxhat.sum(axis=1, keepdims=True)
                      - xhat * (dxhat * xhat).sum(axis=1, keepdims=True))
    return dx, dgamma, dbeta


# --------------------------------------------------------------- attention

@dataclass(frozen=True, eq=False)
class AttentionParams:
    """Multi-head self-attention weights as composite d_model-square matrices."""

    d_model: int
    n_heads: int
    wq: np.ndarray
    wk: np.ndarray
    wv: np.ndarray
    wo: np.ndarray

    def __post_init__(self):
        if self.d_model < 1 or self.n_heads < 1:
            raise ValueError("d_model and n_heads must be positive")
        if self.d_model % self.n_heads != 0:
            raise ValueError(
                f"d_model {self.d_model} not divisible by n_heads {self.n_heads}")
        for name in ("wq", "wk", "wv", "wo"):
            m = np.asarray(getattr(self, name), dtype=np.float64)
            if m.shape != (self.d_model, self.d_model):
                raise ValueError(
                    f"{name} must be ({self.d_model}, {self.d_model}), "
                    f"got {m.shape}")
            object.__setattr__(self, name, m)

    @property
    def head_dim(self) -> int:
        return self.d_model // self.n_heads


def causal_mask(t: int) -> np.ndarray:
    """(t, t) additive mask blocking attention to later positions."""
    return np.triu(np.full((t, t), _NEG_INF), k=1)


def self_attention(seq, p: AttentionParams, mask: np.ndarray | None = None):
    """Scaled dot-product multi-head self-attention; output shape == input shape."""
    arr, wrapped = _unwrap(seq)
    out, _ = self_attention_forward(arr, p, mask)
    return _rewrap(out, wrapped)


def _check_attn(seq, p: AttentionParams, mask):
    arr, _ = _unwrap(seq)
    if arr.shape[1] != p.d_model:
        raise ValueError(
            f"sequence width {arr.shape[1]} != d_model {p.d_model}")
    if mask is not None and mask.shape != (arr.shape[0], arr.shape[0]):
        raise ValueError(
            f"mask shape {mask.shape} != ({arr.shape[0]}, {arr.shape[0]})")
    return arr, p, mask


def self_attention_forward(x: np.ndarray, p: AttentionParams,
                           mask: np.ndarray | None = None
                           ) -> tuple[np.ndarray, dict]:
    """Forward pass returning (output, cache-for-backward)."""
    x, p, mask = _check_attn(x, p, mask)
    t = x.shape[0]
    dh = p.head_dim
    scale = 1.0 / np.sqrt(dh)
    q = x @ p.wq
    k = x @ p.wk
    v = x @ p.wv
    weights = np.empty((p.n_heads, t, t))
    concat = np.empty((t, p.d_model))
    for h in range(p.n_heads):
        sl = slice(h * dh, (h + 1) * dh)
        scores = (q[:, sl] @ k[:, sl].T) * scale
        if mask is not None:
            scores = scores + mask
        w = softmax_rows(scores)
        weights[h] = w
        concat[:, sl] = w @ v[:, sl]
    out = concat @ p.wo
    cache = {"x": x, "q": q, "k": k, "v": v, "weights": weights,
             "concat": concat, "p": p, "scale": scale}
    return out, cache


def self_attention_backward(cache: dict, dout: np.ndarray
                            ) -> tuple[np.ndarray, dict]:
    """Returns (dx, {"wq": dwq, "wk": dwk, "wv": dwv, "wo": dwo})."""
    x, q, k, v = cache["x"], cache["q"], cache["k"], cache["v"]
    weights, concat, p, scale = (cache["weights"], cache["concat"],
                                 cache["p"], cache["scale"])
    dh = p.head_dim
    dwo = concat.T @ dout
    dconcat = dout @ p.wo.T
    dq = np.zeros_like(q)
    dk = np.zeros_like(k)
    dv = np.zeros_like(v)
    for h in range(p.n_heads):
        sl = slice(h * dh, (h + 1) * dh)
        w = weights[h]
        d_head = dconcat[:, sl]
        dw = d_head @ v[:, sl].T
        dv[:, sl] = w.T @ d_head
        dscores = softmax_rows_backward(w, dw) * scale
        dq[:, sl] = dscores @ k[:, sl]
        dk[:, sl] = dscores.T @ q[:, sl]
    dwq = x.T @ dq
    dwk = x.T @ dk
    dwv = x.T @ dv
    dx = dq @ p.wq.T + dk @ p.wk.T + dv @ p.wv.T
    return dx, {"wq": dwq, "wk": dwk, "wv": dwv, "wo": dwo}


# -------------------------------------------------------------------- LSTM

_GATES = ("i", "f", "o", "g")


@dataclass(frozen=True, eq=False)
class LstmParams:
    """Per-gate input/recurrent weights and biases (gates i, f, o, g)."""

    input_size: int
    hidden_size: int
    wx: dict          # gate -> (input_size, hidden_size)
    wh: dict          # gate -> (hidden_size, hidden_size)
    b: dict           # gate -> (1, hidden_size)

    def __post_init__(self):
        if self.input_size < 1 or self.hidden_size < 1:
            raise ValueError("sizes must be positive")
        for table, shape, label in (
            (self.wx, (self.input_size, self.hidden_size), "wx"),
            (self.wh, (self.hidden_size, self.hidden_size), "wh"),
            (self.b, (1, self.hidden_size), "b"),
        ):
            if set(table.keys()) != set(_GATES):
                raise ValueError(f"{label} must have exactly gates {_GATES}")
            fixed = {}
            for gate, m in table.items():
                m = np.asarray(m, dtype=np.float64)
                if m.shape != shape:
                    raise ValueError(
                        f"{label}[{gate}] must be {shape}, got {m.shape}")
                fixed[gate] = m
            object.__setattr__(self, label, fixed)


def lstm_cell(x, h, c, p: LstmParams):
    """One LSTM step: returns (h', c')."""
    (h2, c2), _ = lstm_cell_forward(np.asarray(x, dtype=np.float64),
                                    np.asarray(h, dtype=np.float64),
                                    np.asarray(c, dtype=np.float64), p)
    return h2, c2


def lstm_cell_forward(x: np.ndarray, h: np.ndarray, c: np.ndarray,
                      p: LstmParams) -> tuple[tuple[np.ndarray, np.ndarray], dict]:
    if x.ndim != 2 or x.shape[1] != p.input_size:
        raise ValueError(f"x must be (batch, {p.input_size}), got {x.shape}")
    if h.shape != (x.shape[0], p.hidden_size):
        raise ValueError(
            f"h must be ({x.shape[0]}, {p.hidden_size}), got {h.shape}")
    if c.shape != h.shape:
        raise ValueError(f"c shape {c.shape} != h shape {h.shape}")
    pre = {g: x @ p.wx[g] + h @ p.wh[g] + p.b[g] for g in _GATES}
    i = sigmoid(pre["i"])
    f = sigmoid(pre["f"])
    o = sigmoid(pre["o"])
    g = np.tanh(pre["g"])
    c2 = f * c + i * g
    tc2 = np.tanh(c2)
    h2 = o * tc2
    cache = {"x": x, "h": h, "c": c, "i": i, "f": f, "o": o, "g": g,
             "tc2": tc2, "p": p}
    return (h2, c2), cache


def lstm_cell_backward(cache: dict, dh2: np.ndarray, dc2: np.ndarray
                       ) -> tuple[np.ndarray, np.ndarray, np.ndarray, dict]:
    """Returns (dx, dh, dc, grads) with grads keyed like LstmParams tables."""
    x, h, c = cache["x"], cache["h"], cache["c"]
    i, f, o, g, tc2, p = (cache["i"], cache["f"], cache["o"], cache["g"],
                          cache["tc2"], cache["p"])
    do = dh2 * tc2
    dct = dc2 + dh2 * o * (1.0 - tc2 * tc2)
    di = dct * g
    dg = dct * i
    df = dct * c
    dc = dct * f
    d_pre = {
        "i": di * i * (1.0 - i),
        "f": df * f * (1.0 - f),
        "o": do * o * (1.0 - o),
        "g": dg * (1.0 - g * g),
    }
    dx = np.zeros_like(x)
    dh = np.zeros_like(h)
    grads = {"wx": {}, "wh": {}, "b": {}}
    for gate in _GATES:
        da = d_pre[gate]
        grads["wx"][gate] = x.T @ da
        grads["wh"][gate] = h.T @ da
        grads["b"][gate] = da.sum(axis=0, keepdims=True)
        dx += da @ p.wx[gate].T
        dh += da @ p.wh[gate].T
    return dx, dh, dc, grads
