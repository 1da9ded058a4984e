"""Waypoint policies: a multimodal transformer and an LSTM, built by hand.

Both consume the same AgentState — dialog token ids plus the per-step
(direction, observation) history — and emit four quantities: a bounded
waypoint delta, a rotation, a stop probability, and a patch attention grid.
The transformer lays language tokens and per-step direction/patch tokens into
one sequence; the LSTM consumes tokens first and one fused feature vector per
step.  Output heads are zero-initialized, so an untrained policy hovers in
place with stop probability one half and uniform attention — a property the
tests pin down exactly.

Forward passes return raw head values plus a cache; `backward` turns head
gradients into parameter gradients, hand-chained through every layer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..dataset import AttentionMask
from ..geometry import normalize_angle
from ..nn.checkpoint import Checkpoint
from ..nn.ops import (
    AttentionParams,
    LstmParams,
    layer_norm,
    layer_norm_backward,
    linear,
    linear_backward,
    lstm_cell_backward,
    lstm_cell_forward,
    self_attention_backward,
    self_attention_forward,
    sigmoid,
)
from .base import AgentOutput, AgentState

MOD_LANG, MOD_DIR, MOD_PATCH = 0, 1, 2


@dataclass(frozen=True)
class ModelConfig:
    """Architecture and world constants shared by both policy families."""

    vocab_size: int
    d_model: int = 32
    n_heads: int = 4
    n_layers: int = 2
    hidden: int = 32
    patch_grid: int = 4
    resolution: int = 16
    step_max: float = 12.0
    world_side: float = 100.0

    def __post_init__(self):
        if self.vocab_size < 3:
            raise ValueError("vocab_size must cover the reserved ids")
        if self.d_model % 2 != 0:
            raise ValueError("d_model must be even for sinusoidal positions")
        if self.d_model % self.n_heads != 0:
            raise ValueError(
                f"d_model {self.d_model} not divisible by n_heads {self.n_heads}")
        if self.n_layers < 1 or self.hidden < 1:
            raise ValueError("n_layers and hidden must be positive")
        if self.resolution % self.patch_grid != 0:
            raise ValueError(
                f"resolution {self.resolution} not divisible by patch grid "
                f"{self.patch_grid}")
        if self.step_max <= 0 or self.world_side <= 0:
            raise ValueError("step_max and world_side must be positive")

    @property
    def patch_count(self) -> int:
        return self.patch_grid * self.patch_grid

    @property
    def block_pixels(self) -> int:
        b = self.resolution // self.patch_grid
        return b * b

    def to_dict(self) -> dict:
        return {
            "vocab_size": self.vocab_size, "d_model": self.d_model,
            "n_heads": self.n_heads, "n_layers": self.n_layers,
            "hidden": self.hidden, "patch_grid": self.patch_grid,
            "resolution": self.resolution, "step_max": self.step_max,
            "world_side": self.world_side,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


def sinusoidal_positions(t: int, d: int) -> np.ndarray:
    """Classic fixed position encoding, (t, d)."""
    pos = np.arange(t, dtype=np.float64)[:, None]
    idx = np.arange(d, dtype=np.float64)[None, :]
    angles = pos / np.power(10000.0, 2.0 * np.floor(idx / 2.0) / d)
    enc = np.where(idx.astype(np.int64) % 2 == 0, np.sin(angles), np.cos(angles))
    return enc


def patch_blocks(pixels: np.ndarray, grid: int) -> np.ndarray:
    """Split an (R, R) image into the grid's blocks, flattened row-major.

    Returns (grid*grid, (R/grid)^2); block (i, j) sits at row i*grid + j.
    """
    r = pixels.shape[0]
    if r % grid != 0:
        raise ValueError(f"resolution {r} not divisible by grid {grid}")
    b = r // grid
    return (pixels.reshape(grid, b, grid, b)
            .transpose(0, 2, 1, 3)
            .reshape(grid * grid, b * b))


def pooled_patches(pixels: np.ndarray, grid: int) -> np.ndarray:
    """Per-block mean intensities, (grid*grid,)."""
    return patch_blocks(pixels, grid).mean(axis=1)


# ---------------------------------------------------------------- embedding

_EMBED_KEYS = ("embed.tok", "embed.dir_w", "embed.dir_b", "embed.patch_w",
               "embed.patch_b", "embed.mod")


def _embed_forward(state: AgentState, table: dict, patch_grid: int
                   ) -> tuple[np.ndarray, dict]:
    tok_emb = table["embed.tok"]
    d = tok_emb.shape[1]
    tokens = state.dialog_tokens.tokens
    for t in tokens:
        if not (0 <= t < tok_emb.shape[0]):
            raise ValueError(
                f"token id {t} outside vocabulary of {tok_emb.shape[0]}")
    p2 = patch_grid * patch_grid
    steps = len(state.history)
    n_tok = len(tokens)
    total = n_tok + steps * (1 + p2)
    seq = np.empty((total, d))
    mod = table["embed.mod"]
    if mod.shape != (3, d):
        raise ValueError(f"embed.mod must be (3, {d}), got {mod.shape}")

    for pos, t in enumerate(tokens):
        seq[pos] = tok_emb[t] + mod[MOD_LANG]

    dirs = np.empty((steps, 2))
    blocks = []
    for s, (direction, obs) in enumerate(state.history):
        base = n_tok + s * (1 + p2)
        dirs[s] = direction
        seq[base] = (dirs[s:s + 1] @ table["embed.dir_w"]
                     + table["embed.dir_b"] + mod[MOD_DIR])
        blk = patch_blocks(obs.pixels, patch_grid)
        if blk.shape[1] != table["embed.patch_w"].shape[0]:
            raise ValueError(
                f"patch block size {blk.shape[1]} != embed.patch_w rows "
                f"{table['embed.patch_w'].shape[0]}")
        blocks.append(blk)
        seq[base + 1: base + 1 + p2] = (blk @ table["embed.patch_w"]
                                        + table["embed.patch_b"] + mod[MOD_PATCH])
    seq = seq + sinusoidal_positions(total, d)
    cache = {"tokens": tokens, "dirs": dirs, "blocks": blocks,
             "n_tok": n_tok, "p2": p2, "steps": steps, "d": d}
    return seq, cache


def _embed_backward(cache: dict, table: dict, dseq: np.ndarray) -> dict:
    grads = {k: np.zeros_like(table[k]) for k in _EMBED_KEYS}
    n_tok, p2, steps = cache["n_tok"], cache["p2"], cache["steps"]
    for pos, t in enumerate(cache["tokens"]):
        grads["embed.tok"][t] += dseq[pos]
        grads["embed.mod"][MOD_LANG] += dseq[pos]
    for s in range(steps):
        base = n_tok + s * (1 + p2)
        drow = dseq[base:base + 1]
        grads["embed.dir_w"] += cache["dirs"][s:s + 1].T @ drow
        grads["embed.dir_b"] += drow
        grads["embed.mod"][MOD_DIR] += drow[0]
        dpatch = dseq[base + 1: base + 1 + p2]
        grads["embed.patch_w"] += cache["blocks"][s].T @ dpatch
        grads["embed.patch_b"] += dpatch.sum(axis=0, keepdims=True)
        grads["embed.mod"][MOD_PATCH] += dpatch.sum(axis=0)
    return grads


def embed_inputs(state: AgentState, table: dict) -> np.ndarray:
    """Multimodal input sequence: token rows, then per step a direction row
    and one row per patch block, with positions and modality types added.

    The patch grid is inferred from the table: embed.patch_w has one row per
    pixel of a block, so grid = R / sqrt(block_pixels).
    """
    for key in _EMBED_KEYS:
        if key not in table:
            raise ValueError(f"embedding table missing {key!r}")
    if not state.history:
        raise ValueError("state has no observations")
    r = state.history[0][1].resolution
    block = int(round(math.sqrt(table["embed.patch_w"].shape[0])))
    if block * block != table["embed.patch_w"].shape[0] or r % block != 0:
        raise ValueError(
            f"embed.patch_w rows {table['embed.patch_w'].shape[0]} do not "
            f"tile a {r}x{r} observation")
    seq, _ = _embed_forward(state, table, r // block)
    return seq


# ------------------------------------------------------------- initializers

def _head_params(d: int) -> dict:
    # all-zero heads: untrained policies hold position with stop_prob 0.5
    return {
        "head.way_w": np.zeros((d, 2)), "head.way_b": np.zeros((1, 2)),
        "head.rot_w": np.zeros((d, 1)), "head.rot_b": np.zeros((1, 1)),
        "head.stop_w": np.zeros((d, 1)), "head.stop_b": np.zeros((1, 1)),
    }


def _init_transformer(cfg: ModelConfig, seed: int) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(seed)
    scale = 0.02
    d = cfg.d_model
    params: dict[str, np.ndarray] = {
        "embed.tok": rng.normal(scale=scale, size=(cfg.vocab_size, d)),
        "embed.dir_w": rng.normal(scale=scale, size=(2, d)),
        "embed.dir_b": np.zeros((1, d)),
        "embed.patch_w": rng.normal(scale=scale, size=(cfg.block_pixels, d)),
        "embed.patch_b": np.zeros((1, d)),
        "embed.mod": rng.normal(scale=scale, size=(3, d)),
    }
    for layer in range(cfg.n_layers):
        pre = f"layer{layer}"
        for w in ("wq", "wk", "wv", "wo"):
            params[f"{pre}.attn.{w}"] = rng.normal(scale=scale, size=(d, d))
        params[f"{pre}.ln1.gamma"] = np.ones((1, d))
        params[f"{pre}.ln1.beta"] = np.zeros((1, d))
        params[f"{pre}.ffn.w1"] = rng.normal(scale=scale, size=(d, 2 * d))
        params[f"{pre}.ffn.b1"] = np.zeros((1, 2 * d))
        params[f"{pre}.ffn.w2"] = rng.normal(scale=scale, size=(2 * d, d))
        params[f"{pre}.ffn.b2"] = np.zeros((1, d))
        params[f"{pre}.ln2.gamma"] = np.ones((1, d))
        params[f"{pre}.ln2.beta"] = np.zeros((1, d))
    params.update(_head_params(d))
    params["head.att_w"] = np.zeros((d, 1))
    params["head.att_b"] = np.zeros((1, 1))
    return params


def _init_lstm(cfg: ModelConfig, seed: int) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(seed)
    scale = 0.02
    d, h = cfg.d_model, cfg.hidden
    params: dict[str, np.ndarray] = {
        "embed.tok": rng.normal(scale=scale, size=(cfg.vocab_size, d)),
        "embed.step_w": rng.normal(scale=scale, size=(2 + cfg.patch_count, d)),
        "embed.step_b": np.zeros((1, d)),
    }
    for gate in "ifog":
        params[f"lstm.wx_{gate}"] = rng.normal(scale=scale, size=(d, h))
        params[f"lstm.wh_{gate}"] = rng.normal(scale=scale, size=(h, h))
        params[f"lstm.b_{gate}"] = np.zeros((1, h))
    params.update(_head_params(h))
    params["head.att_w"] = np.zeros((h, cfg.patch_count))
    params["head.att_b"] = np.zeros((1, cfg.patch_count))
    return params


# ------------------------------------------------------------------ outputs

def _finish_output(state: AgentState, cfg: ModelConfig, raw: dict) -> AgentOutput:
    delta = np.tanh(raw["way"]) * cfg.step_max
    cx, cy = state.current_view.center
    stop = float(sigmoid(np.array([[raw["stop"]]]))[0, 0])
    att = sigmoid(np.asarray(raw["att"], dtype=np.float64)).reshape(
        cfg.patch_grid, cfg.patch_grid)
    return AgentOutput(
        next_center=(cx + float(delta[0, 0]), cy + float(delta[0, 1])),
        next_rotation=normalize_angle(float(raw["rot"])),
        stop_prob=stop,
        attention=AttentionMask(tuple(tuple(row) for row in att.tolist())),
    )


def _check_state(state: AgentState, cfg: ModelConfig) -> None:
    for _, obs in state.history:
        if obs.resolution != cfg.resolution:
            raise ValueError(
                f"observation resolution {obs.resolution} != model "
                f"resolution {cfg.resolution}")


# -------------------------------------------------------------- transformer

class TransformerPolicy:
    """Self-attention policy over the fused language/direction/patch sequence."""

    kind = "transformer"

    def __init__(self, config: ModelConfig, params: dict | None = None,
                 init_seed: int = 0):
        self.config = config
        self.params = params if params is not None else _init_transformer(
            config, init_seed)

    def _attn_params(self, layer: int) -> AttentionParams:
        p = self.params
        return AttentionParams(
            d_model=self.config.d_model, n_heads=self.config.n_heads,
            wq=p[f"layer{layer}.attn.wq"], wk=p[f"layer{layer}.attn.wk"],
            wv=p[f"layer{layer}.attn.wv"], wo=p[f"layer{layer}.attn.wo"])

    def forward(self, state: AgentState) -> tuple[dict, dict]:
        """Raw head values plus the cache needed for backward."""
        cfg = self.config
        _check_state(state, cfg)
        p = self.params
        seq, emb_cache = _embed_forward(state, p, cfg.patch_grid)
        x = seq
        layers = []
        for layer in range(cfg.n_layers):
            pre = f"layer{layer}"
            attn_out, attn_cache = self_attention_forward(
                x, self._attn_params(layer))
            res1 = x + attn_out
            ln1_out, ln1_cache = layer_norm(
                res1, p[f"{pre}.ln1.gamma"], p[f"{pre}.ln1.beta"])
            a1 = linear(ln1_out, p[f"{pre}.ffn.w1"], p[f"{pre}.ffn.b1"])
            h1 = np.maximum(a1, 0.0)
            f = linear(h1, p[f"{pre}.ffn.w2"], p[f"{pre}.ffn.b2"])
            res2 = ln1_out + f
            ln2_out, ln2_cache = layer_norm(
                res2, p[f"{pre}.ln2.gamma"], p[f"{pre}.ln2.beta"])
            layers.append({"x_in": x, "attn": attn_cache, "ln1": ln1_cache,
                           "ln1_out": ln1_out, "a1": a1, "h1": h1,
                           "ln2": ln2_cache})
            x = ln2_out

        n_tok, p2 = emb_cache["n_tok"], emb_cache["p2"]
        dir_pos = n_tok + (emb_cache["steps"] - 1) * (1 + p2)
        h_dir = x[dir_pos:dir_pos + 1]
        h_patch = x[dir_pos + 1: dir_pos + 1 + p2]
        raw = {
            "way": linear(h_dir, p["head.way_w"], p["head.way_b"]),
            "rot": float(linear(h_dir, p["head.rot_w"], p["head.rot_b"])[0, 0]),
            "stop": float(linear(h_dir, p["head.stop_w"], p["head.stop_b"])[0, 0]),
            "att": (h_patch @ p["head.att_w"] + p["head.att_b"]).reshape(-1),
        }
        cache = {"emb": emb_cache, "layers": layers, "x_out": x,
                 "dir_pos": dir_pos, "h_dir": h_dir, "h_patch": h_patch}
        return raw, cache

    def backward(self, cache: dict, d_way: np.ndarray, d_stop: float,
                 d_att: np.ndarray) -> dict[str, np.ndarray]:
        """Parameter gradients given head gradients (rotation head unused)."""
        cfg = self.config
        p = self.params
        grads = {name: np.zeros_like(arr) for name, arr in p.items()}
        x = cache["x_out"]
        dx = np.zeros_like(x)
        dir_pos = cache["dir_pos"]
        p2 = cfg.patch_count
        h_dir, h_patch = cache["h_dir"], cache["h_patch"]

        d_way = np.asarray(d_way, dtype=np.float64).reshape(1, 2)
        grads["head.way_w"] += h_dir.T @ d_way
        grads["head.way_b"] += d_way
        dx[dir_pos:dir_pos + 1] += d_way @ p["head.way_w"].T

        d_stop_arr = np.array([[float(d_stop)]])
        grads["head.stop_w"] += h_dir.T @ d_stop_arr
        grads["head.stop_b"] += d_stop_arr
        dx[dir_pos:dir_pos + 1] += d_stop_arr @ p["head.stop_w"].T

        d_att_col = np.asarray(d_att, dtype=np.float64).reshape(p2, 1)
        grads["head.att_w"] += h_patch.T @ d_att_col
        grads["head.att_b"] += d_att_col.sum(axis=0, keepdims=True)
        dx[dir_pos + 1: dir_pos + 1 + p2] += d_att_col @ p["head.att_w"].T

        for layer in reversed(range(cfg.n_layers)):
            pre = f"layer{layer}"
            lc = cache["layers"][layer]
            dres2, dg2, db2_ = layer_norm_backward(lc["ln2"], dx)
            grads[f"{pre}.ln2.gamma"] += dg2
            grads[f"{pre}.ln2.beta"] += db2_
            d_ln1out = dres2.copy()
            df = dres2
            dh1, dw2, db2 = linear_backward(lc["h1"], p[f"{pre}.ffn.w2"], df)
            grads[f"{pre}.ffn.w2"] += dw2
            grads[f"{pre}.ffn.b2"] += db2
            da1 = dh1 * (lc["a1"] > 0.0)
            dln1_from_ffn, dw1, db1 = linear_backward(
                lc["ln1_out"], p[f"{pre}.ffn.w1"], da1)
            grads[f"{pre}.ffn.w1"] += dw1
            grads[f"{pre}.ffn.b1"] += db1
            d_ln1out += dln1_from_ffn
            dres1, dg1, db1_ = layer_norm_backward(lc["ln1"], d_ln1out)
            grads[f"{pre}.ln1.gamma"] += dg1
            grads[f"{pre}.ln1.beta"] += db1_
            dx_attn, attn_grads = self_attention_backward(lc["attn"], dres1)
            for w, g in attn_grads.items():
                grads[f"{pre}.attn.{w}"] += g
            dx = dres1 + dx_attn

        emb_grads = _embed_backward(cache["emb"], p, dx)
        for name, g in emb_grads.items():
            grads[name] += g
        return grads

    def act(self, state: AgentState) -> AgentOutput:
        raw, _ = self.forward(state)
        return _finish_output(state, self.config, raw)

    def to_checkpoint(self, iteration: int, seed: int,
                      metrics: dict | None = None) -> Checkpoint:
        return Checkpoint(kind=self.kind, iteration=iteration, seed=seed,
                          params=dict(self.params),
                          config=self.config.to_dict(),
                          metrics=metrics or {})

    @classmethod
    def from_checkpoint(cls, ckpt: Checkpoint) -> "TransformerPolicy":
        if ckpt.kind != cls.kind:
            raise ValueError(
                f"checkpoint kind {ckpt.kind!r} is not {cls.kind!r}")
        return cls(ModelConfig.from_dict(ckpt.config), params=dict(ckpt.params))


# --------------------------------------------------------------------- LSTM

class LstmPolicy:
    """Recurrent policy: tokens first, then one fused input per step."""

    kind = "lstm"

    def __init__(self, config: ModelConfig, params: dict | None = None,
                 init_seed: int = 0):
        self.config = config
        self.params = params if params is not None else _init_lstm(
            config, init_seed)

    def _cell_params(self) -> LstmParams:
        p = self.params
        return LstmParams(
            input_size=self.config.d_model, hidden_size=self.config.hidden,
            wx={g: p[f"lstm.wx_{g}"] for g in "ifog"},
            wh={g: p[f"lstm.wh_{g}"] for g in "ifog"},
            b={g: p[f"lstm.b_{g}"] for g in "ifog"},
        )

    def _step_features(self, state: AgentState) -> np.ndarray:
        cfg = self.config
        feats = np.empty((len(state.history), 2 + cfg.patch_count))
        for s, (direction, obs) in enumerate(state.history):
            feats[s, 0:2] = direction
            feats[s, 2:] = pooled_patches(obs.pixels, cfg.patch_grid)
        return feats

    def forward(self, state: AgentState) -> tuple[dict, dict]:
        cfg = self.config
        _check_state(state, cfg)
        p = self.params
        tok_emb = p["embed.tok"]
        tokens = state.dialog_tokens.tokens
        for t in tokens:
            if not (0 <= t < tok_emb.shape[0]):
                raise ValueError(
                    f"token id {t} outside vocabulary of {tok_emb.shape[0]}")
        feats = self._step_features(state)
        inputs = [("tok", t, tok_emb[t:t + 1].copy()) for t in tokens]
        step_rows = feats @ p["embed.step_w"] + p["embed.step_b"]
        for s in range(feats.shape[0]):
            inputs.append(("step", s, step_rows[s:s + 1]))

        cell = self._cell_params()
        h = np.zeros((1, cfg.hidden))
        c = np.zeros((1, cfg.hidden))
        steps = []
        for kind_, idx, x in inputs:
            (h, c), cell_cache = lstm_cell_forward(x, h, c, cell)
            steps.append((kind_, idx, cell_cache))

        raw = {
            "way": linear(h, p["head.way_w"], p["head.way_b"]),
            "rot": float(linear(h, p["head.rot_w"], p["head.rot_b"])[0, 0]),
            "stop": float(linear(h, p["head.stop_w"], p["head.stop_b"])[0, 0]),
            "att": (h @ p["head.att_w"] + p["head.att_b"]).reshape(-1),
        }
        cache = {"steps": steps, "h_final": h, "feats": feats}
        return raw, cache

    def backward(self, cache: dict, d_way: np.ndarray, d_stop: float,
                 d_att: np.ndarray) -> dict[str, np.ndarray]:
        cfg = self.config
        p = self.params
        grads = {name: np.zeros_like(arr) for name, arr in p.items()}
        h_final = cache["h_final"]

        d_way = np.asarray(d_way, dtype=np.float64).reshape(1, 2)
        grads["head.way_w"] += h_final.T @ d_way
        grads["head.way_b"] += d_way
        dh = d_way @ p["head.way_w"].T

        d_stop_arr = np.array([[float(d_stop)]])
        grads["head.stop_w"] += h_final.T @ d_stop_arr
        grads["head.stop_b"] += d_stop_arr
        dh += d_stop_arr @ p["head.stop_w"].T

        d_att_row = np.asarray(d_att, dtype=np.float64).reshape(1, -1)
        grads["head.att_w"] += h_final.T @ d_att_row
        grads["head.att_b"] += d_att_row
        dh += d_att_row @ p["head.att_w"].T

        dc = np.zeros((1, cfg.hidden))
        d_step_rows: dict[int, np.ndarray] = {}
        for kind_, idx, cell_cache in reversed(cache["steps"]):
            dx, dh, dc, cell_grads = lstm_cell_backward(cell_cache, dh, dc)
            for g in "ifog":
                grads[f"lstm.wx_{g}"] += cell_grads["wx"][g]
                grads[f"lstm.wh_{g}"] += cell_grads["wh"][g]
                grads[f"lstm.b_{g}"] += cell_grads["b"][g]
            if kind_ == "tok":
                grads["embed.tok"][idx] += dx[0]
            else:
                d_step_rows[idx] = dx

        if d_step_rows:
            feats = cache["feats"]
            for idx, dx in d_step_rows.items():
                grads["embed.step_w"] += feats[idx:idx + 1].T @ dx
                grads["embed.step_b"] += dx
        return grads

    def act(self, state: AgentState) -> AgentOutput:
        raw, _ = self.forward(state)
        return _finish_output(state, self.config, raw)

    def to_checkpoint(self, iteration: int, seed: int,
                      metrics: dict | None = None) -> Checkpoint:
        return Checkpoint(kind=self.kind, iteration=iteration, seed=seed,
                          params=dict(self.params),
                          config=self.config.to_dict(),
                          metrics=metrics or {})

    @classmethod
    def from_checkpoint(cls, ckpt: Checkpoint) -> "LstmPolicy":
        if ckpt.kind != cls.kind:
            raise ValueError(
                f"checkpoint kind {ckpt.kind!r} is not {cls.kind!r}")
        return cls(ModelConfig.from_dict(ckpt.config), params=dict(ckpt.params))


POLICY_KINDS = {"transformer": TransformerPolicy, "lstm": LstmPolicy}


def policy_from_checkpoint(ckpt: Checkpoint):
    """Instantiate whichever policy family a checkpoint belongs to."""
    try:
        cls = POLICY_KINDS[ckpt.kind]
    except KeyError:
        raise ValueError(f"unknown policy kind {ckpt.kind!r}") from None
    return cls.from_checkpoint(ckpt)
