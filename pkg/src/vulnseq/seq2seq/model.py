"""Encoder-decoder network over abstracted token sequences.

Architecture: shared embedding, a single bidirectional LSTM encoder layer,
a bridge that maps the concatenated final encoder states to the initial
states of a two-layer LSTM decoder, and a linear projection from the top
decoder layer to vocabulary logits. Pure float64 numpy throughout; every
random draw comes from one seeded generator so runs are reproducible
bit-for-bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, ShapeError
from .vocab import EOS, SOS, Vocabulary


@dataclass(frozen=True)
class ModelConfig:
    embedding_dim: int = 32
    hidden_units: int = 32
    encoder_layers: int = 1
    decoder_layers: int = 2
    max_decode_length: int = 64
    learning_rate: float = 0.05
    batch_size: int = 16
    clip_norm: float = 5.0
    iteration_steps: int = 5000
    max_steps: int = 5000
    min_count: int = 1
    seed: int = 0

    def validate(self) -> None:
        positive = {
            "embedding_dim": self.embedding_dim,
            "hidden_units": self.hidden_units,
            "max_decode_length": self.max_decode_length,
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "clip_norm": self.clip_norm,
            "iteration_steps": self.iteration_steps,
            "min_count": self.min_count,
        }
        for name, value in positive.items():
            if value <= 0:
                raise ConfigError(f"{name} must be positive, got {value!r}")
        if self.max_steps < 0:
            raise ConfigError("max_steps must be >= 0")
        if self.encoder_layers != 1:
            raise ConfigError("only a 1-layer encoder is supported")
        if self.decoder_layers != 2:
            raise ConfigError("only a 2-layer decoder is supported")
        if self.max_decode_length < 52:
            raise ConfigError("max_decode_length must be >= 52")


# Declared tensor order; checkpoints and gradient walks follow it.
def parameter_shapes(cfg: ModelConfig, vocab_size: int) -> dict[str, tuple[int, ...]]:
    d, h, v = cfg.embedding_dim, cfg.hidden_units, vocab_size
    shapes: dict[str, tuple[int, ...]] = {"embedding": (v, d)}
    for direction in ("fwd", "bwd"):
        shapes[f"enc_{direction}_W"] = (d, 4 * h)
        shapes[f"enc_{direction}_U"] = (h, 4 * h)
        shapes[f"enc_{direction}_b"] = (4 * h,)
    for layer in range(cfg.decoder_layers):
        for kind in ("h", "c"):
            shapes[f"bridge_{kind}{layer}_W"] = (2 * h, h)
            shapes[f"bridge_{kind}{layer}_b"] = (h,)
    shapes["dec0_W"] = (d, 4 * h)
    shapes["dec0_U"] = (h, 4 * h)
    shapes["dec0_b"] = (4 * h,)
    shapes["dec1_W"] = (h, 4 * h)
    shapes["dec1_U"] = (h, 4 * h)
    shapes["dec1_b"] = (4 * h,)
    shapes["out_W"] = (h, v)
    shapes["out_b"] = (v,)
    return shapes


@dataclass
class Seq2SeqModel:
    config: ModelConfig
    vocabulary: Vocabulary
    params: dict[str, np.ndarray] = field(repr=False)

    def copy_params(self) -> dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self.params.items()}


def init_model(cfg: ModelConfig, vocabulary: Vocabulary) -> Seq2SeqModel:
    cfg.validate()
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    r = 1.0 / np.sqrt(cfg.hidden_units)
    params = {
        name: rng.uniform(-r, r, size=shape)
        for name, shape in parameter_shapes(cfg, vocabulary.size()).items()
    }
    return Seq2SeqModel(cfg, vocabulary, params)


def check_parameter_shapes(model: Seq2SeqModel) -> None:
    expected = parameter_shapes(model.config, model.vocabulary.size())
    if set(model.params) != set(expected):
        raise ShapeError("parameter names do not match the architecture")
    for name, shape in expected.items():
        if model.params[name].shape != shape:
            raise ShapeError(
                f"{name}: expected shape {shape}, got {model.params[name].shape}"
            )


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # piecewise form avoids overflow in exp for large |z|
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _lstm_step(x, h, c, W, U, b):
    """One batched step. Returns (h', c', gate cache for backprop)."""
    n = W.shape[1] // 4
    z = x @ W + h @ U + b
    i = _sigmoid(z[:, :n])
    f = _sigmoid(z[:, n : 2 * n])
    g = np.tanh(z[:, 2 * n : 3 * n])
    o = _sigmoid(z[:, 3 * n :])
    c_new = f * c + i * g
    h_new = o * np.tanh(c_new)
    return h_new, c_new, (i, f, g, o)


def recurrent_cell(x, h, c, params):
    """Single-vector LSTM step: params holds W (d,4h), U (h,4h), b (4h,)."""
    x = np.asarray(x, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    W, U, b = params["W"], params["U"], params["b"]
    n = U.shape[0]
    if W.shape != (x.shape[-1], 4 * n) or U.shape != (n, 4 * n) or b.shape != (4 * n,):
        raise ShapeError(
            f"inconsistent cell shapes: W {W.shape}, U {U.shape}, b {b.shape}"
        )
    if h.shape != (n,) or c.shape != (n,):
        raise ShapeError(f"state must have shape ({n},)")
    h_new, c_new, _ = _lstm_step(x[None, :], h[None, :], c[None, :], W, U, b)
    return h_new[0], c_new[0]


def _encode_batch(model: Seq2SeqModel, ids: np.ndarray, mask: np.ndarray):
    """Run the bidirectional encoder over a right-padded id batch.

    Masked positions keep the previous state, so trailing padding never
    leaks into the final states. Returns outputs (B,T,2H), the bridged
    decoder initial states, and the cache needed for backprop.
    """
    p = model.params
    B, T = ids.shape
    H = model.config.hidden_units
    X = p["embedding"][ids]  # (B,T,D)

    states = {}
    caches = {"fwd": [], "bwd": []}
    outputs = np.zeros((B, T, 2 * H))
    for direction, order in (("fwd", range(T)), ("bwd", range(T - 1, -1, -1))):
        W, U, b = p[f"enc_{direction}_W"], p[f"enc_{direction}_U"], p[f"enc_{direction}_b"]
        h = np.zeros((B, H))
        c = np.zeros((B, H))
        for t in order:
            m = mask[:, t : t + 1]
            h_new, c_new, gates = _lstm_step(X[:, t], h, c, W, U, b)
            caches[direction].append((t, X[:, t], h, c, gates, c_new, m))
            h = m * h_new + (1.0 - m) * h
            c = m * c_new + (1.0 - m) * c
            half = slice(0, H) if direction == "fwd" else slice(H, 2 * H)
            outputs[:, t, half] = h
        states[direction] = (h, c)

    h_cat = np.concatenate([states["fwd"][0], states["bwd"][0]], axis=1)
    c_cat = np.concatenate([states["fwd"][1], states["bwd"][1]], axis=1)
    init = []
    bridge_cache = []
    for layer in range(model.config.decoder_layers):
        h0 = np.tanh(h_cat @ p[f"bridge_h{layer}_W"] + p[f"bridge_h{layer}_b"])
        c0 = np.tanh(c_cat @ p[f"bridge_c{layer}_W"] + p[f"bridge_c{layer}_b"])
        init.append((h0, c0))
        bridge_cache.append((h0, c0))
    cache = {
        "ids": ids,
        "mask": mask,
        "X": X,
        "steps": caches,
        "h_cat": h_cat,
        "c_cat": c_cat,
        "bridge": bridge_cache,
    }
    return outputs, init, cache


def encode(input_ids: list[int], model: Seq2SeqModel):
    """Encode one sequence. Returns (outputs (T,2H), decoder init states)."""
    check_parameter_shapes(model)
    if not input_ids:
        raise ShapeError("cannot encode an empty sequence")
    v = model.vocabulary.size()
    if any(i < 0 or i >= v for i in input_ids):
        raise ShapeError("input id out of vocabulary range")
    ids = np.asarray([input_ids], dtype=np.int64)
    mask = np.ones_like(ids, dtype=np.float64)
    outputs, init, _ = _encode_batch(model, ids, mask)
    return outputs[0], [(h[0], c[0]) for h, c in init]


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _decoder_step(model: Seq2SeqModel, token_id: int, state):
    p = model.params
    x = p["embedding"][token_id][None, :]
    (h0, c0), (h1, c1) = state
    h0n, c0n, _ = _lstm_step(x, h0[None, :], c0[None, :], p["dec0_W"], p["dec0_U"], p["dec0_b"])
    h1n, c1n, _ = _lstm_step(h0n, h1[None, :], c1[None, :], p["dec1_W"], p["dec1_U"], p["dec1_b"])
    logits = h1n @ p["out_W"] + p["out_b"]
    return logits[0], [(h0n[0], c0n[0]), (h1n[0], c1n[0])]


def decode_greedy(state, model: Seq2SeqModel) -> list[int]:
    """Emit argmax tokens until EOS or the configured cap.

    Ties break toward the lowest index; SOS/EOS are not part of the
    returned list.
    """
    out: list[int] = []
    token = SOS
    for _ in range(model.config.max_decode_length):
        logits, state = _decoder_step(model, token, state)
        probs = softmax(logits)
        assert abs(float(probs.sum()) - 1.0) < 1e-6
        token = int(np.argmax(probs))
        if token == EOS:
            break
        out.append(token)
    return out
