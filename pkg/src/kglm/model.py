"""Small decoder-only causal language model with exact handwritten gradients.

Supports substituting a dense vector for the reserved entity-slot token, so a
projected entity embedding can be infused into the input sequence.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .projection import gelu, gelu_grad

PAD, UNK, BOS, STOP, ENT = 0, 1, 2, 3, 4
RESERVED_TOKENS = ("<PAD>", "<UNK>", "<BOS>", "<STOP>", "<ENT>")

LN_EPS = 1e-5


class Tokenizer:
    """Word-level tokenizer over whitespace-split tokens with fixed reserved ids."""

    def __init__(self, words=()):
        self._tokens: list[str] = list(RESERVED_TOKENS)
        self._ids: dict[str, int] = {t: i for i, t in enumerate(self._tokens)}
        for w in words:
            self.add(w)

    def add(self, word: str) -> int:
        existing = self._ids.get(word)
        if existing is not None:
            return existing
        idx = len(self._tokens)
        self._tokens.append(word)
        self._ids[word] = idx
        return idx

    @classmethod
    def from_texts(cls, texts) -> "Tokenizer":
        tok = cls()
        for text in texts:
            for w in text.split():
                tok.add(w)
        return tok

    def encode(self, text: str) -> list[int]:
        return [self._ids.get(w, UNK) for w in text.split()]

    def decode(self, ids) -> str:
        words = []
        for i in ids:
            if i in (PAD, BOS, ENT):
                continue
            words.append(self._tokens[i])
        return " ".join(words)

    def __len__(self) -> int:
        return len(self._tokens)

    def __contains__(self, word: str) -> bool:
        return word in self._ids

    def token(self, idx: int) -> str:
        return self._tokens[idx]

    def save(self, path: str | Path) -> None:
        Path(path).write_text("\n".join(self._tokens) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Tokenizer":
        lines = Path(path).read_text(encoding="utf-8").split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        if lines[: len(RESERVED_TOKENS)] != list(RESERVED_TOKENS):
            raise ValueError("tokenizer file does not start with the reserved tokens")
        return cls(lines[len(RESERVED_TOKENS) :])

    @property
    def tokens(self) -> tuple[str, ...]:
        return tuple(self._tokens)


@dataclass
class LmConfig:
    vocab_size: int
    model_dim: int = 64
    layers: int = 2
    heads: int = 4
    context_len: int = 64
    seed: int = 0

    def __post_init__(self) -> None:
        if self.vocab_size < 1:
            raise ValueError("vocab_size must be >= 1")
        if self.model_dim % self.heads != 0:
            raise ValueError("model_dim must be divisible by heads")
        if self.layers < 1 or self.context_len < 2:
            raise ValueError("need at least 1 layer and context_len >= 2")


class LmParams:
    """Named parameter tensors for one model instance."""

    def __init__(self, config: LmConfig, tensors: dict[str, np.ndarray]):
        self.config = config
        self.tensors = tensors

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def copy(self) -> "LmParams":
        return LmParams(self.config, {k: v.copy() for k, v in self.tensors.items()})

    def names(self) -> list[str]:
        return list(self.tensors)


def layer_param_names(layer: int) -> list[str]:
    base = f"l{layer}."
    return [
        base + n
        for n in (
            "ln1_g", "ln1_b", "wq", "bq", "wk", "bk", "wv", "bv", "wo", "bo",
            "ln2_g", "ln2_b", "fc1_w", "fc1_b", "fc2_w", "fc2_b",
        )
    ]


def init_lm(config: LmConfig) -> LmParams:
    rng = np.random.default_rng(config.seed)
    d, v = config.model_dim, config.vocab_size

    def glorot(shape):
        limit = np.sqrt(6.0 / (shape[0] + shape[1]))
        return rng.uniform(-limit, limit, size=shape)

    tensors: dict[str, np.ndarray] = {
        "emb": rng.normal(0.0, 0.02, size=(v, d)),
        "pos": rng.normal(0.0, 0.02, size=(config.context_len, d)),
    }
    for i in range(config.layers):
        p = f"l{i}."
        tensors[p + "ln1_g"] = np.ones(d)
        tensors[p + "ln1_b"] = np.zeros(d)
        tensors[p + "wq"] = glorot((d, d))
        tensors[p + "bq"] = np.zeros(d)
        tensors[p + "wk"] = glorot((d, d))
        tensors[p + "bk"] = np.zeros(d)
        tensors[p + "wv"] = glorot((d, d))
        tensors[p + "bv"] = np.zeros(d)
        tensors[p + "wo"] = glorot((d, d))
        tensors[p + "bo"] = np.zeros(d)
        tensors[p + "ln2_g"] = np.ones(d)
        tensors[p + "ln2_b"] = np.zeros(d)
        tensors[p + "fc1_w"] = glorot((d, 4 * d))
        tensors[p + "fc1_b"] = np.zeros(4 * d)
        tensors[p + "fc2_w"] = glorot((4 * d, d))
        tensors[p + "fc2_b"] = np.zeros(d)
    tensors["lnf_g"] = np.ones(d)
    tensors["lnf_b"] = np.zeros(d)
    tensors["head"] = glorot((d, v))
    return LmParams(config, tensors)


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=axis, keepdims=True)


def _layer_norm(x: np.ndarray, g: np.ndarray, b: np.ndarray):
    mu = np.mean(x, axis=-1, keepdims=True)
    var = np.mean((x - mu) ** 2, axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + LN_EPS)
    xhat = (x - mu) * inv_std
    return xhat * g + b, (xhat, inv_std)


def _layer_norm_backward(dy: np.ndarray, g: np.ndarray, cache):
    xhat, inv_std = cache
    dg = np.sum(dy * xhat, axis=0)
    db = np.sum(dy, axis=0)
    dxhat = dy * g
    m1 = np.mean(dxhat, axis=-1, keepdims=True)
    m2 = np.mean(dxhat * xhat, axis=-1, keepdims=True)
    dx = inv_std * (dxhat - m1 - xhat * m2)
    return dx, dg, db


def _validate_sequence(params: LmParams, ids: np.ndarray, prefix) -> np.ndarray:
    ids = np.asarray(ids, dtype=np.int64)
    cfg = params.config
    if ids.ndim != 1 or ids.shape[0] < 1:
        raise ValueError("token ids must be a non-empty 1-d sequence")
    if ids.shape[0] > cfg.context_len:
        raise ValueError(f"sequence length {ids.shape[0]} exceeds context {cfg.context_len}")
    if ids.min() < 0 or ids.max() >= cfg.vocab_size:
        raise ValueError("token id outside vocabulary")
    ent_positions = np.flatnonzero(ids == ENT)
    if prefix is not None:
        if len(ent_positions) != 1:
            raise ValueError(
                f"prefix given but sequence has {len(ent_positions)} entity slots"
            )
        prefix = np.asarray(prefix, dtype=np.float64)
        if prefix.shape != (cfg.model_dim,):
            raise ValueError(
                f"prefix has shape {prefix.shape}, expected ({cfg.model_dim},)"
            )
    elif len(ent_positions) > 0:
        raise ValueError("sequence contains an entity slot but no prefix was given")
    return ids


def embed_sequence(params: LmParams, ids, prefix=None) -> np.ndarray:
    """Token embeddings plus positions, with the prefix substituted at the entity slot."""
    ids = _validate_sequence(params, ids, prefix)
    x = params["emb"][ids].copy()
    if prefix is not None:
        x[int(np.flatnonzero(ids == ENT)[0])] = np.asarray(prefix, dtype=np.float64)
    return x + params["pos"][: ids.shape[0]]


def _attention_mask(length: int, attn_block: tuple[int, ...]) -> np.ndarray:
    allowed = np.tril(np.ones((length, length), dtype=bool))
    for p in attn_block:
        allowed[:, p] = False
    if not allowed.any(axis=1).all():
        raise ValueError("attention blocking left a position with nothing to attend to")
    return allowed


def _forward_cached(params: LmParams, ids, prefix=None, attn_block: tuple[int, ...] = ()):
    ids = _validate_sequence(params, ids, prefix)
    cfg = params.config
    length = ids.shape[0]
    n_heads, dh = cfg.heads, cfg.model_dim // cfg.heads
    scale = 1.0 / np.sqrt(dh)
    allowed = _attention_mask(length, attn_block)

    x = embed_sequence(params, ids, prefix)
    cache: dict = {"ids": ids, "length": length, "allowed": allowed, "layers": []}
    for i in range(cfg.layers):
        p = f"l{i}."
        lc: dict = {"x_in": x}
        a, lc["ln1"] = _layer_norm(x, params[p + "ln1_g"], params[p + "ln1_b"])
        lc["a"] = a
        q = a @ params[p + "wq"] + params[p + "bq"]
        k = a @ params[p + "wk"] + params[p + "bk"]
        v = a @ params[p + "wv"] + params[p + "bv"]
        qh = q.reshape(length, n_heads, dh).transpose(1, 0, 2)
        kh = k.reshape(length, n_heads, dh).transpose(1, 0, 2)
        vh = v.reshape(length, n_heads, dh).transpose(1, 0, 2)
        scores = (qh @ kh.transpose(0, 2, 1)) * scale
        scores = np.where(allowed[None, :, :], scores, -np.inf)
        w = softmax(scores, axis=-1)
        zh = w @ vh
        z = zh.transpose(1, 0, 2).reshape(length, cfg.model_dim)
        attn_out = z @ params[p + "wo"] + params[p + "bo"]
        lc.update(qh=qh, kh=kh, vh=vh, w=w, z=z)
        x = x + attn_out
        lc["x_mid"] = x
        m, lc["ln2"] = _layer_norm(x, params[p + "ln2_g"], params[p + "ln2_b"])
        lc["m"] = m
        u = m @ params[p + "fc1_w"] + params[p + "fc1_b"]
        gact = gelu(u)
        mlp_out = gact @ params[p + "fc2_w"] + params[p + "fc2_b"]
        lc.update(u=u, gact=gact)
        x = x + mlp_out
        cache["layers"].append(lc)
    hf, cache["lnf"] = _layer_norm(x, params["lnf_g"], params["lnf_b"])
    cache["x_final"] = x
    cache["hf"] = hf
    logits = hf @ params["head"]
    return logits, cache


def forward(params: LmParams, ids, prefix=None, attn_block: tuple[int, ...] = ()) -> np.ndarray:
    """Logits for every position; strictly causal in the token positions.

    `attn_block` is a diagnostic hook listing positions no query may attend to,
    used to isolate the entity slot's contribution in ablation experiments.
    """
    logits, _ = _forward_cached(params, ids, prefix, attn_block)
    return logits


def loss(logits: np.ndarray, target_ids, loss_mask) -> float:
    """Mean next-token cross-entropy over masked positions."""
    targets = np.asarray(target_ids, dtype=np.int64)
    mask = np.asarray(loss_mask, dtype=bool)
    if logits.shape[0] != targets.shape[0] or logits.shape[0] != mask.shape[0]:
        raise ValueError("logits, targets, and mask lengths disagree")
    if not mask.any():
        raise ValueError("loss mask selects no positions")
    rows = np.flatnonzero(mask)
    shifted = logits[rows] - np.max(logits[rows], axis=1, keepdims=True)
    log_z = np.log(np.sum(np.exp(shifted), axis=1))
    picked = shifted[np.arange(rows.shape[0]), targets[rows]]
    return float(np.mean(log_z - picked))


def _loss_grad(logits: np.ndarray, targets: np.ndarray, mask: np.ndarray) -> np.ndarray:
    rows = np.flatnonzero(mask)
    dlogits = np.zeros_like(logits)
    probs = softmax(logits[rows], axis=-1)
    probs[np.arange(rows.shape[0]), targets[rows]] -= 1.0
    dlogits[rows] = probs / rows.shape[0]
    return dlogits


def backward(
    params: LmParams,
    ids,
    target_ids,
    loss_mask,
    prefix=None,
    attn_block: tuple[int, ...] = (),
):
    """Exact gradients of the masked cross-entropy.

    Returns (loss_value, grads dict keyed like the parameter tensors, dprefix),
    where dprefix is None when no prefix was supplied.
    """
    logits, cache = _forward_cached(params, ids, prefix, attn_block)
    targets = np.asarray(target_ids, dtype=np.int64)
    mask = np.asarray(loss_mask, dtype=bool)
    loss_value = loss(logits, targets, mask)
    dlogits = _loss_grad(logits, targets, mask)

    cfg = params.config
    length = cache["length"]
    n_heads, dh = cfg.heads, cfg.model_dim // cfg.heads
    scale = 1.0 / np.sqrt(dh)
    grads: dict[str, np.ndarray] = {}

    grads["head"] = cache["hf"].T @ dlogits
    dhf = dlogits @ params["head"].T
    dx, grads["lnf_g"], grads["lnf_b"] = _layer_norm_backward(dhf, params["lnf_g"], cache["lnf"])

    for i in range(cfg.layers - 1, -1, -1):
        p = f"l{i}."
        lc = cache["layers"][i]
        # MLP branch.
        dmlp_out = dx
        grads[p + "fc2_w"] = lc["gact"].T @ dmlp_out
        grads[p + "fc2_b"] = np.sum(dmlp_out, axis=0)
        dgact = dmlp_out @ params[p + "fc2_w"].T
        du = dgact * gelu_grad(lc["u"])
        grads[p + "fc1_w"] = lc["m"].T @ du
        grads[p + "fc1_b"] = np.sum(du, axis=0)
        dm = du @ params[p + "fc1_w"].T
        dx_mid, grads[p + "ln2_g"], grads[p + "ln2_b"] = _layer_norm_backward(
            dm, params[p + "ln2_g"], lc["ln2"]
        )
        dx = dx + dx_mid
        # Attention branch.
        dattn_out = dx
        grads[p + "wo"] = lc["z"].T @ dattn_out
        grads[p + "bo"] = np.sum(dattn_out, axis=0)
        dz = dattn_out @ params[p + "wo"].T
        dzh = dz.reshape(length, n_heads, dh).transpose(1, 0, 2)
        dw = dzh @ lc["vh"].transpose(0, 2, 1)
        dvh = lc["w"].transpose(0, 2, 1) @ dzh
        w = lc["w"]
        dscores = w * (dw - np.sum(dw * w, axis=-1, keepdims=True))
        dqh = (dscores @ lc["kh"]) * scale
        dkh = (dscores.transpose(0, 2, 1) @ lc["qh"]) * scale
        dq = dqh.transpose(1, 0, 2).reshape(length, cfg.model_dim)
        dk = dkh.transpose(1, 0, 2).reshape(length, cfg.model_dim)
        dv = dvh.transpose(1, 0, 2).reshape(length, cfg.model_dim)
        a = lc["a"]
        grads[p + "wq"] = a.T @ dq
        grads[p + "bq"] = np.sum(dq, axis=0)
        grads[p + "wk"] = a.T @ dk
        grads[p + "bk"] = np.sum(dk, axis=0)
        grads[p + "wv"] = a.T @ dv
        grads[p + "bv"] = np.sum(dv, axis=0)
        da = dq @ params[p + "wq"].T + dk @ params[p + "wk"].T + dv @ params[p + "wv"].T
        dx_in, grads[p + "ln1_g"], grads[p + "ln1_b"] = _layer_norm_backward(
            da, params[p + "ln1_g"], lc["ln1"]
        )
        dx = dx + dx_in

    grads["pos"] = np.zeros_like(params["pos"])
    grads["pos"][:length] = dx
    grads["emb"] = np.zeros_like(params["emb"])
    ids_arr = cache["ids"]
    dprefix = None
    if prefix is not None:
        ent_pos = int(np.flatnonzero(ids_arr == ENT)[0])
        dprefix = dx[ent_pos].copy()
        keep = np.ones(length, dtype=bool)
        keep[ent_pos] = False
        np.add.at(grads["emb"], ids_arr[keep], dx[keep])
    else:
        np.add.at(grads["emb"], ids_arr, dx)
    return loss_value, grads, dprefix


def generate(params: LmParams, prompt_ids, prefix=None, max_new_tokens: int = 16) -> list[int]:
    """Greedy decoding; stops at the STOP token (included) or the budget.

    Argmax ties resolve to the lowest token id, so decoding is reproducible.
    """
    ids = list(np.asarray(prompt_ids, dtype=np.int64))
    out: list[int] = []
    for _ in range(max_new_tokens):
        if len(ids) >= params.config.context_len:
            break
        logits = forward(params, np.array(ids, dtype=np.int64), prefix)
        nxt = int(np.argmax(logits[-1]))
        ids.append(nxt)
        out.append(nxt)
        if nxt == STOP:
            break
    return out
