"""Versioned checkpoint container: tokenizer, model tensors, projection, provenance.

Tensors use the same lossless hexadecimal-float text encoding as the embedding
table files, so a load/save round trip is bitwise exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from .kg import format_vector, parse_vector
from .model import LmConfig, LmParams, Tokenizer, RESERVED_TOKENS
from .projection import ProjectionParams, ProjectionSpec

CKPT_MAGIC = "ALM-CKPT v1"


class CheckpointFormatError(ValueError):
    """A checkpoint file is truncated, corrupt, or of an unknown version."""


@dataclass
class Checkpoint:
    lm_params: LmParams
    tokenizer: Tokenizer
    proj_spec: ProjectionSpec | None
    proj_params: ProjectionParams | None
    provenance: dict

    @property
    def infused(self) -> bool:
        return self.proj_spec is not None


def _write_tensor(lines: list[str], name: str, arr: np.ndarray) -> None:
    shape = " ".join(str(d) for d in arr.shape)
    lines.append(f"[TENSOR {name} {shape}]")
    if arr.ndim == 1:
        lines.append(format_vector(arr))
    else:
        for row in arr:
            lines.append(format_vector(row))


def save_checkpoint(ckpt: Checkpoint, path: str | Path) -> None:
    provenance = dict(ckpt.provenance)
    provenance["lm_config"] = asdict(ckpt.lm_params.config)
    provenance["projection_spec"] = (
        asdict(ckpt.proj_spec) if ckpt.proj_spec is not None else None
    )
    lines = [CKPT_MAGIC, json.dumps(provenance, sort_keys=True)]
    tokens = ckpt.tokenizer.tokens
    lines.append(f"[TOKENIZER {len(tokens)}]")
    lines.extend(tokens)
    for name in ckpt.lm_params.names():
        _write_tensor(lines, f"lm.{name}", ckpt.lm_params[name])
    if ckpt.proj_params is not None:
        for k, (w, b) in enumerate(zip(ckpt.proj_params.weights, ckpt.proj_params.biases)):
            _write_tensor(lines, f"proj.w{k}", w)
            _write_tensor(lines, f"proj.b{k}", b)
    lines.append("[END]")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _parse_tensors(lines: list[str], pos: int) -> tuple[dict[str, np.ndarray], int]:
    tensors: dict[str, np.ndarray] = {}
    while pos < len(lines) and lines[pos].startswith("[TENSOR "):
        header = lines[pos][1:-1].split(" ")
        if lines[pos][-1] != "]" or len(header) < 3:
            raise CheckpointFormatError(f"bad tensor header: {lines[pos]!r}")
        name = header[1]
        try:
            dims = [int(d) for d in header[2:]]
        except ValueError:
            raise CheckpointFormatError(f"bad tensor shape: {lines[pos]!r}") from None
        pos += 1
        if len(dims) == 1:
            if pos >= len(lines):
                raise CheckpointFormatError(f"tensor {name} truncated")
            tensors[name] = parse_vector(lines[pos], dims[0], name)
            pos += 1
        elif len(dims) == 2:
            rows = []
            for _ in range(dims[0]):
                if pos >= len(lines):
                    raise CheckpointFormatError(f"tensor {name} truncated")
                rows.append(parse_vector(lines[pos], dims[1], name))
                pos += 1
            tensors[name] = (
                np.array(rows) if rows else np.zeros((0, dims[1]))
            )
        else:
            raise CheckpointFormatError(f"unsupported tensor rank for {name}")
    return tensors, pos


def load_checkpoint(path: str | Path) -> Checkpoint:
    text = Path(path).read_text(encoding="utf-8")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or lines[0] != CKPT_MAGIC:
        raise CheckpointFormatError(
            f"expected {CKPT_MAGIC!r} header, got {lines[0][:40]!r}" if lines else "empty file"
        )
    if len(lines) < 3:
        raise CheckpointFormatError("truncated checkpoint")
    try:
        provenance = json.loads(lines[1])
    except json.JSONDecodeError as exc:
        raise CheckpointFormatError(f"bad provenance block: {exc}") from None

    pos = 2
    if not lines[pos].startswith("[TOKENIZER "):
        raise CheckpointFormatError("missing tokenizer section")
    try:
        n_tokens = int(lines[pos][len("[TOKENIZER ") : -1])
    except ValueError:
        raise CheckpointFormatError(f"bad tokenizer header: {lines[pos]!r}") from None
    pos += 1
    if pos + n_tokens > len(lines):
        raise CheckpointFormatError("tokenizer section truncated")
    tokens = lines[pos : pos + n_tokens]
    if tokens[: len(RESERVED_TOKENS)] != list(RESERVED_TOKENS):
        raise CheckpointFormatError("tokenizer section missing reserved tokens")
    tokenizer = Tokenizer(tokens[len(RESERVED_TOKENS) :])
    pos += n_tokens

    tensors, pos = _parse_tensors(lines, pos)
    if pos >= len(lines) or lines[pos] != "[END]":
        raise CheckpointFormatError("missing end marker; file is truncated")

    lm_config = LmConfig(**provenance.pop("lm_config"))
    lm_tensors = {
        name[len("lm.") :]: arr for name, arr in tensors.items() if name.startswith("lm.")
    }
    lm_params = LmParams(lm_config, lm_tensors)

    spec_payload = provenance.pop("projection_spec")
    proj_spec = None
    proj_params = None
    if spec_payload is not None:
        proj_spec = ProjectionSpec(**spec_payload)
        weights, biases = [], []
        for k in range(len(proj_spec.layer_dims())):
            try:
                weights.append(tensors[f"proj.w{k}"])
                biases.append(tensors[f"proj.b{k}"])
            except KeyError:
                raise CheckpointFormatError(f"missing projection layer {k}") from None
        proj_params = ProjectionParams(weights, biases)
    return Checkpoint(lm_params, tokenizer, proj_spec, proj_params, provenance)
