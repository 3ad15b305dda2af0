"""Prompt assembly with the entity slot and the two-stage training procedure.

Stage one (feature alignment) trains only the projection to reproduce the
entity's surface label from its infused embedding. Stage two trains the
projection jointly with the unembedding head on QA prompts. The baseline arm
fine-tunes every parameter on the same QA text without the entity slot.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import model as lm
from .kg import EmbeddingTable
from .projection import ProjectionParams, ProjectionSpec, project, project_gradients
from .qagen import QaExample

logger = logging.getLogger(__name__)

STAGE_FEATURE_ALIGNMENT = "feature_alignment"
STAGE_END_TO_END = "end_to_end"
STAGE_BASELINE = "baseline_finetune"
STAGES = (STAGE_FEATURE_ALIGNMENT, STAGE_END_TO_END, STAGE_BASELINE)

_TRAINABLE = {
    STAGE_FEATURE_ALIGNMENT: "projection_only",
    STAGE_END_TO_END: "projection_plus_head",
    STAGE_BASELINE: "lm_all",
}

SCAFFOLD_WORDS = ("System", "Message", "Human:", "Assistant:")


@dataclass
class TrainPlan:
    stage: str
    learning_rate: float | None = None
    warmup_ratio: float = 0.03
    epochs: int | None = None
    batch_size: int = 8
    seed: int = 0

    def __post_init__(self) -> None:
        if self.stage not in STAGES:
            raise ValueError(f"stage must be one of {STAGES}")
        # Published defaults: 2e-4 overall, 2e-5 for the projection stage,
        # 50 alignment epochs, a single fine-tuning epoch.
        if self.learning_rate is None:
            self.learning_rate = 2e-5 if self.stage == STAGE_FEATURE_ALIGNMENT else 2e-4
        if self.epochs is None:
            self.epochs = 50 if self.stage == STAGE_FEATURE_ALIGNMENT else 1
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if not 0.0 <= self.warmup_ratio < 1.0:
            raise ValueError("warmup_ratio must be in [0, 1)")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")

    @property
    def trainable(self) -> str:
        return _TRAINABLE[self.stage]


def warmup_lr(base_lr: float, step: int, total_steps: int, warmup_ratio: float) -> float:
    """Linear warmup: base_lr * min(1, step / (warmup_ratio * total_steps)), 1-indexed."""
    if step < 1:
        raise ValueError("steps are 1-indexed")
    window = warmup_ratio * total_steps
    if window <= 0:
        return base_lr
    return base_lr * min(1.0, step / window)


# ---------------------------------------------------------------------------
# Prompt rendering.

@dataclass
class PromptRender:
    token_ids: list[int]
    response_start: int
    response_end: int
    text: str
    entity_label: str | None

    def prompt_ids(self) -> list[int]:
        return self.token_ids[: self.response_start]


def render_stage1(entity_label: str, tokenizer: lm.Tokenizer) -> PromptRender:
    """Alignment prompt: the entity slot alone, answered by the surface label."""
    text = f"System Message <STOP>\nHuman: <ENT> <STOP>\nAssistant: {entity_label} <STOP>"
    ids = tokenizer.encode("System Message") + [lm.STOP]
    ids.extend(tokenizer.encode("Human:"))
    ids.extend([lm.ENT, lm.STOP])
    ids.extend(tokenizer.encode("Assistant:"))
    response_start = len(ids)
    ids.extend(tokenizer.encode(entity_label))
    ids.append(lm.STOP)
    return PromptRender(ids, response_start, len(ids), text, entity_label)


def render_qa(example: QaExample, tokenizer: lm.Tokenizer, infused: bool) -> PromptRender:
    """QA prompt; the entity slot sits between Human: and the instruction."""
    if infused:
        text = (
            f"System Message <STOP>\nHuman:<ENT> {example.question} <STOP>\n"
            f"Assistant: {example.answer} <STOP>"
        )
    else:
        text = (
            f"System Message <STOP>\nHuman: {example.question} <STOP>\n"
            f"Assistant: {example.answer} <STOP>"
        )
    ids = tokenizer.encode("System Message") + [lm.STOP] + tokenizer.encode("Human:")
    if infused:
        ids.append(lm.ENT)
    ids.extend(tokenizer.encode(example.question))
    ids.append(lm.STOP)
    ids.extend(tokenizer.encode("Assistant:"))
    response_start = len(ids)
    ids.extend(tokenizer.encode(example.answer))
    ids.append(lm.STOP)
    return PromptRender(ids, response_start, len(ids), text, example.reference_entity)


def build_tokenizer(examples: list[QaExample], entity_labels) -> lm.Tokenizer:
    """Word vocabulary over the scaffold, training text, and all entity labels."""
    tok = lm.Tokenizer(SCAFFOLD_WORDS)
    for ex in examples:
        for w in ex.question.split():
            tok.add(w)
        for w in ex.answer.split():
            tok.add(w)
    for label in entity_labels:
        for w in label.split():
            tok.add(w)
    return tok


# ---------------------------------------------------------------------------
# Input assembly.

@dataclass
class AssembledInput:
    token_ids: np.ndarray
    prefix: np.ndarray | None
    target_ids: np.ndarray
    loss_mask: np.ndarray
    entity_vector: np.ndarray | None


def assemble_input(
    render: PromptRender,
    table: EmbeddingTable | None = None,
    proj_spec: ProjectionSpec | None = None,
    proj_params: ProjectionParams | None = None,
    context_len: int | None = None,
) -> AssembledInput:
    """Token ids plus the projected entity vector for the slot, with loss targets.

    The loss mask covers exactly the response tokens including the terminal
    STOP marker.
    """
    ids = np.array(render.token_ids, dtype=np.int64)
    if context_len is not None and ids.shape[0] > context_len:
        raise ValueError(f"render length {ids.shape[0]} exceeds context {context_len}")
    infused = lm.ENT in render.token_ids
    prefix = None
    x_e = None
    if infused:
        if table is None or proj_spec is None or proj_params is None:
            raise ValueError("infused render needs an embedding table and projection")
        x_e = table.entity_vector(render.entity_label)
        prefix = project(proj_spec, proj_params, x_e)
    length = ids.shape[0]
    targets = np.zeros(length, dtype=np.int64)
    targets[:-1] = ids[1:]
    mask = np.zeros(length, dtype=bool)
    for i in range(length - 1):
        if render.response_start <= i + 1 < render.response_end:
            mask[i] = True
    return AssembledInput(ids, prefix, targets, mask, x_e)


# ---------------------------------------------------------------------------
# Parameter-group SGD over rendered batches.

def _batches(n: int, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start : start + batch_size]


def _hash_tensors(tensors: dict[str, np.ndarray]) -> dict[str, bytes]:
    return {name: arr.tobytes() for name, arr in tensors.items()}


def _run_training(
    renders: list[PromptRender],
    lm_params: lm.LmParams,
    proj_spec: ProjectionSpec | None,
    proj_params: ProjectionParams | None,
    table: EmbeddingTable | None,
    plan: TrainPlan,
):
    """Shared SGD loop; which parameter groups move is decided by plan.trainable."""
    train_proj = plan.trainable in ("projection_only", "projection_plus_head")
    lm_names: list[str]
    if plan.trainable == "lm_all":
        lm_names = lm_params.names()
    elif plan.trainable == "projection_plus_head":
        lm_names = ["head"]
    else:
        lm_names = []

    new_lm = lm_params.copy()
    new_proj = proj_params.copy() if proj_params is not None else None
    rng = np.random.default_rng(plan.seed)
    n = len(renders)
    steps_per_epoch = (n + plan.batch_size - 1) // plan.batch_size
    total_steps = plan.epochs * steps_per_epoch
    context_len = new_lm.config.context_len

    inputs = [
        assemble_input(r, table, proj_spec, new_proj, context_len) for r in renders
    ]

    step = 0
    epoch_losses: list[float] = []
    for epoch in range(plan.epochs):
        epoch_loss = 0.0
        for batch in _batches(n, plan.batch_size, rng):
            step += 1
            lr = warmup_lr(plan.learning_rate, step, total_steps, plan.warmup_ratio)
            lm_grad_sum: dict[str, np.ndarray] = {}
            pw_sum = [np.zeros_like(w) for w in new_proj.weights] if train_proj else []
            pb_sum = [np.zeros_like(b) for b in new_proj.biases] if train_proj else []
            batch_loss = 0.0
            for idx in batch:
                inp = inputs[idx]
                if train_proj and inp.entity_vector is not None:
                    # Recompute the slot vector from the current projection.
                    prefix = project(proj_spec, new_proj, inp.entity_vector)
                else:
                    prefix = inp.prefix
                loss_value, grads, dprefix = lm.backward(
                    new_lm, inp.token_ids, inp.target_ids, inp.loss_mask, prefix
                )
                batch_loss += loss_value
                for name in lm_names:
                    if name in lm_grad_sum:
                        lm_grad_sum[name] += grads[name]
                    else:
                        lm_grad_sum[name] = grads[name].copy()
                if train_proj and dprefix is not None:
                    dw, db, _ = project_gradients(
                        proj_spec, new_proj, inp.entity_vector, dprefix
                    )
                    for acc, g in zip(pw_sum, dw):
                        acc += g
                    for acc, g in zip(pb_sum, db):
                        acc += g
            scale = lr / len(batch)
            for name in lm_names:
                new_lm.tensors[name] -= scale * lm_grad_sum[name]
            if train_proj:
                for w, g in zip(new_proj.weights, pw_sum):
                    w -= scale * g
                for b, g in zip(new_proj.biases, pb_sum):
                    b -= scale * g
            epoch_loss += batch_loss
        mean_loss = epoch_loss / n
        epoch_losses.append(mean_loss)
        logger.info("%s epoch %d/%d mean loss %.6f", plan.stage, epoch + 1, plan.epochs, mean_loss)
    return new_lm, new_proj, epoch_losses


def train_stage1(
    entity_labels: list[str],
    lm_params: lm.LmParams,
    proj_spec: ProjectionSpec,
    proj_params: ProjectionParams,
    table: EmbeddingTable,
    plan: TrainPlan,
    tokenizer: lm.Tokenizer,
):
    """Feature alignment: only the projection moves; the LM stays bitwise frozen."""
    if plan.stage != STAGE_FEATURE_ALIGNMENT:
        raise ValueError(f"plan stage {plan.stage!r} is not feature alignment")
    if proj_spec.output_dim != lm_params.config.model_dim:
        raise ValueError("projection output dimension does not match the model")
    renders = [render_stage1(label, tokenizer) for label in entity_labels]
    before = _hash_tensors(lm_params.tensors)
    new_lm, new_proj, losses = _run_training(
        renders, lm_params, proj_spec, proj_params, table, plan
    )
    assert _hash_tensors(new_lm.tensors) == before, "stage 1 must not touch the LM"
    return new_proj, losses


def train_stage2(
    examples: list[QaExample],
    lm_params: lm.LmParams,
    proj_spec: ProjectionSpec,
    proj_params: ProjectionParams,
    table: EmbeddingTable,
    plan: TrainPlan,
    tokenizer: lm.Tokenizer,
):
    """End-to-end fine-tuning of the projection and the unembedding head only."""
    if plan.stage != STAGE_END_TO_END:
        raise ValueError(f"plan stage {plan.stage!r} is not end-to-end fine-tuning")
    if proj_spec.output_dim != lm_params.config.model_dim:
        raise ValueError("projection output dimension does not match the model")
    renders = [render_qa(ex, tokenizer, infused=True) for ex in examples]
    before = _hash_tensors(lm_params.tensors)
    new_lm, new_proj, losses = _run_training(
        renders, lm_params, proj_spec, proj_params, table, plan
    )
    after = _hash_tensors(new_lm.tensors)
    frozen = [n for n in before if n != "head"]
    assert all(before[n] == after[n] for n in frozen), "stage 2 may change only the head"
    return new_proj, new_lm, losses


def train_baseline(
    examples: list[QaExample],
    lm_params: lm.LmParams,
    plan: TrainPlan,
    tokenizer: lm.Tokenizer,
):
    """Full-parameter fine-tuning on the same QA text without the entity slot."""
    if plan.stage != STAGE_BASELINE:
        raise ValueError(f"plan stage {plan.stage!r} is not baseline fine-tuning")
    renders = [render_qa(ex, tokenizer, infused=False) for ex in examples]
    new_lm, _, losses = _run_training(renders, lm_params, None, None, None, plan)
    return new_lm, losses


def predict_ids(
    lm_params: lm.LmParams,
    render: PromptRender,
    prefix: np.ndarray | None,
    max_new_tokens: int,
) -> list[int]:
    """Greedy continuation of the prompt part of a render, minus the trailing STOP."""
    out = lm.generate(lm_params, render.prompt_ids(), prefix, max_new_tokens)
    if out and out[-1] == lm.STOP:
        out = out[:-1]
    return out
