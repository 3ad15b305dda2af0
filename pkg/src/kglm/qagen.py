"""QA dataset generation from a knowledge graph via template families.

Template slots: {Y} marks the reference entity of tail-slot questions whose
answers are the *heads* pointing at it ("Who controls {Y}?" is answered by the
controllers of Y); {x} marks YAGO-style head-slot questions answered by tails.
{X} is the candidate entity of verification questions and {Z} the candidate
count of counting verifications.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .kg import KnowledgeGraph

MODES = ("open", "verification", "counting")
POLARITIES = ("positive", "negative")
SPLITS = ("train", "test")

ANSWER_SEPARATOR = ", "


@dataclass(frozen=True)
class QaTemplate:
    relation: str
    pattern: str
    mode: str

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        has = {slot: ("{" + slot + "}") in self.pattern for slot in ("X", "Y", "Z", "x")}
        if self.mode == "open":
            if not (has["Y"] ^ has["x"]) or has["X"] or has["Z"]:
                raise ValueError(f"open pattern needs exactly one of {{Y}}/{{x}}: {self.pattern!r}")
        elif self.mode == "verification":
            if not (has["X"] and has["Y"]) or has["Z"] or has["x"]:
                raise ValueError(f"verification pattern needs {{X}} and {{Y}}: {self.pattern!r}")
        else:
            if not has["Y"] or has["X"] or has["x"]:
                raise ValueError(f"counting pattern needs {{Y}} (and optionally {{Z}}): {self.pattern!r}")

    @property
    def head_slot(self) -> bool:
        return "{x}" in self.pattern

    @property
    def has_count_slot(self) -> bool:
        return "{Z}" in self.pattern


@dataclass
class QaExample:
    reference_entity: str
    question: str
    answer: str
    relation: str
    template_id: str
    polarity: str
    split: str = "train"

    @property
    def mode(self) -> str:
        return self.template_id.split(":")[1]


@dataclass
class DatasetStats:
    n_entities: int
    n_relations: int
    train_size: int
    test_size: int
    awc: float

    def to_json(self) -> str:
        return json.dumps(
            {
                "entities": self.n_entities,
                "relations": self.n_relations,
                "train_size": self.train_size,
                "test_size": self.test_size,
                "awc": self.awc,
            },
            sort_keys=True,
        )


@dataclass
class GenConfig:
    max_answers: int = 20
    negative_rate: float = 1.0
    seed: int = 0
    open_per_relation: int | None = None
    verification_per_relation: int | None = None
    counting_per_relation: int | None = None

    def __post_init__(self) -> None:
        if self.max_answers < 1:
            raise ValueError("max_answers must be >= 1")
        if not 0.0 <= self.negative_rate <= 1.0:
            raise ValueError("negative_rate must be in [0, 1]")


def _template_ids(templates: list[QaTemplate]) -> list[str]:
    counters: dict[tuple[str, str], int] = {}
    ids = []
    for t in templates:
        key = (t.relation, t.mode)
        idx = counters.get(key, 0)
        counters[key] = idx + 1
        ids.append(f"{t.relation}:{t.mode}:{idx}")
    return ids


def _cap_templates(templates: list[QaTemplate], config: GenConfig) -> list[bool]:
    caps = {
        "open": config.open_per_relation,
        "verification": config.verification_per_relation,
        "counting": config.counting_per_relation,
    }
    counters: dict[tuple[str, str], int] = {}
    keep = []
    for t in templates:
        key = (t.relation, t.mode)
        idx = counters.get(key, 0)
        counters[key] = idx + 1
        cap = caps[t.mode]
        keep.append(cap is None or idx < cap)
    return keep


def _perturbed_count(count: int, rng: np.random.Generator) -> int:
    """count +/- 1, never 0 and never the true count."""
    if count == 1:
        return 2
    return count + (1 if rng.integers(0, 2) else -1)


def generate_qa(
    kg: KnowledgeGraph, templates: list[QaTemplate], config: GenConfig
) -> tuple[list[QaExample], DatasetStats]:
    """Template instantiation over every entity, deterministic under the seed.

    Entities whose answer set for a relation exceeds max_answers contribute no
    examples at all for that (entity, relation). Verification negatives sample a
    non-related entity and answer False; counting negatives perturb the count.
    """
    for t in templates:
        if t.relation not in kg.relations:
            raise ValueError(f"template relation {t.relation!r} not in the graph")
    rng = np.random.default_rng(config.seed)
    ids = _template_ids(templates)
    keep = _cap_templates(templates, config)
    n_entities = len(kg.entities)
    examples: list[QaExample] = []

    for ent_id in range(n_entities):
        ent_label = kg.entities.label(ent_id)
        for template, template_id, kept in zip(templates, ids, keep):
            if not kept:
                continue
            rel_id = kg.relations.index(template.relation)
            if template.head_slot:
                answer_ids = kg.tails(ent_id, rel_id)
            else:
                answer_ids = kg.heads(ent_id, rel_id)
            if not answer_ids or len(answer_ids) > config.max_answers:
                continue
            answer_labels = sorted(kg.entities.label(i) for i in answer_ids)

            if template.mode == "open":
                slot = "x" if template.head_slot else "Y"
                question = template.pattern.replace("{" + slot + "}", ent_label)
                examples.append(
                    QaExample(ent_label, question, ANSWER_SEPARATOR.join(answer_labels),
                              template.relation, template_id, "positive")
                )
            elif template.mode == "verification":
                true_head = answer_labels[int(rng.integers(0, len(answer_labels)))]
                question = template.pattern.replace("{X}", true_head).replace("{Y}", ent_label)
                examples.append(
                    QaExample(ent_label, question, "True", template.relation,
                              template_id, "positive")
                )
                if rng.random() < config.negative_rate:
                    wrong = _sample_unrelated(rng, kg, ent_id, rel_id, n_entities)
                    if wrong is not None:
                        question = template.pattern.replace("{X}", wrong).replace("{Y}", ent_label)
                        examples.append(
                            QaExample(ent_label, question, "False", template.relation,
                                      template_id, "negative")
                        )
            else:
                count = len(answer_ids)
                if template.has_count_slot:
                    question = template.pattern.replace("{Y}", ent_label).replace("{Z}", str(count))
                    examples.append(
                        QaExample(ent_label, question, "True", template.relation,
                                  template_id, "positive")
                    )
                    if rng.random() < config.negative_rate:
                        wrong_count = _perturbed_count(count, rng)
                        question = template.pattern.replace("{Y}", ent_label).replace(
                            "{Z}", str(wrong_count)
                        )
                        examples.append(
                            QaExample(ent_label, question, "False", template.relation,
                                      template_id, "negative")
                        )
                else:
                    question = template.pattern.replace("{Y}", ent_label)
                    examples.append(
                        QaExample(ent_label, question, str(count), template.relation,
                                  template_id, "positive")
                    )

    stats = compute_stats(kg, examples)
    return examples, stats


def _sample_unrelated(
    rng: np.random.Generator,
    kg: KnowledgeGraph,
    ent_id: int,
    rel_id: int,
    n_entities: int,
    max_attempts: int = 200,
) -> str | None:
    """Uniform entity with no (candidate, relation, entity) triple; None if saturated."""
    related = set(kg.heads(ent_id, rel_id))
    for _ in range(max_attempts):
        candidate = int(rng.integers(0, n_entities))
        if candidate != ent_id and candidate not in related:
            return kg.entities.label(candidate)
    return None


def compute_stats(kg: KnowledgeGraph, examples: list[QaExample]) -> DatasetStats:
    train = sum(1 for e in examples if e.split == "train")
    test = len(examples) - train
    awc = (
        sum(len(e.answer.split()) for e in examples) / len(examples)
        if examples
        else 0.0
    )
    return DatasetStats(len(kg.entities), len(kg.relations), train, test, awc)


def split_dataset(
    examples: list[QaExample], test_fraction: float, seed: int
) -> list[QaExample]:
    """Assign splits grouped by question text so no question string leaks across."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must be in (0, 1)")
    groups: dict[str, list[int]] = {}
    for i, ex in enumerate(examples):
        groups.setdefault(ex.question, []).append(i)
    keys = list(groups)
    if len(keys) < 2:
        raise ValueError("need at least 2 distinct questions to split")
    n_test = int(round(len(keys) * test_fraction))
    n_test = min(max(n_test, 1), len(keys) - 1)
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(keys))
    test_keys = {keys[i] for i in order[:n_test]}
    return [
        replace(ex, split="test" if ex.question in test_keys else "train")
        for ex in examples
    ]


# ---------------------------------------------------------------------------
# Serialization.

_JSONL_FIELDS = (
    "reference_entity", "question", "answer", "relation", "template_id", "polarity", "split",
)


def example_to_json(ex: QaExample) -> str:
    return json.dumps({f: getattr(ex, f) for f in _JSONL_FIELDS}, ensure_ascii=False)


def write_jsonl(examples: list[QaExample], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(example_to_json(ex) + "\n")


def read_jsonl(path: str | Path) -> list[QaExample]:
    examples = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line:
            continue
        record = json.loads(line)
        examples.append(QaExample(**{f: record[f] for f in _JSONL_FIELDS}))
    return examples


def write_templates(templates: list[QaTemplate], path: str | Path) -> None:
    payload = [
        {"relation": t.relation, "pattern": t.pattern, "mode": t.mode} for t in templates
    ]
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def read_templates(path: str | Path) -> list[QaTemplate]:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    return [QaTemplate(t["relation"], t["pattern"], t["mode"]) for t in payload]


# ---------------------------------------------------------------------------
# Built-in company-ownership template catalog.

def _co(relation: str, mode: str, *patterns: str) -> list[QaTemplate]:
    return [QaTemplate(relation, p, mode) for p in patterns]


CO_TEMPLATES: list[QaTemplate] = [
    # Ultimate control.
    *_co("ultimate_control", "open",
         "Who is the ultimate controller of {Y}?",
         "Who holds ultimate control over {Y}?",
         "Which company or person is the ultimate controller of {Y}?"),
    *_co("ultimate_control", "verification",
         "Is it true that {X} is the ultimate controller of {Y}?",
         "Does {X} have ultimate control over {Y}?",
         "Can we confirm that {X} is the top controller of {Y}?"),
    # Control.
    *_co("control", "open",
         "Who controls {Y}?",
         "Who is the controller of {Y}?",
         "Which company or person has control over {Y}?"),
    *_co("control", "verification",
         "Does {X} control {Y}?",
         "Is it true that {X} has control over {Y}?",
         "Can we verify that {X} is a controller of {Y}?"),
    *_co("control", "counting",
         "How many companies and/or people control {Y}?",
         "Is it true that {Y} is controlled by {Z} companies and/or people?"),
    # Ownership.
    *_co("own", "open",
         "Who owns {Y}?",
         "Who is the owner of {Y}?",
         "Which entity is the owner of {Y}?"),
    *_co("own", "verification",
         "Is it true that {X} owns shares of {Y}?",
         "Does {X} have ownership over {Y}?",
         "Can we confirm that {X} owns shares in {Y}?"),
    *_co("own", "counting",
         "How many companies own {Y}?",
         "Is it true that {Y} is owned by {Z} companies and/or people?"),
    # Role.
    *_co("role", "open",
         "Who has a role in {Y}?",
         "Who takes a role in {Y}?",
         "Which company or person assumes a role with {Y}?"),
    *_co("role", "verification",
         "Does {X} have a role in {Y}?",
         "Is it true that {X} is assigned a role in {Y}?",
         "Can we confirm that {X} plays a role in {Y}?"),
    *_co("role", "counting",
         "How many entities have a role in {Y}?",
         "Is it true that {Y} has {Z} entities assuming a role in it?"),
    # Qualified holdings.
    *_co("qualified_holding", "open",
         "Who has qualified holdings in {Y}?",
         "Who is a qualified holder of {Y}?",
         "Which company or person holds a qualified position in {Y}?"),
    *_co("qualified_holding", "verification",
         "Is it true that {X} has qualified holdings in {Y}?",
         "Does {X} qualify as a holder in {Y}?",
         "Can we confirm that {X} is a qualified holder of {Y}?"),
    *_co("qualified_holding", "counting",
         "How many entities have qualified holdings in {Y}?",
         "Is it true that {Y} has {Z} entities with qualified holdings?"),
    # Reachability (verification and counting only).
    *_co("reachable", "verification",
         "Is it true that {X} is connected to {Y}?",
         "Can {X} reach {Y} through any connections?",
         "Does {X} have a connection to {Y}?"),
    *_co("reachable", "counting",
         "How many entities can reach {Y} through any connections?",
         "Is it true that {Y} is connected with {Z} companies and/or people?"),
    # Influence.
    *_co("influence", "open",
         "Who influences {Y}?",
         "Who has influence over {Y}?"),
    *_co("influence", "verification",
         "Is it true that {X} influences {Y}?",
         "Does {X} have influence on {Y}?",
         "Can {X} influence {Y}?"),
    *_co("influence", "counting",
         "How many companies and/or people influence {Y}?",
         "Is it true that {Y} is influenced by {Z} companies and/or people?"),
]
