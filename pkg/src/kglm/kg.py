"""Knowledge-graph data model, triple-file ingestion, and embedding-table persistence."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class TripleParseError(ValueError):
    """A line in a triple file could not be parsed."""

    def __init__(self, message: str, line_no: int):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class TableFormatError(ValueError):
    """An embedding-table file violates its declared layout."""


class Vocabulary:
    """Dense label/index mapping; indices assigned in first-appearance order."""

    def __init__(self) -> None:
        self._labels: list[str] = []
        self._ids: dict[str, int] = {}

    def add(self, label: str) -> int:
        existing = self._ids.get(label)
        if existing is not None:
            return existing
        idx = len(self._labels)
        self._labels.append(label)
        self._ids[label] = idx
        return idx

    def index(self, label: str) -> int:
        try:
            return self._ids[label]
        except KeyError:
            raise LookupError(f"unknown label: {label!r}") from None

    def label(self, idx: int) -> str:
        if not 0 <= idx < len(self._labels):
            raise LookupError(f"index {idx} outside vocabulary of size {len(self._labels)}")
        return self._labels[idx]

    def __contains__(self, label: str) -> bool:
        return label in self._ids

    def __len__(self) -> int:
        return len(self._labels)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(self._labels)


@dataclass(frozen=True)
class Triple:
    head: int
    relation: int
    tail: int


@dataclass
class KnowledgeGraph:
    """Entity/relation vocabularies plus an ordered, deduplicated triple list."""

    entities: Vocabulary = field(default_factory=Vocabulary)
    relations: Vocabulary = field(default_factory=Vocabulary)
    triples: list[Triple] = field(default_factory=list)
    _tails: dict[tuple[int, int], list[int]] = field(default_factory=dict, repr=False)
    _heads: dict[tuple[int, int], list[int]] = field(default_factory=dict, repr=False)

    @classmethod
    def from_label_triples(cls, label_triples) -> "KnowledgeGraph":
        """Build a graph from (head, relation, tail) label tuples, dropping duplicates."""
        kg = cls()
        seen: set[tuple[int, int, int]] = set()
        for head, relation, tail in label_triples:
            h = kg.entities.add(head)
            r = kg.relations.add(relation)
            t = kg.entities.add(tail)
            key = (h, r, t)
            if key in seen:
                continue
            seen.add(key)
            kg.triples.append(Triple(h, r, t))
            kg._tails.setdefault((h, r), []).append(t)
            kg._heads.setdefault((t, r), []).append(h)
        return kg

    def _check_entity(self, idx: int) -> None:
        if not 0 <= idx < len(self.entities):
            raise LookupError(f"unknown entity id {idx}")

    def _check_relation(self, idx: int) -> None:
        if not 0 <= idx < len(self.relations):
            raise LookupError(f"unknown relation id {idx}")

    def tails(self, head: int, relation: int) -> list[int]:
        """All t with (head, relation, t) in the graph, in triple-file order."""
        self._check_entity(head)
        self._check_relation(relation)
        return list(self._tails.get((head, relation), ()))

    def heads(self, tail: int, relation: int) -> list[int]:
        """All h with (h, relation, tail) in the graph, in triple-file order."""
        self._check_entity(tail)
        self._check_relation(relation)
        return list(self._heads.get((tail, relation), ()))

    def has_triple(self, head: int, relation: int, tail: int) -> bool:
        return tail in self._tails.get((head, relation), ())

    @property
    def triple_set(self) -> set[tuple[int, int, int]]:
        return {(t.head, t.relation, t.tail) for t in self.triples}


def load_triples(text: str) -> KnowledgeGraph:
    """Parse `head<TAB>relation<TAB>tail` lines into a KnowledgeGraph.

    Empty lines are skipped. Duplicate triples are silently dropped; labels are
    case-sensitive and whitespace-significant.
    """

    def parsed():
        for line_no, raw in enumerate(text.split("\n"), start=1):
            line = raw.rstrip("\r")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise TripleParseError(
                    f"expected 3 tab-separated fields, got {len(fields)}", line_no
                )
            if any(f == "" for f in fields):
                raise TripleParseError("empty label", line_no)
            yield tuple(fields)

    return KnowledgeGraph.from_label_triples(parsed())


def read_triples(path: str | Path) -> KnowledgeGraph:
    return load_triples(Path(path).read_text(encoding="utf-8"))


def graph_to_tsv(kg: KnowledgeGraph) -> str:
    lines = [
        f"{kg.entities.label(t.head)}\t{kg.relations.label(t.relation)}\t{kg.entities.label(t.tail)}"
        for t in kg.triples
    ]
    return "\n".join(lines) + ("\n" if lines else "")


@dataclass
class EmbeddingTable:
    """Lookup table of entity and relation vectors (float64, one row per label)."""

    entity_labels: tuple[str, ...]
    relation_labels: tuple[str, ...]
    entity_vecs: np.ndarray
    relation_vecs: np.ndarray

    def __post_init__(self) -> None:
        self.entity_vecs = np.asarray(self.entity_vecs, dtype=np.float64)
        self.relation_vecs = np.asarray(self.relation_vecs, dtype=np.float64)
        if self.entity_vecs.ndim != 2 or self.relation_vecs.ndim != 2:
            raise ValueError("embedding tables must be 2-d arrays")
        if self.entity_vecs.shape[0] != len(self.entity_labels):
            raise ValueError(
                f"{len(self.entity_labels)} entity labels but "
                f"{self.entity_vecs.shape[0]} entity rows"
            )
        if self.relation_vecs.shape[0] != len(self.relation_labels):
            raise ValueError(
                f"{len(self.relation_labels)} relation labels but "
                f"{self.relation_vecs.shape[0]} relation rows"
            )

    @property
    def d_e(self) -> int:
        return int(self.entity_vecs.shape[1])

    @property
    def d_r(self) -> int:
        return int(self.relation_vecs.shape[1])

    def entity_vector(self, label: str) -> np.ndarray:
        try:
            idx = self.entity_labels.index(label)
        except ValueError:
            raise LookupError(f"entity {label!r} not in embedding table") from None
        return self.entity_vecs[idx]

    def validate_finite(self) -> None:
        if not np.all(np.isfinite(self.entity_vecs)) or not np.all(
            np.isfinite(self.relation_vecs)
        ):
            raise ValueError("embedding table contains non-finite values")


def format_vector(vec: np.ndarray) -> str:
    """Space-joined hexadecimal float components; bitwise lossless for float64."""
    return " ".join(float(v).hex() for v in vec)


def parse_vector(text: str, expected_dim: int, what: str) -> np.ndarray:
    parts = text.split(" ") if text else []
    if len(parts) != expected_dim:
        raise TableFormatError(f"{what}: expected {expected_dim} components, got {len(parts)}")
    try:
        values = [float.fromhex(p) for p in parts]
    except ValueError as exc:
        raise TableFormatError(f"{what}: {exc}") from None
    if not all(math.isfinite(v) for v in values):
        raise TableFormatError(f"{what}: non-finite component")
    return np.array(values, dtype=np.float64)


TABLE_MAGIC = "KGE-TABLE v1"


def format_table(table: EmbeddingTable) -> str:
    table.validate_finite()
    for label in (*table.entity_labels, *table.relation_labels):
        if "\t" in label or "\n" in label:
            raise ValueError(f"label {label!r} contains a tab or newline")
    lines = [
        f"{TABLE_MAGIC} {len(table.entity_labels)} {len(table.relation_labels)} "
        f"{table.d_e} {table.d_r}"
    ]
    for label, row in zip(table.entity_labels, table.entity_vecs):
        lines.append(f"{label}\t{format_vector(row)}")
    for label, row in zip(table.relation_labels, table.relation_vecs):
        lines.append(f"{label}\t{format_vector(row)}")
    return "\n".join(lines) + "\n"


def parse_table(text: str) -> EmbeddingTable:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise TableFormatError("empty table file")
    header = lines[0].split(" ")
    if len(header) != 6 or " ".join(header[:2]) != TABLE_MAGIC:
        raise TableFormatError(f"bad header: {lines[0]!r}")
    try:
        n_e, n_r, d_e, d_r = (int(x) for x in header[2:])
    except ValueError:
        raise TableFormatError(f"bad header counts: {lines[0]!r}") from None
    if len(lines) - 1 != n_e + n_r:
        raise TableFormatError(
            f"header declares {n_e + n_r} rows, file has {len(lines) - 1}"
        )

    def parse_rows(raw_lines, dim, what):
        labels, rows = [], []
        for i, raw in enumerate(raw_lines):
            label, sep, body = raw.partition("\t")
            if not sep or not label:
                raise TableFormatError(f"{what} row {i}: missing label field")
            labels.append(label)
            rows.append(parse_vector(body, dim, f"{what} {label!r}"))
        data = np.array(rows, dtype=np.float64) if rows else np.zeros((0, dim))
        return tuple(labels), data

    entity_labels, entity_vecs = parse_rows(lines[1 : 1 + n_e], d_e, "entity")
    relation_labels, relation_vecs = parse_rows(lines[1 + n_e :], d_r, "relation")
    return EmbeddingTable(entity_labels, relation_labels, entity_vecs, relation_vecs)


def save_table(table: EmbeddingTable, path: str | Path) -> None:
    Path(path).write_text(format_table(table), encoding="utf-8")


def load_table(path: str | Path) -> EmbeddingTable:
    return parse_table(Path(path).read_text(encoding="utf-8"))
