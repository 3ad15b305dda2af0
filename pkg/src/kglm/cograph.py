"""Synthetic company-ownership graph generator with engineered name collisions.

Components are independent ownership DAGs over persons and companies. Control
edges follow the recursive majority rule: X controls Y when X's direct shares in
Y plus the shares held by companies X already controls exceed 50%. An ultimate
controller is a controller that nobody controls.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .kg import KnowledgeGraph

CO_RELATIONS = (
    "own",
    "control",
    "ultimate_control",
    "role",
    "qualified_holding",
    "reachable",
    "influence",
)

QUALIFIED_HOLDING_SHARE = 0.10
INFLUENCE_SHARE = 0.25
ROLE_SHARE = 0.20

SURNAMES = (
    "ROSSI", "BIANCHI", "FERRARI", "RUSSO", "ESPOSITO", "ROMANO", "COLOMBO",
    "RICCI", "MARINO", "GRECO", "BRUNO", "GALLO", "CONTI", "MANCINI", "COSTA",
    "GIORDANO", "RIZZO", "LOMBARDI", "MORETTI", "BARBIERI", "FONTANA", "SANTORO",
    "MARIANI", "RINALDI", "CARUSO", "FERRARA", "GATTI", "PELLEGRINI", "PALUMBO",
    "SANNA", "FARINA", "RIVA", "MONTI", "MARTINI", "LEONE", "LONGO", "GENTILE",
    "MARTINELLI", "VITALE", "LOMBARDO", "SERRA", "COPPOLA", "DESANTIS", "DANGELO",
    "MARCHETTI", "PARISI", "VILLA", "CONTE", "FERRERO", "FABBRI", "BIANCO",
    "MARINI", "GRASSO", "VALENTINI", "MESSINA", "SALA", "DAMICO", "MORELLI",
    "TESTA", "GRASSI", "PELLEGRINO", "CARBONE", "GIULIANI", "BENEDETTI",
)

FIRST_NAMES = (
    "MARIO", "LUIGI", "ANNA", "GIULIA", "PAOLO", "FRANCA", "SERGIO", "ELENA",
    "CARLO", "SILVIA", "MARCO", "LAURA", "BRUNO", "CHIARA", "DARIO", "IRENE",
)

COMPANY_SUFFIXES = ("SPA", "GROUP", "S.R.L.", "E FIGLI")

_SUFFIX_WORDS = frozenset({"spa", "s.r.l.", "srl", "group", "e", "figli"})


@dataclass
class CoGraphConfig:
    n_components: int = 20
    component_size: int = 8
    collision_pairs: int = 5
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_components < 1:
            raise ValueError("n_components must be >= 1")
        if self.component_size < 4:
            raise ValueError("component_size must be >= 4")
        if self.collision_pairs < 0:
            raise ValueError("collision_pairs must be >= 0")
        if self.collision_pairs > 0 and self.n_components < 2:
            raise ValueError("collision pairs need at least 2 components")


def collision_key(label: str) -> str:
    """Label identity modulo spacing, punctuation, and legal-form suffix words."""
    words = [w for w in label.lower().split() if w not in _SUFFIX_WORDS]
    return re.sub(r"[^0-9a-z]", "", "".join(words))


def detect_collision_pairs(kg: KnowledgeGraph) -> list[tuple[str, str]]:
    """Label pairs that collide under collision_key, in label-sorted order."""
    by_key: dict[str, list[str]] = {}
    for label in kg.entities.labels:
        by_key.setdefault(collision_key(label), []).append(label)
    pairs = []
    for key in sorted(by_key):
        group = sorted(by_key[key])
        if len(group) >= 2:
            pairs.extend((group[i], group[i + 1]) for i in range(0, len(group) - 1, 2))
    return pairs


def control_closure(shares: dict[tuple[int, int], float]) -> set[tuple[int, int]]:
    """Fixpoint of the recursive majority-control rule over weighted ownership."""
    nodes = sorted({n for edge in shares for n in edge})
    owners_of: dict[int, list[tuple[int, float]]] = {}
    for (x, y), s in shares.items():
        owners_of.setdefault(y, []).append((x, s))
    controls: set[tuple[int, int]] = set()
    changed = True
    while changed:
        changed = False
        for y in nodes:
            holders = owners_of.get(y, ())
            if not holders:
                continue
            for x in nodes:
                if x == y or (x, y) in controls:
                    continue
                total = 0.0
                for z, s in holders:
                    if z == x or (x, z) in controls:
                        total += s
                if total > 0.5:
                    controls.add((x, y))
                    changed = True
    return controls


def ultimate_control_edges(controls: set[tuple[int, int]]) -> set[tuple[int, int]]:
    controlled = {y for _, y in controls}
    return {(x, y) for x, y in controls if x not in controlled}


def _reachable_closure(edges: set[tuple[int, int]], nodes: list[int]) -> set[tuple[int, int]]:
    adj: dict[int, list[int]] = {}
    for x, y in edges:
        adj.setdefault(x, []).append(y)
    closure: set[tuple[int, int]] = set()
    for start in nodes:
        stack = list(adj.get(start, ()))
        seen: set[int] = set()
        while stack:
            node = stack.pop()
            if node in seen:
                continue
            seen.add(node)
            closure.add((start, node))
            stack.extend(adj.get(node, ()))
    return closure


class _NameFactory:
    """Deterministic unique names; uniqueness is enforced on collision keys."""

    def __init__(self, rng: np.random.Generator):
        self.rng = rng
        self.used_keys: set[str] = set()

    def _fresh(self, make_label) -> str:
        for _ in range(1000):
            label = make_label()
            key = collision_key(label)
            if key and key not in self.used_keys:
                self.used_keys.add(key)
                return label
        raise RuntimeError("name space exhausted")

    def person(self) -> str:
        def make():
            first = FIRST_NAMES[self.rng.integers(0, len(FIRST_NAMES))]
            last = SURNAMES[self.rng.integers(0, len(SURNAMES))]
            return f"{first} {last}"

        return self._fresh(make)

    def company(self) -> str:
        def make():
            a = SURNAMES[self.rng.integers(0, len(SURNAMES))]
            suffix = COMPANY_SUFFIXES[self.rng.integers(0, len(COMPANY_SUFFIXES))]
            if self.rng.random() < 0.5:
                b = SURNAMES[self.rng.integers(0, len(SURNAMES))]
                return f"{a}-{b} {suffix}"
            return f"{a} {suffix}"

        return self._fresh(make)

    def collision_pair(self, style: int) -> tuple[str, str]:
        """Two labels that differ only by spacing or legal-form suffix."""
        def make():
            a = SURNAMES[self.rng.integers(0, len(SURNAMES))]
            b = SURNAMES[self.rng.integers(0, len(SURNAMES))]
            return f"{a} {b}"

        base = self._fresh(make)
        suffix = COMPANY_SUFFIXES[int(self.rng.integers(0, 2))]  # SPA or GROUP
        if style % 2 == 0:
            return base.replace(" ", ""), f"{base} {suffix}"
        return base, f"{base} {suffix}"


def _build_component(rng: np.random.Generator, size: int):
    """Ownership DAG over local ids 0..size-1; lower ids own higher ids."""
    n_persons = max(1, size // 4)
    shares: dict[tuple[int, int], float] = {}
    out_degree = np.zeros(size)
    for company in range(n_persons, size):
        candidates = np.arange(company)
        weights = out_degree[:company] + 1.0
        weights = weights / weights.sum()
        n_owners = 1 + int(rng.random() < 0.4) + int(rng.random() < 0.15)
        n_owners = min(n_owners, company)
        owners = rng.choice(candidates, size=n_owners, replace=False, p=weights)
        owners = sorted(int(o) for o in owners)
        if n_owners == 1:
            main_share = rng.uniform(0.51, 0.95) if rng.random() < 0.85 else rng.uniform(0.2, 0.45)
            shares[(owners[0], company)] = round(float(main_share), 4)
        else:
            main_share = rng.uniform(0.45, 0.8)
            rest = (1.0 - main_share) * rng.dirichlet(np.ones(n_owners - 1))
            values = [main_share, *rest]
            for owner, s in zip(owners, values):
                shares[(owner, company)] = round(float(s), 4)
        out_degree[owners] += 1
    return n_persons, shares


def _component_triples(
    rng: np.random.Generator, n_persons: int, size: int, shares
) -> list[tuple[int, str, int]]:
    nodes = list(range(size))
    controls = control_closure(shares)
    ultimate = ultimate_control_edges(controls)
    own_edges = set(shares)
    reach = _reachable_closure(own_edges, nodes)

    role_edges = {(x, y) for (x, y), s in shares.items() if s >= ROLE_SHARE} | controls
    for company in range(n_persons, size):
        if rng.random() < 0.3:
            person = int(rng.integers(0, n_persons))
            role_edges.add((person, company))

    triples: list[tuple[int, str, int]] = []
    by_relation = {
        "own": sorted(own_edges),
        "control": sorted(controls),
        "ultimate_control": sorted(ultimate),
        "role": sorted(role_edges),
        "qualified_holding": sorted(
            e for e, s in shares.items() if s >= QUALIFIED_HOLDING_SHARE
        ),
        "reachable": sorted(reach),
        "influence": sorted(
            {e for e, s in shares.items() if s >= INFLUENCE_SHARE} | controls
        ),
    }
    for relation in CO_RELATIONS:
        triples.extend((x, relation, y) for x, y in by_relation[relation])
    return triples


def synth_co_graph(config: CoGraphConfig) -> KnowledgeGraph:
    """Deterministic ownership graph over the seven company-ownership relations."""
    rng = np.random.default_rng(config.seed)
    names = _NameFactory(rng)

    components = []
    for _ in range(config.n_components):
        size = int(rng.integers(config.component_size - 2, config.component_size + 3))
        size = max(4, size)
        n_persons, shares = _build_component(rng, size)
        labels = [names.person() for _ in range(n_persons)]
        labels += [names.company() for _ in range(n_persons, size)]
        triples = _component_triples(rng, n_persons, size, shares)
        components.append({"labels": labels, "n_persons": n_persons, "triples": triples})

    # Rename owned companies in distinct components so their labels collide.
    for comp in components:
        comp["renamed"] = set()
    for pair_idx in range(config.collision_pairs):
        label_a, label_b = names.collision_pair(pair_idx)
        comp_a = components[(2 * pair_idx) % len(components)]
        comp_b = components[(2 * pair_idx + 1) % len(components)]
        for comp, new_label in ((comp_a, label_a), (comp_b, label_b)):
            owned = sorted({y for _, rel, y in comp["triples"] if rel == "own"})
            available = [y for y in owned if y not in comp["renamed"]]
            if not available:
                raise ValueError(
                    "not enough owned companies for the requested collision pairs; "
                    "increase n_components or component_size"
                )
            target = available[int(rng.integers(0, len(available)))]
            comp["renamed"].add(target)
            comp["labels"][target] = new_label

    label_triples = []
    for comp in components:
        labels = comp["labels"]
        label_triples.extend(
            (labels[h], rel, labels[t]) for h, rel, t in comp["triples"]
        )
    return KnowledgeGraph.from_label_triples(label_triples)
