"""Translation-based entity embedding training and filtered link-prediction evaluation."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .kg import EmbeddingTable, KnowledgeGraph, Triple

logger = logging.getLogger(__name__)


@dataclass
class TranseConfig:
    dim: int
    margin: float = 1.0
    learning_rate: float = 0.1
    epochs: int = 200
    negatives_per_positive: int = 1
    seed: int = 0
    norm_entities: bool = True

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        for name in ("margin", "learning_rate"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")
        for name in ("epochs", "negatives_per_positive"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive integer")


@dataclass
class RankingReport:
    mrr: float
    hits_at_1: float
    hits_at_10: float
    evaluated_triples: int

    def __post_init__(self) -> None:
        if self.hits_at_1 > self.hits_at_10 + 1e-12:
            raise ValueError("hits@1 cannot exceed hits@10")
        if self.mrr < self.hits_at_1 - 1e-12:
            raise ValueError("mrr cannot be below hits@1")


def score(head: int, relation: int, tail: int, table: EmbeddingTable) -> float:
    """Euclidean norm of head + relation - tail; lower means more plausible."""
    h = table.entity_vecs[head]
    r = table.relation_vecs[relation]
    t = table.entity_vecs[tail]
    if h.shape != r.shape:
        raise ValueError(
            f"entity dim {h.shape[0]} and relation dim {r.shape[0]} differ"
        )
    return float(np.linalg.norm(h + r - t))


def hinge_loss_and_grads(
    hp: np.ndarray,
    r: np.ndarray,
    tp: np.ndarray,
    hn: np.ndarray,
    tn: np.ndarray,
    margin: float,
):
    """Margin ranking loss for one positive/negative pair with exact subgradients.

    Returns (loss, (d_hp, d_r, d_tp, d_hn, d_tn)). The relation vector is shared
    by both sides, so d_r already sums both contributions.
    """
    res_p = hp + r - tp
    res_n = hn + r - tn
    dp = float(np.linalg.norm(res_p))
    dn = float(np.linalg.norm(res_n))
    loss = margin + dp - dn
    zeros = np.zeros_like(hp)
    if loss <= 0.0:
        return 0.0, (zeros, zeros, zeros, zeros, zeros)
    up = res_p / dp if dp > 0 else zeros
    un = res_n / dn if dn > 0 else zeros
    return loss, (up, up - un, -up, -un, un)


def _sample_negative(
    rng: np.random.Generator,
    triple: Triple,
    n_entities: int,
    known: set[tuple[int, int, int]],
    max_attempts: int = 200,
) -> tuple[int, int]:
    """Corrupt head or tail uniformly, rejecting corruptions that are known-true."""
    for _ in range(max_attempts):
        corrupt_head = bool(rng.integers(0, 2))
        candidate = int(rng.integers(0, n_entities))
        if corrupt_head:
            if candidate != triple.head and (candidate, triple.relation, triple.tail) not in known:
                return candidate, triple.tail
        else:
            if candidate != triple.tail and (triple.head, triple.relation, candidate) not in known:
                return triple.head, candidate
    raise ValueError(
        "could not sample a negative triple; graph is too dense for corruption sampling"
    )


def train_transe(kg: KnowledgeGraph, config: TranseConfig) -> EmbeddingTable:
    """Train entity/relation vectors with margin-based ranking loss and plain SGD.

    Deterministic for a fixed seed. Entity vectors are projected back into the
    unit ball after every epoch when norm_entities is set.
    """
    if not kg.triples:
        raise ValueError("cannot train on an empty graph")
    if len(kg.entities) < 2:
        raise ValueError("need at least 2 entities to sample negatives")

    rng = np.random.default_rng(config.seed)
    n_e, n_r, d = len(kg.entities), len(kg.relations), config.dim
    bound = 6.0 / np.sqrt(d)
    ent = rng.uniform(-bound, bound, size=(n_e, d))
    rel = rng.uniform(-bound, bound, size=(n_r, d))
    known = kg.triple_set
    lr = config.learning_rate

    for epoch in range(config.epochs):
        order = rng.permutation(len(kg.triples))
        epoch_loss = 0.0
        for idx in order:
            pos = kg.triples[idx]
            for _ in range(config.negatives_per_positive):
                hn_id, tn_id = _sample_negative(rng, pos, n_e, known)
                loss, (d_hp, d_r, d_tp, d_hn, d_tn) = hinge_loss_and_grads(
                    ent[pos.head], rel[pos.relation], ent[pos.tail],
                    ent[hn_id], ent[tn_id], config.margin,
                )
                epoch_loss += loss
                if loss == 0.0:
                    continue
                rel[pos.relation] -= lr * d_r
                # Corrupted side may alias a positive row; apply updates serially.
                for row, grad in ((pos.head, d_hp), (pos.tail, d_tp), (hn_id, d_hn), (tn_id, d_tn)):
                    ent[row] -= lr * grad
        if config.norm_entities:
            norms = np.linalg.norm(ent, axis=1, keepdims=True)
            np.divide(ent, norms, out=ent, where=norms > 1.0)
        if epoch % 50 == 0 or epoch == config.epochs - 1:
            denom = len(kg.triples) * config.negatives_per_positive
            logger.debug("transe epoch %d mean loss %.6f", epoch, epoch_loss / denom)

    table = EmbeddingTable(kg.entities.labels, kg.relations.labels, ent, rel)
    table.validate_finite()
    return table


def _direction_rank(scores: np.ndarray, true_id: int, filtered_ids: set[int]) -> int:
    """Rank of the true entity among all non-filtered candidates.

    Ties are broken by entity index, so the rank equals the position in a list
    sorted by (score, index).
    """
    true_score = scores[true_id]
    rank = 1
    for e in range(scores.shape[0]):
        if e == true_id or e in filtered_ids:
            continue
        s = scores[e]
        if s < true_score or (s == true_score and e < true_id):
            rank += 1
    return rank


def evaluate_ranking(
    kg_train: KnowledgeGraph,
    eval_triples: list[Triple],
    table: EmbeddingTable,
) -> RankingReport:
    """Filtered head and tail ranking over all entities.

    Known-true completions (train plus eval triples) other than the target are
    removed before computing each rank. MRR averages reciprocal ranks over both
    directions.
    """
    if not eval_triples:
        raise ValueError("evaluation set is empty")
    n_e = table.entity_vecs.shape[0]
    for trip in eval_triples:
        if not (0 <= trip.head < n_e and 0 <= trip.tail < n_e):
            raise LookupError(f"triple {trip} does not resolve in the table")

    known = kg_train.triple_set | {(t.head, t.relation, t.tail) for t in eval_triples}
    tails_known: dict[tuple[int, int], set[int]] = {}
    heads_known: dict[tuple[int, int], set[int]] = {}
    for h, r, t in known:
        tails_known.setdefault((h, r), set()).add(t)
        heads_known.setdefault((t, r), set()).add(h)

    ranks: list[int] = []
    for trip in eval_triples:
        h_vec = table.entity_vecs[trip.head]
        r_vec = table.relation_vecs[trip.relation]
        t_vec = table.entity_vecs[trip.tail]
        # Tail direction: candidates e scored as ||(h + r) - e||.
        tail_scores = np.linalg.norm(h_vec + r_vec - table.entity_vecs, axis=1)
        tail_filter = tails_known[(trip.head, trip.relation)] - {trip.tail}
        ranks.append(_direction_rank(tail_scores, trip.tail, tail_filter))
        # Head direction: candidates e scored as ||(e + r) - t||.
        head_scores = np.linalg.norm(table.entity_vecs + r_vec - t_vec, axis=1)
        head_filter = heads_known[(trip.tail, trip.relation)] - {trip.head}
        ranks.append(_direction_rank(head_scores, trip.head, head_filter))

    inv = [1.0 / r for r in ranks]
    return RankingReport(
        mrr=float(np.mean(inv)),
        hits_at_1=float(np.mean([r <= 1 for r in ranks])),
        hits_at_10=float(np.mean([r <= 10 for r in ranks])),
        evaluated_triples=len(eval_triples),
    )
