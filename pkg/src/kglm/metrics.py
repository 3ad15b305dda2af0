"""Text-generation evaluation: EM, token F1, ROUGE, BLEU, reverse-weighted BLEU,
paired t-tests, and the error-category classifier for QA predictions."""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass

METRIC_NAMES = (
    "em", "f1", "rouge1", "rouge2", "rougeL", "rougeLsum",
    "bleu1", "bleu2", "bleu3", "bleu4", "rwb",
)

# Main-table columns first, appendix-table extensions after.
CSV_COLUMNS = (
    "em", "rouge1", "rougeL", "rwb", "f1",
    "rouge2", "rougeLsum", "bleu1", "bleu2", "bleu3", "bleu4",
)

RWB_WEIGHTS = (0.4, 0.3, 0.2, 0.1)

_TERMINAL_PUNCT = ".,;:!?"


def normalize_text(text: str) -> str:
    """Lowercase, collapse whitespace, strip terminal punctuation."""
    collapsed = " ".join(text.split()).lower()
    return collapsed.rstrip(_TERMINAL_PUNCT)


def _tokens(text: str) -> list[str]:
    return normalize_text(text).split()


def exact_match(prediction: str, reference: str) -> int:
    return int(normalize_text(prediction) == normalize_text(reference))


def token_f1(prediction: str, reference: str) -> float:
    pred, ref = _tokens(prediction), _tokens(reference)
    if not pred or not ref:
        return 0.0
    overlap = sum((Counter(pred) & Counter(ref)).values())
    if overlap == 0:
        return 0.0
    precision = overlap / len(pred)
    recall = overlap / len(ref)
    return 2 * precision * recall / (precision + recall)


def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _fmeasure(overlap: float, n_pred: float, n_ref: float) -> float:
    if n_pred == 0 or n_ref == 0 or overlap == 0:
        return 0.0
    precision = overlap / n_pred
    recall = overlap / n_ref
    return 2 * precision * recall / (precision + recall)


def rouge_n(prediction: str, reference: str, n: int) -> float:
    pred = _ngrams(_tokens(prediction), n)
    ref = _ngrams(_tokens(reference), n)
    overlap = sum((pred & ref).values())
    return _fmeasure(overlap, sum(pred.values()), sum(ref.values()))


def _lcs_table(a: list[str], b: list[str]):
    rows = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
    for i in range(1, len(a) + 1):
        for j in range(1, len(b) + 1):
            if a[i - 1] == b[j - 1]:
                rows[i][j] = rows[i - 1][j - 1] + 1
            else:
                rows[i][j] = max(rows[i - 1][j], rows[i][j - 1])
    return rows

def _lcs_len(a: list[str], b: list[str]) -> int:
    return _lcs_table(a, b)[len(a)][len(b)]


def rouge_l(prediction: str, reference: str) -> float:
    pred, ref = _tokens(prediction), _tokens(reference)
    return _fmeasure(_lcs_len(pred, ref), len(pred), len(ref))


def _lcs_ref_indices(ref: list[str], cand: list[str]) -> set[int]:
    """Reference-side token indices on one longest common subsequence."""
    table = _lcs_table(ref, cand)
    hits: set[int] = set()
    i, j = len(ref), len(cand)
    while i > 0 and j > 0:
        if ref[i - 1] == cand[j - 1]:
            hits.add(i - 1)
            i -= 1
            j -= 1
        elif table[i - 1][j] >= table[i][j - 1]:
            i -= 1
        else:
            j -= 1
    return hits


def rouge_lsum(prediction: str, reference: str) -> float:
    """ROUGE-L over newline-separated segments aggregated by union LCS."""
    pred_segs = [_tokens(s) for s in prediction.split("\n") if _tokens(s)]
    ref_segs = [_tokens(s) for s in reference.split("\n") if _tokens(s)]
    n_pred = sum(len(s) for s in pred_segs)
    n_ref = sum(len(s) for s in ref_segs)
    hits = 0
    for ref_seg in ref_segs:
        union: set[int] = set()
        for pred_seg in pred_segs:
            union |= _lcs_ref_indices(ref_seg, pred_seg)
        hits += len(union)
    return _fmeasure(hits, n_pred, n_ref)


def bleu_k(prediction: str, reference: str, k: int) -> float:
    """BLEU with orders 1..k, add-one smoothing on zero counts, and brevity penalty."""
    if not 1 <= k <= 4:
        raise ValueError("k must be in 1..4")
    pred, ref = _tokens(prediction), _tokens(reference)
    if not pred:
        return 0.0
    log_sum = 0.0
    for n in range(1, k + 1):
        pred_ngrams = _ngrams(pred, n)
        ref_ngrams = _ngrams(ref, n)
        matches = sum((pred_ngrams & ref_ngrams).values())
        total = sum(pred_ngrams.values())
        if matches == 0:
            p = (matches + 1) / (total + 1)
        else:
            p = matches / total
        log_sum += math.log(p)
    bp = 1.0 if len(pred) >= len(ref) else math.exp(1.0 - len(ref) / len(pred))
    return bp * math.exp(log_sum / k)


def rwb(prediction: str, reference: str) -> float:
    """Weighted BLEU-1..4 with larger weights on lower n-gram orders."""
    return sum(
        w * bleu_k(prediction, reference, k)
        for k, w in zip(range(1, 5), RWB_WEIGHTS)
    )


def score_example(prediction: str, reference: str) -> dict[str, float]:
    return {
        "em": float(exact_match(prediction, reference)),
        "f1": token_f1(prediction, reference),
        "rouge1": rouge_n(prediction, reference, 1),
        "rouge2": rouge_n(prediction, reference, 2),
        "rougeL": rouge_l(prediction, reference),
        "rougeLsum": rouge_lsum(prediction, reference),
        "bleu1": bleu_k(prediction, reference, 1),
        "bleu2": bleu_k(prediction, reference, 2),
        "bleu3": bleu_k(prediction, reference, 3),
        "bleu4": bleu_k(prediction, reference, 4),
        "rwb": rwb(prediction, reference),
    }


@dataclass
class MetricReport:
    per_example: list[dict[str, float]]
    means: dict[str, float]
    count: int

    def to_json(self) -> str:
        payload = {"count": self.count, "means": self.means, "per_example": self.per_example}
        return json.dumps(payload, sort_keys=True)

    def csv_row(self, label: str) -> str:
        return ",".join([label] + [f"{self.means[c]:.6f}" for c in CSV_COLUMNS])

    @staticmethod
    def csv_header() -> str:
        return ",".join(["arm"] + list(CSV_COLUMNS))


def score_corpus(predictions: list[str], references: list[str]) -> MetricReport:
    """Macro-averaged scores: corpus mean of per-example values."""
    if len(predictions) != len(references):
        raise ValueError("predictions and references differ in length")
    if not predictions:
        raise ValueError("cannot score an empty corpus")
    per_example = [score_example(p, r) for p, r in zip(predictions, references)]
    means = {
        name: sum(s[name] for s in per_example) / len(per_example)
        for name in METRIC_NAMES
    }
    return MetricReport(per_example, means, len(per_example))


# ---------------------------------------------------------------------------
# Paired t-test with a self-contained Student-t CDF.

class DegenerateDifferencesError(ValueError):
    """All paired differences are equal, so the t statistic is undefined."""


@dataclass
class TTestResult:
    t_statistic: float
    p_value: float
    significant: bool
    n: int


def _log_beta(a: float, b: float) -> float:
    return math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (Lentz's method)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 300):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 3e-16:
            break
    return h


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    front = math.exp(a * math.log(x) + b * math.log(1.0 - x) - _log_beta(a, b))
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - math.exp(b * math.log(1.0 - x) + a * math.log(x) - _log_beta(b, a)) * _betacf(
        b, a, 1.0 - x
    ) / b


def student_t_cdf(t: float, df: int) -> float:
    if df < 1:
        raise ValueError("degrees of freedom must be >= 1")
    x = df / (df + t * t)
    tail = 0.5 * regularized_incomplete_beta(df / 2.0, 0.5, x)
    return 1.0 - tail if t > 0 else tail


def paired_ttest(scores_a, scores_b, alpha: float = 0.05) -> TTestResult:
    """Two-sided paired t-test on per-example score differences."""
    a = list(scores_a)
    b = list(scores_b)
    if len(a) != len(b):
        raise ValueError("paired samples must have equal length")
    n = len(a)
    if n < 2:
        raise ValueError("need at least 2 pairs")
    diffs = [x - y for x, y in zip(a, b)]
    mean = sum(diffs) / n
    var = sum((d - mean) ** 2 for d in diffs) / (n - 1)
    if var == 0.0:
        raise DegenerateDifferencesError("zero variance of paired differences")
    t = mean / math.sqrt(var / n)
    p = 2.0 * (1.0 - student_t_cdf(abs(t), n - 1))
    return TTestResult(t_statistic=t, p_value=p, significant=p < alpha, n=n)


# ---------------------------------------------------------------------------
# Error-category classification.

ERROR_CATEGORIES = (
    "Correct",
    "TrueFalseWrong",
    "WrongOrder",
    "SubsetOfAnswer",
    "SimilarAnswer",
    "SimilarCompanyType",
    "CompletelyWrong",
)

_BOOLEANS = {"true", "false"}
_LEGAL_SUFFIXES = ("e figli", "s.r.l.", "srl", "spa", "group")


def _entity_list(text: str) -> list[str]:
    parts = [normalize_text(p) for p in text.split(",")]
    return [p for p in parts if p]


def _legal_suffix(text: str) -> str | None:
    norm = normalize_text(text)
    for suffix in _LEGAL_SUFFIXES:
        if norm.endswith(suffix):
            return suffix
    return None


def classify_error(example, prediction: str) -> str:
    """Assign one error category under a fixed precedence order.

    `example` must expose `answer` (gold string) and `mode` (template mode).
    """
    gold = example.answer
    if exact_match(prediction, gold):
        return "Correct"
    gold_norm = normalize_text(gold)
    pred_norm = normalize_text(prediction)
    if (
        example.mode in ("verification", "counting")
        and gold_norm in _BOOLEANS
        and pred_norm in _BOOLEANS
        and pred_norm != gold_norm
    ):
        return "TrueFalseWrong"
    gold_entities = _entity_list(gold)
    pred_entities = _entity_list(prediction)
    gold_set, pred_set = set(gold_entities), set(pred_entities)
    if gold_set == pred_set and gold_entities != pred_entities:
        return "WrongOrder"
    if pred_set and pred_set < gold_set:
        return "SubsetOfAnswer"
    if pred_set & gold_set and pred_set - gold_set:
        return "SimilarAnswer"
    gold_suffix = _legal_suffix(gold)
    if gold_suffix is not None and gold_suffix == _legal_suffix(prediction):
        return "SimilarCompanyType"
    return "CompletelyWrong"


def error_breakdown(examples, predictions: list[str]) -> dict[str, int]:
    """Category counts over a prediction set; categories partition the examples."""
    if len(examples) != len(predictions):
        raise ValueError("examples and predictions differ in length")
    counts = {c: 0 for c in ERROR_CATEGORIES}
    for ex, pred in zip(examples, predictions):
        counts[classify_error(ex, pred)] += 1
    return counts
