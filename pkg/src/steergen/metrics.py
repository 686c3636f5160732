"""Evaluation metrics: overlap, diversity, novelty, BLEU-2, classifier
summaries and a bag-of-words attribute scorer.

Diversity and novelty follow the pairwise Jaccard form: a sentence's score
is one minus its maximum Jaccard similarity against the other generated
sentences (diversity) or against a reference corpus (novelty), averaged
over sentences. Jaccard operates on token sets, so multiplicity is ignored.
"""

from __future__ import annotations

import hashlib
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import rankdata

from .corpus import AttributeRecord, TokenSequence, Vocabulary

BOW_FORMAT_VERSION = 1


def _ids(seq) -> tuple[int, ...]:
    return tuple(seq.ids) if isinstance(seq, TokenSequence) else tuple(seq)


def jaccard(a, b) -> float:
    """Set overlap of two token sequences; two empty sequences overlap fully."""
    sa, sb = set(_ids(a)), set(_ids(b))
    if not sa and not sb:
        return 1.0
    return len(sa & sb) / len(sa | sb)


def diversity(sentences: Sequence) -> float:
    """Mean over sentences of one minus the max Jaccard to any other sentence."""
    sets = [set(_ids(s)) for s in sentences]
    if len(sets) < 2:
        raise ValueError("diversity needs at least two sentences")
    scores = []
    for i, si in enumerate(sets):
        best = max(
            _set_jaccard(si, sj) for j, sj in enumerate(sets) if j != i
        )
        scores.append(1.0 - best)
    return float(np.mean(scores))


def novelty(sentences: Sequence, corpus: Sequence) -> float:
    """Mean over sentences of one minus the max Jaccard to any corpus entry."""
    corpus_sets = [set(_ids(c)) for c in corpus]
    if not corpus_sets:
        raise ValueError("novelty needs a non-empty reference corpus")
    if not sentences:
        raise ValueError("novelty needs at least one sentence")
    scores = []
    for s in sentences:
        ss = set(_ids(s))
        best = max(_set_jaccard(ss, cs) for cs in corpus_sets)
        scores.append(1.0 - best)
    return float(np.mean(scores))


def _set_jaccard(a: set[int], b: set[int]) -> float:
    if not a and not b:
        return 1.0
    return len(a & b) / len(a | b)


def _ngram_counts(ids: Sequence[int], n: int) -> Counter:
    return Counter(tuple(ids[i : i + n]) for i in range(len(ids) - n + 1))


def bleu2(hypotheses: Sequence, references: Sequence) -> float:
    """Corpus-level BLEU-2 on a 0..100 scale, unsmoothed.

    Clipped unigram and bigram precisions are pooled over the corpus and
    combined by geometric mean, then scaled by the brevity penalty. An order
    with no hypothesis n-grams at all (every hypothesis shorter than n) is
    left out of the mean, so identical corpora always score 100.
    """
    if len(hypotheses) != len(references):
        raise ValueError("hypotheses and references must align one-to-one")
    if not hypotheses:
        raise ValueError("bleu2 needs at least one hypothesis")
    matches = [0, 0]
    totals = [0, 0]
    hyp_len = 0
    ref_len = 0
    for hyp, ref in zip(hypotheses, references):
        hyp_ids, ref_ids = _ids(hyp), _ids(ref)
        hyp_len += len(hyp_ids)
        ref_len += len(ref_ids)
        for n in (1, 2):
            hyp_grams = _ngram_counts(hyp_ids, n)
            ref_grams = _ngram_counts(ref_ids, n)
            totals[n - 1] += sum(hyp_grams.values())
            matches[n - 1] += sum(
                min(count, ref_grams[gram]) for gram, count in hyp_grams.items()
            )
    present = [i for i in (0, 1) if totals[i] > 0]
    if not present:
        return 0.0
    if any(matches[i] == 0 for i in present):
        return 0.0
    log_precision = sum(math.log(matches[i] / totals[i]) for i in present) / len(present)
    brevity = 1.0 if hyp_len > ref_len else math.exp(1.0 - ref_len / hyp_len)
    return 100.0 * brevity * math.exp(log_precision)


def classifier_metrics(
    scores: Sequence[float], labels: Sequence[bool], threshold: float = 0.5
) -> tuple[float, float, float]:
    """(macro F1, accuracy, AUROC) for binary scores.

    AUROC is the rank statistic: the probability a random positive outscores
    a random negative, ties counting one half. Both classes must appear.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=bool)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError("scores and labels must be aligned 1-d sequences")
    n_pos = int(labels.sum())
    n_neg = int((~labels).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("classifier metrics need both classes present")

    preds = scores >= threshold
    f1_scores = []
    for positive_class in (True, False):
        tp = int(np.sum((preds == positive_class) & (labels == positive_class)))
        fp = int(np.sum((preds == positive_class) & (labels != positive_class)))
        fn = int(np.sum((preds != positive_class) & (labels == positive_class)))
        denom = 2 * tp + fp + fn
        f1_scores.append(2 * tp / denom if denom else 0.0)
    macro_f1 = float(np.mean(f1_scores))
    accuracy = float(np.mean(preds == labels))
    ranks = rankdata(scores)
    auroc = float(
        (ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)
    )
    return macro_f1, accuracy, auroc


class BowScorer:
    """Add-1 smoothed log-odds bag-of-words attribute scorer.

    Each token carries the log odds of the positive versus negative class;
    a text's score is the logistic of the summed token weights plus the
    class-prior log odds, so it always lands in (0, 1).
    """

    def __init__(self, weights: np.ndarray, prior_logit: float, vocab_hash: str):
        self.weights = np.asarray(weights, dtype=float)
        self.prior_logit = float(prior_logit)
        self.vocab_hash = vocab_hash

    def score(self, seq) -> float:
        ids = [i for i in _ids(seq) if 0 <= i < self.weights.size]
        logit = self.prior_logit + float(self.weights[ids].sum()) if ids else self.prior_logit
        return 1.0 / (1.0 + math.exp(-logit))

    def to_dict(self) -> dict:
        return {
            "format_version": BOW_FORMAT_VERSION,
            "kind": "bow_scorer",
            "prior_logit": self.prior_logit,
            "vocab_hash": self.vocab_hash,
            "weights": [float(w) for w in self.weights],
        }

    def serialize(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")) + "\n"

    @property
    def content_hash(self) -> str:
        return hashlib.sha256(self.serialize().encode("utf-8")).hexdigest()

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.serialize(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "BowScorer":
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
        if obj.get("format_version") != BOW_FORMAT_VERSION or obj.get("kind") != "bow_scorer":
            raise ValueError("not a bag-of-words scorer file")
        return cls(np.array(obj["weights"], dtype=float), obj["prior_logit"], obj["vocab_hash"])


def train_bow_scorer(data: Sequence[AttributeRecord], vocab: Vocabulary) -> BowScorer:
    """Fit per-token log-odds weights from labeled texts."""
    n_pos = sum(1 for rec in data if rec.positive)
    n_neg = len(data) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("bag-of-words training needs both classes present")
    size = len(vocab)
    pos_counts = np.ones(size)
    neg_counts = np.ones(size)
    for rec in data:
        target = pos_counts if rec.positive else neg_counts
        for token in rec.text.ids:
            target[token] += 1
    weights = np.log(pos_counts / pos_counts.sum()) - np.log(neg_counts / neg_counts.sum())
    prior_logit = math.log(n_pos / n_neg)
    return BowScorer(weights, prior_logit, vocab.content_hash)


@dataclass
class MetricsReport:
    """One evaluation batch's metric values.

    meteor and cola are absent by design: they are always None and serialize
    as explicit nulls rather than silent zeros.
    """

    bleu2: float | None = None
    diversity: float | None = None
    novelty: float | None = None
    perplexity: float | None = None
    attribute_scores: dict[str, float] = field(default_factory=dict)
    classifier: tuple[float, float, float] | None = None
    meteor: None = None
    cola: None = None

    def __post_init__(self) -> None:
        if self.bleu2 is not None and not 0.0 <= self.bleu2 <= 100.0:
            raise ValueError("bleu2 must lie in [0, 100]")
        for name in ("diversity", "novelty"):
            value = getattr(self, name)
            if value is not None and not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.meteor is not None or self.cola is not None:
            raise ValueError("meteor and cola are absent by design")

    def to_dict(self) -> dict:
        return {
            "bleu2": self.bleu2,
            "diversity": self.diversity,
            "novelty": self.novelty,
            "perplexity": self.perplexity,
            "attribute_scores": dict(sorted(self.attribute_scores.items())),
            "classifier": list(self.classifier) if self.classifier else None,
            "meteor": None,
            "cola": None,
        }


def format_metrics_table(reports: dict[str, MetricsReport]) -> str:
    """Aligned text table, one row per control set; absent values show as --."""
    attribute_names = sorted({name for r in reports.values() for name in r.attribute_scores})
    headers = ["control set", "B2", "Div", "Nov", "PPL", "METEOR", "COLA"] + attribute_names

    def fmt(value: float | None, width: int = 0) -> str:
        return "--" if value is None else f"{value:.3f}"

    rows = []
    for name in sorted(reports):
        report = reports[name]
        row = [
            name,
            fmt(report.bleu2),
            fmt(report.diversity),
            fmt(report.novelty),
            fmt(report.perplexity),
            "--",
            "--",
        ]
        row.extend(fmt(report.attribute_scores.get(attr)) for attr in attribute_names)
        rows.append(row)
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h) for i, h in enumerate(headers)]
    lines = [
        "  ".join(h.ljust(w) for h, w in zip(headers, widths)),
        "  ".join("-" * w for w in widths),
    ]
    lines.extend("  ".join(cell.ljust(w) for cell, w in zip(row, widths)) for row in rows)
    return "\n".join(lines) + "\n"
