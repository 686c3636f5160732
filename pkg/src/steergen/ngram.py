"""Class-conditioned n-gram language models with full-support smoothing.

Each control code gets its own count table; add-k smoothing (default) or
interpolated backoff with absolute discounting guarantees strictly positive
probability for every vocabulary entry, so downstream log-space math never
sees -inf. Model selection uses a mixed generative/discriminative loss.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import BOS, EOS, TokenSequence, Vocabulary

MODEL_FORMAT_VERSION = 1


class VocabularyMismatchError(ValueError):
    """A serialized model was loaded against the wrong vocabulary."""


@dataclass(frozen=True)
class Smoothing:
    """Smoothing spec: add-k, or interpolated backoff with absolute discount."""

    kind: str = "add_k"
    k: float = 0.1
    discount: float = 0.75

    def __post_init__(self) -> None:
        if self.kind not in ("add_k", "backoff"):
            raise ValueError("smoothing kind must be 'add_k' or 'backoff'")
        if self.kind == "add_k" and not self.k > 0:
            raise ValueError("add_k smoothing requires k > 0")
        if self.kind == "backoff" and not 0.0 < self.discount < 1.0:
            raise ValueError("backoff smoothing requires discount in (0, 1)")

    def label(self) -> str:
        if self.kind == "add_k":
            return f"add_k({self.k:g})"
        return f"backoff({self.discount:g})"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "k": self.k, "discount": self.discount}

    @classmethod
    def from_dict(cls, obj: dict) -> "Smoothing":
        return cls(
            obj.get("kind", "add_k"),
            float(obj.get("k", 0.1)),
            float(obj.get("discount", 0.75)),
        )


class _CountTable:
    """Follower counts for every context length 0..order-1."""

    def __init__(self) -> None:
        self.counts: dict[tuple[int, ...], dict[int, int]] = {}
        self.totals: dict[tuple[int, ...], int] = {}

    def observe(self, padded: Sequence[int], order: int) -> None:
        for i in range(order - 1, len(padded)):
            token = padded[i]
            for length in range(order):
                ctx = tuple(padded[i - length : i])
                followers = self.counts.setdefault(ctx, {})
                followers[token] = followers.get(token, 0) + 1
                self.totals[ctx] = self.totals.get(ctx, 0) + 1

    def to_dict(self) -> dict:
        return {
            " ".join(map(str, ctx)): {str(t): c for t, c in followers.items()}
            for ctx, followers in self.counts.items()
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "_CountTable":
        table = cls()
        for key, followers in obj.items():
            ctx = tuple(int(t) for t in key.split()) if key else ()
            table.counts[ctx] = {int(t): int(c) for t, c in followers.items()}
            table.totals[ctx] = sum(table.counts[ctx].values())
        return table


class _NGramCore:
    """One code's distribution: counts plus smoothing, with memoized queries."""

    def __init__(self, order: int, vocab_size: int, smoothing: Smoothing, context_window: int):
        self.order = order
        self.vocab_size = vocab_size
        self.smoothing = smoothing
        self.context_window = context_window
        self.table = _CountTable()
        self._log_cache: dict[tuple[int, ...], np.ndarray] = {}

    def train(self, sequences: Iterable[Sequence[int]]) -> None:
        for ids in sequences:
            padded = (BOS,) * (self.order - 1) + tuple(ids) + (EOS,)
            self.table.observe(padded, self.order)

    def context_key(self, context: Sequence[int]) -> tuple[int, ...]:
        """History truncated to the context window and model order, BOS-padded."""
        tail = tuple(context)[-self.context_window :] if self.context_window else ()
        need = self.order - 1
        tail = tail[-need:] if need else ()
        if len(tail) < need:
            tail = (BOS,) * (need - len(tail)) + tail
        return tail

    def _probs_uncached(self, ctx: tuple[int, ...]) -> np.ndarray:
        if self.smoothing.kind == "add_k":
            return self._add_k_probs(ctx)
        return self._backoff_probs(ctx)

    def _add_k_probs(self, ctx: tuple[int, ...]) -> np.ndarray:
        k = self.smoothing.k
        total = self.table.totals.get(ctx, 0)
        denom = total + k * self.vocab_size
        probs = np.full(self.vocab_size, k / denom)
        for token, count in self.table.counts.get(ctx, {}).items():
            probs[token] += count / denom
        return probs

    def _backoff_probs(self, ctx: tuple[int, ...]) -> np.ndarray:
        total = self.table.totals.get(ctx, 0)
        if total == 0:
            if ctx:
                return self._backoff_probs(ctx[1:])
            return np.full(self.vocab_size, 1.0 / self.vocab_size)
        d = self.smoothing.discount
        followers = self.table.counts[ctx]
        if ctx:
            lower = self._backoff_probs(ctx[1:])
        else:
            lower = np.full(self.vocab_size, 1.0 / self.vocab_size)
        probs = (d * len(followers) / total) * lower
        for token, count in followers.items():
            probs[token] += max(count - d, 0.0) / total
        return probs

    def log_probs(self, context: Sequence[int]) -> np.ndarray:
        ctx = self.context_key(context)
        cached = self._log_cache.get(ctx)
        if cached is None:
            cached = np.log(self._probs_uncached(ctx))
            cached.flags.writeable = False
            self._log_cache[ctx] = cached
        return cached

    def _prob_token(self, ctx: tuple[int, ...], token: int) -> float:
        """Single-entry probability, mirroring the vector formulas."""
        if self.smoothing.kind == "add_k":
            k = self.smoothing.k
            total = self.table.totals.get(ctx, 0)
            denom = total + k * self.vocab_size
            return (k + self.table.counts.get(ctx, {}).get(token, 0)) / denom
        total = self.table.totals.get(ctx, 0)
        if total == 0:
            if ctx:
                return self._prob_token(ctx[1:], token)
            return 1.0 / self.vocab_size
        d = self.smoothing.discount
        followers = self.table.counts[ctx]
        lower = self._prob_token(ctx[1:], token) if ctx else 1.0 / self.vocab_size
        value = (d * len(followers) / total) * lower
        count = followers.get(token, 0)
        if count:
            value += max(count - d, 0.0) / total
        return value

    def logprob_token(self, context: Sequence[int], token: int) -> float:
        return math.log(self._prob_token(self.context_key(context), token))


def _check_training_inputs(order: int, context_window: int, vocab: Vocabulary) -> None:
    if order < 1:
        raise ValueError("order must be at least 1")
    if context_window < 1:
        raise ValueError("context_window must be at least 1")
    if len(vocab) <= 5:
        raise ValueError("vocabulary holds no content tokens")


class ClassConditionedLM:
    """Two n-gram LMs sharing hyperparameters, one per control code."""

    def __init__(
        self,
        order: int,
        smoothing: Smoothing,
        context_window: int,
        vocab: Vocabulary,
        cores: dict[bool, _NGramCore],
    ):
        self.order = order
        self.smoothing = smoothing
        self.context_window = context_window
        self.vocab = vocab
        self.vocab_hash = vocab.content_hash
        self._cores = cores

    @property
    def vocab_size(self) -> int:
        return len(self.vocab)

    def next_logprobs(self, context: Sequence[int], code: bool) -> np.ndarray:
        """Log distribution over the full vocabulary for the next token."""
        return self._cores[bool(code)].log_probs(context)

    def sequence_logprob(self, seq: TokenSequence | Sequence[int], code: bool) -> float:
        """Log probability of a sequence under one code, BOS-padded at start."""
        ids = tuple(seq.ids if isinstance(seq, TokenSequence) else seq)
        core = self._cores[bool(code)]
        return sum(core.logprob_token(ids[:i], ids[i]) for i in range(len(ids)))


class BaseLM:
    """Unconditioned n-gram LM over prompt SEP response streams."""

    def __init__(self, order: int, smoothing: Smoothing, context_window: int, vocab: Vocabulary, core: _NGramCore):
        self.order = order
        self.smoothing = smoothing
        self.context_window = context_window
        self.vocab = vocab
        self.vocab_hash = vocab.content_hash
        self._core = core

    @property
    def vocab_size(self) -> int:
        return len(self.vocab)

    def next_logprobs(self, context: Sequence[int]) -> np.ndarray:
        return self._core.log_probs(context)

    def sequence_logprob(
        self,
        seq: TokenSequence | Sequence[int],
        given: TokenSequence | Sequence[int] | None = None,
    ) -> float:
        """Log probability of seq, optionally conditioned on a fixed prefix."""
        ids = tuple(seq.ids if isinstance(seq, TokenSequence) else seq)
        prefix = ()
        if given is not None:
            prefix = tuple(given.ids if isinstance(given, TokenSequence) else given)
        return sum(
            self._core.logprob_token(prefix + ids[:i], ids[i]) for i in range(len(ids))
        )


def train_cclm(
    data: Sequence[tuple[TokenSequence, bool]],
    vocab: Vocabulary,
    order: int = 3,
    smoothing: Smoothing = Smoothing(),
    context_window: int = 128,
) -> ClassConditionedLM:
    """Train a class-conditioned LM; both codes must appear in the data."""
    _check_training_inputs(order, context_window, vocab)
    if not data:
        raise ValueError("training data is empty")
    codes = {bool(code) for _, code in data}
    for code in (True, False):
        if code not in codes:
            raise ValueError(f"no training data for code {code}")
    cores = {
        code: _NGramCore(order, len(vocab), smoothing, context_window)
        for code in (True, False)
    }
    for seq, code in data:
        cores[bool(code)].train([tuple(seq.ids if isinstance(seq, TokenSequence) else seq)])
    return ClassConditionedLM(order, smoothing, context_window, vocab, cores)


def train_base(
    sequences: Sequence[TokenSequence | Sequence[int]],
    vocab: Vocabulary,
    order: int = 3,
    smoothing: Smoothing = Smoothing(),
    context_window: int = 256,
) -> BaseLM:
    """Train the unconditioned base LM."""
    _check_training_inputs(order, context_window, vocab)
    if not sequences:
        raise ValueError("training data is empty")
    core = _NGramCore(order, len(vocab), smoothing, context_window)
    core.train(
        tuple(s.ids if isinstance(s, TokenSequence) else s) for s in sequences
    )
    return BaseLM(order, smoothing, context_window, vocab, core)


def perplexity(
    model: ClassConditionedLM | BaseLM,
    data: Sequence[TokenSequence | Sequence[int]],
    code: bool | None = None,
) -> float:
    """exp(-total logprob / total tokens) over a corpus."""
    total_logprob = 0.0
    total_tokens = 0
    for seq in data:
        ids = tuple(seq.ids if isinstance(seq, TokenSequence) else seq)
        if isinstance(model, ClassConditionedLM):
            if code is None:
                raise ValueError("class-conditioned perplexity requires a code")
            total_logprob += model.sequence_logprob(ids, code)
        else:
            total_logprob += model.sequence_logprob(ids)
        total_tokens += len(ids)
    if total_tokens == 0:
        raise ValueError("perplexity needs at least one token")
    return math.exp(-total_logprob / total_tokens)


def perplexity_labeled(
    model: ClassConditionedLM, data: Sequence[tuple[TokenSequence, bool]]
) -> float:
    """Perplexity with each sequence scored under its own code."""
    total_logprob = 0.0
    total_tokens = 0
    for seq, code in data:
        total_logprob += model.sequence_logprob(seq, code)
        total_tokens += len(seq)
    if total_tokens == 0:
        raise ValueError("perplexity needs at least one token")
    return math.exp(-total_logprob / total_tokens)


@dataclass(frozen=True)
class LossConfig:
    """Mixing weight for the generative/discriminative loss."""

    lambda_: float = 0.8

    def __post_init__(self) -> None:
        if not 0.0 <= self.lambda_ <= 1.0:
            raise ValueError("lambda_ must lie in [0, 1]")


def losses(
    model: ClassConditionedLM,
    labeled_data: Sequence[tuple[TokenSequence, bool]],
    config: LossConfig = LossConfig(),
    posterior_config: "PosteriorConfig | None" = None,
) -> tuple[float, float, float]:
    """(generative, discriminative, mixed) losses on labeled sequences.

    The generative term is the mean per-sequence length-normalized negative
    log likelihood under the true code. The discriminative term is the mean
    negative log class posterior of the true code at full sequence length.
    The mixed loss is lambda * generative + (1 - lambda) * discriminative.
    """
    from .posterior import PosteriorConfig, sequence_class_log_posteriors

    if not labeled_data:
        raise ValueError("losses need at least one labeled sequence")
    if posterior_config is None:
        pos_fraction = sum(1 for _, code in labeled_data if code) / len(labeled_data)
        if not 0.0 < pos_fraction < 1.0:
            pos_fraction = 0.5
        posterior_config = PosteriorConfig(prior_pos=pos_fraction)
    gen_terms = []
    disc_terms = []
    for seq, code in labeled_data:
        length = len(seq)
        if length == 0:
            raise ValueError("losses are undefined for empty sequences")
        gen_terms.append(-model.sequence_logprob(seq, code) / length)
        log_post_pos, log_post_neg = sequence_class_log_posteriors(
            model, seq, posterior_config
        )
        disc_terms.append(-(log_post_pos if code else log_post_neg))
    l_g = float(np.mean(gen_terms))
    l_d = float(np.mean(disc_terms))
    l_gd = config.lambda_ * l_g + (1.0 - config.lambda_) * l_d
    return l_g, l_d, l_gd


def model_to_dict(model: ClassConditionedLM | BaseLM) -> dict:
    common = {
        "format_version": MODEL_FORMAT_VERSION,
        "order": model.order,
        "smoothing": model.smoothing.to_dict(),
        "context_window": model.context_window,
        "vocab_hash": model.vocab_hash,
    }
    if isinstance(model, ClassConditionedLM):
        common["kind"] = "cclm"
        common["tables"] = {
            "true": model._cores[True].table.to_dict(),
            "false": model._cores[False].table.to_dict(),
        }
    else:
        common["kind"] = "base"
        common["tables"] = {"base": model._core.table.to_dict()}
    return common


def serialize_model(model: ClassConditionedLM | BaseLM) -> str:
    return json.dumps(model_to_dict(model), sort_keys=True, separators=(",", ":")) + "\n"


def save_model(model: ClassConditionedLM | BaseLM, path: str | Path) -> None:
    Path(path).write_text(serialize_model(model), encoding="utf-8")


def load_model(path: str | Path, vocab: Vocabulary) -> ClassConditionedLM | BaseLM:
    """Load a serialized model; its vocabulary hash must match vocab."""
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    version = obj.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise ValueError(
            f"unsupported model format version {version}, expected {MODEL_FORMAT_VERSION}"
        )
    if obj["vocab_hash"] != vocab.content_hash:
        raise VocabularyMismatchError(
            "model was trained against a different vocabulary "
            f"(stored {obj['vocab_hash'][:12]}, supplied {vocab.content_hash[:12]})"
        )
    order = int(obj["order"])
    smoothing = Smoothing.from_dict(obj["smoothing"])
    window = int(obj["context_window"])
    if obj["kind"] == "cclm":
        cores = {}
        for code, key in ((True, "true"), (False, "false")):
            core = _NGramCore(order, len(vocab), smoothing, window)
            core.table = _CountTable.from_dict(obj["tables"][key])
            cores[code] = core
        return ClassConditionedLM(order, smoothing, window, vocab, cores)
    if obj["kind"] == "base":
        core = _NGramCore(order, len(vocab), smoothing, window)
        core.table = _CountTable.from_dict(obj["tables"]["base"])
        return BaseLM(order, smoothing, window, vocab, core)
    raise ValueError(f"unknown model kind {obj['kind']!r}")
