"""Guided decoding: attribute-weighted combination plus a filter chain.

Per step the base LM proposes a distribution over the next token from the
prompt SEP generated context; each attribute discriminator contributes a
class-posterior vector over the generated-only context. The combined
distribution is

    P(v) proportional to P_base(v) * prod_i posterior_i(v)^omega_i

followed by a no-repeat n-gram ban, top-k truncation and nucleus truncation
before sampling. The first warmup_tokens steps are uncontrolled.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .corpus import BOS, EOS, PAD, SEP, TokenSequence
from .posterior import PosteriorConfig, PosteriorTracker

SUPPRESSED_IDS = (PAD, BOS, SEP)


class DegenerateFilterError(RuntimeError):
    """Every token was banned; the caller should relax the filters."""


@dataclass(frozen=True)
class GenerationConfig:
    """Decoding hyperparameters."""

    max_new_tokens: int = 100
    warmup_tokens: int = 10
    no_repeat_ngram: int = 5
    repetition_penalty: float = 3.5
    temperature: float = 1.2
    top_k: int = 100
    nucleus_p: float = 0.92
    num_samples: int = 5
    seed: int = 0

    def __post_init__(self) -> None:
        if self.max_new_tokens < 1:
            raise ValueError("max_new_tokens must be at least 1")
        if not 0 <= self.warmup_tokens <= self.max_new_tokens:
            raise ValueError("warmup_tokens must lie in [0, max_new_tokens]")
        if self.no_repeat_ngram < 0:
            raise ValueError("no_repeat_ngram must be non-negative")
        if not self.repetition_penalty >= 1.0:
            raise ValueError("repetition_penalty must be at least 1")
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")
        if self.top_k < 1:
            raise ValueError("top_k must be at least 1")
        if not 0.0 < self.nucleus_p <= 1.0:
            raise ValueError("nucleus_p must lie in (0, 1]")
        if self.num_samples < 1:
            raise ValueError("num_samples must be at least 1")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


@dataclass(frozen=True)
class AttributeControl:
    """One attribute's discriminator, weight and steering direction."""

    name: str
    model: object
    posterior_config: PosteriorConfig = PosteriorConfig()
    omega: float = 1.0
    direction: str = "toward-positive"

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("control name must be non-empty")
        if self.omega < 0:
            raise ValueError(f"{self.name}: omega must be non-negative")
        if self.direction not in ("toward-positive", "toward-negative"):
            raise ValueError(
                f"{self.name}: direction must be 'toward-positive' or 'toward-negative'"
            )


@dataclass(frozen=True)
class FilterDecisions:
    """What the filter chain did at one step."""

    banned: int = 0
    kept_top_k: int = 0
    kept_nucleus: int = 0
    relaxed: bool = False


@dataclass(frozen=True)
class StepRecord:
    """Everything needed to audit and replay one sampling step."""

    index: int
    warmup: bool
    chosen: int
    u: float
    base_logprob: float
    posteriors: dict[str, float]
    combined_prob: float
    final_prob: float
    support: tuple[int, ...]
    probs: tuple[float, ...]
    filters: FilterDecisions

    def summary(self) -> dict:
        """Compact per-step record for candidate files."""
        return {
            "i": self.index,
            "warmup": self.warmup,
            "tok": self.chosen,
            "u": self.u,
            "base_logprob": self.base_logprob,
            "posteriors": self.posteriors,
            "combined_prob": self.combined_prob,
            "final_prob": self.final_prob,
            "banned": self.filters.banned,
            "relaxed": self.filters.relaxed,
        }


@dataclass(frozen=True)
class CandidateTrace:
    """One generated candidate with its per-step audit trail."""

    tokens: TokenSequence
    steps: tuple[StepRecord, ...]
    terminated_by: str

    def mean_posteriors(self) -> dict[str, float]:
        """Mean posterior of the chosen token per attribute, warmup excluded."""
        sums: dict[str, float] = {}
        counts: dict[str, int] = {}
        for step in self.steps:
            for name, value in step.posteriors.items():
                sums[name] = sums.get(name, 0.0) + value
                counts[name] = counts.get(name, 0) + 1
        return {name: sums[name] / counts[name] for name in sums}


def _softmax(scores: np.ndarray) -> np.ndarray:
    scores = np.asarray(scores, dtype=float)
    shifted = scores - np.max(scores)
    weights = np.exp(shifted)
    return weights / np.sum(weights)


def combine_single(base_logprobs: np.ndarray, posterior: np.ndarray, omega: float) -> np.ndarray:
    """Single-attribute combination: softmax(base + omega * log posterior)."""
    with np.errstate(divide="ignore"):
        scores = np.asarray(base_logprobs, dtype=float) + omega * np.log(
            np.asarray(posterior, dtype=float)
        )
    return _softmax(scores)


def combine(
    base_logprobs: np.ndarray, posteriors: Sequence[tuple[np.ndarray, float]]
) -> np.ndarray:
    """Multi-attribute combination of base log probs with weighted posteriors."""
    scores = np.array(base_logprobs, dtype=float, copy=True)
    with np.errstate(divide="ignore"):
        for posterior, omega in posteriors:
            scores = scores + omega * np.log(np.asarray(posterior, dtype=float))
    return _softmax(scores)


def _banned_next_tokens(history: Sequence[int], n: int) -> list[int]:
    """Tokens that would complete an n-gram already present in history.

    EOS is always exempt so candidates can terminate.
    """
    if n <= 0 or len(history) < n:
        return []
    prefix = tuple(history[len(history) - (n - 1) :]) if n > 1 else ()
    banned = set()
    for i in range(len(history) - n + 1):
        gram = tuple(history[i : i + n])
        if gram[: n - 1] == prefix:
            banned.add(gram[n - 1])
    banned.discard(EOS)
    return sorted(banned)


def _apply_filters_traced(
    combined: np.ndarray, history: Sequence[int], config: GenerationConfig
) -> tuple[np.ndarray, FilterDecisions]:
    probs = np.array(combined, dtype=float, copy=True)
    banned = _banned_next_tokens(history, config.no_repeat_ngram)
    if banned:
        probs[banned] = 0.0
        mass = probs.sum()
        if mass <= 0.0:
            raise DegenerateFilterError("degenerate filter state: every token banned")
        probs = probs / mass

    nonzero = int(np.count_nonzero(probs))
    kept_top_k = nonzero
    if config.top_k < nonzero:
        # Ties broken by token id ascending: sort by (prob desc, id asc).
        order = np.lexsort((np.arange(probs.size), -probs))
        probs[order[config.top_k :]] = 0.0
        probs = probs / probs.sum()
        kept_top_k = config.top_k

    kept_nucleus = int(np.count_nonzero(probs))
    if config.nucleus_p < 1.0:
        order = np.lexsort((np.arange(probs.size), -probs))
        cumulative = np.cumsum(probs[order])
        cut = int(np.searchsorted(cumulative, config.nucleus_p, side="left")) + 1
        cut = min(cut, kept_nucleus)
        if cut < kept_nucleus:
            probs[order[cut:]] = 0.0
            probs = probs / probs.sum()
        kept_nucleus = cut
    return probs, FilterDecisions(len(banned), kept_top_k, kept_nucleus)


def apply_filters(
    combined: np.ndarray, history: Sequence[int], config: GenerationConfig
) -> np.ndarray:
    """Filter chain: no-repeat n-gram ban, top-k, nucleus, renormalized."""
    probs, _ = _apply_filters_traced(combined, history, config)
    return probs


def _sample_index(probs: np.ndarray, u: float) -> int:
    cumulative = np.cumsum(probs)
    idx = int(np.searchsorted(cumulative, u * cumulative[-1], side="right"))
    if idx >= probs.size or probs[idx] == 0.0:
        idx = int(np.nonzero(probs)[0][-1])
    return idx


class GenerationSession:
    """Mutable state of one candidate being decoded."""

    def __init__(
        self,
        base,
        prompt: TokenSequence,
        controls: Sequence[AttributeControl],
        config: GenerationConfig,
        rng: np.random.Generator,
    ):
        if len(prompt) == 0:
            raise ValueError("prompt must be non-empty")
        for control in controls:
            if control.model.vocab_hash != base.vocab_hash:
                raise ValueError(
                    f"control {control.name!r} was trained against a different vocabulary"
                )
        names = [c.name for c in controls]
        if len(set(names)) != len(names):
            raise ValueError("control names must be unique")
        self.base = base
        self.prompt = prompt
        self.controls = list(controls)
        self.config = config
        self.rng = rng
        self.generated: list[int] = []
        self.steps: list[StepRecord] = []
        self.terminated_by: str | None = None
        self._trackers = [
            PosteriorTracker(
                control.model,
                control.posterior_config,
                desired_positive=control.direction == "toward-positive",
            )
            for control in controls
        ]

    @property
    def done(self) -> bool:
        return self.terminated_by is not None

    @property
    def in_warmup(self) -> bool:
        return len(self.generated) < self.config.warmup_tokens

    def shaped_base_logprobs(self) -> np.ndarray:
        """Base log distribution after repetition penalty and temperature.

        Structural tokens (PAD, BOS, SEP) are suppressed so responses never
        contain them; EOS and UNK stay reachable.
        """
        context = list(self.prompt.ids) + [SEP] + self.generated
        probs = np.exp(self.base.next_logprobs(context))
        probs[list(SUPPRESSED_IDS)] = 0.0
        if self.generated:
            seen = np.unique(self.generated)
            probs[seen] /= self.config.repetition_penalty
        probs = probs / probs.sum()
        if self.config.temperature != 1.0:
            probs = probs ** (1.0 / self.config.temperature)
            probs = probs / probs.sum()
        with np.errstate(divide="ignore"):
            return np.log(probs)

    def next_distribution(self) -> tuple[np.ndarray, dict]:
        """Final sampling distribution plus the intermediates that shaped it."""
        base_logprobs = self.shaped_base_logprobs()
        warmup = self.in_warmup
        posterior_vectors: list[tuple[str, np.ndarray]] = []
        if warmup or not self.controls:
            combined = _softmax(base_logprobs)
        else:
            posterior_vectors = [
                (control.name, tracker.candidate_posteriors())
                for control, tracker in zip(self.controls, self._trackers)
            ]
            combined = combine(
                base_logprobs,
                [
                    (vector, control.omega)
                    for (_, vector), control in zip(posterior_vectors, self.controls)
                ],
            )
        try:
            filtered, decisions = _apply_filters_traced(
                combined, self.generated, self.config
            )
        except DegenerateFilterError:
            relaxed = replace(self.config, no_repeat_ngram=0, nucleus_p=1.0)
            filtered, decisions = _apply_filters_traced(combined, self.generated, relaxed)
            decisions = replace(decisions, relaxed=True)
        info = {
            "warmup": warmup,
            "base_logprobs": base_logprobs,
            "posteriors": posterior_vectors,
            "combined": combined,
            "filters": decisions,
        }
        return filtered, info

    def step(self) -> StepRecord:
        """Sample one token, advance all trackers and record the step."""
        if self.done:
            raise RuntimeError("session already terminated")
        filtered, info = self.next_distribution()
        u = float(self.rng.random())
        token = _sample_index(filtered, u)
        support = np.nonzero(filtered)[0]
        record = StepRecord(
            index=len(self.generated),
            warmup=info["warmup"],
            chosen=token,
            u=u,
            base_logprob=float(info["base_logprobs"][token]),
            posteriors={
                name: float(vector[token]) for name, vector in info["posteriors"]
            },
            combined_prob=float(info["combined"][token]),
            final_prob=float(filtered[token]),
            support=tuple(int(i) for i in support),
            probs=tuple(float(p) for p in filtered[support]),
            filters=info["filters"],
        )
        self.generated.append(token)
        for tracker in self._trackers:
            tracker.advance(token)
        self.steps.append(record)
        if token == EOS:
            self.terminated_by = "EOS"
        elif len(self.generated) >= self.config.max_new_tokens:
            self.terminated_by = "max_length"
        return record

    def trace(self) -> CandidateTrace:
        if not self.done:
            raise RuntimeError("session still running")
        return CandidateTrace(
            tokens=TokenSequence(tuple(self.generated), role="response"),
            steps=tuple(self.steps),
            terminated_by=self.terminated_by,
        )


def candidate_rng(seed: int, candidate_index: int) -> np.random.Generator:
    """Independent, reproducible stream for one candidate."""
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence([seed, candidate_index]))
    )


def generate(
    base,
    prompt: TokenSequence,
    controls: Sequence[AttributeControl],
    config: GenerationConfig = GenerationConfig(),
) -> list[CandidateTrace]:
    """Decode num_samples candidates for one prompt."""
    traces = []
    for i in range(config.num_samples):
        session = GenerationSession(base, prompt, controls, config, candidate_rng(config.seed, i))
        while not session.done:
            session.step()
        traces.append(session.trace())
    return traces


def replay_trace(trace: CandidateTrace) -> tuple[int, ...]:
    """Re-run a trace's recorded distributions and draws; returns the tokens."""
    tokens = []
    for step in trace.steps:
        probs = np.asarray(step.probs, dtype=float)
        idx = _sample_index(probs, step.u)
        tokens.append(step.support[idx])
    return tuple(tokens)
