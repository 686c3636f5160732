"""Incremental Bayes-rule class posteriors over a two-code discriminator.

For a context x_1..x_t and candidate token v, the posterior of code c is

    P(c | x, v) = P(c) * P(x, v | c)^(alpha / t')
                  / sum_c' P(c') * P(x, v | c')^(alpha / t')

with t' = t + 1. The length-normalizing exponent keeps long contexts from
saturating the posterior; all arithmetic stays in log space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import TokenSequence
from .ngram import ClassConditionedLM


@dataclass(frozen=True)
class PosteriorConfig:
    """Scaling exponent and positive-class prior."""

    alpha: float = 1.0
    prior_pos: float = 0.5

    def __post_init__(self) -> None:
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not 0.0 < self.prior_pos < 1.0:
            raise ValueError("prior_pos must lie in (0, 1)")


@dataclass(frozen=True)
class PosteriorState:
    """Cumulative per-code log likelihood of the tokens absorbed so far."""

    cum_logp_pos: float = 0.0
    cum_logp_neg: float = 0.0
    t: int = 0


def advance(state: PosteriorState, logp_pos: float, logp_neg: float) -> PosteriorState:
    """State after absorbing one token with the given per-code log probs."""
    return PosteriorState(
        state.cum_logp_pos + float(logp_pos),
        state.cum_logp_neg + float(logp_neg),
        state.t + 1,
    )


def _posteriors_from_logweights(
    logw_pos: np.ndarray | float, logw_neg: np.ndarray | float
) -> np.ndarray | float:
    """Two-way softmax; invariant to adding a shared constant to both sides."""
    return np.exp(logw_pos - np.logaddexp(logw_pos, logw_neg))


def class_posteriors(
    state: PosteriorState,
    next_logp_pos: np.ndarray,
    next_logp_neg: np.ndarray,
    config: PosteriorConfig = PosteriorConfig(),
) -> np.ndarray:
    """Positive-code posterior for every candidate next token.

    next_logp_pos/next_logp_neg are the per-code log distributions over the
    vocabulary at the current context. Entries are strictly inside (0, 1).
    """
    scale = config.alpha / (state.t + 1)
    logw_pos = math.log(config.prior_pos) + scale * (
        state.cum_logp_pos + np.asarray(next_logp_pos, dtype=float)
    )
    logw_neg = math.log1p(-config.prior_pos) + scale * (
        state.cum_logp_neg + np.asarray(next_logp_neg, dtype=float)
    )
    return _posteriors_from_logweights(logw_pos, logw_neg)


class PosteriorTracker:
    """Discriminator state over the generated-only context of one candidate.

    desired_positive selects which code counts as the steering target; with
    False the codes swap roles, which steers away from the positive class.
    """

    def __init__(
        self,
        model: ClassConditionedLM,
        config: PosteriorConfig = PosteriorConfig(),
        desired_positive: bool = True,
    ):
        self.model = model
        self.config = config
        self.desired_positive = desired_positive
        self.state = PosteriorState()
        self._context: list[int] = []

    def _code_logprobs(self) -> tuple[np.ndarray, np.ndarray]:
        return (
            self.model.next_logprobs(self._context, True),
            self.model.next_logprobs(self._context, False),
        )

    def candidate_posteriors(self) -> np.ndarray:
        """Posterior of the desired code for every candidate next token."""
        logp_pos, logp_neg = self._code_logprobs()
        if self.desired_positive:
            return class_posteriors(self.state, logp_pos, logp_neg, self.config)
        swapped_state = PosteriorState(
            self.state.cum_logp_neg, self.state.cum_logp_pos, self.state.t
        )
        swapped_config = PosteriorConfig(self.config.alpha, 1.0 - self.config.prior_pos)
        return class_posteriors(swapped_state, logp_neg, logp_pos, swapped_config)

    def advance(self, token: int) -> PosteriorState:
        """Absorb one generated token into the cumulative state."""
        logp_pos, logp_neg = self._code_logprobs()
        self.state = advance(self.state, logp_pos[token], logp_neg[token])
        self._context.append(int(token))
        return self.state

    @property
    def context(self) -> tuple[int, ...]:
        return tuple(self._context)


def sequence_class_log_posteriors(
    model: ClassConditionedLM,
    seq: TokenSequence | Sequence[int],
    config: PosteriorConfig = PosteriorConfig(),
) -> tuple[float, float]:
    """Log posterior of each code for a complete sequence.

    Uses the full-length exponent alpha / len(seq); an empty sequence falls
    back to the priors alone.
    """
    ids = tuple(seq.ids if isinstance(seq, TokenSequence) else seq)
    logw_pos = math.log(config.prior_pos)
    logw_neg = math.log1p(-config.prior_pos)
    if ids:
        scale = config.alpha / len(ids)
        logw_pos += scale * model.sequence_logprob(ids, True)
        logw_neg += scale * model.sequence_logprob(ids, False)
    lse = np.logaddexp(logw_pos, logw_neg)
    return float(logw_pos - lse), float(logw_neg - lse)


def sequence_class_posterior(
    model: ClassConditionedLM,
    seq: TokenSequence | Sequence[int],
    config: PosteriorConfig = PosteriorConfig(),
) -> float:
    """Posterior probability of the positive code for a complete sequence."""
    log_post_pos, _ = sequence_class_log_posteriors(model, seq, config)
    return math.exp(log_post_pos)
