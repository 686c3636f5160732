"""Count-based LM behavior: smoothing, dual-route queries, losses, files."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from steergen.corpus import RESERVED_TOKENS, TokenSequence, Vocabulary
from steergen.ngram import (
    BaseLM,
    ClassConditionedLM,
    LossConfig,
    Smoothing,
    VocabularyMismatchError,
    load_model,
    losses,
    perplexity,
    perplexity_labeled,
    save_model,
    serialize_model,
    train_base,
    train_cclm,
)
from steergen.posterior import PosteriorConfig

A, B, C = 5, 6, 7


def make_vocab(n_content: int = 2) -> Vocabulary:
    names = ["a", "b", "c", "d", "e"][:n_content]
    return Vocabulary(list(RESERVED_TOKENS) + names)


def tiny_cclm(smoothing: Smoothing = Smoothing("add_k", k=1.0), order: int = 2,
              n_content: int = 2) -> ClassConditionedLM:
    vocab = make_vocab(n_content)
    data = [(TokenSequence((A, B)), True), (TokenSequence((B,)), False)]
    return train_cclm(data, vocab, order=order, smoothing=smoothing)


class TestSmoothing:
    def test_kind_validation(self):
        with pytest.raises(ValueError, match="kind"):
            Smoothing("laplace")

    def test_add_k_requires_positive_k(self):
        with pytest.raises(ValueError, match="k > 0"):
            Smoothing("add_k", k=0.0)

    def test_backoff_discount_range(self):
        with pytest.raises(ValueError, match="discount"):
            Smoothing("backoff", discount=1.0)

    def test_labels(self):
        assert Smoothing("add_k", k=0.1).label() == "add_k(0.1)"
        assert Smoothing("backoff", discount=0.75).label() == "backoff(0.75)"

    def test_dict_round_trip(self):
        for s in (Smoothing("add_k", k=0.5), Smoothing("backoff", discount=0.3)):
            assert Smoothing.from_dict(s.to_dict()) == s


class TestAddK:
    def test_hand_conditional(self):
        # True-code counts at context (a,): only follower b, once. With
        # add-1 over V=7: (1 + 1) / (1 + 7) = 0.25.
        model = tiny_cclm()
        probs = np.exp(model.next_logprobs([A], True))
        assert math.isclose(probs[B], 0.25, abs_tol=1e-12)
        assert math.isclose(probs[A], 0.125, abs_tol=1e-12)

    def test_unseen_context_is_uniform(self):
        model = tiny_cclm(order=3)
        probs = np.exp(model.next_logprobs([B, B], True))
        np.testing.assert_allclose(probs, np.full(7, 1 / 7), rtol=0, atol=1e-12)

    def test_more_evidence_raises_probability(self):
        vocab = make_vocab()
        once = train_cclm(
            [(TokenSequence((A, B)), True), (TokenSequence((B,)), False)],
            vocab, order=2, smoothing=Smoothing("add_k", k=1.0),
        )
        twice = train_cclm(
            [(TokenSequence((A, B)), True), (TokenSequence((A, B)), True),
             (TokenSequence((B,)), False)],
            vocab, order=2, smoothing=Smoothing("add_k", k=1.0),
        )
        p_once = np.exp(once.next_logprobs([A], True))[B]
        p_twice = np.exp(twice.next_logprobs([A], True))[B]
        assert p_twice > p_once


class TestBackoff:
    def test_hand_conditional(self):
        # ctx (a,) holds one follower; backing off through the unigram table
        # (three observations) down to the uniform floor over V=8:
        #   P(b | a) = 0.25 + 0.75 * (0.25 / 3 + 0.75 / 8)
        model = tiny_cclm(Smoothing("backoff", discount=0.75), n_content=3)
        expected = 0.25 + 0.75 * (0.25 / 3 + 0.75 / 8)
        probs = np.exp(model.next_logprobs([A], True))
        assert math.isclose(probs[B], expected, rel_tol=0, abs_tol=1e-12)

    def test_unseen_context_backs_off_to_unigram_mix(self):
        model = tiny_cclm(Smoothing("backoff", discount=0.75), n_content=3)
        # c never occurs as a context; its distribution must still normalize
        # and dominate nothing it has no evidence for.
        probs = np.exp(model.next_logprobs([C], True))
        assert math.isclose(probs.sum(), 1.0, abs_tol=1e-12)
        assert probs.min() > 0.0


@pytest.mark.parametrize(
    "smoothing", [Smoothing("add_k", k=0.1), Smoothing("backoff", discount=0.75)]
)
class TestDistributionInvariants:
    contexts = ([], [A], [B, A], [C, C], [A, B, A, B])

    def test_normalized_and_finite(self, smoothing):
        model = tiny_cclm(smoothing, order=3, n_content=3)
        for code in (True, False):
            for ctx in self.contexts:
                lp = model.next_logprobs(ctx, code)
                assert np.all(np.isfinite(lp))
                assert abs(np.logaddexp.reduce(lp)) < 1e-9

    def test_scalar_route_matches_vector_route(self, smoothing):
        model = tiny_cclm(smoothing, order=3, n_content=3)
        core = model._cores[True]
        for ctx in self.contexts:
            vector = model.next_logprobs(ctx, True)
            for token in range(model.vocab_size):
                scalar = core.logprob_token(ctx, token)
                assert abs(scalar - vector[token]) <= 1e-12

    def test_log_cache_returns_readonly_views(self, smoothing):
        model = tiny_cclm(smoothing)
        lp = model.next_logprobs([A], True)
        with pytest.raises(ValueError):
            lp[0] = 0.0


class TestSequenceLogprob:
    def test_empty_sequence_is_zero(self):
        model = tiny_cclm()
        assert model.sequence_logprob((), True) == 0.0

    def test_add_k_hand_value(self):
        # Both steps of (a, b) under the true code are (1+1)/(1+7).
        model = tiny_cclm()
        assert math.isclose(
            model.sequence_logprob((A, B), True), math.log(0.0625), abs_tol=1e-12
        )

    def test_base_prefix_decomposition(self):
        vocab = make_vocab(3)
        base = train_base([(A, B, C), (B, A)], vocab, order=3)
        whole = base.sequence_logprob((A, B, C, A))
        parts = base.sequence_logprob((A, B)) + base.sequence_logprob(
            (C, A), given=(A, B)
        )
        assert abs(whole - parts) <= 1e-12

    def test_context_window_truncates_history(self):
        vocab = make_vocab(3)
        wide = train_base([(A, B, C), (B, A)], vocab, order=3, context_window=256)
        narrow = train_base([(A, B, C), (B, A)], vocab, order=3, context_window=1)
        assert not np.array_equal(
            wide.next_logprobs([A, B]), narrow.next_logprobs([A, B])
        )


class TestTrainingValidation:
    def test_missing_code_rejected(self):
        vocab = make_vocab()
        with pytest.raises(ValueError, match="no training data for code False"):
            train_cclm([(TokenSequence((A,)), True)], vocab)

    def test_empty_data_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            train_cclm([], make_vocab())
        with pytest.raises(ValueError, match="empty"):
            train_base([], make_vocab())

    def test_content_free_vocab_rejected(self):
        vocab = Vocabulary(list(RESERVED_TOKENS))
        with pytest.raises(ValueError, match="content"):
            train_base([(1,)], vocab)

    def test_order_and_window_validation(self):
        vocab = make_vocab()
        with pytest.raises(ValueError, match="order"):
            train_base([(A,)], vocab, order=0)
        with pytest.raises(ValueError, match="context_window"):
            train_base([(A,)], vocab, context_window=0)


class TestPerplexity:
    def test_heavy_smoothing_approaches_vocab_size(self):
        vocab = make_vocab()
        base = train_base([(A,)], vocab, order=1, smoothing=Smoothing("add_k", k=1e9))
        assert abs(perplexity(base, [(A,)]) - 7.0) < 1e-5

    def test_memorized_corpus_approaches_one(self):
        vocab = make_vocab()
        base = train_base([(A, B)], vocab, order=3, smoothing=Smoothing("add_k", k=1e-9))
        assert abs(perplexity(base, [(A, B)]) - 1.0) < 1e-6

    def test_class_conditioned_requires_code(self):
        model = tiny_cclm()
        with pytest.raises(ValueError, match="code"):
            perplexity(model, [(A,)])

    def test_labeled_matches_manual(self):
        model = tiny_cclm()
        data = [(TokenSequence((A, B)), True), (TokenSequence((B,)), False)]
        total = sum(model.sequence_logprob(seq, code) for seq, code in data)
        expected = math.exp(-total / 3)
        assert math.isclose(perplexity_labeled(model, data), expected, rel_tol=1e-12)

    def test_empty_corpus_rejected(self):
        model = tiny_cclm()
        with pytest.raises(ValueError, match="token"):
            perplexity(model, [], code=True)


class TestLosses:
    eval_data = [(TokenSequence((A, B)), True), (TokenSequence((B,)), False)]

    def test_generative_term_hand_value(self):
        # Every scored step is (1+1)/(1+7) = 1/4, so each per-token NLL is
        # log 4 and so is their mean.
        model = tiny_cclm()
        l_g, _, _ = losses(model, self.eval_data)
        assert math.isclose(l_g, math.log(4.0), abs_tol=1e-12)

    def test_discriminative_term_hand_value(self):
        # (a, b) likelihoods: 1/16 true, 1/56 false, exponent 1/2 gives a
        # true-code posterior 1 / (1 + sqrt(16/56)). (b,) likelihoods: 1/4
        # false, 1/8 true, full exponent gives a false posterior 2/3.
        model = tiny_cclm()
        _, l_d, _ = losses(model, self.eval_data)
        expected = (math.log1p(math.sqrt(16 / 56)) + math.log(1.5)) / 2
        assert math.isclose(l_d, expected, abs_tol=1e-12)

    def test_mixed_loss_is_affine_in_lambda(self):
        model = tiny_cclm()
        l_g, l_d, _ = losses(model, self.eval_data)
        for lam in (0.0, 0.25, 0.8, 1.0):
            _, _, l_gd = losses(model, self.eval_data, LossConfig(lambda_=lam))
            assert l_gd == lam * l_g + (1.0 - lam) * l_d

    def test_boundary_lambdas_reduce_to_single_terms(self):
        model = tiny_cclm()
        l_g, l_d, at_one = losses(model, self.eval_data, LossConfig(lambda_=1.0))
        assert at_one == l_g
        _, _, at_zero = losses(model, self.eval_data, LossConfig(lambda_=0.0))
        assert at_zero == l_d

    def test_single_class_data_falls_back_to_even_prior(self):
        model = tiny_cclm()
        data = [(TokenSequence((A, B)), True), (TokenSequence((A,)), True)]
        implicit = losses(model, data)
        explicit = losses(
            model, data, posterior_config=PosteriorConfig(prior_pos=0.5)
        )
        assert implicit == explicit

    def test_lambda_range_enforced(self):
        with pytest.raises(ValueError, match="lambda"):
            LossConfig(lambda_=1.5)

    def test_empty_inputs_rejected(self):
        model = tiny_cclm()
        with pytest.raises(ValueError, match="at least one"):
            losses(model, [])
        with pytest.raises(ValueError, match="empty sequences"):
            losses(model, [(TokenSequence(()), True)])


class TestSerialization:
    def test_round_trip_is_byte_identical(self, tmp_path):
        vocab = make_vocab(3)
        for model in (
            tiny_cclm(n_content=3),
            train_base([(A, B, C)], vocab, smoothing=Smoothing("backoff")),
        ):
            path = tmp_path / "model.json"
            save_model(model, path)
            loaded = load_model(path, model.vocab)
            assert serialize_model(loaded) == serialize_model(model)

    def test_loaded_model_answers_identically(self, tmp_path):
        model = tiny_cclm(Smoothing("backoff", discount=0.6), order=3, n_content=3)
        path = tmp_path / "model.json"
        save_model(model, path)
        loaded = load_model(path, model.vocab)
        for ctx in ([], [A], [C, B]):
            for code in (True, False):
                np.testing.assert_array_equal(
                    loaded.next_logprobs(ctx, code), model.next_logprobs(ctx, code)
                )

    def test_vocab_mismatch_rejected(self, tmp_path):
        model = tiny_cclm()
        path = tmp_path / "model.json"
        save_model(model, path)
        with pytest.raises(VocabularyMismatchError):
            load_model(path, make_vocab(3))

    def test_version_checked(self, tmp_path):
        path = tmp_path / "model.json"
        path.write_text('{"format_version": 99}\n', encoding="utf-8")
        with pytest.raises(ValueError, match="version"):
            load_model(path, make_vocab())


@given(
    pos=st.lists(st.lists(st.integers(5, 9), max_size=4), min_size=1, max_size=4),
    neg=st.lists(st.lists(st.integers(5, 9), max_size=4), min_size=1, max_size=4),
    context=st.lists(st.integers(5, 9), max_size=5),
    backoff=st.booleans(),
)
@settings(max_examples=80, deadline=None)
def test_any_trained_distribution_normalizes(pos, neg, context, backoff):
    vocab = Vocabulary(list(RESERVED_TOKENS) + ["a", "b", "c", "d", "e"])
    smoothing = Smoothing("backoff") if backoff else Smoothing("add_k")
    data = [(tuple(ids), True) for ids in pos] + [(tuple(ids), False) for ids in neg]
    model = train_cclm(data, vocab, order=3, smoothing=smoothing)
    for code in (True, False):
        lp = model.next_logprobs(context, code)
        assert np.all(np.isfinite(lp))
        assert abs(np.logaddexp.reduce(lp)) < 1e-9
