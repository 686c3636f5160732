"""
Vocabulary, base model and attribute model
==========================================

Tokenize raw text, build a shared vocabulary, then train the two kinds of
model the package uses: an unconditioned base n-gram model that proposes
fluent continuations, and a class-conditioned attribute model whose two
control codes later act as a discriminator during decoding.
"""

import tempfile
from pathlib import Path

import numpy as np

from steergen.corpus import (
    build_vocab,
    load_attribute_records,
    load_attribute_texts,
    tokenize,
)
from steergen.ngram import (
    LossConfig,
    Smoothing,
    losses,
    perplexity,
    train_base,
    train_cclm,
)
from steergen.synth import write_attribute_dataset

############################################################################
# Tokenization lowercases and separates punctuation. Without a vocabulary
# it returns surface strings, the form build_vocab consumes.

print("tokens:", tokenize("Thanks, that was KIND of you!"))

############################################################################
# A labeled corpus for one attribute. Positive rows draw from polite
# wording, negative rows from blunt wording, and both classes mix in the
# same neutral filler so the classes overlap the way real data does.

workdir = Path(tempfile.mkdtemp(prefix="steergen-demo01-"))
data_path = write_attribute_dataset(workdir / "polite.jsonl", "polite", n=200, seed=3)
texts = load_attribute_texts(data_path)
print(f"\n{len(texts)} labeled rows, first two:")
for row in texts[:2]:
    print(f"  [{row['label']:8}] {row['text']}")

############################################################################
# The vocabulary is frozen from the corpus before any model sees it, so
# every model trained here shares one id space (and one content hash).

vocab = build_vocab(tokenize(row["text"]) for row in texts)
print(f"\nvocabulary: {len(vocab)} tokens, hash {vocab.content_hash}")

records = load_attribute_records(data_path, vocab)

############################################################################
# The base model ignores labels: it just learns which tokens follow which
# contexts. Its perplexity on the training rows is a sanity number, not a
# benchmark.

base = train_base([rec.text for rec in records], vocab, order=3)
print(f"base perplexity on training rows: {perplexity(base, [r.text for r in records]):.2f}")

############################################################################
# The class-conditioned model trains one core per control code from the
# same rows split by label. Asking each code for its favorite sentence
# openers shows what the codes disagree about.

labeled = [(rec.text, rec.positive) for rec in records]
cclm = train_cclm(labeled, vocab, order=3, smoothing=Smoothing("add_k", k=0.1))

for code, label in ((True, "positive"), (False, "negative")):
    logprobs = cclm.next_logprobs((), code)
    top = np.argsort(logprobs)[::-1][:5]
    words = ", ".join(f"{vocab.token_of(i)} ({np.exp(logprobs[i]):.3f})" for i in top)
    print(f"{label:8} code opens with: {words}")

############################################################################
# Training quality is tracked with three numbers: a generative loss (how
# well each code predicts its own rows), a discriminative loss (how well
# the pair of codes classifies the rows), and their mix. The default mix
# leans generative; lambda = 1 makes the mixed loss equal the generative
# one exactly.

l_g, l_d, l_gd = losses(cclm, labeled)
print(f"\ngenerative {l_g:.4f}  discriminative {l_d:.4f}  mixed {l_gd:.4f}")

l_g1, _, l_gd1 = losses(cclm, labeled, LossConfig(lambda_=1.0))
print(f"lambda=1 mixed loss equals generative loss: {l_gd1 == l_g1}")
