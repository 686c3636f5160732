"""
Evaluation metrics from the ground up
=====================================

The quality side of the package: n-gram overlap with references, set-based
diversity and novelty, and the bag-of-words attribute scorer with its
classifier summary. All of them operate on token ids, so tiny hand-built
sequences are enough to see the definitions at work.
"""

import tempfile
from pathlib import Path

from steergen.corpus import build_vocab, load_attribute_records, load_attribute_texts, tokenize
from steergen.metrics import (
    bleu2,
    classifier_metrics,
    diversity,
    jaccard,
    novelty,
    train_bow_scorer,
)
from steergen.synth import write_attribute_dataset

############################################################################
# Bigram overlap against references. A hypothesis identical to its
# reference scores 100; one sharing no bigrams scores 0; partial overlap
# lands in between. Scores aggregate over the whole batch, not per pair.

ref = [(5, 6, 7, 8)]
print("bleu2 identical:   ", bleu2([(5, 6, 7, 8)], ref))
print("bleu2 no bigrams:  ", bleu2([(8, 6, 5, 7)], ref))
print("bleu2 half overlap:", bleu2([(5, 6, 9, 10)], ref))

############################################################################
# Jaccard similarity compares token sets, so order and repetition do not
# matter. Diversity is the complement of the mean pairwise similarity in a
# batch; novelty is the complement of each sentence's best match against a
# training corpus.

a, b = (5, 6, 7), (6, 7, 8)
print(f"\njaccard {a} vs {b}: {jaccard(a, b):.4f}")

batch = [(5, 6), (5, 6), (7, 8)]
print(f"diversity of {batch}: {diversity(batch):.4f}")

corpus = [(5, 6, 7), (8, 9)]
print(f"novelty of {batch} against {corpus}: {novelty(batch, corpus):.4f}")

############################################################################
# Classifier quality for attribute scorers: macro F1 and accuracy at the
# 0.5 threshold, plus a threshold-free AUROC.

scores = [0.9, 0.8, 0.4, 0.3]
labels = [True, False, True, False]
macro_f1, accuracy, auroc = classifier_metrics(scores, labels)
print(f"\nmacro_f1 {macro_f1:.3f}  accuracy {accuracy:.3f}  auroc {auroc:.3f}")

############################################################################
# The bag-of-words scorer fits one add-1 smoothed log-odds weight per
# token. Trained on half a labeled corpus and applied to the other half,
# it separates the classes cleanly on this synthetic data.

workdir = Path(tempfile.mkdtemp(prefix="steergen-demo03-"))
data_path = write_attribute_dataset(workdir / "joy.jsonl", "joy", n=200, seed=5)
texts = load_attribute_texts(data_path)
vocab = build_vocab(tokenize(row["text"]) for row in texts)
records = load_attribute_records(data_path, vocab)

train, held_out = records[:100], records[100:]
scorer = train_bow_scorer(train, vocab)

held_scores = [scorer.score(rec.text) for rec in held_out]
held_labels = [rec.positive for rec in held_out]
macro_f1, accuracy, auroc = classifier_metrics(held_scores, held_labels)
print(f"held-out: macro_f1 {macro_f1:.3f}  accuracy {accuracy:.3f}  auroc {auroc:.3f}")

print("\nsample held-out scores:")
for rec in held_out[:4]:
    print(f"  [{'positive' if rec.positive else 'negative':8}] {scorer.score(rec.text):.3f}")
