"""Corpus handling: tokenization, vocabularies, dataset loading, splitting.

The pipeline is word-level throughout: text is lowercased, segmented into
word and punctuation tokens, and mapped to dense integer ids against a
vocabulary whose first five slots are reserved for PAD, UNK, BOS, EOS and
SEP markers.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

PAD, UNK, BOS, EOS, SEP = range(5)
RESERVED_TOKENS = ("<pad>", "<unk>", "<bos>", "<eos>", "<sep>")
RESERVED_IDS = (PAD, UNK, BOS, EOS, SEP)
VOCAB_FORMAT_VERSION = 1

ROLES = ("prompt", "response", "free-text")

_TOKEN_RE = re.compile(r"[\w']+|[^\w\s]")
_NO_SPACE_BEFORE = set(".,!?;:)]}'\"")
_NO_SPACE_AFTER = set("([{")


class DataFormatError(ValueError):
    """A dataset or artifact file does not match its expected layout."""


@dataclass(frozen=True)
class TokenSequence:
    """Immutable id sequence plus the role it plays in a dialogue pair."""

    ids: tuple[int, ...]
    role: str = "free-text"

    def __post_init__(self) -> None:
        object.__setattr__(self, "ids", tuple(int(i) for i in self.ids))
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}, expected one of {ROLES}")

    def __len__(self) -> int:
        return len(self.ids)

    def __iter__(self) -> Iterator[int]:
        return iter(self.ids)


class Vocabulary:
    """Dense surface-token to id mapping with reserved ids 0..4."""

    def __init__(self, tokens: Sequence[str]):
        tokens = list(tokens)
        if tuple(tokens[:5]) != RESERVED_TOKENS:
            raise ValueError("vocabulary must start with the five reserved tokens")
        if len(set(tokens)) != len(tokens):
            raise ValueError("vocabulary contains duplicate tokens")
        self.tokens = tokens
        self._index = {tok: i for i, tok in enumerate(tokens)}

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._index

    def id_of(self, token: str) -> int:
        """Id of a surface token, UNK when out of vocabulary."""
        return self._index.get(token, UNK)

    def token_of(self, idx: int) -> str:
        return self.tokens[idx]

    def encode(self, surface: Iterable[str]) -> tuple[int, ...]:
        return tuple(self._index.get(tok, UNK) for tok in surface)

    def serialize(self) -> str:
        lines = [str(VOCAB_FORMAT_VERSION)]
        lines.extend(self.tokens)
        return "\n".join(lines) + "\n"

    @property
    def content_hash(self) -> str:
        return hashlib.sha256(self.serialize().encode("utf-8")).hexdigest()

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.serialize(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        if not lines:
            raise DataFormatError("vocabulary file is empty")
        try:
            version = int(lines[0])
        except ValueError:
            raise DataFormatError("vocabulary header is not a format-version integer")
        if version != VOCAB_FORMAT_VERSION:
            raise DataFormatError(
                f"unsupported vocabulary format version {version}, "
                f"expected {VOCAB_FORMAT_VERSION}"
            )
        return cls(lines[1:])


def tokenize(text: str, vocab: Vocabulary | None = None, role: str = "free-text"):
    """Lowercase and segment text into word/punctuation tokens.

    Without a vocabulary, returns the surface token list (the form consumed
    by build_vocab). With one, returns a TokenSequence where out-of-vocabulary
    tokens map to UNK.
    """
    surface = _TOKEN_RE.findall(text.lower())
    if vocab is None:
        return surface
    return TokenSequence(vocab.encode(surface), role)


def detokenize(ids: Iterable[int], vocab: Vocabulary) -> str:
    """Render ids back to text, dropping structural markers.

    PAD/BOS/EOS/SEP are omitted; UNK keeps its surface form. Punctuation is
    re-attached so a tokenize round trip differs from the source text only
    in case and whitespace.
    """
    parts = []
    for i in ids:
        if i in (PAD, BOS, EOS, SEP):
            continue
        parts.append(vocab.token_of(i))
    pieces: list[str] = []
    for pos, tok in enumerate(parts):
        if pos == 0:
            pieces.append(tok)
        elif tok in _NO_SPACE_BEFORE or parts[pos - 1] in _NO_SPACE_AFTER:
            pieces.append(tok)
        else:
            pieces.append(" " + tok)
    return "".join(pieces)


def content_ids(ids: Iterable[int]) -> tuple[int, ...]:
    """Ids with structural markers removed; UNK is kept as content."""
    return tuple(i for i in ids if i not in (PAD, BOS, EOS, SEP))


def build_vocab(corpus: Iterable[Sequence[str]], min_count: int | None = None) -> Vocabulary:
    """Build a vocabulary from surface-token sequences.

    Tokens appearing at least min_count times are kept, ordered by descending
    count then lexicographically, after the reserved block. min_count defaults
    to 1, or 2 once the corpus exceeds 10k sequences.
    """
    seqs = [list(s) for s in corpus]
    if min_count is None:
        min_count = 2 if len(seqs) > 10_000 else 1
    if min_count < 1:
        raise ValueError("min_count must be at least 1")
    counts: Counter[str] = Counter()
    for seq in seqs:
        counts.update(seq)
    for reserved in RESERVED_TOKENS:
        counts.pop(reserved, None)
    kept = sorted(
        (tok for tok, c in counts.items() if c >= min_count),
        key=lambda tok: (-counts[tok], tok),
    )
    return Vocabulary(list(RESERVED_TOKENS) + kept)


@dataclass(frozen=True)
class PairRecord:
    """One prompt/response training pair."""

    hate: TokenSequence
    counter: TokenSequence
    source_id: str = ""

    def __post_init__(self) -> None:
        if len(self.hate) == 0 or len(self.counter) == 0:
            raise ValueError("pair sequences must be non-empty")


@dataclass(frozen=True)
class AttributeRecord:
    """One labeled text for attribute-model training."""

    text: TokenSequence
    label: str

    def __post_init__(self) -> None:
        if self.label not in ("positive", "negative"):
            raise ValueError("label must be 'positive' or 'negative'")

    @property
    def positive(self) -> bool:
        return self.label == "positive"


def _iter_jsonl(path: str | Path) -> Iterator[tuple[int, dict]]:
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataFormatError(f"line {lineno}: malformed record: {exc.msg}")
        if not isinstance(obj, dict):
            raise DataFormatError(f"line {lineno}: record must be an object")
        yield lineno, obj


def _require_string(obj: dict, field: str, lineno: int) -> str:
    if field not in obj:
        raise DataFormatError(f"line {lineno}: missing {field}")
    value = obj[field]
    if not isinstance(value, str):
        raise DataFormatError(f"line {lineno}: {field} must be a string")
    return value


def load_pair_texts(path: str | Path) -> list[dict]:
    """Raw prompt/response strings, one dict per line, for vocabulary building."""
    out = []
    for lineno, obj in _iter_jsonl(path):
        hate = _require_string(obj, "hate_speech", lineno)
        counter = _require_string(obj, "counter_speech", lineno)
        out.append(
            {
                "hate_speech": hate,
                "counter_speech": counter,
                "id": str(obj.get("id", f"pair-{lineno}")),
                "lineno": lineno,
            }
        )
    return out


def load_pairs(path: str | Path, vocab: Vocabulary) -> list[PairRecord]:
    """Load line-delimited pair records, one PairRecord per input line."""
    records = []
    for raw in load_pair_texts(path):
        hate = tokenize(raw["hate_speech"], vocab, role="prompt")
        counter = tokenize(raw["counter_speech"], vocab, role="response")
        for field, seq in (("hate_speech", hate), ("counter_speech", counter)):
            if len(seq) == 0:
                raise DataFormatError(f"line {raw['lineno']}: empty {field}")
        records.append(PairRecord(hate, counter, raw["id"]))
    return records


def load_attribute_texts(path: str | Path) -> list[dict]:
    """Raw labeled strings for vocabulary building."""
    out = []
    for lineno, obj in _iter_jsonl(path):
        text = _require_string(obj, "text", lineno)
        label = _require_string(obj, "label", lineno)
        if label not in ("positive", "negative"):
            raise DataFormatError(
                f"line {lineno}: label must be 'positive' or 'negative'"
            )
        out.append({"text": text, "label": label, "lineno": lineno})
    return out


def load_attribute_records(path: str | Path, vocab: Vocabulary) -> list[AttributeRecord]:
    """Load line-delimited attribute records, one AttributeRecord per line."""
    return [
        AttributeRecord(tokenize(raw["text"], vocab), raw["label"])
        for raw in load_attribute_texts(path)
    ]


@dataclass(frozen=True)
class SplitSpec:
    """Three-way split fractions plus shuffling seed."""

    fractions: tuple[float, float, float] = (0.8, 0.1, 0.1)
    seed: int = 0
    stratified: bool = False

    def __post_init__(self) -> None:
        fractions = tuple(float(f) for f in self.fractions)
        if len(fractions) != 3 or any(not 0.0 < f < 1.0 for f in fractions):
            raise ValueError("fractions must be three values in (0, 1)")
        if abs(sum(fractions) - 1.0) > 1e-9:
            raise ValueError("fractions must sum to 1")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        object.__setattr__(self, "fractions", fractions)


def _largest_remainder_sizes(n: int, fractions: Sequence[float]) -> tuple[int, int, int]:
    targets = [f * n for f in fractions]
    sizes = [math.floor(t) for t in targets]
    order = sorted(range(3), key=lambda i: (-(targets[i] - sizes[i]), i))
    for i in order[: n - sum(sizes)]:
        sizes[i] += 1
    return tuple(sizes)  # type: ignore[return-value]


def split(records: Sequence, spec: SplitSpec) -> tuple[list, list, list]:
    """Deterministic (train, validation, test) partition.

    Sizes follow largest-remainder rounding of the fractions. Stratified
    splits apportion each label group independently, which keeps every
    split's positive ratio within one record of the global ratio.
    """
    records = list(records)
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    parts: tuple[list, list, list] = ([], [], [])

    def assign(indices: list[int]) -> None:
        perm = rng.permutation(len(indices))
        shuffled = [indices[j] for j in perm]
        sizes = _largest_remainder_sizes(len(indices), spec.fractions)
        offset = 0
        for part, size in zip(parts, sizes):
            part.extend(shuffled[offset : offset + size])
            offset += size

    if spec.stratified:
        groups: dict[str, list[int]] = {}
        for i, rec in enumerate(records):
            label = getattr(rec, "label", None)
            if label is None:
                raise ValueError("stratified split requires labeled records")
            groups.setdefault(label, []).append(i)
        for label in sorted(groups):
            assign(groups[label])
    else:
        assign(list(range(len(records))))
    return tuple([records[i] for i in part] for part in parts)  # type: ignore[return-value]
