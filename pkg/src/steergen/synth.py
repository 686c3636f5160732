"""Synthetic desk-scale corpora for demos and tests.

Generates prompt/response pair data plus labeled attribute corpora whose
vocabularies partially overlap through a shared pool of neutral words. The
response side of the pair corpus sprinkles in attribute-flavored words at
low rates, so an uncontrolled base model can reach them but rarely does;
steering then has visible room to move the bag-of-words scores.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

NEUTRAL = (
    "we all people can talk about ideas here and the a to with share your "
    "view every one voice matters this that online still words point other "
    "group is are be not do have see think know way day"
).split()

PROMPT_ONLY = (
    "those awful terrible useless idiots liars clowns trolls them they "
    "always never worst stupid nonsense rubbish"
).split()

ATTRIBUTE_POOLS: dict[str, tuple[list[str], list[str]]] = {
    # name: (positive-class pool, negative-class pool)
    "polite": (
        "please thank kindly respect appreciate welcome grateful gently "
        "pardon courtesy".split(),
        "shut dumb whatever loser pathetic quit".split(),
    ),
    "joy": (
        "joy happy hope smile wonderful bright fun cheerful delight "
        "sunshine".split(),
        "sad gloomy cry dark worry dread misery".split(),
    ),
    "calm": (
        "calm peaceful gentle steady quiet soothing patient serene "
        "easy relaxed".split(),
        "furious rage yelling explosive frantic hostile".split(),
    ),
    # toxicity: the POSITIVE class is toxic; steering runs toward-negative.
    "detox": (
        "filth scum garbage disgusting hateful vile rotten nasty".split(),
        "fair kind decent humane respectful thoughtful".split(),
    ),
    "anger": (
        "angry furious outraged mad seething boiling irate".split(),
        "content mellow pleased fine settled tranquil".split(),
    ),
    "sadness": (
        "sad sorrow grief tears mourning heavyhearted weeping".split(),
        "upbeat merry lively buoyant chipper elated".split(),
    ),
    # generic emotion discriminator, used by the triple preset's 0.4 slot
    "emotion": (
        "moved stirred thrilled touched excited passionate heartfelt "
        "glowing".split(),
        "flat numb indifferent detached bored listless".split(),
    ),
}

ATTRIBUTE_DIRECTIONS = {name: "toward-positive" for name in ATTRIBUTE_POOLS}
ATTRIBUTE_DIRECTIONS["detox"] = "toward-negative"


def _sentence(rng: np.random.Generator, pools: list[tuple[list[str], float]], length: int) -> str:
    words = []
    names = list(range(len(pools)))
    weights = np.array([w for _, w in pools], dtype=float)
    weights = weights / weights.sum()
    for _ in range(length):
        pool = pools[rng.choice(names, p=weights)][0]
        words.append(pool[rng.integers(len(pool))])
    return " ".join(words)


def write_pair_dataset(
    path: str | Path,
    n: int = 400,
    seed: int = 7,
    attribute_names: tuple[str, ...] = ("polite", "joy", "calm"),
    flavor_rate: float = 0.18,
) -> Path:
    """Prompt/response pairs; responses lean neutral with flavored sprinkles.

    For toward-negative attributes the response pool is the attribute's
    negative class, so the base corpus leans the way steering should push.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    flavor_pools = []
    for name in attribute_names:
        positive, negative = ATTRIBUTE_POOLS[name]
        desired = negative if ATTRIBUTE_DIRECTIONS[name] == "toward-negative" else positive
        flavor_pools.append((desired, flavor_rate / len(attribute_names)))
    response_pools = [(NEUTRAL, 1.0 - flavor_rate)] + flavor_pools
    lines = []
    for i in range(n):
        prompt = _sentence(
            rng, [(PROMPT_ONLY, 0.55), (NEUTRAL, 0.45)], int(rng.integers(4, 9))
        )
        response = _sentence(rng, response_pools, int(rng.integers(7, 14)))
        lines.append(
            json.dumps(
                {"hate_speech": prompt, "counter_speech": response, "id": f"p{i:04d}"},
                sort_keys=True,
            )
        )
    path = Path(path)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def write_attribute_dataset(
    path: str | Path, name: str, n: int = 300, seed: int = 11, purity: float = 0.7
) -> Path:
    """Labeled texts: each class mixes its own pool with shared neutral words.

    Every row has the same length, so any class-balanced subset carries
    exactly balanced token totals and add-one log-odds stay centered: words
    outside the corpus weigh zero instead of picking up a length-imbalance
    bias that would bleed across attributes.
    """
    positive_pool, negative_pool = ATTRIBUTE_POOLS[name]
    rng = np.random.Generator(np.random.PCG64([seed, n]))
    lines = []
    for i in range(n):
        positive = i % 2 == 0
        pool = positive_pool if positive else negative_pool
        text = _sentence(rng, [(pool, purity), (NEUTRAL, 1.0 - purity)], 8)
        lines.append(
            json.dumps(
                {"text": text, "label": "positive" if positive else "negative"},
                sort_keys=True,
            )
        )
    path = Path(path)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def write_experiment_spec(
    workdir: str | Path,
    attribute_names: tuple[str, ...] = ("polite", "joy", "calm"),
    n_pairs: int = 400,
    n_attribute: int = 300,
    seed: int = 7,
    generation_overrides: dict | None = None,
    smoothing_grid: list[dict] | None = None,
) -> Path:
    """Write data files plus a ready-to-run experiment spec; returns its path."""
    workdir = Path(workdir)
    data_dir = workdir / "data"
    data_dir.mkdir(parents=True, exist_ok=True)
    write_pair_dataset(
        data_dir / "pairs.jsonl", n=n_pairs, seed=seed, attribute_names=attribute_names
    )
    attributes = {}
    for offset, name in enumerate(attribute_names):
        write_attribute_dataset(
            data_dir / f"{name}.jsonl", name, n=n_attribute, seed=seed + 13 * (offset + 1)
        )
        attributes[name] = {
            "data": str(data_dir / f"{name}.jsonl"),
            "direction": ATTRIBUTE_DIRECTIONS[name],
        }
    generation = {"seed": seed}
    generation.update(generation_overrides or {})
    control_sets: dict[str, dict[str, float]] = {"none": {}}
    for name in attribute_names:
        control_sets[name] = {name: 1.0}
    if len(attribute_names) >= 2:
        first, second = attribute_names[0], attribute_names[1]
        control_sets[f"{first}+{second}"] = {first: 0.5, second: 0.5}
    if len(attribute_names) >= 3:
        a, b, c = attribute_names[0], attribute_names[1], attribute_names[2]
        control_sets[f"{a}+{b}+{c}"] = {a: 0.3, b: 0.3, c: 0.4}
    spec = {
        "schema_version": 1,
        "pairs": str(data_dir / "pairs.jsonl"),
        "attributes": attributes,
        "split": {"fractions": [0.8, 0.1, 0.1], "seed": seed, "stratified": True},
        "base_model": {
            "order": 3,
            "context_window": 256,
            "smoothing_grid": smoothing_grid
            or [
                {"kind": "add_k", "k": 0.1},
                {"kind": "add_k", "k": 0.5},
                {"kind": "backoff", "discount": 0.75},
            ],
        },
        "attribute_model": {
            "order": 3,
            "context_window": 128,
            "smoothing_grid": smoothing_grid
            or [
                {"kind": "add_k", "k": 0.1},
                {"kind": "add_k", "k": 0.5},
                {"kind": "backoff", "discount": 0.75},
            ],
        },
        "loss": {"lambda": 0.8},
        "min_count": 1,
        "control_sets": control_sets,
        "generation": generation,
        "out_dir": str(workdir / "run"),
    }
    spec_path = workdir / "experiment.json"
    spec_path.write_text(json.dumps(spec, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return spec_path
