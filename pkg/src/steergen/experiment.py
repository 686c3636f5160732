"""End-to-end experiment pipelines: train, generate, evaluate, ablate.

One spec file drives a full experiment. Artifacts land in an output
directory split into models/, candidates/ and reports/, every file named by
a content hash so identical inputs produce identical artifacts and reruns
are byte-for-byte reproducible.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

from .corpus import (
    SEP,
    AttributeRecord,
    PairRecord,
    SplitSpec,
    TokenSequence,
    Vocabulary,
    build_vocab,
    content_ids,
    detokenize,
    load_attribute_texts,
    load_pair_texts,
    split,
    tokenize,
)
from .decoding import AttributeControl, GenerationConfig, generate
from .metrics import (
    BowScorer,
    MetricsReport,
    bleu2,
    classifier_metrics,
    diversity,
    format_metrics_table,
    novelty,
    train_bow_scorer,
)
from .ngram import (
    BaseLM,
    ClassConditionedLM,
    LossConfig,
    Smoothing,
    load_model,
    losses,
    perplexity_labeled,
    serialize_model,
    train_base,
    train_cclm,
)
from .posterior import PosteriorConfig, sequence_class_posterior

SPEC_SCHEMA_VERSION = 1
CANDIDATES_SCHEMA_VERSION = 1
DIRECTIONS = ("toward-positive", "toward-negative")


class SpecError(ValueError):
    """The experiment spec is malformed or references missing files."""


@dataclass(frozen=True)
class _TextRow:
    """Raw labeled text, before any vocabulary exists."""

    text: str
    label: str


@dataclass(frozen=True)
class AttributeSpec:
    name: str
    data: Path
    direction: str = "toward-positive"


@dataclass(frozen=True)
class ModelSpec:
    order: int = 3
    context_window: int = 128
    smoothing_grid: tuple[Smoothing, ...] = (Smoothing(),)


@dataclass(frozen=True)
class ExperimentSpec:
    """Everything one experiment needs, loaded from a single JSON file."""

    pairs: Path
    attributes: tuple[AttributeSpec, ...]
    split: SplitSpec
    base_model: ModelSpec
    attribute_model: ModelSpec
    loss: LossConfig
    control_sets: dict[str, dict[str, float]]
    generation: GenerationConfig
    out_dir: Path
    min_count: int | None = None

    def control_set(self, name: str) -> dict[str, float]:
        if name not in self.control_sets:
            available = ", ".join(sorted(self.control_sets))
            raise SpecError(f"unknown control set {name!r}; available: {available}")
        return dict(self.control_sets[name])


def _smoothing_grid(obj: dict) -> tuple[Smoothing, ...]:
    grid = obj.get("smoothing_grid")
    if not grid:
        return (Smoothing(),)
    return tuple(Smoothing.from_dict(entry) for entry in grid)


def load_spec(path: str | Path) -> ExperimentSpec:
    """Parse and validate an experiment spec file."""
    path = Path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise SpecError(f"spec file not found: {path}")
    except json.JSONDecodeError as exc:
        raise SpecError(f"spec file {path} is not valid JSON: {exc.msg}")
    if obj.get("schema_version") != SPEC_SCHEMA_VERSION:
        raise SpecError(f"spec schema_version must be {SPEC_SCHEMA_VERSION}")
    base_dir = path.parent

    def resolve(p: str) -> Path:
        candidate = Path(p)
        return candidate if candidate.is_absolute() else base_dir / candidate

    pairs = resolve(obj["pairs"])
    if not pairs.exists():
        raise SpecError(f"dataset not readable: {pairs}")
    attributes = []
    for name, attr in sorted(obj.get("attributes", {}).items()):
        data = resolve(attr["data"])
        if not data.exists():
            raise SpecError(f"dataset not readable: {data}")
        direction = attr.get("direction", "toward-positive")
        if direction not in DIRECTIONS:
            raise SpecError(f"attribute {name}: direction must be one of {DIRECTIONS}")
        attributes.append(AttributeSpec(name, data, direction))
    attribute_names = {a.name for a in attributes}
    split_obj = obj.get("split", {})
    split_spec = SplitSpec(
        tuple(split_obj.get("fractions", (0.8, 0.1, 0.1))),
        int(split_obj.get("seed", 0)),
        bool(split_obj.get("stratified", True)),
    )
    base_obj = obj.get("base_model", {})
    attr_obj = obj.get("attribute_model", {})
    base_spec = ModelSpec(
        int(base_obj.get("order", 3)),
        int(base_obj.get("context_window", 256)),
        _smoothing_grid(base_obj),
    )
    attr_spec = ModelSpec(
        int(attr_obj.get("order", 3)),
        int(attr_obj.get("context_window", 128)),
        _smoothing_grid(attr_obj),
    )
    loss = LossConfig(float(obj.get("loss", {}).get("lambda", 0.8)))
    control_sets: dict[str, dict[str, float]] = {}
    for name, weights in obj.get("control_sets", {}).items():
        control_sets[name] = {str(k): float(v) for k, v in weights.items()}
        for attr_name, omega in control_sets[name].items():
            if attr_name not in attribute_names:
                raise SpecError(
                    f"control set {name!r} references unknown attribute {attr_name!r}"
                )
            if omega < 0:
                raise SpecError(f"control set {name!r}: {attr_name} weight must be >= 0")
    try:
        generation = GenerationConfig(**obj.get("generation", {}))
    except (TypeError, ValueError) as exc:
        raise SpecError(f"generation config: {exc}")
    out_dir = resolve(obj.get("out_dir", "run"))
    min_count = obj.get("min_count")
    return ExperimentSpec(
        pairs=pairs,
        attributes=tuple(attributes),
        split=split_spec,
        base_model=base_spec,
        attribute_model=attr_spec,
        loss=loss,
        control_sets=control_sets,
        generation=generation,
        out_dir=out_dir,
        min_count=None if min_count is None else int(min_count),
    )


def _canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n"


def write_hashed(directory: Path, stem: str, suffix: str, text: str) -> Path:
    """Write text under a content-hashed filename; identical content reuses
    the existing file."""
    digest = hashlib.sha256(text.encode("utf-8")).hexdigest()[:12]
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"{stem}-{digest}{suffix}"
    if not path.exists():
        path.write_text(text, encoding="utf-8")
    return path


@dataclass
class TrainedWorld:
    """In-memory view of a trained experiment."""

    vocab: Vocabulary
    base: BaseLM
    attribute_models: dict[str, ClassConditionedLM]
    scorers: dict[str, BowScorer]
    posterior_configs: dict[str, PosteriorConfig]
    directions: dict[str, str]
    test_pairs: list[PairRecord]
    train_references: list[TokenSequence]
    generation: GenerationConfig
    manifest_path: Path | None = None

    def controls_for(self, weights: dict[str, float]) -> list[AttributeControl]:
        controls = []
        for name in sorted(weights):
            if name not in self.attribute_models:
                raise KeyError(f"unknown attribute {name!r}")
            controls.append(
                AttributeControl(
                    name=name,
                    model=self.attribute_models[name],
                    posterior_config=self.posterior_configs[name],
                    omega=weights[name],
                    direction=self.directions[name],
                )
            )
        return controls

    def desired_score(self, name: str, seq) -> float:
        """Bag-of-words probability of the attribute's desired class."""
        raw = self.scorers[name].score(seq)
        return 1.0 - raw if self.directions[name] == "toward-negative" else raw


def _pair_stream(pair: PairRecord) -> tuple[int, ...]:
    return tuple(pair.hate.ids) + (SEP,) + tuple(pair.counter.ids)


def run_train(spec: ExperimentSpec, out_dir: Path | None = None) -> TrainedWorld:
    """Train base and attribute models, select smoothing, persist artifacts.

    The vocabulary is built from training-split text only. Base-model
    selection minimizes the generative loss alone (there is no second code
    to discriminate against); attribute models minimize the mixed loss on
    the validation split. Bag-of-words scorers are fit on the held-out test
    split so they stay independent of the generation models.
    """
    out = Path(out_dir) if out_dir else spec.out_dir
    models_dir = out / "models"
    reports_dir = out / "reports"

    pair_texts = load_pair_texts(spec.pairs)
    pair_splits = split(pair_texts, SplitSpec(spec.split.fractions, spec.split.seed, False))
    attr_splits = {}
    for attr in spec.attributes:
        rows = [
            _TextRow(t["text"], t["label"]) for t in load_attribute_texts(attr.data)
        ]
        attr_splits[attr.name] = split(rows, spec.split)

    surfaces = []
    for pair in pair_splits[0]:
        surfaces.append(tokenize(pair["hate_speech"]))
        surfaces.append(tokenize(pair["counter_speech"]))
    for attr in spec.attributes:
        for row in attr_splits[attr.name][0]:
            surfaces.append(tokenize(row.text))
    vocab = build_vocab(surfaces, spec.min_count)

    def encode_pairs(rows) -> list[PairRecord]:
        return [
            PairRecord(
                tokenize(r["hate_speech"], vocab, "prompt"),
                tokenize(r["counter_speech"], vocab, "response"),
                r["id"],
            )
            for r in rows
        ]

    def encode_attrs(rows) -> list[AttributeRecord]:
        return [AttributeRecord(tokenize(r.text, vocab), r.label) for r in rows]

    train_pairs, val_pairs, test_pairs = (encode_pairs(s) for s in pair_splits)

    selection: dict = {
        "lambda": spec.loss.lambda_,
        "models": {"base": {"candidates": []}},
    }

    base_eval = [_pair_stream(p) for p in (val_pairs or train_pairs)]
    base_candidates = []
    for smoothing in spec.base_model.smoothing_grid:
        model = train_base(
            [_pair_stream(p) for p in train_pairs],
            vocab,
            spec.base_model.order,
            smoothing,
            spec.base_model.context_window,
        )
        l_g = float(
            sum(-model.sequence_logprob(ids) / len(ids) for ids in base_eval)
            / len(base_eval)
        )
        base_candidates.append((l_g, smoothing, model))
        selection["models"]["base"]["candidates"].append(
            {"smoothing": smoothing.label(), "l_g": l_g, "l_d": None, "l_gd": l_g}
        )
    _, base_smoothing, base = min(base_candidates, key=lambda c: c[0])
    selection["models"]["base"]["chosen"] = base_smoothing.label()

    attribute_models: dict[str, ClassConditionedLM] = {}
    scorers: dict[str, BowScorer] = {}
    posterior_configs: dict[str, PosteriorConfig] = {}
    directions: dict[str, str] = {}
    for attr in spec.attributes:
        train_rows, val_rows, test_rows = (encode_attrs(s) for s in attr_splits[attr.name])
        train_labeled = [(r.text, r.positive) for r in train_rows]
        val_labeled = [(r.text, r.positive) for r in val_rows] or train_labeled
        test_labeled = [(r.text, r.positive) for r in test_rows]
        prior_pos = sum(1 for _, code in train_labeled if code) / len(train_labeled)
        if not 0.0 < prior_pos < 1.0:
            prior_pos = 0.5
        posterior_config = PosteriorConfig(prior_pos=prior_pos)

        candidates = []
        entries = []
        for smoothing in spec.attribute_model.smoothing_grid:
            model = train_cclm(
                train_labeled,
                vocab,
                spec.attribute_model.order,
                smoothing,
                spec.attribute_model.context_window,
            )
            l_g, l_d, l_gd = losses(model, val_labeled, spec.loss, posterior_config)
            candidates.append((l_gd, smoothing, model))
            entries.append(
                {"smoothing": smoothing.label(), "l_g": l_g, "l_d": l_d, "l_gd": l_gd}
            )
        _, chosen_smoothing, chosen = min(candidates, key=lambda c: c[0])
        scores = [
            sequence_class_posterior(chosen, seq, posterior_config)
            for seq, _ in test_labeled
        ]
        labels = [code for _, code in test_labeled]
        clf = classifier_metrics(scores, labels)
        scorer = train_bow_scorer(test_rows, vocab)
        selection["models"][attr.name] = {
            "candidates": entries,
            "chosen": chosen_smoothing.label(),
            "prior_pos": prior_pos,
            "test_perplexity": perplexity_labeled(chosen, test_labeled),
            "test_classifier": list(clf),
            "scorer_hash": scorer.content_hash,
        }
        attribute_models[attr.name] = chosen
        scorers[attr.name] = scorer
        posterior_configs[attr.name] = posterior_config
        directions[attr.name] = attr.direction

    vocab_path = write_hashed(models_dir, "vocab", ".txt", vocab.serialize())
    base_path = write_hashed(models_dir, "base", ".json", serialize_model(base))
    train_references = [p.counter for p in train_pairs]
    refs_payload = _canonical_json(
        {"schema_version": 1, "references": [list(r.ids) for r in train_references]}
    )
    refs_path = write_hashed(models_dir, "train-refs", ".json", refs_payload)
    splits_payload = _canonical_json(
        {"schema_version": 1, "pairs_test": [p.source_id for p in test_pairs]}
    )
    splits_path = write_hashed(models_dir, "splits", ".json", splits_payload)

    manifest = {
        "schema_version": 1,
        "vocab_file": vocab_path.name,
        "vocab_hash": vocab.content_hash,
        "base_models": {
            "base": {
                "file": base_path.name,
                "order": spec.base_model.order,
                "smoothing": base_smoothing.label(),
                "corpus_id": spec.pairs.name,
            }
        },
        "attributes": {},
        "references_file": refs_path.name,
        "splits_file": splits_path.name,
        "generation": _config_dict(spec.generation),
    }
    for attr in spec.attributes:
        model_path = write_hashed(
            models_dir,
            f"attr-{attr.name}",
            ".json",
            serialize_model(attribute_models[attr.name]),
        )
        scorer_path = write_hashed(
            models_dir, f"scorer-{attr.name}", ".json", scorers[attr.name].serialize()
        )
        manifest["attributes"][attr.name] = {
            "model_file": model_path.name,
            "scorer_file": scorer_path.name,
            "direction": attr.direction,
            "prior_pos": posterior_configs[attr.name].prior_pos,
            "alpha": posterior_configs[attr.name].alpha,
            "order": spec.attribute_model.order,
            "smoothing": selection["models"][attr.name]["chosen"],
            "corpus_id": attr.data.name,
        }
    manifest_path = models_dir / "manifest.json"
    manifest_path.write_text(_canonical_json(manifest), encoding="utf-8")
    write_hashed(reports_dir, "train-selection", ".json", _canonical_json(selection))
    (reports_dir / "train-selection.json").write_text(
        _canonical_json(selection), encoding="utf-8"
    )

    return TrainedWorld(
        vocab=vocab,
        base=base,
        attribute_models=attribute_models,
        scorers=scorers,
        posterior_configs=posterior_configs,
        directions=directions,
        test_pairs=test_pairs,
        train_references=train_references,
        generation=spec.generation,
        manifest_path=manifest_path,
    )


def load_world(models_dir: str | Path) -> TrainedWorld:
    """Rehydrate a TrainedWorld from a models/ directory written by run_train."""
    models_dir = Path(models_dir)
    manifest_path = models_dir / "manifest.json"
    if not manifest_path.exists():
        raise SpecError(f"no manifest.json under {models_dir}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    vocab = Vocabulary.load(models_dir / manifest["vocab_file"])
    base = load_model(models_dir / manifest["base_models"]["base"]["file"], vocab)
    attribute_models = {}
    scorers = {}
    posterior_configs = {}
    directions = {}
    for name, attr in manifest["attributes"].items():
        attribute_models[name] = load_model(models_dir / attr["model_file"], vocab)
        scorers[name] = BowScorer.load(models_dir / attr["scorer_file"])
        posterior_configs[name] = PosteriorConfig(attr["alpha"], attr["prior_pos"])
        directions[name] = attr["direction"]
    refs_obj = json.loads(
        (models_dir / manifest["references_file"]).read_text(encoding="utf-8")
    )
    references = [TokenSequence(tuple(ids), "response") for ids in refs_obj["references"]]
    generation = GenerationConfig(**manifest["generation"])
    return TrainedWorld(
        vocab=vocab,
        base=base,
        attribute_models=attribute_models,
        scorers=scorers,
        posterior_configs=posterior_configs,
        directions=directions,
        test_pairs=[],
        train_references=references,
        generation=generation,
        manifest_path=manifest_path,
    )


def _config_dict(config: GenerationConfig) -> dict:
    return {
        "max_new_tokens": config.max_new_tokens,
        "warmup_tokens": config.warmup_tokens,
        "no_repeat_ngram": config.no_repeat_ngram,
        "repetition_penalty": config.repetition_penalty,
        "temperature": config.temperature,
        "top_k": config.top_k,
        "nucleus_p": config.nucleus_p,
        "num_samples": config.num_samples,
        "seed": config.seed,
    }


def _world_test_pairs(spec: ExperimentSpec, world: TrainedWorld) -> list[PairRecord]:
    """Test-split prompt/reference pairs, recomputed deterministically when
    the world was loaded from disk rather than trained in-process."""
    if world.test_pairs:
        return world.test_pairs
    pair_texts = load_pair_texts(spec.pairs)
    splits = split(pair_texts, SplitSpec(spec.split.fractions, spec.split.seed, False))
    return [
        PairRecord(
            tokenize(r["hate_speech"], world.vocab, "prompt"),
            tokenize(r["counter_speech"], world.vocab, "response"),
            r["id"],
        )
        for r in splits[2]
    ]


def run_generate(
    spec: ExperimentSpec,
    control_set: str,
    world: TrainedWorld | None = None,
    seed: int | None = None,
    out_dir: Path | None = None,
) -> Path:
    """Generate candidates for every test prompt under one control set.

    Returns the content-hashed candidates file. Its first line is a header
    record; each following line carries one prompt, its reference, and the
    sampled candidates with compact per-step audit summaries.
    """
    out = Path(out_dir) if out_dir else spec.out_dir
    if world is None:
        world = load_world(out / "models")
    weights = spec.control_set(control_set)
    controls = world.controls_for(weights)
    config = world.generation if seed is None else replace(world.generation, seed=seed)
    test_pairs = _world_test_pairs(spec, world)
    if not test_pairs:
        raise SpecError("no test prompts available; is the pair dataset too small?")

    header = {
        "schema_version": CANDIDATES_SCHEMA_VERSION,
        "kind": "candidates",
        "control_set": control_set,
        "weights": weights,
        "seed": config.seed,
        "num_samples": config.num_samples,
        "scorer_hashes": {
            name: world.scorers[name].content_hash for name in sorted(world.scorers)
        },
        "vocab_hash": world.vocab.content_hash,
    }
    lines = [_canonical_json(header).rstrip("\n")]
    for pair in test_pairs:
        traces = generate(world.base, pair.hate, controls, config)
        candidates = []
        for trace in traces:
            ids = content_ids(trace.tokens.ids)
            candidates.append(
                {
                    "ids": list(ids),
                    "text": detokenize(trace.tokens.ids, world.vocab),
                    "terminated_by": trace.terminated_by,
                    "mean_posteriors": trace.mean_posteriors(),
                    "steps": [s.summary() for s in trace.steps],
                }
            )
        lines.append(
            _canonical_json(
                {
                    "prompt_id": pair.source_id,
                    "prompt_ids": list(pair.hate.ids),
                    "prompt_text": detokenize(pair.hate.ids, world.vocab),
                    "reference_ids": list(pair.counter.ids),
                    "reference_text": detokenize(pair.counter.ids, world.vocab),
                    "candidates": candidates,
                }
            ).rstrip("\n")
        )
    payload = "\n".join(lines) + "\n"
    return write_hashed(out / "candidates", f"cands-{control_set}", ".jsonl", payload)


def read_candidates(path: str | Path) -> tuple[dict, list[dict]]:
    """(header, prompt records) from a candidates file."""
    path = Path(path)
    if not path.exists():
        raise SpecError(f"candidate file not found: {path}")
    lines = path.read_text(encoding="utf-8").splitlines()
    rows = [json.loads(line) for line in lines if line.strip()]
    if not rows:
        raise SpecError(f"empty candidate file: {path}")
    if rows[0].get("kind") != "candidates":
        raise SpecError(f"not a candidates file: {path}")
    header, records = rows[0], rows[1:]
    if not records:
        raise SpecError(f"empty candidate file: {path}")
    return header, records


def evaluate_candidates(world: TrainedWorld, path: str | Path) -> MetricsReport:
    """Metric values for one candidates file.

    Overlap with references scores each candidate against its prompt's
    single gold response; a file whose records carry no references reports
    an explicit null instead. Diversity is computed within each prompt's
    sample group and averaged; novelty compares against the training
    responses. Perplexity conditions the base LM on each prompt.
    """
    _, records = read_candidates(path)
    hypotheses: list[tuple[int, ...]] = []
    references: list[tuple[int, ...]] = []
    per_prompt: list[list[tuple[int, ...]]] = []
    have_refs = True
    total_logprob = 0.0
    total_tokens = 0
    for record in records:
        prompt_ids = tuple(record["prompt_ids"])
        group = []
        for cand in record["candidates"]:
            ids = tuple(cand["ids"])
            hypotheses.append(ids)
            group.append(ids)
            if record.get("reference_ids") is None:
                have_refs = False
            else:
                references.append(tuple(record["reference_ids"]))
            total_logprob += world.base.sequence_logprob(ids, given=prompt_ids + (SEP,))
            total_tokens += len(ids)
        per_prompt.append(group)

    bleu = bleu2(hypotheses, references) if have_refs and references else None
    if all(len(group) >= 2 for group in per_prompt):
        div = float(sum(diversity(g) for g in per_prompt) / len(per_prompt))
    elif len(hypotheses) >= 2:
        div = diversity(hypotheses)
    else:
        div = None
    nov = novelty(hypotheses, world.train_references) if world.train_references else None
    ppl = math.exp(-total_logprob / total_tokens) if total_tokens else None
    attribute_scores = {
        name: float(
            sum(world.desired_score(name, ids) for ids in hypotheses) / len(hypotheses)
        )
        for name in sorted(world.scorers)
    }
    return MetricsReport(
        bleu2=bleu,
        diversity=div,
        novelty=nov,
        perplexity=ppl,
        attribute_scores=attribute_scores,
    )


def run_eval(
    spec: ExperimentSpec,
    candidate_files: Sequence[str | Path],
    world: TrainedWorld | None = None,
    out_dir: Path | None = None,
) -> Path:
    """Evaluate candidate files into one report plus a readable table."""
    out = Path(out_dir) if out_dir else spec.out_dir
    if world is None:
        world = load_world(out / "models")
    if not candidate_files:
        raise SpecError("no candidate files given")
    reports_dir = out / "reports"
    reports: dict[str, MetricsReport] = {}
    payload_sets = {}
    for path in candidate_files:
        header, _ = read_candidates(path)
        name = header["control_set"]
        report = evaluate_candidates(world, path)
        reports[name] = report
        payload_sets[name] = {
            "metrics": report.to_dict(),
            "weights": header["weights"],
            "seed": header["seed"],
            "scorer_hashes": header["scorer_hashes"],
            "candidates_file": Path(path).name,
        }
    table = format_metrics_table(reports)
    payload = _canonical_json(
        {"schema_version": 1, "kind": "metrics", "control_sets": payload_sets}
    )
    report_path = write_hashed(reports_dir, "metrics", ".json", payload)
    (reports_dir / "metrics-table.txt").write_text(table, encoding="utf-8")
    return report_path


def run_ablate(
    spec: ExperimentSpec,
    control_set: str,
    world: TrainedWorld | None = None,
    seed: int | None = None,
    out_dir: Path | None = None,
) -> Path:
    """Leave-one-out ablation of a three-attribute control set.

    Each attribute is dropped in turn while the other two keep their
    original weights; the regenerated candidates are then scored on the
    dropped attribute, next to the full set's score on it.
    """
    out = Path(out_dir) if out_dir else spec.out_dir
    if world is None:
        world = load_world(out / "models")
    weights = spec.control_set(control_set)
    if len(weights) != 3:
        raise SpecError(
            f"ablation needs a three-attribute control set; "
            f"{control_set!r} has {len(weights)}"
        )
    full_path = run_generate(spec, control_set, world=world, seed=seed, out_dir=out)
    _, full_records = read_candidates(full_path)
    rows = []
    spec_sets = dict(spec.control_sets)
    for dropped in weights:
        remaining = {k: v for k, v in weights.items() if k != dropped}
        pair_name = "+".join(remaining)
        subset_name = f"{control_set}-drop-{dropped}"
        spec_sets[subset_name] = remaining
        subset_spec = replace(spec, control_sets=spec_sets)
        subset_path = run_generate(
            subset_spec, subset_name, world=world, seed=seed, out_dir=out
        )
        _, subset_records = read_candidates(subset_path)
        rows.append(
            {
                "pair": pair_name,
                "dropped": dropped,
                "dropped_score": _mean_attribute_score(world, subset_records, dropped),
                "full_score": _mean_attribute_score(world, full_records, dropped),
                "scorer_hash": world.scorers[dropped].content_hash,
                "candidates_file": subset_path.name,
            }
        )
    payload = _canonical_json(
        {
            "schema_version": 1,
            "kind": "ablation",
            "control_set": control_set,
            "weights": weights,
            "rows": rows,
        }
    )
    reports_dir = out / "reports"
    report_path = write_hashed(reports_dir, f"ablation-{control_set}", ".json", payload)
    lines = [
        f"ablation of {control_set}",
        "",
        f"{'pair':24}  {'dropped':10}  {'score':>8}  {'full':>8}",
    ]
    for row in rows:
        lines.append(
            f"{row['pair']:24}  {row['dropped']:10}  "
            f"{row['dropped_score']:8.3f}  {row['full_score']:8.3f}"
        )
    (reports_dir / f"ablation-{control_set}.txt").write_text(
        "\n".join(lines) + "\n", encoding="utf-8"
    )
    return report_path


def _mean_attribute_score(world: TrainedWorld, records: list[dict], name: str) -> float:
    scores = [
        world.desired_score(name, tuple(cand["ids"]))
        for record in records
        for cand in record["candidates"]
    ]
    return float(sum(scores) / len(scores))
