"""HTTP control service: generate, score and inspect sessions over JSON.

The service owns no decoding math. It holds a registry of trained models,
translates requests into calls on the core modules, embeds bag-of-words
attribute scores next to every candidate, and appends each generation to an
append-only session log whose digests make replay verifiable.
"""

import hashlib
import json
import os
import secrets
import threading
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

from .corpus import Vocabulary, content_ids, detokenize, tokenize
from .decoding import AttributeControl, GenerationConfig, generate
from .experiment import load_world
from .metrics import BowScorer
from .ngram import BaseLM, ClassConditionedLM
from .posterior import PosteriorConfig

ENV_PREFIX = "STEERGEN_"
LOG_FORMAT_VERSION = 1


class UnknownNameError(KeyError):
    """A request referenced a model or attribute the registry lacks."""


class RequestError(ValueError):
    """A request field failed validation; the message names the field."""


@dataclass(frozen=True)
class AttributeEntry:
    model: ClassConditionedLM
    scorer: BowScorer
    direction: str
    posterior_config: PosteriorConfig


class ModelRegistry:
    """Named base models and attribute models sharing one vocabulary."""

    def __init__(self, vocab: Vocabulary | None = None):
        self.vocab = vocab
        self.bases: dict[str, BaseLM] = {}
        self.attributes: dict[str, AttributeEntry] = {}

    def _check_vocab(self, name: str, vocab_hash: str) -> None:
        if self.vocab is None:
            raise ValueError("registry has no vocabulary; register one first")
        if vocab_hash != self.vocab.content_hash:
            raise ValueError(
                f"{name!r} was trained against a different vocabulary"
            )

    def register_base(self, name: str, model: BaseLM) -> None:
        if self.vocab is None:
            self.vocab = model.vocab
        self._check_vocab(name, model.vocab_hash)
        if name in self.bases or name in self.attributes:
            raise ValueError(f"duplicate model name {name!r}")
        self.bases[name] = model

    def register_attribute(
        self,
        name: str,
        model: ClassConditionedLM,
        scorer: BowScorer,
        direction: str = "toward-positive",
        posterior_config: PosteriorConfig = PosteriorConfig(),
    ) -> None:
        self._check_vocab(name, model.vocab_hash)
        self._check_vocab(f"{name} scorer", scorer.vocab_hash)
        if name in self.bases or name in self.attributes:
            raise ValueError(f"duplicate model name {name!r}")
        self.attributes[name] = AttributeEntry(model, scorer, direction, posterior_config)

    @classmethod
    def from_model_dir(cls, models_dir: str | Path) -> "ModelRegistry":
        """Build a registry from a models/ directory written by training."""
        world = load_world(models_dir)
        registry = cls(world.vocab)
        registry.register_base("base", world.base)
        for name in sorted(world.attribute_models):
            registry.register_attribute(
                name,
                world.attribute_models[name],
                world.scorers[name],
                world.directions[name],
                world.posterior_configs[name],
            )
        return registry

    def base(self, name: str) -> BaseLM:
        if name not in self.bases:
            raise UnknownNameError(f"unknown model {name!r}")
        return self.bases[name]

    def attribute(self, name: str) -> AttributeEntry:
        if name not in self.attributes:
            raise UnknownNameError(f"unknown attribute {name!r}")
        return self.attributes[name]

    def desired_score(self, name: str, ids: Sequence[int]) -> float:
        """Bag-of-words probability of the attribute's desired class."""
        entry = self.attribute(name)
        raw = entry.scorer.score(ids)
        return 1.0 - raw if entry.direction == "toward-negative" else raw

    def model_listing(self) -> list[dict]:
        """One entry per registered model, bases first."""
        listing = []
        for name in sorted(self.bases):
            model = self.bases[name]
            listing.append(
                {
                    "name": name,
                    "kind": "base",
                    "order": model.order,
                    "smoothing": model.smoothing.label(),
                    "context_window": model.context_window,
                }
            )
        for name in sorted(self.attributes):
            entry = self.attributes[name]
            listing.append(
                {
                    "name": name,
                    "kind": "attribute",
                    "order": entry.model.order,
                    "smoothing": entry.model.smoothing.label(),
                    "context_window": entry.model.context_window,
                    "direction": entry.direction,
                    "scorer_hash": entry.scorer.content_hash,
                }
            )
        return listing

    def presets(self) -> dict[str, dict[str, float]]:
        """Slider presets: every single attribute, one double, one triple.

        The triple puts 0.3 on polite and detox and 0.4 on the emotion
        attribute when those names are registered, falling back to the
        first names otherwise.
        """
        names = sorted(self.attributes)
        presets: dict[str, dict[str, float]] = {"none": {}}
        for name in names:
            presets[name] = {name: 1.0}
        if len(names) >= 2:
            presets["double"] = {names[0]: 0.5, names[1]: 0.5}
        if len(names) >= 3:
            if "polite" in names and "detox" in names:
                others = [n for n in names if n not in ("polite", "detox")]
                third = "emotion" if "emotion" in others else others[0]
                presets["triple"] = {"polite": 0.3, "detox": 0.3, third: 0.4}
            else:
                presets["triple"] = {names[0]: 0.3, names[1]: 0.3, names[2]: 0.4}
        return presets


class SessionLog:
    """Append-only JSONL record of every generation, one writer at a time.

    Sequence numbers stay monotonic across restarts because the constructor
    reloads whatever the file already holds.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._index: dict[str, dict] = {}
        self._seq = 0
        if self.path.exists():
            for line in self.path.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                record = json.loads(line)
                self._index[record["session_id"]] = record
                self._seq = max(self._seq, record["seq"])

    def append(self, kind: str, request: dict, response: dict, digests: list[str]) -> str:
        with self._lock:
            self._seq += 1
            session_id = f"s{self._seq:06d}"
            record = {
                "format_version": LOG_FORMAT_VERSION,
                "seq": self._seq,
                "session_id": session_id,
                "kind": kind,
                "request": request,
                "response": response,
                "digests": digests,
            }
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as handle:
                handle.write(json.dumps(record, sort_keys=True, separators=(",", ":")))
                handle.write("\n")
            self._index[session_id] = record
        return session_id

    def get(self, session_id: str) -> dict | None:
        with self._lock:
            return self._index.get(session_id)

    def __len__(self) -> int:
        with self._lock:
            return len(self._index)


def candidate_digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _validate_weights(registry: ModelRegistry, weights: dict) -> dict[str, float]:
    if not isinstance(weights, dict):
        raise RequestError("weights: must be an object of attribute name to number")
    clean: dict[str, float] = {}
    for name, omega in weights.items():
        if name not in registry.attributes:
            raise UnknownNameError(f"unknown attribute {name!r}")
        if not isinstance(omega, (int, float)) or isinstance(omega, bool):
            raise RequestError(f"weights: {name} must be a number")
        if omega < 0:
            raise RequestError(f"weights: {name} must be >= 0")
        clean[name] = float(omega)
    return clean


def run_generation(
    registry: ModelRegistry,
    prompt: str,
    weights: dict[str, float],
    seed: int,
    model: str = "base",
    num_samples: int | None = None,
    config: GenerationConfig | None = None,
) -> dict:
    """Decode candidates for one request; shared by the endpoint and replay."""
    base = registry.base(model)
    weights = _validate_weights(registry, weights)
    if not isinstance(prompt, str) or not prompt.strip():
        raise RequestError("prompt: must be a non-empty string")
    prompt_seq = tokenize(prompt, registry.vocab, role="prompt")
    if len(prompt_seq) == 0:
        raise RequestError("prompt: contains no recognizable tokens")
    if seed < 0:
        raise RequestError("seed: must be >= 0")
    config = config or GenerationConfig()
    overrides: dict = {"seed": int(seed)}
    if num_samples is not None:
        if not isinstance(num_samples, int) or num_samples < 1:
            raise RequestError("num_samples: must be a positive integer")
        overrides["num_samples"] = num_samples
    config = replace(config, **overrides)
    controls = [
        _control_for(registry, name, omega) for name, omega in sorted(weights.items())
    ]
    traces = generate(base, prompt_seq, controls, config)
    candidates = []
    for trace in traces:
        ids = content_ids(trace.tokens.ids)
        text = detokenize(trace.tokens.ids, registry.vocab)
        scored_ids = tokenize(text, registry.vocab).ids
        candidates.append(
            {
                "text": text,
                "tokens": list(ids),
                "terminated_by": trace.terminated_by,
                "mean_posteriors": trace.mean_posteriors(),
                "attribute_scores": {
                    name: registry.desired_score(name, scored_ids)
                    for name in sorted(registry.attributes)
                },
            }
        )
    return {
        "model": model,
        "prompt": prompt,
        "weights": weights,
        "seed": int(seed),
        "num_samples": config.num_samples,
        "candidates": candidates,
    }


def _control_for(registry: ModelRegistry, name: str, omega: float) -> AttributeControl:
    entry = registry.attribute(name)
    return AttributeControl(
        name=name,
        model=entry.model,
        posterior_config=entry.posterior_config,
        omega=omega,
        direction=entry.direction,
    )


def score_text(
    registry: ModelRegistry, text: str, attributes: Sequence[str] | None = None
) -> dict[str, float]:
    """Desired-class bag-of-words scores for a text.

    An empty text scores at each attribute's prior alone.
    """
    if not isinstance(text, str):
        raise RequestError("text: must be a string")
    names = list(attributes) if attributes is not None else sorted(registry.attributes)
    ids = tokenize(text, registry.vocab).ids if registry.vocab else ()
    return {name: registry.desired_score(name, ids) for name in names}


def replay_session_log(path: str | Path, registry: ModelRegistry) -> tuple[int, list[str]]:
    """Re-run every logged generation; returns (verified, mismatched ids)."""
    path = Path(path)
    verified = 0
    mismatched: list[str] = []
    if not path.exists():
        return 0, []
    for line in path.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        record = json.loads(line)
        if record.get("kind") != "generate":
            continue
        request = record["request"]
        response = run_generation(
            registry,
            prompt=request["prompt"],
            weights=request["weights"],
            seed=record["response"]["seed"],
            model=request.get("model", "base"),
            num_samples=request.get("num_samples"),
        )
        digests = [candidate_digest(c["text"]) for c in response["candidates"]]
        if digests == record["digests"]:
            verified += 1
        else:
            mismatched.append(record["session_id"])
    return verified, mismatched


@dataclass(frozen=True)
class ServiceConfig:
    """Service settings from one JSON file plus STEERGEN_ env overrides."""

    listen: str = "127.0.0.1:8571"
    model_dir: str = ""
    log_path: str = "sessions.jsonl"

    @classmethod
    def load(cls, path: str | Path | None = None, env: dict | None = None) -> "ServiceConfig":
        values = {"listen": cls.listen, "model_dir": cls.model_dir, "log_path": cls.log_path}
        if path is not None:
            obj = json.loads(Path(path).read_text(encoding="utf-8"))
            unknown = set(obj) - set(values)
            if unknown:
                raise RequestError(f"config: unknown keys {sorted(unknown)}")
            values.update({k: str(v) for k, v in obj.items()})
        env = os.environ if env is None else env
        for key in values:
            override = env.get(ENV_PREFIX + key.upper())
            if override is not None:
                values[key] = override
        return cls(**values)

    @property
    def host(self) -> str:
        return self.listen.rsplit(":", 1)[0]

    @property
    def port(self) -> int:
        return int(self.listen.rsplit(":", 1)[1])


def create_app(registry: ModelRegistry, log: SessionLog):
    """FastAPI application over a registry and session log."""
    from fastapi import FastAPI, HTTPException
    from pydantic import BaseModel, ConfigDict

    class GenerateRequest(BaseModel):
        model_config = ConfigDict(extra="forbid", protected_namespaces=())

        prompt: str
        model: str = "base"
        weights: dict[str, float] = {}
        seed: int | None = None
        num_samples: int | None = None

    class ScoreRequest(BaseModel):
        model_config = ConfigDict(extra="forbid")

        text: str
        attributes: list[str] | None = None

    app = FastAPI(title="steergen control service")

    def _http(exc: Exception):
        if isinstance(exc, UnknownNameError):
            # KeyError reprs its message; unwrap it.
            return HTTPException(status_code=404, detail=exc.args[0])
        if isinstance(exc, RequestError):
            return HTTPException(status_code=400, detail=str(exc))
        raise exc

    @app.get("/models")
    def models() -> dict:
        return {"models": registry.model_listing(), "presets": registry.presets()}

    @app.post("/generate")
    def generate_endpoint(request: GenerateRequest) -> dict:
        seed = request.seed if request.seed is not None else secrets.randbits(31)
        try:
            response = run_generation(
                registry,
                prompt=request.prompt,
                weights=request.weights,
                seed=seed,
                model=request.model,
                num_samples=request.num_samples,
            )
        except (UnknownNameError, RequestError) as exc:
            raise _http(exc)
        digests = [candidate_digest(c["text"]) for c in response["candidates"]]
        session_id = log.append(
            "generate",
            request.model_dump(),
            {"seed": response["seed"], "num_candidates": len(response["candidates"])},
            digests,
        )
        response["session_id"] = session_id
        return response

    @app.post("/score")
    def score_endpoint(request: ScoreRequest) -> dict:
        try:
            if request.attributes is not None:
                for name in request.attributes:
                    registry.attribute(name)
            scores = score_text(registry, request.text, request.attributes)
        except (UnknownNameError, RequestError) as exc:
            raise _http(exc)
        return {"text": request.text, "attribute_scores": scores}

    @app.get("/sessions/{session_id}")
    def session_endpoint(session_id: str) -> dict:
        record = log.get(session_id)
        if record is None:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id!r}")
        return record

    return app


def app_from_config(config: ServiceConfig):
    """Registry + log + app, wired from one config."""
    if not config.model_dir:
        raise RequestError("config: model_dir is required")
    registry = ModelRegistry.from_model_dir(config.model_dir)
    log = SessionLog(config.log_path)
    return create_app(registry, log)
