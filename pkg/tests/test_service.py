"""HTTP service behavior: registry, endpoints, session log, replay."""

import concurrent.futures
import hashlib
import json

import pytest
from fastapi.testclient import TestClient

from steergen.corpus import AttributeRecord, build_vocab, tokenize
from steergen.metrics import train_bow_scorer
from steergen.ngram import train_base, train_cclm
from steergen.service import (
    ModelRegistry,
    RequestError,
    ServiceConfig,
    SessionLog,
    UnknownNameError,
    candidate_digest,
    create_app,
    replay_session_log,
    run_generation,
    score_text,
)

ATTRS = {
    "anger": (("furious bitter", "raging loud"), ("placid words", "serene words")),
    "calm": (("gentle steady", "soothing slow"), ("frantic rush", "jittery rush")),
    "detox": (("vile garbage", "nasty garbage"), ("decent talk", "kindly talk")),
    "emotion": (("moved deeply", "stirred deeply"), ("numb inside", "flat inside")),
    "joy": (("happy bright", "cheerful bright"), ("gloomy dull", "bleak dull")),
    "polite": (("please listen", "thanks friend"), ("shut it", "idiot noise")),
}
BASE_TEXTS = (
    "we can talk about this",
    "please stay gentle and happy",
    "words can be steady and bright",
    "let us listen to each other",
)


def build_registry() -> ModelRegistry:
    surfaces = [tokenize(t) for t in BASE_TEXTS]
    for pos, neg in ATTRS.values():
        surfaces.extend(tokenize(t) for t in pos + neg)
    vocab = build_vocab(surfaces)

    registry = ModelRegistry(vocab)
    registry.register_base("base", train_base(
        [tokenize(t, vocab).ids for t in BASE_TEXTS], vocab, order=3
    ))
    for name, (pos, neg) in ATTRS.items():
        labeled = [(tokenize(t, vocab), True) for t in pos]
        labeled += [(tokenize(t, vocab), False) for t in neg]
        records = [
            AttributeRecord(seq, "positive" if code else "negative")
            for seq, code in labeled
        ]
        registry.register_attribute(
            name,
            train_cclm(labeled, vocab, order=2),
            train_bow_scorer(records, vocab),
            direction="toward-negative" if name == "detox" else "toward-positive",
        )
    return registry


@pytest.fixture(scope="module")
def registry():
    return build_registry()


@pytest.fixture()
def service(registry, tmp_path):
    log = SessionLog(tmp_path / "sessions.jsonl")
    client = TestClient(create_app(registry, log))
    return client, log


class TestRegistry:
    def test_listing_has_one_base_and_six_attributes(self, registry):
        listing = registry.model_listing()
        assert len(listing) == 7
        assert listing[0]["kind"] == "base" and listing[0]["name"] == "base"
        assert "direction" not in listing[0]
        attrs = listing[1:]
        assert [e["name"] for e in attrs] == sorted(ATTRS)
        for entry in attrs:
            assert entry["kind"] == "attribute"
            assert entry["direction"] in ("toward-positive", "toward-negative")
            assert len(entry["scorer_hash"]) == 64
            assert entry["order"] == 2 and entry["smoothing"] == "add_k(0.1)"

    def test_preset_contract(self, registry):
        presets = registry.presets()
        assert presets["none"] == {}
        for name in ATTRS:
            assert presets[name] == {name: 1.0}
        assert presets["double"] == {"anger": 0.5, "calm": 0.5}
        assert presets["triple"] == {"polite": 0.3, "detox": 0.3, "emotion": 0.4}

    def test_presets_without_attributes(self, registry):
        bare = ModelRegistry(registry.vocab)
        assert bare.presets() == {"none": {}}
        assert bare.model_listing() == []

    def test_duplicate_names_rejected(self, registry):
        clone = build_registry()
        with pytest.raises(ValueError, match="duplicate"):
            clone.register_base("joy", clone.bases["base"])
        with pytest.raises(ValueError, match="duplicate"):
            clone.register_base("base", clone.bases["base"])

    def test_unknown_lookups_raise(self, registry):
        with pytest.raises(UnknownNameError, match="giant"):
            registry.base("giant")
        with pytest.raises(UnknownNameError, match="hope"):
            registry.attribute("hope")

    def test_detox_direction_flips_score(self, registry):
        ids = tokenize("vile garbage", registry.vocab).ids
        raw = registry.attribute("detox").scorer.score(ids)
        assert registry.desired_score("detox", ids) == 1.0 - raw
        assert registry.desired_score("detox", ids) < 0.5


class TestModelsEndpoint:
    def test_models_and_presets(self, service):
        client, _ = service
        body = client.get("/models").json()
        assert len(body["models"]) == 7
        assert body["presets"]["triple"] == {
            "polite": 0.3,
            "detox": 0.3,
            "emotion": 0.4,
        }


class TestGenerateEndpoint:
    payload = {
        "prompt": "we can talk",
        "weights": {"joy": 0.4, "polite": 0.3, "detox": 0.3},
        "seed": 11,
        "num_samples": 3,
    }

    def test_roundtrip_shape(self, service):
        client, _ = service
        res = client.post("/generate", json=self.payload)
        assert res.status_code == 200
        body = res.json()
        assert body["weights"] == self.payload["weights"]
        assert body["seed"] == 11 and body["num_samples"] == 3
        assert body["model"] == "base"
        assert body["session_id"].startswith("s")
        assert len(body["candidates"]) == 3
        for cand in body["candidates"]:
            assert isinstance(cand["text"], str)
            assert cand["terminated_by"] in ("EOS", "max_length")
            assert set(cand["attribute_scores"]) == set(ATTRS)
            assert set(cand["mean_posteriors"]) <= {"detox", "joy", "polite"}

    def test_default_num_samples_is_five(self, service):
        client, _ = service
        body = client.post(
            "/generate", json={"prompt": "we can talk", "seed": 0}
        ).json()
        assert body["num_samples"] == 5
        assert len(body["candidates"]) == 5

    def test_same_seed_same_candidates(self, service):
        client, _ = service
        first = client.post("/generate", json=self.payload).json()
        second = client.post("/generate", json=self.payload).json()
        assert first["candidates"] == second["candidates"]
        assert first["session_id"] != second["session_id"]

    def test_server_assigned_seed_is_replayable(self, service):
        client, _ = service
        body = {"prompt": "please stay gentle", "weights": {"calm": 1.0}}
        first = client.post("/generate", json=body).json()
        assert isinstance(first["seed"], int) and first["seed"] >= 0
        second = client.post("/generate", json={**body, "seed": first["seed"]}).json()
        assert [c["text"] for c in first["candidates"]] == [
            c["text"] for c in second["candidates"]
        ]

    def test_negative_weight_is_400_naming_the_attribute(self, service):
        client, _ = service
        res = client.post(
            "/generate", json={"prompt": "we can talk", "weights": {"joy": -1}}
        )
        assert res.status_code == 400
        assert "joy" in res.json()["detail"]

    def test_unknown_attribute_is_404(self, service):
        client, _ = service
        res = client.post(
            "/generate", json={"prompt": "we can talk", "weights": {"hope": 1.0}}
        )
        assert res.status_code == 404
        assert "hope" in res.json()["detail"]

    def test_unknown_model_is_404(self, service):
        client, _ = service
        res = client.post(
            "/generate", json={"prompt": "we can talk", "model": "giant"}
        )
        assert res.status_code == 404
        assert "giant" in res.json()["detail"]

    def test_blank_prompt_is_400(self, service):
        client, _ = service
        res = client.post("/generate", json={"prompt": "   "})
        assert res.status_code == 400
        assert "prompt" in res.json()["detail"]

    def test_bad_num_samples_is_400(self, service):
        client, _ = service
        res = client.post(
            "/generate", json={"prompt": "we can talk", "num_samples": 0}
        )
        assert res.status_code == 400
        assert "num_samples" in res.json()["detail"]

    def test_unknown_body_fields_rejected(self, service):
        client, _ = service
        res = client.post(
            "/generate", json={"prompt": "we can talk", "omega": 2.0}
        )
        assert res.status_code == 422


class TestRunGenerationValidation:
    def test_boolean_weight_rejected(self, registry):
        with pytest.raises(RequestError, match="joy must be a number"):
            run_generation(registry, "we can talk", {"joy": True}, seed=0)

    def test_weights_must_be_a_mapping(self, registry):
        with pytest.raises(RequestError, match="weights"):
            run_generation(registry, "we can talk", ["joy"], seed=0)

    def test_negative_seed_rejected(self, registry):
        with pytest.raises(RequestError, match="seed"):
            run_generation(registry, "we can talk", {}, seed=-1)


class TestScoreEndpoint:
    def test_reproduces_embedded_candidate_scores(self, service):
        client, _ = service
        gen = client.post(
            "/generate",
            json={"prompt": "we can talk", "weights": {"joy": 1.0}, "seed": 4,
                  "num_samples": 2},
        ).json()
        for cand in gen["candidates"]:
            scored = client.post("/score", json={"text": cand["text"]}).json()
            assert scored["attribute_scores"] == cand["attribute_scores"]

    def test_subset_of_attributes(self, service):
        client, _ = service
        body = client.post(
            "/score", json={"text": "happy bright words", "attributes": ["joy"]}
        ).json()
        assert list(body["attribute_scores"]) == ["joy"]
        assert body["attribute_scores"]["joy"] > 0.5

    def test_unknown_attribute_is_404(self, service):
        client, _ = service
        res = client.post(
            "/score", json={"text": "anything", "attributes": ["hope"]}
        )
        assert res.status_code == 404

    def test_empty_text_scores_the_prior(self, registry):
        scores = score_text(registry, "")
        assert set(scores) == set(ATTRS)
        assert scores == {
            name: registry.desired_score(name, ()) for name in ATTRS
        }


class TestSessions:
    def test_lookup_and_digests(self, service):
        client, _ = service
        gen = client.post(
            "/generate", json={"prompt": "we can talk", "seed": 2, "num_samples": 2}
        ).json()
        record = client.get(f"/sessions/{gen['session_id']}").json()
        assert record["kind"] == "generate"
        assert record["response"]["seed"] == 2
        assert record["digests"] == [
            hashlib.sha256(c["text"].encode("utf-8")).hexdigest()
            for c in gen["candidates"]
        ]

    def test_unknown_session_is_404(self, service):
        client, _ = service
        assert client.get("/sessions/s999999").status_code == 404


class TestSessionLog:
    def test_sequence_continues_across_restart(self, tmp_path):
        path = tmp_path / "log.jsonl"
        log = SessionLog(path)
        assert log.append("generate", {}, {}, []) == "s000001"
        assert log.append("generate", {}, {}, []) == "s000002"
        reopened = SessionLog(path)
        assert len(reopened) == 2
        assert reopened.append("generate", {}, {}, []) == "s000003"

    def test_concurrent_appends_stay_unique(self, tmp_path):
        log = SessionLog(tmp_path / "log.jsonl")
        with concurrent.futures.ThreadPoolExecutor(max_workers=8) as pool:
            ids = list(pool.map(lambda _: log.append("generate", {}, {}, []), range(32)))
        assert len(set(ids)) == 32
        lines = (tmp_path / "log.jsonl").read_text(encoding="utf-8").splitlines()
        assert len(lines) == 32
        assert sorted(json.loads(l)["seq"] for l in lines) == list(range(1, 33))


class TestReplay:
    def test_all_logged_generations_verify(self, service, registry, tmp_path):
        client, log = service
        client.post("/generate", json={"prompt": "we can talk", "seed": 5,
                                       "weights": {"polite": 1.0}, "num_samples": 2})
        client.post("/generate", json={"prompt": "please stay gentle",
                                       "num_samples": 2})
        verified, mismatched = replay_session_log(log.path, registry)
        assert verified == 2 and mismatched == []

    def test_missing_log_is_empty(self, registry, tmp_path):
        assert replay_session_log(tmp_path / "absent.jsonl", registry) == (0, [])

    def test_digest_is_sha256(self):
        assert candidate_digest("abc") == hashlib.sha256(b"abc").hexdigest()


class TestServiceConfig:
    def test_defaults(self):
        config = ServiceConfig.load(env={})
        assert config.listen == "127.0.0.1:8571"
        assert config.host == "127.0.0.1" and config.port == 8571

    def test_file_and_env_precedence(self, tmp_path):
        path = tmp_path / "service.json"
        path.write_text(
            json.dumps({"listen": "127.0.0.1:9321", "model_dir": "m"}),
            encoding="utf-8",
        )
        config = ServiceConfig.load(path, env={})
        assert config.port == 9321 and config.model_dir == "m"
        config = ServiceConfig.load(path, env={"STEERGEN_LISTEN": "0.0.0.0:1111"})
        assert config.listen == "0.0.0.0:1111"
        assert config.model_dir == "m"

    def test_unknown_keys_rejected(self, tmp_path):
        path = tmp_path / "service.json"
        path.write_text('{"listn": "x"}', encoding="utf-8")
        with pytest.raises(RequestError, match="listn"):
            ServiceConfig.load(path, env={})
