"""
Serving models over HTTP
========================

Train a world, mount it behind the HTTP service, and drive the full client
loop with nothing but the standard library: discover models, generate with
per-attribute weights, replay a session from its returned seed, and score
arbitrary text. The replay step is the service's determinism contract: the
same seed and weights must reproduce the same candidates, byte for byte.
"""

import json
import socket
import tempfile
import threading
import time
import urllib.request
from pathlib import Path

import uvicorn

from steergen.experiment import load_spec, run_train
from steergen.service import ModelRegistry, SessionLog, create_app
from steergen.synth import write_experiment_spec

############################################################################
# Train into a workspace, then build the registry straight from the models
# directory the training run wrote. The session log lives next to it.

workdir = Path(tempfile.mkdtemp(prefix="steergen-demo05-"))
spec = load_spec(
    write_experiment_spec(
        workdir,
        attribute_names=("polite", "calm"),
        n_pairs=240,
        n_attribute=200,
        seed=7,
        generation_overrides={"max_new_tokens": 20, "num_samples": 2},
    )
)
run_train(spec)

registry = ModelRegistry.from_model_dir(spec.out_dir / "models")
log = SessionLog(workdir / "sessions.jsonl")
app = create_app(registry, log)

############################################################################
# Serve on a free local port from a background thread. should_exit gives a
# clean shutdown once the demo is done.

with socket.socket() as probe:
    probe.bind(("127.0.0.1", 0))
    port = probe.getsockname()[1]

server = uvicorn.Server(uvicorn.Config(app, host="127.0.0.1", port=port, log_level="warning"))
thread = threading.Thread(target=server.run, daemon=True)
thread.start()
while not server.started:
    time.sleep(0.05)

base_url = f"http://127.0.0.1:{port}"


def get(path: str) -> dict:
    with urllib.request.urlopen(base_url + path) as response:
        return json.loads(response.read())


def post(path: str, payload: dict) -> dict:
    request = urllib.request.Request(
        base_url + path,
        data=json.dumps(payload).encode("utf-8"),
        headers={"Content-Type": "application/json"},
    )
    with urllib.request.urlopen(request) as response:
        return json.loads(response.read())


############################################################################
# Discovery: model names plus the preset weight maps a client can offer as
# one-click starting points.

listing = get("/models")
print("models: ", listing["models"])
print("presets:", listing["presets"])

############################################################################
# Generation. Omitting the seed lets the service draw one; the response
# echoes it so the session can be reproduced later.

first = post(
    "/generate",
    {"prompt": "please stay away from here", "weights": {"polite": 1.5, "calm": 0.5}, "num_samples": 2},
)
print(f"\nsession {first['session_id']} used seed {first['seed']}")
for cand in first["candidates"]:
    print(f"  {cand['attribute_scores']}  {cand['text']!r}")

############################################################################
# Replay: same prompt, same weights, and now the seed the service chose.
# The candidates must come back identical.

again = post(
    "/generate",
    {
        "prompt": "please stay away from here",
        "weights": {"polite": 1.5, "calm": 0.5},
        "num_samples": 2,
        "seed": first["seed"],
    },
)
texts_match = [c["text"] for c in first["candidates"]] == [c["text"] for c in again["candidates"]]
print(f"\nreplay with the returned seed reproduces every candidate: {texts_match}")

############################################################################
# The session log kept both requests; any session can be fetched back by
# id, digests included.

record = get(f"/sessions/{first['session_id']}")
print(f"logged request weights: {record['request']['weights']}")

############################################################################
# Scoring arbitrary text against every registered attribute, no generation
# involved.

scored = post("/score", {"text": "thank you so much, this is wonderful"})
print(f"\nscores for {scored['text']!r}: {scored['attribute_scores']}")

server.should_exit = True
thread.join(timeout=5)
print("server stopped")
