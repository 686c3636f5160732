"""Train a small three-attribute world and serve it for the console tests.

Prints PORT=<n> once the app is constructed, then serves until killed.
"""

import socket
import sys
import tempfile
from pathlib import Path

import uvicorn

from steergen.experiment import load_spec, run_train
from steergen.service import ModelRegistry, SessionLog, create_app
from steergen.synth import write_experiment_spec


def main() -> int:
    workdir = Path(tempfile.mkdtemp(prefix="steergen-console-"))
    spec = load_spec(
        write_experiment_spec(
            workdir,
            attribute_names=("joy", "polite", "detox"),
            n_pairs=160,
            n_attribute=120,
            seed=7,
        )
    )
    run_train(spec)
    registry = ModelRegistry.from_model_dir(spec.out_dir / "models")
    app = create_app(registry, SessionLog(workdir / "sessions.jsonl"))
    with socket.socket() as probe:
        probe.bind(("127.0.0.1", 0))
        port = probe.getsockname()[1]
    print(f"PORT={port}", flush=True)
    uvicorn.run(app, host="127.0.0.1", port=port, log_level="warning")
    return 0


if __name__ == "__main__":
    sys.exit(main())
