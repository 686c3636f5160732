"""Command line front end: train, generate, eval, ablate, serve.

Every failure is reported as a single machine-parsable stderr line of the
form "error: <kind>: <message>". Validation problems exit 2, runtime
problems exit 1.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .corpus import DataFormatError
from .experiment import (
    SpecError,
    load_spec,
    run_ablate,
    run_eval,
    run_generate,
    run_train,
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="steergen",
        description="attribute-guided text generation experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--spec", required=True, type=Path, help="experiment spec file")
        p.add_argument(
            "--out", type=Path, default=None, help="override the spec's output directory"
        )

    p_train = sub.add_parser("train", help="train models and select smoothing")
    add_common(p_train)

    p_generate = sub.add_parser("generate", help="decode candidates for one control set")
    add_common(p_generate)
    p_generate.add_argument("--control-set", required=True, help="control set name")
    p_generate.add_argument("--seed", type=int, default=None, help="override the spec seed")

    p_eval = sub.add_parser("eval", help="score candidate files")
    add_common(p_eval)
    p_eval.add_argument("candidates", nargs="+", type=Path, help="candidate files")

    p_ablate = sub.add_parser("ablate", help="leave-one-out ablation of a control set")
    add_common(p_ablate)
    p_ablate.add_argument("--control-set", required=True, help="three-attribute control set")
    p_ablate.add_argument("--seed", type=int, default=None, help="override the spec seed")

    p_serve = sub.add_parser("serve", help="run the HTTP control service")
    p_serve.add_argument("--config", type=Path, default=None, help="service config file")
    p_serve.add_argument("--spec", type=Path, default=None, help="experiment spec file")
    p_serve.add_argument(
        "--out", type=Path, default=None, help="override the spec's output directory"
    )
    return parser


def _cmd_train(args) -> int:
    spec = load_spec(args.spec)
    world = run_train(spec, out_dir=args.out)
    out = args.out or spec.out_dir
    print(f"models -> {out / 'models'}")
    print(f"selection -> {out / 'reports' / 'train-selection.json'}")
    print(f"vocabulary: {len(world.vocab)} tokens ({world.vocab.content_hash[:12]})")
    print(f"base: {world.base.smoothing.label()}")
    for name in sorted(world.attribute_models):
        model = world.attribute_models[name]
        print(f"{name}: {model.smoothing.label()} ({world.directions[name]})")
    return 0


def _cmd_generate(args) -> int:
    spec = load_spec(args.spec)
    path = run_generate(spec, args.control_set, seed=args.seed, out_dir=args.out)
    print(path)
    return 0


def _cmd_eval(args) -> int:
    spec = load_spec(args.spec)
    report_path = run_eval(spec, args.candidates, out_dir=args.out)
    out = args.out or spec.out_dir
    print((out / "reports" / "metrics-table.txt").read_text(encoding="utf-8"), end="")
    print(f"report -> {report_path}")
    return 0


def _cmd_ablate(args) -> int:
    spec = load_spec(args.spec)
    report_path = run_ablate(spec, args.control_set, seed=args.seed, out_dir=args.out)
    out = args.out or spec.out_dir
    table = out / "reports" / f"ablation-{args.control_set}.txt"
    print(table.read_text(encoding="utf-8"), end="")
    print(f"report -> {report_path}")
    return 0


def _cmd_serve(args) -> int:
    import os

    import uvicorn

    from .service import ENV_PREFIX, ServiceConfig, app_from_config

    if args.config is not None:
        config = ServiceConfig.load(args.config)
    elif args.spec is not None:
        spec = load_spec(args.spec)
        out = args.out or spec.out_dir
        config = ServiceConfig(
            listen=os.environ.get(ENV_PREFIX + "LISTEN", ServiceConfig.listen),
            model_dir=os.environ.get(ENV_PREFIX + "MODEL_DIR", str(out / "models")),
            log_path=os.environ.get(ENV_PREFIX + "LOG_PATH", str(out / "sessions.jsonl")),
        )
    else:
        raise SpecError("serve needs --config or --spec")
    app = app_from_config(config)
    print(f"listening on {config.listen}, models from {config.model_dir}")
    uvicorn.run(app, host=config.host, port=config.port, log_level="warning")
    return 0


_COMMANDS = {
    "train": _cmd_train,
    "generate": _cmd_generate,
    "eval": _cmd_eval,
    "ablate": _cmd_ablate,
    "serve": _cmd_serve,
}


def _one_line(message: str) -> str:
    return " ".join(str(message).split())


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except SpecError as exc:
        print(f"error: spec: {_one_line(exc)}", file=sys.stderr)
        return 2
    except DataFormatError as exc:
        print(f"error: data: {_one_line(exc)}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: validation: {_one_line(exc)}", file=sys.stderr)
        return 2
    except KeyError as exc:
        print(f"error: validation: {_one_line(exc.args[0] if exc.args else exc)}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: io: {_one_line(exc)}", file=sys.stderr)
        return 1
    except RuntimeError as exc:
        print(f"error: runtime: {_one_line(exc)}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
