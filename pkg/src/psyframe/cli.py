"""Command-line entry points: synth, train, eval, run, replay, serve."""

from __future__ import annotations

import argparse
import json
import sys

from . import model as mdl
from .pipeline import PipelineConfig, load_config, replay_session, run_decode_loop, run_train
from .synth import build_dataset, load_dataset, save_dataset


def _segments_from_string(text: str):
    """Parse "1:20,none:10,3:12" into schedule segments."""
    segments = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        name, _, hops = part.partition(":")
        if not hops:
            raise ValueError(f"schedule segment {part!r} must look like CLASS:HOPS")
        class_id = None if name.lower() in ("none", "noise", "-") else int(name)
        segments.append({"class_id": class_id, "hops": int(hops)})
    return segments


def _config_from_args(args) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    overrides = cfg.to_dict()
    if getattr(args, "weights", None):
        overrides["model_path"] = args.weights
    if getattr(args, "schedule", None):
        overrides["source"] = {
            **overrides["source"],
            "schedule": _segments_from_string(args.schedule),
        }
    if getattr(args, "source_seed", None) is not None:
        overrides["source"] = {**overrides["source"], "seed": args.source_seed}
    if getattr(args, "hop_ms", None) is not None:
        overrides["hop_ms"] = args.hop_ms
    if getattr(args, "port", None) is not None:
        overrides["service_port"] = args.port
    return PipelineConfig.from_dict(overrides)


def _cmd_synth(args) -> int:
    dataset = build_dataset(args.n_per_class, args.seed)
    save_dataset(args.out, dataset)
    print(f"wrote {len(dataset)} windows ({args.n_per_class} per class) to {args.out}")
    return 0


def _cmd_train(args) -> int:
    dataset = load_dataset(args.data) if args.data else None
    weights, report = run_train(
        args.out,
        report_path=args.report,
        n_per_class=args.n_per_class,
        data_seed=args.seed,
        split_seed=args.split_seed,
        train_seed=args.train_seed,
        epochs=args.epochs,
        batch_size=args.batch_size,
        lr=args.lr,
        dataset=dataset,
    )
    print(f"trained {weights.n_parameters()} parameters; weights -> {args.out}")
    for e in report.epochs:
        print(f"epoch {e.epoch:3d}  train_loss {e.train_loss:.4f}  val_acc {e.val_accuracy:.3f}")
    print(f"final val accuracy: {report.final_val_accuracy:.3f}")
    return 0


def _cmd_eval(args) -> int:
    weights = mdl.load_weights(args.weights)
    dataset = load_dataset(args.data)
    accuracy, confusion = mdl.evaluate(weights, dataset)
    print(f"accuracy: {accuracy:.4f} on {len(dataset)} windows")
    print("confusion (rows = true class):")
    for row in confusion:
        print("  " + " ".join(f"{int(v):5d}" for v in row))
    return 0


def _cmd_run(args) -> int:
    cfg = _config_from_args(args)
    weights = mdl.load_weights(cfg.model_path)
    reports = run_decode_loop(cfg, weights, args.hops, log_path=args.log, model_path=cfg.model_path)
    for report in reports:
        print(report.to_line())
    triggers = sum(1 for r in reports if r.triggered)
    print(f"# {len(reports)} hops, {triggers} triggers", file=sys.stderr)
    return 0


def _cmd_replay(args) -> int:
    weights = mdl.load_weights(args.weights) if args.weights else None
    _, reports = replay_session(args.log, weights=weights)
    for report in reports:
        print(report.to_line())
    return 0


def _cmd_serve(args) -> int:
    from .service import serve  # deferred: keeps the CLI import-light

    cfg = _config_from_args(args)
    weights = mdl.load_weights(cfg.model_path)
    print(f"serving ws://{args.host}:{cfg.service_port} (hop {cfg.hop_ms} ms)", file=sys.stderr)
    serve(cfg, weights, host=args.host, port=cfg.service_port, log_path=args.log, max_hops=args.max_hops)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="psyframe",
        description="Synthetic motor-imagery EEG decoding driving a simulated robot.",
    )
    parser.add_argument("--config", help="JSON pipeline config file")
    parser.add_argument(
        "--show-config",
        action="store_true",
        help="print the effective pipeline config as JSON and exit",
    )
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("synth", help="generate a dataset file")
    p.add_argument("--out", required=True)
    p.add_argument("--n-per-class", type=int, default=100)
    p.add_argument("--seed", type=int, default=7)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("train", help="build a dataset, train, write weights + report")
    p.add_argument("--out", required=True, help="weights file path")
    p.add_argument("--report", help="training report JSON path")
    p.add_argument("--data", help="reuse an existing dataset file instead of generating")
    p.add_argument("--n-per-class", type=int, default=100)
    p.add_argument("--seed", type=int, default=7, help="dataset generation seed")
    p.add_argument("--split-seed", type=int, default=0)
    p.add_argument("--train-seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--lr", type=float, default=1e-3)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate weights on a dataset file")
    p.add_argument("--weights", required=True)
    p.add_argument("--data", required=True)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("run", help="headless decode loop, one TickReport line per hop")
    p.add_argument("--weights", help="weights file (overrides config model_path)")
    p.add_argument("--hops", type=int, default=40)
    p.add_argument("--schedule", help='e.g. "1:20,none:10,3:12" (none = pure noise)')
    p.add_argument("--source-seed", type=int, dest="source_seed")
    p.add_argument("--log", help="write a session log for later replay")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("replay", help="re-run a session log, print the reproduced ticks")
    p.add_argument("log")
    p.add_argument("--weights", help="override the model file named in the log")
    p.set_defaults(func=_cmd_replay)

    p = sub.add_parser("serve", help="run the live telemetry/control service")
    p.add_argument("--weights", help="weights file (overrides config model_path)")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int)
    p.add_argument("--hop-ms", type=int, dest="hop_ms")
    p.add_argument("--schedule", help="initial scripted schedule")
    p.add_argument("--source-seed", type=int, dest="source_seed")
    p.add_argument("--log", help="write a session log while serving")
    p.add_argument("--max-hops", type=int, help="stop after this many hops (testing)")
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.show_config:
        cfg = load_config(args.config) if args.config else PipelineConfig()
        print(json.dumps(cfg.to_dict(), indent=2))
        return 0
    if not getattr(args, "command", None):
        parser.print_help()
        return 2
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    main()
