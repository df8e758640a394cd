"""Command-line entry point.

Exit codes: 0 success, 1 runtime failure, 2 bad configuration or usage.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import CONTROLLERS, Config, ConfigError

log = logging.getLogger("thermotwin")

MODEL_CHOICES = ("arx", "pbm", "lstm", "ham")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", default="default", help="INI config file, or 'default'")
    common.add_argument("--seed", type=int, default=None, help="suite seed (overrides [suite] seed)")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override one config value (repeatable)")
    common.add_argument("-v", "--verbose", action="count", default=0)

    p = _Parser(prog="thermotwin", description="Thermal digital-twin testbed.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", parents=[common], help="write scenario datasets as trajectory CSVs")
    g.add_argument("--scenario", type=int, action="append", help="scenario number 1-6 (repeatable; default all)")

    t = sub.add_parser("train", parents=[common], help="train one model on a training range")
    t.add_argument("model", choices=MODEL_CHOICES)
    t.add_argument("--range", choices=("wide", "narrow"), default="wide",
                   help="training range: 21.8-36.9 (wide) or 21.8-29.7 (narrow)")

    sub.add_parser("evaluate", parents=[common], help="model suite over the scenarios")

    c = sub.add_parser("control", parents=[common], help="one closed-loop episode")
    c.add_argument("controller", choices=CONTROLLERS)
    c.add_argument("--penalty", action="store_true", help="actuation-penalty preset")
    c.add_argument("--ref", default=None, help="reference profile: constant, ramp, staircase, sinusoid")

    sub.add_parser("suite", parents=[common], help="model suite plus controller suite")

    r = sub.add_parser("report", parents=[common], help="print the report of a run")
    r.add_argument("run", nargs="?", help="run directory (default: latest under --out)")
    r.add_argument("--format", choices=("txt", "csv", "json"), default="txt")
    return p


def load_config(args) -> Config:
    cfg = Config.load(args.config)
    for item in args.set:
        if "=" not in item:
            raise ConfigError(item, "override must look like section.key=value")
        key, value = item.split("=", 1)
        cfg.set(key.strip(), value)
    if args.seed is not None:
        cfg.set("suite.seed", args.seed)
    if getattr(args, "scenario", None):
        cfg.set("suite.scenarios", args.scenario)
    if getattr(args, "penalty", False):
        cfg.set("control.penalty", True)
    if getattr(args, "ref", None):
        cfg.set("control.reference", args.ref)
    if getattr(args, "seed", None) is not None and args.command == "control":
        cfg.set("control.seeds", (args.seed,))
    return cfg.validate()


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"thermotwin: error: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args)
    except ConfigError as exc:
        print(f"thermotwin: bad config: {exc}", file=sys.stderr)
        return 2
    try:
        return COMMANDS[args.command](args, cfg) or 0
    except ConfigError as exc:
        print(f"thermotwin: bad config: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        log.debug("failure", exc_info=True)
        print(f"thermotwin: {args.command} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


# ---------------------------------------------------------------------- commands

def cmd_generate(args, cfg: Config) -> int:
    from .harness.suite import scenario_data_seed
    from .plant import load_scenarios, run_schedule

    out = Path(args.out) / "data"
    out.mkdir(parents=True, exist_ok=True)
    specs = load_scenarios()
    for i in cfg["suite"]["scenarios"]:
        spec = specs[i - 1]
        traj, _ = run_schedule(spec.input_schedule, cfg.plant_config(scenario_data_seed(cfg["suite"]["seed"], spec)),
                               spec.start_temperature)
        path = out / f"{spec.name}.csv"
        traj.save_csv(path)
        print(path)
    return 0


def cmd_train(args, cfg: Config) -> int:
    from .harness.suite import train_model
    from .plant import TRAINING_RANGES

    if args.model == "pbm":
        print("pbm has no trainable parameters; writing its checkpoint only")
    rng = TRAINING_RANGES[0 if args.range == "wide" else 1]
    model, seconds, nbytes = train_model(cfg, args.model, rng)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{args.model}.ckpt"
    path.write_bytes(model.to_checkpoint())
    info = {"model": args.model, "train_range": list(rng), "checkpoint": str(path), "bytes": nbytes,
            "seconds": round(seconds, 3)}
    hist = getattr(model, "history_", None)
    if hist is not None and getattr(hist, "train_loss", None):
        info["epochs"] = hist.epochs_run
        info["train_loss"] = hist.train_loss
        info["val_loss"] = hist.val_loss
        (out / f"{args.model}_history.json").write_text(
            json.dumps({"train_loss": hist.train_loss, "val_loss": hist.val_loss}, indent=1) + "\n")
    print(json.dumps({k: v for k, v in info.items() if k not in ("train_loss", "val_loss")}))
    return 0


def cmd_evaluate(args, cfg: Config) -> int:
    from .harness import Timing, make_run_dir, run_model_suite, write_run

    run = make_run_dir(args.out)
    timing = Timing()
    report = run_model_suite(cfg, telemetry_dir=run / "telemetry", timing=timing)
    write_run(run, cfg, report, timing)
    print(report.to_text(), end="")
    print(f"run directory: {run}")
    return 1 if any(r.status != "ok" for r in report.models) else 0


def cmd_control(args, cfg: Config) -> int:
    from .harness import Timing, make_run_dir, run_controller_suite, write_run

    run = make_run_dir(args.out)
    timing = Timing()
    pen = cfg["control"]["penalty"]
    report = run_controller_suite(cfg, [args.controller], (pen,), run / "telemetry", timing)
    write_run(run, cfg, report, timing)
    print(report.to_text(), end="")
    print(f"run directory: {run}")
    return 1 if any(r.status != "ok" for r in report.controllers) else 0


def cmd_suite(args, cfg: Config) -> int:
    from .harness import Timing, make_run_dir, merge, run_controller_suite, run_model_suite, write_run

    run = make_run_dir(args.out)
    timing = Timing()
    models = run_model_suite(cfg, telemetry_dir=run / "telemetry", timing=timing)
    controllers = run_controller_suite(cfg, telemetry_dir=run / "telemetry", timing=timing)
    report = merge(models, controllers)
    write_run(run, cfg, report, timing)
    print(report.to_text(), end="")
    print(f"run directory: {run}")
    failed = [r for r in report.models if r.status != "ok"] + [r for r in report.controllers if r.status != "ok"]
    return 1 if failed else 0


def cmd_report(args, cfg: Config) -> int:
    from .harness import latest_run

    run = Path(args.run) if args.run else latest_run(args.out)
    path = run / f"report.{args.format}"
    if not path.is_file():
        raise FileNotFoundError(f"{path} does not exist")
    print(path.read_text(encoding="utf-8"), end="")
    return 0


COMMANDS = {"generate": cmd_generate, "train": cmd_train, "evaluate": cmd_evaluate, "control": cmd_control,
            "suite": cmd_suite, "report": cmd_report}


if __name__ == "__main__":
    sys.exit(main())
