"""Command-line front end: validate, abstract, synthesize, simulate, monitor."""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from .abstraction import build_transition_system
from .config import ConfigError, ProjectConfig, load_config
from .logic.formula import FormulaError
from .logic.hoa import HOAError, export_hoa
from .network import NetworkError, validate_network
from .partition import PartitionError, partition_from_dict
from .pipeline import synthesize
from .runtime import (
    Trace,
    UniformDisturbance,
    fixed_time_policy,
    controller_policy,
    monitor_trace,
    random_state,
    simulate,
)
from .synthesis import Controller, SynthesisError

EXIT_OK, EXIT_SYNTHESIS, EXIT_INPUT = 0, 1, 2


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8")


def cmd_validate(cfg: ProjectConfig, args) -> int:
    diags = validate_network(cfg.network)
    report = [{"condition": d.condition, "links": list(d.links), "message": d.message} for d in diags]
    if args.out:
        _write_json(_out(args) / "diagnostics.json", report)
    for d in diags:
        print(f"{d.condition}: {d.message}")
    if not diags:
        print(f"network ok: {len(cfg.network.links)} links, {len(cfg.network.signals)} signal inputs")
    return EXIT_OK if not diags else EXIT_INPUT


def cmd_abstract(cfg: ProjectConfig, args) -> int:
    out = _out(args)
    report: dict = {}
    t0 = time.perf_counter()
    ts = build_transition_system(cfg.network, cfg.partition, workers=args.workers, report=report)
    report["wall_seconds"] = time.perf_counter() - t0
    fmt = args.format or "json"
    if fmt == "dot":
        (out / "abstraction.dot").write_text(ts.to_dot(), encoding="utf-8")
    elif fmt == "json":
        ts.to_json(out / "abstraction.json")
    else:
        raise ConfigError(f"--format {fmt} is not available for 'abstract'")
    _write_json(out / "abstraction_report.json", report)
    print(
        f"abstraction: {report['cells']} cells, {report['signals']} signals, {report['edges']} edges, "
        f"{report['edge_seconds']:.3f} s edge construction"
    )
    return EXIT_OK


def cmd_synthesize(cfg: ProjectConfig, args) -> int:
    out = _out(args)
    try:
        res = synthesize(
            cfg.network,
            cfg.partition,
            formula=cfg.formula,
            automaton=cfg.automaton,
            sigma_init=cfg.sigma_init,
            workers=args.workers,
        )
    except SynthesisError as exc:
        _write_json(out / "synthesis_report.json", {"realizable": False, "uncovered": exc.uncovered})
        print(f"synthesis failed: {exc}", file=sys.stderr)
        return EXIT_SYNTHESIS
    res.controller.save(out / "controller.json")
    if args.format == "hoa":
        (out / "automaton.hoa").write_text(export_hoa(res.dra), encoding="utf-8")
    report = res.report()
    report["realizable"] = True
    _write_json(out / "synthesis_report.json", report)
    print(
        f"controller: {report['automaton_states']} memory states, {report['winning_nodes']}/"
        f"{report['game_nodes']} winning nodes, sigma_init={report['sigma_init']}"
    )
    return EXIT_OK


def _seeds(cfg: ProjectConfig, args) -> list[int]:
    return [args.seed] if args.seed is not None else cfg.seeds


def cmd_simulate(cfg: ProjectConfig, args) -> int:
    out = _out(args)
    steps = args.steps if args.steps is not None else cfg.steps
    net = cfg.network
    if args.policy == "baseline":
        dwell = args.dwell or cfg.baseline_dwell
        make_policy = lambda: fixed_time_policy(net, dwell)  # noqa: E731
        tag = f"baseline{dwell}"
    else:
        path = Path(args.controller) if args.controller else out / "controller.json"
        if not path.exists():
            raise ConfigError(f"controller file not found: {path} (run 'synthesize' first)")
        controller = Controller.load(path)
        partition = partition_from_dict(net, controller.partition) if controller.partition else cfg.partition
        make_policy = lambda: controller_policy(controller, partition)  # noqa: E731
        tag = "controller"
    for seed in _seeds(cfg, args):
        rng = np.random.default_rng(seed)
        x0 = random_state(net, rng)
        trace = simulate(net, make_policy(), x0, UniformDisturbance(net, rng=rng), steps)
        name = out / f"trace_{tag}_seed{seed}.csv"
        name.write_text(trace.to_csv(net), encoding="utf-8")
        print(f"wrote {name}")
    return EXIT_OK


def cmd_monitor(cfg: ProjectConfig, args) -> int:
    out = _out(args)
    if cfg.formula is None:
        raise ConfigError("config: monitoring needs a 'formula'")
    paths = [Path(p) for p in args.trace] if args.trace else sorted(out.glob("trace_*.csv"))
    if not paths:
        raise ConfigError(f"no traces to monitor in {out}")
    verdicts = {}
    for p in paths:
        trace = Trace.from_csv(cfg.network, p.read_text(encoding="utf-8"))
        v = monitor_trace(cfg.network, trace, cfg.formula, cfg.window, cfg.horizon)
        verdicts[p.name] = v.to_dict()
        print(f"{p.name}: {v.outcome}")
    _write_json(out / "verdicts.json", verdicts)
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "abstract": cmd_abstract,
    "synthesize": cmd_synthesize,
    "simulate": cmd_simulate,
    "monitor": cmd_monitor,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trafficltl", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="project configuration JSON")
        p.add_argument("--out", default="out" if name != "validate" else None, help="output directory")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--steps", type=int, default=None)
        p.add_argument("--format", choices=["json", "csv", "dot", "hoa"], default=None)
        p.add_argument("--workers", type=int, default=1)
        if name == "simulate":
            p.add_argument("--policy", choices=["controller", "baseline"], default="controller")
            p.add_argument("--dwell", type=int, default=None)
            p.add_argument("--controller", default=None, help="controller JSON (default: <out>/controller.json)")
        if name == "monitor":
            p.add_argument("--trace", nargs="*", default=None, help="trace CSV files (default: <out>/trace_*.csv)")
    return parser


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, NetworkError, PartitionError, FormulaError, HOAError, OSError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
