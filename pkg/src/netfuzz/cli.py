"""Command-line front end: ``netfuzz <subcommand> [options]``.

Exit codes: 0 success (for ``fuzz``: goal reached), 2 goal not reached,
1 usage or configuration error, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .atpg import DEFAULT_BACKTRACKS, gen_activation_patterns, get_id
from .bench import load_bench, write_bench
from .benchmarks import NAMES, load_benchmark
from .errors import NetfuzzError
from .fuzz import CampaignConfig
from .merge import POLARITY_ORDERS, FILLS, ResetSpec, merge_pattern
from .netlist import Netlist
from .pipeline import SEEDINGS, PipelineConfig, run_pipeline
from .reports import (corpus_order, load_corpus, load_document, summary_text, write_report,
                      write_tables)
from .sim import DFF_INITS
from .submodule import emit_monitor, extract_submodule, format_boundary_map
from .targets import SelectionConfig, load_target_list, signal_probabilities, target_net_selection
from .verilog import load_cell_map, load_verilog

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_GOAL_NOT_REACHED = 2
EXIT_INTERNAL = 3

SUBCOMMANDS = ("stats", "select", "atpg", "fuzz", "extract-sub", "emit-monitor", "report")
log = logging.getLogger("netfuzz")


class UsageError(Exception):
    origin = "cli"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# --------------------------------------------------------------------------
# config file: flat "key = value" lines, keys spelled like the long flags


_FLAG_KEYS = {
    "netlist", "benchmark", "format", "cellmap", "top", "strategy", "weights", "entropy_cycles",
    "submodule", "depth", "multibin", "seeding", "polarity", "goal", "time", "iters", "cycle_budget",
    "workers", "seed", "reset", "out", "mode", "dff_init", "seed_cycles", "fill", "backtracks",
    "cycle_stages",
}
_BOOL_KEYS = {"submodule", "multibin", "cycle_stages"}


def read_config_file(path: str | Path) -> dict[str, str]:
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise UsageError(f"cannot read config file {path}: {e.strerror}") from None
    for i, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{i}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _FLAG_KEYS:
            raise UsageError(f"{path}:{i}: unknown key {key!r}")
        out[key] = value
    return out


def _apply_config(args: argparse.Namespace) -> None:
    """Fill options not given on the command line from ``--config``."""
    if not getattr(args, "config", None):
        return
    for key, value in read_config_file(args.config).items():
        if not hasattr(args, key) or getattr(args, key) not in (None, False):
            continue
        if key in _BOOL_KEYS:
            if value.lower() not in ("1", "0", "true", "false", "yes", "no", "on", "off"):
                raise UsageError(f"config key {key!r} needs a boolean, got {value!r}")
            setattr(args, key, value.lower() in ("1", "true", "yes", "on"))
        else:
            setattr(args, key, value)


# --------------------------------------------------------------------------
# option parsing helpers


def _num(text, kind, what):
    try:
        return kind(text)
    except (TypeError, ValueError):
        raise UsageError(f"{what} must be a number, got {text!r}") from None


def parse_strategy(text: str, weights=None, entropy_cycles=None, seed: int = 0) -> SelectionConfig:
    """``manual:<file>``, ``random:<k>``, ``cost:<threshold>`` or ``pct:<percentile>``."""
    kind, _, arg = (text or "pct:10").partition(":")
    kw = {"rng_seed": seed}
    if weights is not None:
        parts = [p for p in str(weights).split(",") if p.strip()]
        if len(parts) != 3:
            raise UsageError("--weights needs three comma-separated numbers fi,fo,h")
        w = [_num(p, float, "weight") for p in parts]
        total = sum(w)
        if total <= 0 or any(x < 0 for x in w):
            raise UsageError("--weights must be nonnegative with a positive sum")
        kw["weights"] = tuple(x / total for x in w)
    if entropy_cycles is not None:
        kw["entropy_cycles"] = _num(entropy_cycles, int, "--entropy-cycles")
    if kind == "manual":
        if not arg:
            raise UsageError("manual strategy needs a file: manual:<file>")
        try:
            names = load_target_list(arg)
        except OSError as e:
            raise UsageError(f"cannot read target list {arg}: {e.strerror}") from None
        return SelectionConfig(strategy="manual", manual=names, **kw)
    if kind == "random":
        return SelectionConfig(strategy="random", k=_num(arg, int, "random:<k>"), **kw)
    if kind == "cost":
        return SelectionConfig(strategy="cost_threshold", threshold=_num(arg, float, "cost:<threshold>"), **kw)
    if kind == "pct":
        return SelectionConfig(strategy="cost_percentile", percentile=_num(arg, float, "pct:<p>"), **kw)
    raise UsageError(f"unknown strategy {text!r}; use manual:<file>, random:<k>, cost:<t> or pct:<p>")


def load_netlist(args) -> Netlist:
    if args.benchmark:
        if args.benchmark not in NAMES:
            raise UsageError(f"unknown benchmark {args.benchmark!r}; available: {', '.join(NAMES)}")
        return load_benchmark(args.benchmark)
    if not args.netlist:
        raise UsageError("give --netlist <file> or --benchmark <name>")
    path = Path(args.netlist)
    if not path.is_file():
        raise UsageError(f"netlist {path} does not exist")
    fmt = args.format or ("sverilog" if path.suffix in (".v", ".sv") else "bench")
    if fmt == "bench":
        return load_bench(path)
    if fmt != "sverilog":
        raise UsageError(f"unknown format {fmt!r}; use bench or sverilog")
    cells = None
    if args.cellmap:
        if not Path(args.cellmap).is_file():
            raise UsageError(f"cell map {args.cellmap} does not exist")
        cells = load_cell_map(args.cellmap)
    return load_verilog(path, cells, top=args.top)


def _selection(args) -> SelectionConfig:
    return parse_strategy(args.strategy, args.weights, args.entropy_cycles, _num(args.seed or 0, int, "--seed"))


def pipeline_config(args) -> PipelineConfig:
    seed = _num(args.seed or 0, int, "--seed")
    goal = _num(args.goal if args.goal is not None else 90, float, "--goal")
    time_budget = None if args.time is None else _num(args.time, float, "--time")
    iters = None if args.iters is None else _num(args.iters, int, "--iters")
    budget = None if args.cycle_budget is None else _num(args.cycle_budget, int, "--cycle-budget")
    if time_budget is None and iters is None and budget is None:
        time_budget = 60.0
    camp = CampaignConfig(
        coverage_goal=goal, time_budget=time_budget, max_iterations=iters, max_sim_cycles=budget,
        workers=_num(args.workers or 1, int, "--workers"), rng_seed=seed,
        mode=args.mode or "directed", dff_init=args.dff_init or "x",
        seed_cycles=_num(args.seed_cycles or 8, int, "--seed-cycles"),
        cycle_stages=bool(args.cycle_stages))
    reset = ResetSpec.parse(args.reset) if args.reset else None
    return PipelineConfig(
        selection=_selection(args), campaign=camp, submodule=bool(args.submodule),
        submodule_depth=None if args.depth is None else _num(args.depth, int, "--depth"),
        multibin=bool(args.multibin), seeding=args.seeding or "basic",
        polarity_order=args.polarity or "zero_first",
        seed_cycles=_num(args.seed_cycles or 8, int, "--seed-cycles"), fill=args.fill or "random",
        reset=reset, backtrack_limit=_num(args.backtracks or DEFAULT_BACKTRACKS, int, "--backtracks"))


# --------------------------------------------------------------------------
# subcommands


def cmd_stats(args, out) -> int:
    nl = load_netlist(args)
    st = nl.stats()
    print(f"design {nl.name}", file=out)
    print(f"PIs    {st['pis']}", file=out)
    print(f"POs    {st['pos']}", file=out)
    print(f"gates  {st['gates']}", file=out)
    print(f"nets   {st['nets']}", file=out)
    print(f"DFFs   {st['dffs']}", file=out)
    print(f"depth  {max(nl.levels(), default=0)}", file=out)
    return EXIT_OK


def cmd_select(args, out) -> int:
    nl = load_netlist(args)
    ts = target_net_selection(nl, _selection(args))
    lines = [f"# {len(ts)} targets ({ts.strategy})"]
    for n in ts:
        c = ts.costs.get(n)
        lines.append(nl.net_name(n) if c is None else f"{nl.net_name(n)} {c:.6f}")
    _emit("\n".join(lines) + "\n", args.out, "targets.txt", out)
    return EXIT_OK


def cmd_atpg(args, out) -> int:
    nl = load_netlist(args)
    cfg = pipeline_config(args)
    ts = target_net_selection(nl, cfg.selection)
    ids = get_id(nl, None, ts.members)
    p_all = gen_activation_patterns(nl, ts.members, limit=cfg.backtrack_limit, ids=ids)
    if not any(p_all.cubes.values()):
        print("no target has an activation cube", file=out)
        return EXIT_OK
    primary, overflow = merge_pattern(p_all, multibin=cfg.multibin, polarity_order=cfg.polarity_order,
                                      netlist=nl, one_probability=_probs(nl, cfg))
    bins = [primary] + overflow
    n0 = sum(len(b.members_0) for b in bins)
    n1 = sum(len(b.members_1) for b in bins)
    summary = (f"# targets {len(ts)}  |N0|={n0}  |N1|={n1}  |NC|={len(primary.conflicts)}  "
               f"bins={len(bins)}  untestable={len(p_all.untestable)}  aborted={len(p_all.aborted())}\n")
    for i, b in enumerate(bins):
        summary += f"# bin {i}: {len(b.members_0)} at 0, {len(b.members_1)} at 1, {len(b.cube)} literals\n"
    _emit(summary + p_all.dump(), args.out, "cubes.txt", out)
    if args.out:
        print(summary, end="", file=out)
    return EXIT_OK


def _probs(nl, cfg: PipelineConfig):
    if cfg.polarity_order != "rare_first":
        return None
    return signal_probabilities(nl, cfg.selection.entropy_cycles, cfg.selection.rng_seed)


def cmd_fuzz(args, out) -> int:
    nl = load_netlist(args)
    cfg = pipeline_config(args)
    res = run_pipeline(nl, cfg)
    out_dir = Path(args.out or "netfuzz_out")
    write_report(res, out_dir)
    doc = load_document(out_dir)
    print(summary_text(doc), end="", file=out)
    print(f"reports written to {out_dir}", file=out)
    return EXIT_OK if res.campaign.goal_reached else EXIT_GOAL_NOT_REACHED


def cmd_extract_sub(args, out) -> int:
    nl = load_netlist(args)
    ts = target_net_selection(nl, _selection(args))
    depth = None if args.depth is None else _num(args.depth, int, "--depth")
    sub = extract_submodule(nl, ts.members, depth=depth)
    out_dir = Path(args.out or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    bench = out_dir / f"{nl.name}_sub.bench"
    bench.write_text(write_bench(sub.netlist))
    side = bench.with_suffix(".boundary")
    side.write_text(format_boundary_map(sub, nl))
    st = sub.netlist.stats()
    print(f"submodule: {st['pis']} inputs, {st['pos']} targets, {st['gates']} gates -> {bench}", file=out)
    return EXIT_OK


def cmd_emit_monitor(args, out) -> int:
    nl = load_netlist(args)
    ts = target_net_selection(nl, _selection(args))
    ids = get_id(nl, None, ts.members)
    text = emit_monitor(ts.members, ids, ts.costs or None)
    _emit(text, args.out, "monitor.v", out)
    return EXIT_OK


def cmd_report(args, out) -> int:
    if not args.out:
        raise UsageError("report needs --out <campaign directory>")
    out_dir = Path(args.out)
    if not (out_dir / "campaign.json").is_file():
        raise UsageError(f"{out_dir} has no campaign.json")
    try:
        doc = load_document(out_dir)
    except (ValueError, json.JSONDecodeError) as e:
        raise UsageError(f"bad campaign.json: {e}") from None
    write_tables(doc, out_dir)
    print(summary_text(doc), end="", file=out)
    corpus_dir = out_dir / "corpus"
    if corpus_dir.is_dir():
        loaded = load_corpus(corpus_dir, doc["design"]["pis"], corpus_order(doc))
        print(f"corpus: {len(loaded.queue)} queued, {len(loaded.archive)} archived, "
              f"{len(loaded.skipped)} skipped", file=out)
    return EXIT_OK


def _emit(text: str, out_arg, default_name: str, out) -> None:
    if not out_arg:
        print(text, end="", file=out)
        return
    p = Path(out_arg)
    if p.is_dir() or out_arg.endswith(os.sep):
        p.mkdir(parents=True, exist_ok=True)
        p = p / default_name
    else:
        p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(text)
    print(f"wrote {p}", file=out)


COMMANDS = {
    "stats": cmd_stats, "select": cmd_select, "atpg": cmd_atpg, "fuzz": cmd_fuzz,
    "extract-sub": cmd_extract_sub, "emit-monitor": cmd_emit_monitor, "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="netfuzz", description="ATPG-seeded directed fuzzing on gate-level netlists")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    for name in SUBCOMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="key = value file; command-line flags win")
        s.add_argument("--out", help="output file or directory")
        if name == "report":
            continue
        s.add_argument("--netlist", help="netlist file (.bench or structural Verilog)")
        s.add_argument("--benchmark", help=f"bundled netlist: {', '.join(NAMES)}")
        s.add_argument("--format", choices=("bench", "sverilog"))
        s.add_argument("--cellmap", help="cell map for mapped Verilog")
        s.add_argument("--top", help="top module (Verilog)")
        if name == "stats":
            continue
        s.add_argument("--strategy", help="manual:<file> | random:<k> | cost:<t> | pct:<p> (default pct:10)")
        s.add_argument("--weights", help="cost weights fi,fo,h")
        s.add_argument("--entropy-cycles", dest="entropy_cycles")
        s.add_argument("--seed", help="rng seed")
        s.add_argument("--depth", help="submodule cut depth in gate levels")
        if name in ("select", "extract-sub", "emit-monitor"):
            continue
        s.add_argument("--multibin", action="store_true", default=None)
        s.add_argument("--polarity", choices=POLARITY_ORDERS)
        s.add_argument("--backtracks", help=f"backtrack limit per objective (default {DEFAULT_BACKTRACKS})")
        if name == "atpg":
            for opt in ("goal", "time", "iters", "cycle_budget", "workers", "mode", "dff_init",
                        "seed_cycles", "cycle_stages", "submodule", "seeding", "fill", "reset"):
                s.set_defaults(**{opt: None})
            continue
        s.add_argument("--submodule", action="store_true", default=None)
        s.add_argument("--seeding", choices=SEEDINGS)
        s.add_argument("--goal", help="target coverage percent (default 90)")
        s.add_argument("--time", help="time budget, seconds")
        s.add_argument("--iters", help="iteration bound")
        s.add_argument("--cycle-budget", dest="cycle_budget", help="simulated-cycle bound")
        s.add_argument("--workers")
        s.add_argument("--mode", choices=("directed", "random", "cgf"))
        s.add_argument("--dff-init", dest="dff_init", choices=DFF_INITS)
        s.add_argument("--seed-cycles", dest="seed_cycles")
        s.add_argument("--fill", choices=FILLS)
        s.add_argument("--cycle-stages", dest="cycle_stages", action="store_true", default=None)
        s.add_argument("--reset", help="name,polarity,cycles")
    return p


def _setup_logging() -> None:
    level = os.environ.get("NETFUZZ_LOG", "WARNING").upper()
    if level.isdigit():
        lvl = int(level)
    else:
        lvl = getattr(logging, level, None)
        if not isinstance(lvl, int):
            lvl = logging.WARNING
    logging.basicConfig(level=lvl, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def run_cli(argv: list[str] | None = None, out=None) -> int:
    out = out or sys.stdout
    _setup_logging()
    try:
        args = build_parser().parse_args(argv)
        if not args.command:
            raise UsageError(f"missing subcommand; one of {', '.join(SUBCOMMANDS)}")
        _apply_config(args)
        return COMMANDS[args.command](args, out)
    except UsageError as e:
        print(f"netfuzz: error [cli]: {e}", file=sys.stderr)
        return EXIT_USAGE
    except NetfuzzError as e:
        print(f"netfuzz: error [{e.origin}]: {e}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        print(f"netfuzz: error [io]: {e}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as e:  # noqa: BLE001
        log.debug("internal error", exc_info=True)
        print(f"netfuzz: internal error [{type(e).__module__}]: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INTERNAL


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
