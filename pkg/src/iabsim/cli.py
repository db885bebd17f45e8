"""Command line entry point: ``iabsim run | validate | generate-scenario``."""

from __future__ import annotations

import argparse
import copy
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

from .config import load_config, load_scenario, prepare, sim_config
from .engine import Simulation
from .errors import ConfigError, IabSimError, ParseError, RoutingError, TopologyError
from .kpi import write_traces
from .model import validate_topology
from .routing import check_path_policy
from .scenario import write_sites, write_ues
from .scheduling import make_scheduler

log = logging.getLogger("iabsim")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_INVALID = 3


def _overrides(args) -> list[str]:
    out = list(args.set or [])
    if getattr(args, "seed", None) is not None:
        out.append(f"simulation.seed={args.seed}")
    if getattr(args, "mode", None):
        out.append(f"simulation.mode={args.mode}")
    if getattr(args, "run_time", None) is not None:
        out.append(f"simulation.run_time_s={args.run_time}")
    if getattr(args, "source_rate", None) is not None:
        out.append(f"traffic.source_rate_bps={args.source_rate}")
    if getattr(args, "scheduler", None):
        out.append(f"policies.scheduler={args.scheduler}")
    if getattr(args, "path_policy", None):
        out.append(f"policies.path_policy={args.path_policy}")
    if getattr(args, "out", None):
        out.append(f"output.dir={args.out}")
    if getattr(args, "run_id", None):
        out.append(f"output.run_id={args.run_id}")
    return out


def _check_ids(doc: dict) -> None:
    make_scheduler(doc["policies"]["scheduler"])
    check_path_policy(doc["policies"]["path_policy"])


def run_one(doc: dict) -> str:
    """Build, simulate and write one run; returns the output directory."""
    _check_ids(doc)
    prep = prepare(doc)
    problems = validate_topology(prep.topology)
    if problems:
        raise TopologyError(problems)
    sim = Simulation(prep.config, prep.topology, prep.channel, prep.traces)
    output = sim.run()
    run_id = doc["output"]["run_id"] or f"seed-{prep.config.seed}"
    out_dir = Path(doc["output"]["dir"]) / str(run_id)
    echo = copy.deepcopy(doc)
    echo["simulation"].pop("mode")  # see kpi_document
    write_traces(output, out_dir, metadata={"config_file": echo, "run_id": str(run_id)})
    return str(out_dir)


def cmd_run(args) -> int:
    doc = load_config(args.config, _overrides(args))
    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else None
    if not seeds:
        print(json.dumps({"status": "ok", "out": run_one(doc)}))
        return EXIT_OK
    base_id = doc["output"]["run_id"]
    docs = []
    for s in seeds:
        d = load_config(args.config, _overrides(args) + [f"simulation.seed={s}"])
        d["output"]["run_id"] = f"{base_id}-seed-{s}" if base_id else f"seed-{s}"
        docs.append(d)
    sim_config(docs[0])  # fail fast on config errors before forking
    _check_ids(docs[0])
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            outs = list(pool.map(run_one, docs))
    else:
        outs = [run_one(d) for d in docs]
    print(json.dumps({"status": "ok", "out": outs}))
    return EXIT_OK


def cmd_validate(args) -> int:
    doc = load_config(args.config, _overrides(args))
    _check_ids(doc)
    prep = prepare(doc)
    problems = validate_topology(prep.topology)
    if problems:
        raise TopologyError(problems)
    topo = prep.topology
    print(json.dumps({
        "status": "ok",
        "nodes": len(topo.nodes),
        "donors": len(topo.donor_ids),
        "ues": len(topo.ues),
        "equipped_backhaul_links": len(topo.equipped_backhaul),
        "slots": prep.config.n_slots,
    }))
    return EXIT_OK


def cmd_generate(args) -> int:
    doc = load_config(args.config, _overrides(args))
    cfg = sim_config(doc)
    scenario, _ = load_scenario(doc, cfg.seed)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    write_sites(out / "sites.csv", scenario.sites)
    write_ues(out / "ues.csv", scenario.ue_positions)
    print(json.dumps({
        "status": "ok",
        "sites": len(scenario.sites),
        "donors": sum(s.is_donor for s in scenario.sites),
        "ues": len(scenario.ue_positions),
        "out": str(out),
    }))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="iabsim", description="System-level IAB network simulator")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("-c", "--config", help="YAML config file (defaults used when omitted)")
        p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                       help="override any config value; repeatable")
        p.add_argument("--seed", type=int)
        p.add_argument("--run-time", type=float, dest="run_time", help="seconds")
        p.add_argument("--source-rate", type=float, dest="source_rate", help="bits/s")
        p.add_argument("--scheduler")
        p.add_argument("--path-policy", dest="path_policy")

    p_run = sub.add_parser("run", help="simulate and write packets.csv, load.csv, kpi.json")
    common(p_run)
    p_run.add_argument("--mode", choices=["run", "debug"])
    p_run.add_argument("--out", help="output root directory")
    p_run.add_argument("--run-id", dest="run_id")
    p_run.add_argument("--seeds", help="comma-separated seeds for a sweep")
    p_run.add_argument("--jobs", type=int, default=1, help="parallel workers for --seeds")
    p_run.set_defaults(func=cmd_run)

    p_val = sub.add_parser("validate", help="check config and topology without running")
    common(p_val)
    p_val.set_defaults(func=cmd_validate)

    p_gen = sub.add_parser("generate-scenario", help="write sites.csv and ues.csv")
    common(p_gen)
    p_gen.add_argument("-o", "--output", required=True, help="directory for the CSV files")
    p_gen.set_defaults(func=cmd_generate)
    return parser


def _fail(exc: Exception, code: int) -> int:
    msg = str(exc).replace("\n", " ")
    print(json.dumps({"status": "error", "type": type(exc).__name__, "message": msg}), file=sys.stderr)
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (TopologyError, RoutingError) as exc:
        return _fail(exc, EXIT_INVALID)
    except (ConfigError, ParseError) as exc:
        return _fail(exc, EXIT_CONFIG)
    except (IabSimError, OSError) as exc:
        return _fail(exc, EXIT_ERROR)


if __name__ == "__main__":
    sys.exit(main())
