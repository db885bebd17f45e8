"""YAML run configuration: defaults, file loading, dotted overrides, and run assembly."""

from __future__ import annotations

import copy
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

import numpy as np
import yaml

from .channel import ChannelState, ThzTraceTable, load_thz_traces
from .engine import rng_streams
from .errors import ConfigError
from .model import SimConfig, Topology
from .scenario import (
    Scenario,
    build_topology,
    generate_scenario,
    ingest_links,
    ingest_sites,
    ingest_ues,
    uniform_ues,
)

DEFAULTS: dict[str, Any] = {
    "simulation": {
        "run_time_s": 0.1,
        "slot_duration_s": 125e-6,
        "mode": "run",
        "seed": 0,
    },
    "traffic": {
        "packet_size_bits": 12000,
        "source_rate_bps": 40e6,
        "rate_scope": "per_ue",
        "model": "cbr",
    },
    "channel": {
        "bandwidth_hz": {"mmwave": 400e6, "subthz": 2e9},
        "carrier_frequency_hz": {"mmwave": 28e9, "subthz": 140e9},
        "noise_figure_db": 7.0,
        "node_tx_power_dbm": 30.0,
        "ue_tx_power_dbm": 23.0,
        "backhaul_band": "mmwave",
        "trace_file": None,
        "node_antenna": {"n_elements": 64, "codebook_size": 16, "boresight_deg": 0.0},
        "ue_antenna": {"n_elements": 4, "codebook_size": 4, "boresight_deg": 0.0},
    },
    "buffers": {"capacity_bytes": 5_000_000},
    "policies": {"scheduler": "round_robin", "path_policy": "min_hop"},
    "topology": {"criterion": "min_hop", "max_range_m": 500.0, "max_parents": 1},
    "scenario": {
        "kind": "manhattan_grid",
        "params": {"rows": 5, "cols": 5, "spacing_m": 200.0, "ues_per_node": 2},
        "seed": None,  # None: use simulation.seed
        "sites_csv": None,
        "ues_csv": None,
        "links_csv": None,
        "n_ues": None,  # for sites_csv without ues_csv
    },
    "output": {"dir": "out", "run_id": None},
}

# SimConfig field -> (section, key)
SIM_FIELDS = {
    "run_time_s": ("simulation", "run_time_s"),
    "slot_duration_s": ("simulation", "slot_duration_s"),
    "simulation_mode": ("simulation", "mode"),
    "seed": ("simulation", "seed"),
    "packet_size_bits": ("traffic", "packet_size_bits"),
    "source_rate_bps": ("traffic", "source_rate_bps"),
    "rate_scope": ("traffic", "rate_scope"),
    "traffic_model": ("traffic", "model"),
    "bandwidth_hz": ("channel", "bandwidth_hz"),
    "carrier_frequency_hz": ("channel", "carrier_frequency_hz"),
    "noise_figure_db": ("channel", "noise_figure_db"),
    "node_tx_power_dbm": ("channel", "node_tx_power_dbm"),
    "ue_tx_power_dbm": ("channel", "ue_tx_power_dbm"),
    "backhaul_band": ("channel", "backhaul_band"),
    "trace_file": ("channel", "trace_file"),
    "buffer_capacity_bytes": ("buffers", "capacity_bytes"),
    "scheduler": ("policies", "scheduler"),
    "path_policy": ("policies", "path_policy"),
}


def _merge(base: dict, extra: dict, trail: str = "", patch_params: bool = False) -> dict:
    out = copy.deepcopy(base)
    for key, val in extra.items():
        path = f"{trail}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key {path!r}")
        if key == "params":
            # free-form generator parameters: a file replaces them, an override patches
            if not isinstance(val, dict):
                raise ConfigError(f"config key {path!r} must be a mapping")
            out[key] = {**base[key], **val} if patch_params else copy.deepcopy(val)
        elif isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise ConfigError(f"config key {path!r} must be a mapping")
            out[key] = _merge(base[key], val, path + ".", patch_params)
        else:
            out[key] = copy.deepcopy(val)
    return out


def load_config(path: Optional[str] = None, overrides: Optional[list[str]] = None) -> dict:
    """Defaults, then the YAML file, then ``section.key=value`` overrides (YAML-typed)."""
    doc = copy.deepcopy(DEFAULTS)
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        try:
            data = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"invalid YAML in {path}: {exc}".replace("\n", " ")) from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        doc = _merge(doc, data)
    for item in overrides or []:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"override must look like section.key=value, got {item!r}")
        value = yaml.safe_load(raw) if raw else None
        nested: dict = value
        for part in reversed(key.split(".")):
            nested = {part: nested}
        doc = _merge(doc, nested, patch_params=True)
    return doc


def sim_config(doc: dict) -> SimConfig:
    kwargs = {f: doc[sec][key] for f, (sec, key) in SIM_FIELDS.items()}
    try:
        kwargs["seed"] = int(kwargs["seed"])
        kwargs["packet_size_bits"] = int(kwargs["packet_size_bits"])
        for f in ("run_time_s", "slot_duration_s", "source_rate_bps", "noise_figure_db",
                  "node_tx_power_dbm", "ue_tx_power_dbm"):
            kwargs[f] = float(kwargs[f])
        kwargs["bandwidth_hz"] = {k: float(v) for k, v in kwargs["bandwidth_hz"].items()}
        kwargs["carrier_frequency_hz"] = {
            k: float(v) for k, v in kwargs["carrier_frequency_hz"].items()
        }
    except (TypeError, ValueError, AttributeError) as exc:
        raise ConfigError(f"bad numeric config value: {exc}") from None
    cfg = SimConfig.from_dict(kwargs)
    cfg.validate()
    return cfg


def load_scenario(doc: dict, seed: int) -> tuple[Scenario, Optional[list[tuple[int, int]]]]:
    sc = doc["scenario"]
    scen_seed = seed if sc["seed"] is None else int(sc["seed"])
    links = ingest_links(sc["links_csv"]) if sc["links_csv"] else None
    if sc["kind"] == "sites_csv" or sc["sites_csv"]:
        if not sc["sites_csv"]:
            raise ConfigError("scenario.kind sites_csv requires scenario.sites_csv")
        sites = ingest_sites(sc["sites_csv"])
        if sc["ues_csv"]:
            ues = ingest_ues(sc["ues_csv"])
        else:
            xs = [s.x for s in sites]
            ys = [s.y for s in sites]
            n = int(sc["n_ues"] if sc["n_ues"] is not None else len(sites))
            ues = uniform_ues(
                np.random.default_rng(scen_seed), n,
                max(xs) - min(xs), max(ys) - min(ys), x0=min(xs), y0=min(ys),
            )
        return Scenario(sites, ues), links
    scenario = generate_scenario(sc["kind"], sc["params"], scen_seed)
    if sc["ues_csv"]:
        scenario.ue_positions = ingest_ues(sc["ues_csv"])
    return scenario, links


@dataclass
class PreparedRun:
    doc: dict
    config: SimConfig
    topology: Topology
    channel: ChannelState
    traces: Optional[ThzTraceTable]


def prepare(doc: dict) -> PreparedRun:
    """Config document -> validated SimConfig, topology and sampled channel (not yet validated)."""
    cfg = sim_config(doc)
    traces = load_thz_traces(cfg.trace_file) if cfg.trace_file else None
    scenario, links = load_scenario(doc, cfg.seed)
    topo_opts = doc["topology"]
    topology, channel = build_topology(
        scenario.sites,
        scenario.ue_positions,
        cfg,
        rng_streams(cfg.seed)["channel"],
        criterion=topo_opts["criterion"],
        max_range_m=float(topo_opts["max_range_m"]),
        max_parents=int(topo_opts["max_parents"]),
        backhaul_links=links,
        traces=traces,
        node_antenna=doc["channel"]["node_antenna"],
        ue_antenna=doc["channel"]["ue_antenna"],
    )
    return PreparedRun(doc, cfg, topology, channel, traces)
