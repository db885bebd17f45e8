"""KPI aggregation per UE, per IAB node and network-wide, plus trace file output."""

from __future__ import annotations

import csv
import json
import math
import os
import shutil
import tempfile
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .engine import DELIVERED, SimOutput, ue_rates
from .model import Packet
from .transport import DROPPED_NOROUTE, DROPPED_OVERFLOW

PER_UE, PER_NODE, NETWORK = "per_ue", "per_node", "network"
SCOPES = (PER_UE, PER_NODE, NETWORK)

PACKET_COLUMNS = [
    "packet_id", "ue_id", "cell_id", "frame_id", "size_bits",
    "gen_time_s", "arrival_time_s", "delay_s", "status", "path",
]
LOAD_COLUMNS = [
    "node_id", "slot", "access_bits_served", "backhaul_bits_served",
    "du_rx_occupancy_bytes", "mt_tx_occupancy_bytes",
]


def p95_nearest_rank(values: Sequence[float]) -> float:
    if not values:
        return 0.0
    ordered = sorted(values)
    return ordered[max(1, math.ceil(0.95 * len(ordered))) - 1]


def summarize(packets: Iterable[Packet], run_time_s: float, offered_bps: float = 0.0) -> dict:
    generated = delivered = overflow = noroute = 0
    delivered_bits = 0
    delays = []
    for p in packets:
        generated += 1
        if p.status == DELIVERED:
            delivered += 1
            delivered_bits += p.packet_size_bits
            delays.append(p.arrival_time_s - p.gen_time_s)
        elif p.status == DROPPED_OVERFLOW:
            overflow += 1
        elif p.status == DROPPED_NOROUTE:
            noroute += 1
    dropped = overflow + noroute
    return {
        "generated": generated,
        "delivered": delivered,
        "dropped": dropped,
        "dropped_overflow": overflow,
        "dropped_noroute": noroute,
        "undelivered": generated - delivered - dropped,
        "delivered_bits": delivered_bits,
        "offered_bps": float(offered_bps),
        "throughput_bps": delivered_bits / run_time_s if run_time_s > 0 else 0.0,
        "drop_rate": dropped / generated if generated else 0.0,
        "delay_mean_s": float(sum(delays) / len(delays)) if delays else 0.0,
        "delay_median_s": float(np.median(delays)) if delays else 0.0,
        "delay_p95_s": float(p95_nearest_rank(delays)),
    }


def aggregate(output: SimOutput, scope: str = NETWORK) -> dict:
    """KPI report for one scope; per-UE/per-node reports are keyed by id (as str)."""
    run_time = output.run_time_s
    rates = ue_rates(output.config, output.topology)
    if scope == NETWORK:
        rep = summarize(output.packets, run_time, sum(rates.values()))
        rep["queued"] = output.queued
        rep["in_flight"] = output.in_flight
        load = output.load
        rep["load_access_bits_total"] = float(load.access_bits.sum())
        rep["load_backhaul_bits_total"] = float(load.backhaul_bits.sum())
        return rep
    if scope == PER_UE:
        groups: dict[int, list[Packet]] = {u: [] for u in rates}
        for p in output.packets:
            groups[p.ue_id].append(p)
        return {
            str(uid): summarize(groups[uid], run_time, rates[uid]) for uid in sorted(groups)
        }
    if scope == PER_NODE:
        groups = {n.iab_id: [] for n in output.topology.nodes}
        for p in output.packets:
            groups[p.cell_id].append(p)
        offered = {nid: 0.0 for nid in groups}
        for ue in output.topology.ues:
            offered[ue.serving_cell] += rates[ue.ue_id]
        load = output.load
        out = {}
        for nid in sorted(groups):
            rep = summarize(groups[nid], run_time, offered[nid])
            col = load.node_ids.index(nid)
            n = max(load.access_bits.shape[0], 1)
            rep["load_access_bits_per_slot"] = float(load.access_bits[:, col].sum() / n)
            rep["load_backhaul_bits_per_slot"] = float(load.backhaul_bits[:, col].sum() / n)
            rep["mean_du_rx_occupancy_bytes"] = float(load.du_rx_bytes[:, col].sum() / n)
            rep["mean_mt_tx_occupancy_bytes"] = float(load.mt_tx_bytes[:, col].sum() / n)
            out[str(nid)] = rep
        return out
    raise ValueError(f"unknown scope {scope!r}")


def kpi_document(output: SimOutput, metadata: Optional[dict] = None) -> dict:
    """All three scopes plus run provenance.

    The run/debug switch is left out of the echoed config: it never changes
    results, and debug runs are identified by their events.log instead.
    """
    config = output.config.to_dict()
    config.pop("simulation_mode")
    meta = {
        "config": config,
        "n_slots": output.n_slots,
        "run_time_s": output.run_time_s,
        "n_nodes": len(output.topology.nodes),
        "n_donors": len(output.topology.donor_ids),
        "n_ues": len(output.topology.ues),
    }
    if metadata:
        meta.update(metadata)
    return {
        "metadata": meta,
        NETWORK: aggregate(output, NETWORK),
        PER_NODE: aggregate(output, PER_NODE),
        PER_UE: aggregate(output, PER_UE),
    }


def _fmt(x) -> str:
    return "" if x is None else repr(float(x))


def _write_packets(path: Path, packets: Sequence[Packet]) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PACKET_COLUMNS)
        for p in packets:
            delivered = p.status == DELIVERED
            w.writerow([
                p.packet_id, p.ue_id, p.cell_id, p.frame_id, p.packet_size_bits,
                _fmt(p.gen_time_s),
                _fmt(p.arrival_time_s) if delivered else "",
                _fmt(p.arrival_time_s - p.gen_time_s) if delivered else "",
                p.status,
                ">".join(str(n) for n in p.passed_path_list),
            ])


def _write_load(path: Path, output: SimOutput) -> None:
    load = output.load
    cols = [load.access_bits, load.backhaul_bits, load.du_rx_bytes, load.mt_tx_bytes]
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LOAD_COLUMNS)
        lists = [c.tolist() for c in cols]
        for slot in range(load.access_bits.shape[0]):
            rows = [lst[slot] for lst in lists]
            for j, nid in enumerate(load.node_ids):
                w.writerow([nid, slot, *(repr(r[j]) for r in rows)])


def write_traces(output: SimOutput, out_dir, metadata: Optional[dict] = None) -> list[Path]:
    """Write packets.csv, load.csv, kpi.json (and events.log in debug mode) atomically.

    Files are staged in a sibling temporary directory and moved into place only
    after all of them were written; on failure nothing is left behind.
    """
    out_dir = Path(out_dir)
    out_dir.parent.mkdir(parents=True, exist_ok=True)
    stage = Path(tempfile.mkdtemp(prefix=f".{out_dir.name}-", dir=out_dir.parent))
    try:
        names = ["packets.csv", "load.csv", "kpi.json"]
        _write_packets(stage / "packets.csv", output.packets)
        _write_load(stage / "load.csv", output)
        doc = kpi_document(output, metadata)
        (stage / "kpi.json").write_text(
            json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        if output.events:
            (stage / "events.log").write_text("\n".join(output.events) + "\n", encoding="utf-8")
            names.append("events.log")
        out_dir.mkdir(exist_ok=True)
        stale = out_dir / "events.log"
        if "events.log" not in names and stale.exists():
            stale.unlink()
        for name in names:
            os.replace(stage / name, out_dir / name)
        return [out_dir / n for n in names]
    finally:
        shutil.rmtree(stage, ignore_errors=True)
