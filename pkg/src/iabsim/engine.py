"""Slot loop: traffic, scheduling, SINR realization, transfers, delivery, load recording."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .channel import ChannelState, ThzTraceTable
from .errors import ConfigError, RoutingError, TopologyError
from .model import DEBUG, Packet, SimConfig, Topology, validate_topology
from .routing import check_path_policy, select_next_hop
from .scheduling import BufferView, SlotSchedule, audit_half_duplex, make_scheduler
from .transport import (
    DROPPED_NOROUTE,
    DU_RX,
    MT_TX,
    LinkTxState,
    RlcBuffer,
    enqueue,
    transfer,
)

log = logging.getLogger(__name__)

DELIVERED = "delivered"
INFLIGHT = "inflight"


def rng_streams(seed: int) -> dict[str, np.random.Generator]:
    """Independent named streams derived from one seed."""
    traffic, channel, policy = np.random.SeedSequence(seed).spawn(3)
    return {
        "traffic": np.random.default_rng(traffic),
        "channel": np.random.default_rng(channel),
        "policy": np.random.default_rng(policy),
    }


def ue_rates(config: SimConfig, topology: Topology) -> dict[int, float]:
    n = len(topology.ues)
    default = config.source_rate_bps if config.rate_scope == "per_ue" else (
        config.source_rate_bps / n if n else 0.0
    )
    return {
        u.ue_id: (u.source_rate_bps if u.source_rate_bps is not None else default)
        for u in topology.ues
    }


class TrafficSource:
    """Per-UE packet arrivals: CBR with phase 0, or Poisson."""

    def __init__(self, ue_id: int, rate_bps: float, config: SimConfig,
                 rng: Optional[np.random.Generator] = None):
        self.ue_id = ue_id
        self.rate_bps = rate_bps
        self.size = config.packet_size_bits
        self.slot = config.slot_duration_s
        self.poisson = config.traffic_model == "poisson"
        self.rng = rng
        self.k = 0
        if rate_bps <= 0:
            self.next_time = math.inf
        elif self.poisson:
            self.next_time = self.rng.exponential(self.size / rate_bps)
        else:
            self.interval = self.size / rate_bps
            self.next_time = 0.0

    def pop_until(self, slot: int) -> list[float]:
        """Generation times whose slot index is ``slot`` (or earlier)."""
        out = []
        while self.next_time != math.inf and math.floor(self.next_time / self.slot) <= slot:
            out.append(self.next_time)
            self.k += 1
            if self.poisson:
                self.next_time += self.rng.exponential(self.size / self.rate_bps)
            else:
                # one rounding step, so slot boundaries land where the decimal arithmetic says
                self.next_time = self.k * self.size / self.rate_bps
        return out


def generate_traffic(source: TrafficSource, slot: int) -> list[float]:
    return source.pop_until(slot)


@dataclass
class LoadTrace:
    node_ids: tuple[int, ...]
    access_bits: np.ndarray  # [slot, node]
    backhaul_bits: np.ndarray
    du_rx_bytes: np.ndarray
    mt_tx_bytes: np.ndarray


@dataclass
class SimOutput:
    config: SimConfig
    topology: Topology
    n_slots: int
    packets: list[Packet]
    load: LoadTrace
    link_bits: dict[str, float]
    link_active_slots: dict[str, int]
    queued: int
    in_flight: int
    schedules: Optional[list[SlotSchedule]] = None
    events: list[str] = field(default_factory=list)

    @property
    def run_time_s(self) -> float:
        return self.n_slots * self.config.slot_duration_s

    def status_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for p in self.packets:
            counts[p.status] = counts.get(p.status, 0) + 1
        return counts


class Simulation:
    def __init__(
        self,
        config: SimConfig,
        topology: Topology,
        channel: Optional[ChannelState] = None,
        traces: Optional[ThzTraceTable] = None,
        record_schedules: bool = False,
    ):
        config.validate()
        self.scheduler = make_scheduler(config.scheduler)
        check_path_policy(config.path_policy)
        problems = validate_topology(topology)
        if problems:
            raise TopologyError(problems)
        self.config = config
        self.topology = topology
        self.debug = config.simulation_mode == DEBUG
        self.record_schedules = record_schedules
        streams = rng_streams(config.seed)
        self.policy_rng = streams["policy"]
        if channel is None:
            # same stream, same draws as when the topology was built from this seed
            channel = ChannelState(topology.nodes, topology.ues, config, streams["channel"], traces)
        self.channel = channel
        links = sorted(topology.equipped_access + topology.equipped_backhaul, key=lambda lk: lk.path_id)
        self.link_channel = channel.link_channel(links)
        self.links = links
        self.link_index = self.link_channel.index

        cap = config.buffer_capacity_bytes
        self.du_rx = {n.iab_id: RlcBuffer(DU_RX, n.iab_id, cap) for n in topology.nodes}
        self.mt_tx = {n.iab_id: RlcBuffer(MT_TX, n.iab_id, cap) for n in topology.nodes}
        self.view = BufferView(self.du_rx, self.mt_tx)
        self.tx_state = {lk.path_id: LinkTxState(lk.path_id) for lk in links}
        self.is_donor = {n.iab_id: n.is_donor for n in topology.nodes}

        rates = ue_rates(config, topology)
        ue_seeds = streams["traffic"].spawn(len(topology.ues)) if topology.ues else []
        self.sources = [
            TrafficSource(u.ue_id, rates[u.ue_id], config, ue_seeds[i])
            for i, u in enumerate(sorted(topology.ues, key=lambda u: u.ue_id))
        ]
        self.serving = {u.ue_id: u.serving_cell for u in topology.ues}

        self.n_slots = config.n_slots
        self.packets: list[Packet] = []
        self.node_ids = tuple(sorted(self.du_rx))
        self.node_col = {nid: i for i, nid in enumerate(self.node_ids)}
        shape = (self.n_slots, len(self.node_ids))
        self.load = LoadTrace(
            self.node_ids,
            np.zeros(shape),
            np.zeros(shape),
            np.zeros(shape),
            np.zeros(shape),
        )
        self.link_bits = {lk.path_id: 0.0 for lk in links}
        self.link_active = {lk.path_id: 0 for lk in links}
        self.schedules: list[SlotSchedule] = []
        self.events: list[str] = []

    # -------------------------------------------------------------- steps

    def _generate(self, slot: int) -> None:
        T = self.config.slot_duration_s
        size = self.config.packet_size_bits
        for src in self.sources:
            for t in src.pop_until(slot):
                cell = self.serving[src.ue_id]
                pkt = Packet(len(self.packets), size, math.floor(t / T), src.ue_id, cell, t)
                self.packets.append(pkt)
                enqueue(self.du_rx[cell], pkt, src.ue_id)

    def deliver(self, packet: Packet, donor: int, slot: int) -> Packet:
        packet.arrival_time_s = (slot + 1) * self.config.slot_duration_s
        packet.status = DELIVERED
        if packet.passed_path_list[-1] != donor:
            packet.passed_path_list.append(donor)
        return packet

    def _forward(self, packet: Packet, node: int, slot: int) -> None:
        """Hand a packet that reached ``node`` to its MT-TX buffer (or deliver at a donor)."""
        if self.is_donor[node]:
            self.deliver(packet, node, slot)
            return
        try:
            link = select_next_hop(
                node,
                packet,
                self.topology.parents.get(node, ()),
                self.config.path_policy,
                self.topology.hop_distance,
                self.policy_rng,
            )
        except RoutingError:
            packet.status = DROPPED_NOROUTE
            return
        packet.next_hop = link.to_id
        packet.ready_slot = slot + 1
        enqueue(self.mt_tx[node], packet, link.to_id)

    def step(self, slot: int) -> SlotSchedule:
        cfg = self.config
        self._generate(slot)
        sched = self.scheduler.schedule_slot(self.topology, self.view, slot)
        bad = audit_half_duplex(sched)
        if bad:
            raise AssertionError(f"slot {slot}: {'; '.join(bad)}")

        active_links = sched.access_links + sched.backhaul_links
        order = sorted(self.link_index[lk.path_id] for lk in active_links)
        sinr = self.link_channel.slot_sinr_db(np.array(order, dtype=np.int64), slot)
        rates = self.link_channel.rates_bps(np.array(order, dtype=np.int64), sinr)
        rate_of = {self.links[i].path_id: float(r) for i, r in zip(order, rates)}
        T = cfg.slot_duration_s
        acc_row = self.load.access_bits[slot]
        bh_row = self.load.backhaul_bits[slot]

        for lk in sched.access_links:
            node = lk.to_id
            _, bits = transfer(
                self.tx_state[lk.path_id],
                self.du_rx[node],
                lk.from_id,
                lambda p, node=node: self._forward(p, node, slot),
                rate_of[lk.path_id],
                T,
                slot,
            )
            self.link_bits[lk.path_id] += bits
            self.link_active[lk.path_id] += 1
            acc_row[self.node_col[node]] += bits
        for lk in sched.backhaul_links:
            parent = lk.to_id

            def sink(p, parent=parent):
                p.passed_path_list.append(parent)
                self._forward(p, parent, slot)

            _, bits = transfer(
                self.tx_state[lk.path_id],
                self.mt_tx[lk.from_id],
                parent,
                sink,
                rate_of[lk.path_id],
                T,
                slot,
            )
            self.link_bits[lk.path_id] += bits
            self.link_active[lk.path_id] += 1
            bh_row[self.node_col[parent]] += bits

        for nid, col in self.node_col.items():
            self.load.du_rx_bytes[slot, col] = self.du_rx[nid].occupancy_bytes
            self.load.mt_tx_bytes[slot, col] = self.mt_tx[nid].occupancy_bytes

        if self.debug:
            self._log_slot(sched, order, sinr, rate_of)
        return sched

    def _log_slot(self, sched, order, sinr, rate_of) -> None:
        parts = [f"slot={sched.slot}"]
        parts.append("access=" + ",".join(lk.path_id for lk in sched.access_links))
        parts.append("backhaul=" + ",".join(lk.path_id for lk in sched.backhaul_links))
        parts.append(
            "sinr_db="
            + ",".join(f"{self.links[i].path_id}:{s:.3f}" for i, s in zip(order, sinr))
        )
        parts.append("rate_bps=" + ",".join(f"{k}:{v:.6g}" for k, v in sorted(rate_of.items())))
        parts.append(
            "bh_state=" + ",".join(f"{n}:{s}" for n, s in sorted(sched.backhaul_state.items()))
        )
        parts.append(
            "occ_bytes="
            + ",".join(
                f"{n}:{self.du_rx[n].occupancy_bytes:g}/{self.mt_tx[n].occupancy_bytes:g}"
                for n in self.node_ids
            )
        )
        self.events.append(" ".join(parts))

    def run(self) -> SimOutput:
        if self.debug:
            self.events.append(
                f"start mode=debug seed={self.config.seed} slots={self.n_slots} nodes={len(self.node_ids)} "
                f"ues={len(self.sources)} links={len(self.links)}"
            )
        for slot in range(self.n_slots):
            sched = self.step(slot)
            if self.record_schedules:
                self.schedules.append(sched)
        partial = {
            st.head_packet_id for st in self.tx_state.values() if st.head_packet_id is not None
        }
        queued = in_flight = 0
        for buf in (*self.du_rx.values(), *self.mt_tx.values()):
            for p in buf:
                if p.packet_id in partial:
                    in_flight += 1
                else:
                    queued += 1
        if self.debug:
            self.events.append(f"end queued={queued} in_flight={in_flight}")
        return SimOutput(
            config=self.config,
            topology=self.topology,
            n_slots=self.n_slots,
            packets=self.packets,
            load=self.load,
            link_bits=self.link_bits,
            link_active_slots=self.link_active,
            queued=queued,
            in_flight=in_flight,
            schedules=self.schedules if self.record_schedules else None,
            events=self.events,
        )


def run(
    config: SimConfig,
    topology: Topology,
    channel: Optional[ChannelState] = None,
    traces: Optional[ThzTraceTable] = None,
    record_schedules: bool = False,
) -> SimOutput:
    """Execute a full run; identical inputs give identical outputs."""
    return Simulation(config, topology, channel, traces, record_schedules).run()
