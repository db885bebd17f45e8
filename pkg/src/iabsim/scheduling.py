"""Per-slot TDMA link activation under the half-duplex backhaul constraint."""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from typing import Callable, Hashable, Mapping, Optional, Sequence

from .errors import ConfigError
from .model import Link, Topology
from .transport import RlcBuffer

TX, RX, IDLE = "tx", "rx", "idle"


@dataclass
class SlotSchedule:
    slot: int
    access_links: list[Link] = field(default_factory=list)
    backhaul_links: list[Link] = field(default_factory=list)
    access_state: dict[int, str] = field(default_factory=dict)
    backhaul_state: dict[int, str] = field(default_factory=dict)

    @property
    def active_links(self) -> list[Link]:
        return self.access_links + self.backhaul_links


def audit_half_duplex(schedule: SlotSchedule) -> list[str]:
    """Names every node that both transmits and receives on backhaul in the slot."""
    tx = {lk.from_id for lk in schedule.backhaul_links}
    rx = {lk.to_id for lk in schedule.backhaul_links}
    return [f"half-duplex violation at node {n}" for n in sorted(tx & rx)]


def round_robin_next(
    children: Sequence[Hashable], eligible, cursor: Optional[Hashable]
) -> tuple[Optional[Hashable], Optional[Hashable]]:
    """Next eligible child strictly after ``cursor`` in ascending circular order.

    Returns ``(choice, new_cursor)``; the cursor is unchanged when nobody is eligible.
    """
    if not children:
        return None, cursor
    start = 0 if cursor is None else bisect.bisect_right(children, cursor)
    n = len(children)
    for k in range(n):
        c = children[(start + k) % n]
        if c in eligible:
            return c, c
    return None, cursor


class BufferView:
    """Read-only eligibility queries over the per-node buffer pairs."""

    def __init__(self, du_rx: Mapping[int, RlcBuffer], mt_tx: Mapping[int, RlcBuffer]):
        self.du_rx = du_rx
        self.mt_tx = mt_tx

    def ue_ready(self, node: int, ue: int, slot: int) -> bool:
        return self.du_rx[node].ready(ue, slot)

    def child_ready(self, child: int, parent: int, slot: int) -> bool:
        return self.mt_tx[child].ready(parent, slot)


class Scheduler:
    """Donor-rooted traversal shared by all bundled schedulers.

    Parents are visited before descendants. A node already granted as a backhaul
    transmitter by its parent does not receive from its own children that slot.
    Subclasses only decide which eligible child a DU picks on each chain.
    """

    name = "base"

    def pick(self, node: int, chain: str, candidates: Sequence[int], eligible: set[int],
             links: Mapping[int, Link]) -> Optional[int]:
        raise NotImplementedError

    def schedule_slot(self, topology: Topology, buffers: BufferView, slot: int) -> SlotSchedule:
        sched = SlotSchedule(slot=slot)
        bh = {n.iab_id: IDLE for n in topology.nodes}
        acc = {n.iab_id: IDLE for n in topology.nodes}
        for node in topology.bfs_order:
            ues = topology.ues_of.get(node, ())
            if ues:
                ready = {u for u in ues if buffers.ue_ready(node, u, slot)}
                if ready:
                    links = {u: topology.access_link[u] for u in ues}
                    ue = self.pick(node, "access", ues, ready, links)
                    if ue is not None:
                        sched.access_links.append(links[ue])
                        acc[node] = RX
            if bh[node] == TX:
                continue
            child_links = topology.children.get(node, ())
            if not child_links:
                continue
            by_child = {lk.from_id: lk for lk in child_links}
            kids = sorted(by_child)
            ready = {
                c for c in kids if bh[c] == IDLE and buffers.child_ready(c, node, slot)
            }
            if ready:
                c = self.pick(node, "backhaul", kids, ready, by_child)
                if c is not None:
                    sched.backhaul_links.append(by_child[c])
                    bh[node] = RX
                    bh[c] = TX
        sched.access_state = acc
        sched.backhaul_state = bh
        return sched


class RoundRobinScheduler(Scheduler):
    name = "round_robin"

    def __init__(self):
        self.cursors: dict[tuple[int, str], Optional[int]] = {}

    def pick(self, node, chain, candidates, eligible, links):
        key = (node, chain)
        choice, self.cursors[key] = round_robin_next(candidates, eligible, self.cursors.get(key))
        return choice


class MaxNominalSinrScheduler(Scheduler):
    """Greedy: the eligible child whose link has the best nominal SINR (ties: lower id)."""

    name = "max_nominal_sinr"

    def pick(self, node, chain, candidates, eligible, links):
        best = None
        for c in candidates:
            if c in eligible and (best is None or links[c].sinr_db > links[best].sinr_db):
                best = c
        return best


def schedule_slot(
    topology: Topology, buffers: BufferView, policy: Scheduler, slot: int
) -> SlotSchedule:
    return policy.schedule_slot(topology, buffers, slot)


SCHEDULERS: dict[str, Callable[[], Scheduler]] = {
    RoundRobinScheduler.name: RoundRobinScheduler,
    MaxNominalSinrScheduler.name: MaxNominalSinrScheduler,
}
# policies from the literature that plug in through register_scheduler
RESERVED_SCHEDULERS = ("scaros", "mlr", "safehaul", "sinr_based")


def register_scheduler(name: str, factory: Callable[[], Scheduler]) -> None:
    SCHEDULERS[name] = factory


def make_scheduler(name: str) -> Scheduler:
    try:
        return SCHEDULERS[name]()
    except KeyError:
        valid = ", ".join(sorted(SCHEDULERS))
        if name in RESERVED_SCHEDULERS:
            raise ConfigError(
                f"scheduler {name!r} is not bundled; register it with "
                f"register_scheduler (valid ids: {valid})"
            ) from None
        raise ConfigError(f"unknown scheduler {name!r} (valid ids: {valid})") from None
