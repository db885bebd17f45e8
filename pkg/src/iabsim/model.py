"""Domain entities and the validated deployment topology."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, fields
from functools import cached_property
from typing import Any, Iterable, Optional

from .errors import ConfigError

ACCESS = "access"
BACKHAUL = "backhaul"
MMWAVE = "mmwave"
SUBTHZ = "subthz"

LINK_KINDS = (ACCESS, BACKHAUL)
BANDS = (MMWAVE, SUBTHZ)


@dataclass(frozen=True)
class Position:
    x: float
    y: float
    z: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.x, self.y, self.z)):
            raise ValueError(f"non-finite coordinates: {self}")

    def distance_2d(self, other: Position) -> float:
        return math.hypot(self.x - other.x, self.y - other.y)

    def distance_3d(self, other: Position) -> float:
        return math.sqrt(
            (self.x - other.x) ** 2 + (self.y - other.y) ** 2 + (self.z - other.z) ** 2
        )

    def azimuth_to(self, other: Position) -> float:
        """Azimuth of ``other`` seen from here, degrees in [0, 360)."""
        return math.degrees(math.atan2(other.y - self.y, other.x - self.x)) % 360.0


@dataclass(frozen=True)
class AntennaConfig:
    n_elements: int = 64
    codebook_size: int = 16
    boresight_deg: float = 0.0

    def __post_init__(self):
        if self.n_elements < 1 or self.codebook_size < 1:
            raise ValueError("antenna needs at least one element and one beam")


@dataclass(frozen=True)
class IabNode:
    iab_id: int
    location: Position
    is_donor: bool = False
    cell_id: Optional[int] = None
    antenna: AntennaConfig = field(default_factory=AntennaConfig)

    def __post_init__(self):
        if self.cell_id is None:
            object.__setattr__(self, "cell_id", self.iab_id)
        if self.location.z <= 0:
            raise ValueError(f"base station {self.iab_id} must have positive height")


@dataclass(frozen=True)
class Ue:
    ue_id: int
    location: Position
    serving_cell: int
    source_rate_bps: Optional[float] = None  # None: taken from SimConfig
    antenna: AntennaConfig = field(
        default_factory=lambda: AntennaConfig(n_elements=4, codebook_size=4)
    )

    def __post_init__(self):
        if self.source_rate_bps is not None and self.source_rate_bps < 0:
            raise ValueError("source rate must be non-negative")


def backhaul_link_id(from_id: int, to_id: int) -> str:
    return f"bh-{from_id}-{to_id}"


def access_link_id(ue_id: int, node_id: int) -> str:
    return f"ac-{ue_id}-{node_id}"


@dataclass(frozen=True)
class Link:
    path_id: str
    from_id: int
    to_id: int
    kind: str
    band: str = MMWAVE
    sinr_db: float = float("nan")
    path_rate_bps: float = 0.0
    path_equipped: bool = True

    def __post_init__(self):
        if self.kind not in LINK_KINDS:
            raise ValueError(f"unknown link kind {self.kind!r}")
        if self.band not in BANDS:
            raise ValueError(f"unknown band {self.band!r}")
        if self.path_rate_bps < 0:
            raise ValueError("path rate must be non-negative")


class Packet:
    __slots__ = (
        "packet_id",
        "packet_size_bits",
        "frame_id",
        "ue_id",
        "cell_id",
        "gen_time_s",
        "arrival_time_s",
        "passed_path_list",
        "status",
        "ready_slot",
        "next_hop",
    )

    def __init__(
        self,
        packet_id: int,
        packet_size_bits: int,
        frame_id: int,
        ue_id: int,
        cell_id: int,
        gen_time_s: float,
    ):
        self.packet_id = packet_id
        self.packet_size_bits = packet_size_bits
        self.frame_id = frame_id
        self.ue_id = ue_id
        self.cell_id = cell_id
        self.gen_time_s = gen_time_s
        self.arrival_time_s: Optional[float] = None
        self.passed_path_list: list[int] = [cell_id]
        self.status = "inflight"
        # first slot in which the packet may be served from its current queue
        self.ready_slot = frame_id + 1
        self.next_hop: Optional[int] = None

    @property
    def delay_s(self) -> Optional[float]:
        if self.arrival_time_s is None:
            return None
        return self.arrival_time_s - self.gen_time_s

    def __repr__(self):
        return (
            f"Packet(id={self.packet_id}, ue={self.ue_id}, gen={self.gen_time_s:.6g}, "
            f"status={self.status}, path={self.passed_path_list})"
        )


@dataclass(frozen=True)
class Topology:
    nodes: tuple[IabNode, ...]
    ues: tuple[Ue, ...]
    links: tuple[Link, ...]

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "ues", tuple(self.ues))
        object.__setattr__(self, "links", tuple(self.links))

    @cached_property
    def node_by_id(self) -> dict[int, IabNode]:
        return {n.iab_id: n for n in self.nodes}

    @cached_property
    def ue_by_id(self) -> dict[int, Ue]:
        return {u.ue_id: u for u in self.ues}

    @cached_property
    def link_by_id(self) -> dict[str, Link]:
        return {lk.path_id: lk for lk in self.links}

    @cached_property
    def donor_ids(self) -> tuple[int, ...]:
        return tuple(sorted(n.iab_id for n in self.nodes if n.is_donor))

    @cached_property
    def equipped_backhaul(self) -> tuple[Link, ...]:
        return tuple(
            lk for lk in self.links if lk.kind == BACKHAUL and lk.path_equipped
        )

    @cached_property
    def equipped_access(self) -> tuple[Link, ...]:
        return tuple(lk for lk in self.links if lk.kind == ACCESS and lk.path_equipped)

    @cached_property
    def parents(self) -> dict[int, tuple[Link, ...]]:
        """Equipped uplink parent links of every node, sorted by parent id."""
        out: dict[int, list[Link]] = {n.iab_id: [] for n in self.nodes}
        for lk in self.equipped_backhaul:
            out.setdefault(lk.from_id, []).append(lk)
        return {k: tuple(sorted(v, key=lambda lk: lk.to_id)) for k, v in out.items()}

    @cached_property
    def children(self) -> dict[int, tuple[Link, ...]]:
        """Equipped backhaul links terminating at each node, sorted by child id."""
        out: dict[int, list[Link]] = {n.iab_id: [] for n in self.nodes}
        for lk in self.equipped_backhaul:
            out.setdefault(lk.to_id, []).append(lk)
        return {k: tuple(sorted(v, key=lambda lk: lk.from_id)) for k, v in out.items()}

    @cached_property
    def access_link(self) -> dict[int, Link]:
        return {lk.from_id: lk for lk in self.equipped_access}

    @cached_property
    def ues_of(self) -> dict[int, tuple[int, ...]]:
        out: dict[int, list[int]] = {n.iab_id: [] for n in self.nodes}
        for lk in self.equipped_access:
            out.setdefault(lk.to_id, []).append(lk.from_id)
        return {k: tuple(sorted(v)) for k, v in out.items()}

    @cached_property
    def hop_distance(self) -> dict[int, float]:
        """Hops to the nearest donor over equipped links; inf when unreachable."""
        return donor_hop_distances(
            [n.iab_id for n in self.nodes],
            self.donor_ids,
            [(lk.from_id, lk.to_id) for lk in self.equipped_backhaul],
        )

    @cached_property
    def bfs_order(self) -> tuple[int, ...]:
        """Donor-rooted order: ascending hop distance, then id."""
        hd = self.hop_distance
        return tuple(sorted((n.iab_id for n in self.nodes), key=lambda i: (hd[i], i)))


def donor_hop_distances(
    node_ids: Iterable[int], donors: Iterable[int], edges: Iterable[tuple[int, int]]
) -> dict[int, float]:
    """Multi-source BFS from the donors over reversed (child, parent) edges."""
    into: dict[int, list[int]] = {}
    for child, parent in edges:
        into.setdefault(parent, []).append(child)
    dist: dict[int, float] = {i: math.inf for i in node_ids}
    queue = deque()
    for d in donors:
        dist[d] = 0
        queue.append(d)
    while queue:
        cur = queue.popleft()
        for child in into.get(cur, ()):
            if dist.get(child, math.inf) == math.inf:
                dist[child] = dist[cur] + 1
                queue.append(child)
    return dist


def _find_cycle(node_ids: list[int], edges: list[tuple[int, int]]) -> Optional[list[int]]:
    succ: dict[int, list[int]] = {i: [] for i in node_ids}
    for a, b in edges:
        succ.setdefault(a, []).append(b)
        succ.setdefault(b, [])
    for v in succ.values():
        v.sort()
    white, grey, black = 0, 1, 2
    color = {i: white for i in succ}
    for root in sorted(succ):
        if color[root] != white:
            continue
        stack = [(root, iter(succ[root]))]
        trail = [root]
        color[root] = grey
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                color[node] = black
                stack.pop()
                trail.pop()
            elif color[nxt] == grey:
                return trail[trail.index(nxt):] + [nxt]
            elif color[nxt] == white:
                color[nxt] = grey
                stack.append((nxt, iter(succ[nxt])))
                trail.append(nxt)
    return None


def _duplicates(ids: Iterable[Any]) -> list[Any]:
    seen, dup = set(), []
    for i in ids:
        if i in seen and i not in dup:
            dup.append(i)
        seen.add(i)
    return dup


def validate_topology(topology: Topology) -> list[str]:
    """Check every topology invariant; an empty list means the topology is valid."""
    problems: list[str] = []
    for kind, ids in (
        ("node", [n.iab_id for n in topology.nodes]),
        ("ue", [u.ue_id for u in topology.ues]),
        ("link", [lk.path_id for lk in topology.links]),
    ):
        problems += [f"duplicate {kind} id: {d}" for d in _duplicates(ids)]

    node_ids = set(topology.node_by_id)
    ue_ids = set(topology.ue_by_id)
    if not topology.donor_ids:
        problems.append("no donor")

    for lk in topology.links:
        if lk.kind == BACKHAUL:
            if lk.from_id == lk.to_id:
                problems.append(f"self loop: {lk.path_id}")
            for end in (lk.from_id, lk.to_id):
                if end not in node_ids:
                    problems.append(f"unknown node {end} in link {lk.path_id}")
            src = topology.node_by_id.get(lk.from_id)
            if lk.path_equipped and src is not None and src.is_donor:
                problems.append(f"donor uplink: {lk.path_id}")
        else:
            if lk.from_id not in ue_ids:
                problems.append(f"unknown ue {lk.from_id} in link {lk.path_id}")
            if lk.to_id not in node_ids:
                problems.append(f"unknown node {lk.to_id} in link {lk.path_id}")

    edges = [
        (lk.from_id, lk.to_id)
        for lk in topology.equipped_backhaul
        if lk.from_id in node_ids and lk.to_id in node_ids and lk.from_id != lk.to_id
    ]
    cycle = _find_cycle(sorted(node_ids), edges)
    if cycle is not None:
        problems.append("cycle: " + " -> ".join(str(c) for c in cycle))

    dist = donor_hop_distances(node_ids, topology.donor_ids, edges)
    for nid in sorted(node_ids):
        if dist[nid] == math.inf:
            problems.append(f"unreachable donor: {nid}")

    per_ue: dict[int, list[Link]] = {u: [] for u in ue_ids}
    for lk in topology.equipped_access:
        per_ue.setdefault(lk.from_id, []).append(lk)
    for ue in sorted(topology.ues, key=lambda u: u.ue_id):
        lks = per_ue.get(ue.ue_id, [])
        if not lks:
            problems.append(f"orphan ue: {ue.ue_id}")
        elif len(lks) > 1:
            problems.append(f"multiple access links for ue: {ue.ue_id}")
        elif lks[0].to_id != ue.serving_cell:
            problems.append(
                f"serving cell mismatch for ue {ue.ue_id}: {ue.serving_cell} vs {lks[0].to_id}"
            )
        if ue.serving_cell not in node_ids:
            problems.append(f"unknown serving cell {ue.serving_cell} for ue {ue.ue_id}")
    return problems


RUN, DEBUG = "run", "debug"


@dataclass
class SimConfig:
    run_time_s: float = 1.0
    slot_duration_s: float = 125e-6
    simulation_mode: str = RUN
    packet_size_bits: int = 12000
    source_rate_bps: float = 40e6
    rate_scope: str = "per_ue"  # or "system": divided equally across UEs
    traffic_model: str = "cbr"  # or "poisson"
    bandwidth_hz: dict = field(default_factory=lambda: {MMWAVE: 400e6, SUBTHZ: 2e9})
    carrier_frequency_hz: dict = field(
        default_factory=lambda: {MMWAVE: 28e9, SUBTHZ: 140e9}
    )
    noise_figure_db: float = 7.0
    node_tx_power_dbm: float = 30.0
    ue_tx_power_dbm: float = 23.0
    buffer_capacity_bytes: int = 5_000_000
    scheduler: str = "round_robin"
    path_policy: str = "min_hop"
    seed: int = 0
    trace_file: Optional[str] = None
    backhaul_band: str = MMWAVE  # mmwave | subthz | mixed

    def __post_init__(self):
        # per-band settings given for one band keep the defaults of the other
        self.bandwidth_hz = {MMWAVE: 400e6, SUBTHZ: 2e9, **(self.bandwidth_hz or {})}
        self.carrier_frequency_hz = {
            MMWAVE: 28e9, SUBTHZ: 140e9, **(self.carrier_frequency_hz or {})
        }

    @property
    def n_slots(self) -> int:
        return int(math.floor(self.run_time_s / self.slot_duration_s + 1e-9))

    def validate(self) -> None:
        if not self.run_time_s > 0:
            raise ConfigError("run_time_s must be > 0")
        if not self.slot_duration_s > 0:
            raise ConfigError("slot_duration_s must be > 0")
        if self.n_slots < 1:
            raise ConfigError("run_time_s shorter than one slot")
        if not self.packet_size_bits > 0:
            raise ConfigError("packet_size_bits must be > 0")
        if self.source_rate_bps < 0:
            raise ConfigError("source_rate_bps must be >= 0")
        if self.simulation_mode not in (RUN, DEBUG):
            raise ConfigError(f"simulation_mode must be one of {RUN}, {DEBUG}")
        if self.rate_scope not in ("per_ue", "system"):
            raise ConfigError("rate_scope must be per_ue or system")
        if self.traffic_model not in ("cbr", "poisson"):
            raise ConfigError("traffic_model must be cbr or poisson")
        if self.buffer_capacity_bytes <= 0:
            raise ConfigError("buffer_capacity_bytes must be > 0")
        if self.backhaul_band not in (MMWAVE, SUBTHZ, "mixed"):
            raise ConfigError("backhaul_band must be mmwave, subthz or mixed")
        if self.backhaul_band != MMWAVE and not self.trace_file:
            raise ConfigError("sub-THz backhaul requires trace_file")
        for band in BANDS:
            if self.bandwidth_hz.get(band, 0) <= 0:
                raise ConfigError(f"bandwidth_hz.{band} must be > 0")
            if self.carrier_frequency_hz.get(band, 0) <= 0:
                raise ConfigError(f"carrier_frequency_hz.{band} must be > 0")

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, data: dict) -> SimConfig:
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**data)
