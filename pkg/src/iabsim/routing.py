"""BAP-like routing: backhaul tree construction, UE attachment, per-hop next-hop selection."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, replace
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .channel import ChannelState
from .errors import ConfigError, RoutingError
from .model import (
    ACCESS,
    BACKHAUL,
    IabNode,
    Link,
    Packet,
    Ue,
    access_link_id,
    backhaul_link_id,
)

MIN_HOP = "min_hop"
MAX_SINR = "max_sinr"
RANDOM = "random"
CRITERIA = (MIN_HOP, MAX_SINR)
DEFAULT_MAX_RANGE_M = 500.0


@dataclass
class BackhaulPlan:
    equipped: list[Link]
    candidates: list[Link]  # in range and closer to a donor, not equipped
    parents: dict[int, list[int]]
    hops: dict[int, float]  # BFS hop distance over the in-range graph


def candidate_graph(nodes: Sequence[IabNode], max_range_m: float) -> dict[int, list[int]]:
    adj: dict[int, list[int]] = {n.iab_id: [] for n in nodes}
    ordered = sorted(nodes, key=lambda n: n.iab_id)
    for i, a in enumerate(ordered):
        for b in ordered[i + 1:]:
            if a.location.distance_2d(b.location) <= max_range_m:
                adj[a.iab_id].append(b.iab_id)
                adj[b.iab_id].append(a.iab_id)
    return adj


def _bfs_hops(adj: Mapping[int, list[int]], donors: Sequence[int]) -> dict[int, float]:
    hops = {n: math.inf for n in adj}
    queue = deque()
    for d in sorted(donors):
        hops[d] = 0
        queue.append(d)
    while queue:
        cur = queue.popleft()
        for nb in adj[cur]:
            if hops[nb] == math.inf:
                hops[nb] = hops[cur] + 1
                queue.append(nb)
    return hops


def build_backhaul_topology(
    nodes: Sequence[IabNode],
    channel: ChannelState,
    criterion: str = MIN_HOP,
    max_range_m: float = DEFAULT_MAX_RANGE_M,
    max_parents: int = 1,
) -> BackhaulPlan:
    """Equip each non-donor node with parent link(s) toward the donor set.

    Both criteria restrict a node's parents to in-range neighbours that are
    strictly closer to a donor in hops, which keeps the result acyclic, and rank
    them by nominal SINR of the uplink (ties: lower id).
    """
    if criterion not in CRITERIA:
        raise ConfigError(f"unknown topology criterion {criterion!r} (valid ids: {', '.join(CRITERIA)})")
    if max_parents < 1:
        raise ConfigError("max_parents must be >= 1")
    donors = [n.iab_id for n in nodes if n.is_donor]
    if not donors:
        raise ConfigError("at least one donor is required")
    adj = candidate_graph(nodes, max_range_m)
    hops = _bfs_hops(adj, donors)
    unreachable = sorted(n for n, h in hops.items() if h == math.inf)
    if unreachable:
        raise RoutingError("unreachable node: " + ", ".join(str(n) for n in unreachable))

    equipped, candidates, parents = [], [], {}
    for nid in sorted(adj):
        if hops[nid] == 0:
            continue
        closer = [p for p in adj[nid] if hops[p] < hops[nid]]
        sinr = {p: channel.node_pair_sinr_db(nid, p) for p in closer}
        if criterion == MIN_HOP:
            ranked = sorted(closer, key=lambda p: (hops[p], -sinr[p], p))
        else:
            ranked = sorted(closer, key=lambda p: (-sinr[p], p))
        chosen = ranked[:max_parents]
        parents[nid] = sorted(chosen)
        for p in sorted(closer):
            lk = Link(backhaul_link_id(nid, p), nid, p, BACKHAUL, path_equipped=p in chosen)
            (equipped if p in chosen else candidates).append(lk)
    return BackhaulPlan(equipped, candidates, parents, hops)


def attach_ues(
    ues: Sequence[Ue], nodes: Sequence[IabNode], channel: ChannelState
) -> tuple[list[Ue], list[Link]]:
    """Attach every UE to the node with the best nominal access SINR (ties: lower id)."""
    if not nodes:
        raise ConfigError("at least one node is required")
    ordered = sorted(n.iab_id for n in nodes)
    out_ues, links = [], []
    for ue in sorted(ues, key=lambda u: u.ue_id):
        best, best_sinr = None, -math.inf
        for nid in ordered:
            s = channel.ue_node_sinr_db(ue.ue_id, nid)
            if best is None or s > best_sinr:
                best, best_sinr = nid, s
        out_ues.append(replace(ue, serving_cell=best))
        links.append(Link(access_link_id(ue.ue_id, best), ue.ue_id, best, ACCESS))
    return out_ues, links


# ---------------------------------------------------------------- next hop


def _min_hop(parents, hops, rng):
    return min(parents, key=lambda lk: (hops.get(lk.to_id, math.inf), -lk.sinr_db, lk.to_id))


def _max_sinr(parents, hops, rng):
    return min(parents, key=lambda lk: (-lk.sinr_db, lk.to_id))


def _random(parents, hops, rng):
    ordered = sorted(parents, key=lambda lk: lk.to_id)
    return ordered[int(rng.integers(len(ordered)))]


PATH_POLICIES: dict[str, Callable] = {MIN_HOP: _min_hop, MAX_SINR: _max_sinr, RANDOM: _random}


def check_path_policy(name: str) -> None:
    if name not in PATH_POLICIES:
        raise ConfigError(
            f"unknown path policy {name!r} (valid ids: {', '.join(sorted(PATH_POLICIES))})"
        )


def select_next_hop(
    node: int,
    packet: Optional[Packet],
    parents: Sequence[Link],
    policy: str,
    hops: Optional[Mapping[int, float]] = None,
    rng: Optional[np.random.Generator] = None,
) -> Link:
    """Pick the parent link that carries ``packet`` out of ``node``.

    ``hops`` maps node id to donor hop distance (needed by min_hop); ``rng`` is
    the policy stream (needed by random).
    """
    if not parents:
        raise RoutingError(f"no route from node {node}")
    check_path_policy(policy)
    if len(parents) == 1:
        return parents[0]
    return PATH_POLICIES[policy](parents, hops or {}, rng)
