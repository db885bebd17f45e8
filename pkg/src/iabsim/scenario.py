"""Site ingestion, synthetic deployment generators, and topology assembly."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .channel import ChannelState, ThzTraceTable, link_rate_bps
from .errors import ConfigError, ParseError
from .model import (
    BACKHAUL,
    MMWAVE,
    SUBTHZ,
    AntennaConfig,
    IabNode,
    Link,
    Position,
    SimConfig,
    Topology,
    Ue,
    backhaul_link_id,
)
from .routing import DEFAULT_MAX_RANGE_M, MIN_HOP, attach_ues, build_backhaul_topology

SITE_HEADER = ["node_id", "x_m", "y_m", "z_m", "is_donor"]
UE_HEADER = ["ue_id", "x_m", "y_m", "z_m"]
LINK_HEADER = ["from_id", "to_id"]
BS_HEIGHT_M = 10.0
UE_HEIGHT_M = 1.5

_TRUE = {"1", "true", "yes", "y", "t"}
_FALSE = {"0", "false", "no", "n", "f"}


@dataclass(frozen=True)
class Site:
    node_id: int
    x: float
    y: float
    z: float
    is_donor: bool

    @property
    def position(self) -> Position:
        return Position(self.x, self.y, self.z)


@dataclass
class Scenario:
    sites: list[Site]
    ue_positions: list[Position] = field(default_factory=list)


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in _TRUE:
        return True
    if t in _FALSE:
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _read_rows(path: Path, header: list[str]):
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        first = next(reader, None)
        if first is None or [h.strip() for h in first] != header:
            raise ParseError(f"expected header {','.join(header)}", 1, str(path))
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(rec)}", lineno, str(path))
            yield lineno, rec


def ingest_sites(path) -> list[Site]:
    path = Path(path)
    sites, seen = [], set()
    for lineno, rec in _read_rows(path, SITE_HEADER):
        try:
            site = Site(int(rec[0]), float(rec[1]), float(rec[2]), float(rec[3]), _parse_bool(rec[4]))
            if not all(math.isfinite(v) for v in (site.x, site.y, site.z)) or site.z <= 0:
                raise ValueError("coordinates must be finite with positive height")
        except ValueError as exc:
            raise ParseError(str(exc), lineno, str(path)) from None
        if site.node_id in seen:
            raise ParseError(f"duplicate node_id: {site.node_id}", lineno, str(path))
        seen.add(site.node_id)
        sites.append(site)
    if not any(s.is_donor for s in sites):
        raise ConfigError(f"{path}: no donor among {len(sites)} sites")
    return sites


def ingest_ues(path) -> list[Position]:
    path = Path(path)
    out: dict[int, Position] = {}
    for lineno, rec in _read_rows(path, UE_HEADER):
        try:
            uid = int(rec[0])
            pos = Position(float(rec[1]), float(rec[2]), float(rec[3]))
        except ValueError as exc:
            raise ParseError(str(exc), lineno, str(path)) from None
        if uid in out:
            raise ParseError(f"duplicate ue_id: {uid}", lineno, str(path))
        out[uid] = pos
    if sorted(out) != list(range(len(out))):
        raise ConfigError(f"{path}: ue_id values must be 0..N-1")
    return [out[i] for i in range(len(out))]


def ingest_links(path) -> list[tuple[int, int]]:
    path = Path(path)
    out = []
    for lineno, rec in _read_rows(path, LINK_HEADER):
        try:
            out.append((int(rec[0]), int(rec[1])))
        except ValueError as exc:
            raise ParseError(str(exc), lineno, str(path)) from None
    return out


def write_sites(path, sites: Sequence[Site]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SITE_HEADER)
        for s in sites:
            w.writerow([s.node_id, repr(s.x), repr(s.y), repr(s.z), int(s.is_donor)])


def write_ues(path, positions: Sequence[Position]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(UE_HEADER)
        for i, p in enumerate(positions):
            w.writerow([i, repr(p.x), repr(p.y), repr(p.z)])


def _positive(params: dict, key: str, default=None, kind=float):
    val = params.get(key, default)
    if val is None:
        raise ConfigError(f"missing scenario parameter {key!r}")
    try:
        val = kind(val)
    except (TypeError, ValueError):
        raise ConfigError(f"scenario parameter {key!r} must be a number") from None
    if not val > 0:
        raise ConfigError(f"scenario parameter {key!r} must be positive")
    return val


def uniform_ues(
    rng, n: int, width: float, height: float, z: float = UE_HEIGHT_M, x0: float = 0.0, y0: float = 0.0
) -> list[Position]:
    xy = rng.random((n, 2)) * np.array([width, height])
    return [Position(x0 + float(x), y0 + float(y), z) for x, y in xy]


def generate_scenario(kind: str, params: Optional[dict] = None, seed: int = 0) -> Scenario:
    """Synthetic deployment; a pure function of ``(kind, params, seed)``.

    manhattan_grid: rows x cols sites ``spacing_m`` apart; site k (row-major from
    the origin corner) is a donor when ``k % donor_every == 0`` (default: only the
    corner). random_uniform: ``n_nodes`` sites in a ``width_m`` x ``height_m`` box,
    the first ``n_donors`` ids being donors. UEs (``n_ues``, or ``ues_per_node``
    per site) are uniform over the deployment's bounding box.
    """
    params = dict(params or {})
    rng = np.random.default_rng(seed)
    bs_h = _positive(params, "bs_height_m", BS_HEIGHT_M)
    ue_h = _positive(params, "ue_height_m", UE_HEIGHT_M)
    if kind == "manhattan_grid":
        rows = _positive(params, "rows", kind=int)
        cols = _positive(params, "cols", kind=int)
        spacing = _positive(params, "spacing_m", 200.0)
        every = _positive(params, "donor_every", rows * cols, kind=int)
        sites = []
        for r in range(rows):
            for c in range(cols):
                k = r * cols + c
                sites.append(Site(k, c * spacing, r * spacing, bs_h, k % every == 0))
        width, height = (cols - 1) * spacing, (rows - 1) * spacing
    elif kind == "random_uniform":
        n = _positive(params, "n_nodes", kind=int)
        width = _positive(params, "width_m", 500.0)
        height = _positive(params, "height_m", width)
        n_donors = _positive(params, "n_donors", 1, kind=int)
        if n_donors > n:
            raise ConfigError("n_donors exceeds n_nodes")
        xy = rng.random((n, 2)) * np.array([width, height])
        sites = [
            Site(i, float(xy[i, 0]), float(xy[i, 1]), bs_h, i < n_donors) for i in range(n)
        ]
    else:
        raise ConfigError(
            f"unknown scenario kind {kind!r} (valid ids: manhattan_grid, random_uniform)"
        )
    if "n_ues" in params:
        n_ues = int(params["n_ues"])
    else:
        n_ues = int(params.get("ues_per_node", 1)) * len(sites)
    if n_ues < 0:
        raise ConfigError("n_ues must be non-negative")
    return Scenario(sites, uniform_ues(rng, n_ues, width, height, ue_h))


def _antenna(opts: Optional[dict], default: AntennaConfig) -> AntennaConfig:
    if not opts:
        return default
    return AntennaConfig(
        n_elements=int(opts.get("n_elements", default.n_elements)),
        codebook_size=int(opts.get("codebook_size", default.codebook_size)),
        boresight_deg=float(opts.get("boresight_deg", default.boresight_deg)),
    )


def build_topology(
    sites: Sequence[Site],
    ue_positions: Sequence[Position],
    config: SimConfig,
    channel_rng: np.random.Generator,
    *,
    criterion: str = MIN_HOP,
    max_range_m: float = DEFAULT_MAX_RANGE_M,
    max_parents: int = 1,
    backhaul_links: Optional[Sequence[tuple[int, int]]] = None,
    traces: Optional[ThzTraceTable] = None,
    node_antenna: Optional[dict] = None,
    ue_antenna: Optional[dict] = None,
) -> tuple[Topology, ChannelState]:
    """Sample the channel, build the backhaul, attach UEs and annotate link SINR/rate.

    With ``backhaul_links`` the given (child, parent) pairs are equipped as-is and
    no tree is computed, so the result may be invalid and should be validated.
    """
    n_ant = _antenna(node_antenna, AntennaConfig())
    u_ant = _antenna(ue_antenna, AntennaConfig(n_elements=4, codebook_size=4))
    nodes = [
        IabNode(s.node_id, s.position, s.is_donor, antenna=n_ant)
        for s in sorted(sites, key=lambda s: s.node_id)
    ]
    ues = [Ue(i, p, serving_cell=-1, antenna=u_ant) for i, p in enumerate(ue_positions)]
    channel = ChannelState(nodes, ues, config, channel_rng, traces)
    if backhaul_links is None:
        plan = build_backhaul_topology(nodes, channel, criterion, max_range_m, max_parents)
        bh_links = plan.equipped + plan.candidates
    else:
        bh_links = [Link(backhaul_link_id(a, b), a, b, BACKHAUL) for a, b in backhaul_links]
    ues, access = attach_ues(ues, nodes, channel) if nodes else (ues, [])

    def banded(lk: Link) -> Link:
        if config.backhaul_band == SUBTHZ or (
            config.backhaul_band == "mixed" and traces is not None and lk.path_id in traces
        ):
            if lk.path_equipped or (traces is not None and lk.path_id in traces):
                return replace(lk, band=SUBTHZ)
        return lk

    links = []
    for lk in [*(banded(b) for b in bh_links), *access]:
        try:
            sinr = channel.nominal_sinr_db(lk)
        except KeyError:  # dangling endpoint, reported by validate_topology
            links.append(lk)
            continue
        rate = link_rate_bps(config.bandwidth_hz[lk.band], sinr)
        links.append(replace(lk, sinr_db=sinr, path_rate_bps=rate))
    links.sort(key=lambda lk: (lk.kind, lk.path_id))
    return Topology(tuple(nodes), tuple(ues), tuple(links)), channel
