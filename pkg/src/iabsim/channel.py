"""Large-scale channel: LOS, pathloss, shadowing, codebook beam gains, SINR and rate.

mmWave links are computed from geometry (UMi street-canyon style expressions);
sub-THz links read their SINR from imported per-slot traces.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from . import _kernels
from .errors import ConfigError, ParseError
from .model import (
    MMWAVE,
    SUBTHZ,
    AntennaConfig,
    IabNode,
    Link,
    Position,
    SimConfig,
    Ue,
)

log = logging.getLogger(__name__)

THERMAL_NOISE_DBM_HZ = -174.0
MAX_SPECTRAL_EFFICIENCY = 7.4  # b/s/Hz, top NR MCS
SHADOWING_STD_LOS_DB = 4.0
SHADOWING_STD_NLOS_DB = 7.82
BAND_CODE = {MMWAVE: 0, SUBTHZ: 1}


def los_probability(d2d: float) -> float:
    if d2d < 0:
        raise ValueError("distance must be non-negative")
    if d2d <= 18.0:
        return 1.0
    e = math.exp(-d2d / 36.0)
    return (18.0 / d2d) * (1.0 - e) + e


def los_probabilities(d2d: np.ndarray) -> np.ndarray:
    d = np.maximum(np.asarray(d2d, dtype=float), 18.0)
    e = np.exp(-d / 36.0)
    return np.where(np.asarray(d2d) <= 18.0, 1.0, (18.0 / d) * (1.0 - e) + e)


def pathloss_db(fc_ghz: float, d3d: float, los: bool) -> float:
    if fc_ghz <= 0:
        raise ValueError("carrier frequency must be positive")
    if d3d < 1.0:
        log.debug("pathloss distance %.3f m clamped to 1 m", d3d)
        d3d = 1.0
    lg = math.log10(d3d)
    pl_los = 32.4 + 21.0 * lg + 20.0 * math.log10(fc_ghz)
    if los:
        return pl_los
    return max(pl_los, 35.3 * lg + 22.4 + 21.3 * math.log10(fc_ghz))


def beam_gain_db(antenna: AntennaConfig, angular_offset_deg: float) -> float:
    """Two-level codebook pattern: mainlobe inside half the beamwidth, flat sidelobe outside."""
    if antenna.n_elements == 1:
        return 0.0
    main = 10.0 * math.log10(antenna.n_elements)
    if angular_offset_deg <= 180.0 / antenna.codebook_size:
        return main
    return max(main - _kernels.SIDELOBE_DROP_DB, _kernels.SIDELOBE_FLOOR_DBI)


def beam_center_deg(antenna: AntennaConfig, target_deg: float) -> float:
    """Codebook beam (DFT-style, evenly spaced from boresight) closest to a target azimuth."""
    width = 360.0 / antenna.codebook_size
    k = round((target_deg - antenna.boresight_deg) / width) % antenna.codebook_size
    return (antenna.boresight_deg + k * width) % 360.0


def angular_offset_deg(a: float, b: float) -> float:
    d = abs((a - b) % 360.0)
    return 360.0 - d if d > 180.0 else d


def noise_power_dbm(bandwidth_hz: float, noise_figure_db: float) -> float:
    return THERMAL_NOISE_DBM_HZ + noise_figure_db + 10.0 * math.log10(bandwidth_hz)


def snr_db(
    tx_power_dbm: float,
    tx_gain_db: float,
    rx_gain_db: float,
    pathloss: float,
    shadowing: float,
    noise_dbm: float,
) -> float:
    return tx_power_dbm + tx_gain_db + rx_gain_db - pathloss - shadowing - noise_dbm


def link_rate_bps(bandwidth_hz: float, sinr_db: float) -> float:
    if bandwidth_hz <= 0:
        raise ValueError("bandwidth must be positive")
    if sinr_db == -math.inf:
        return 0.0
    se = math.log2(1.0 + 10.0 ** (sinr_db / 10.0))
    return bandwidth_hz * min(se, MAX_SPECTRAL_EFFICIENCY)


def link_rates_bps(bandwidth_hz: np.ndarray, sinr_db: np.ndarray) -> np.ndarray:
    se = np.log2(1.0 + 10.0 ** (np.asarray(sinr_db) / 10.0))
    return bandwidth_hz * np.minimum(se, MAX_SPECTRAL_EFFICIENCY)


# ------------------------------------------------------------------ traces


class ThzTraceTable:
    """Per-slot SINR for sub-THz links; lookups past the end wrap around."""

    def __init__(self, table: dict[str, np.ndarray]):
        self._table = table
        lengths = {len(v) for v in table.values()}
        self.trace_length = max(lengths) if lengths else 0

    def __len__(self):
        return sum(len(v) for v in self._table.values())

    def __contains__(self, link_id: str) -> bool:
        return link_id in self._table

    @property
    def link_ids(self) -> list[str]:
        return sorted(self._table)

    def lookup(self, link_id: str, slot: int) -> float:
        row = self._table[link_id]
        return float(row[slot % len(row)])

    def mean_sinr_db(self, link_id: str) -> float:
        """Mean SINR in the linear domain, reported in dB."""
        row = self._table[link_id]
        return float(10.0 * np.log10(np.mean(10.0 ** (row / 10.0))))

    def require(self, link_ids: Iterable[str]) -> None:
        for lid in link_ids:
            if lid not in self._table:
                raise ConfigError(f"no trace for link {lid}")


def load_thz_traces(path, required_links: Iterable[str] = ()) -> ThzTraceTable:
    path = Path(path)
    rows: dict[str, dict[int, float]] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["link_id", "slot", "sinr_db"]:
            raise ParseError("expected header link_id,slot,sinr_db", line=1, path=str(path))
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != 3:
                raise ParseError(f"expected 3 fields, got {len(rec)}", lineno, str(path))
            try:
                slot = int(rec[1])
                sinr = float(rec[2])
            except ValueError as exc:
                raise ParseError(str(exc), lineno, str(path)) from None
            if slot < 0:
                raise ParseError("negative slot index", lineno, str(path))
            link_rows = rows.setdefault(rec[0].strip(), {})
            if slot in link_rows:
                raise ParseError(f"duplicate slot {slot} for link {rec[0]}", lineno, str(path))
            link_rows[slot] = sinr
    table = {}
    for lid, by_slot in rows.items():
        n = max(by_slot) + 1
        if len(by_slot) != n:
            missing = sorted(set(range(n)) - set(by_slot))[0]
            raise ParseError(f"link {lid} has no row for slot {missing}", path=str(path))
        table[lid] = np.array([by_slot[s] for s in range(n)], dtype=float)
    out = ThzTraceTable(table)
    out.require(required_links)
    return out


# ------------------------------------------------------------------ state


@dataclass
class LinkChannel:
    """Channel arrays for a fixed ordered set of links, ready for per-slot evaluation."""

    link_ids: tuple[str, ...]
    band: np.ndarray  # int codes
    bandwidth_hz: np.ndarray
    noise_mw: np.ndarray
    nominal_sinr_db: np.ndarray
    coupling_mw: np.ndarray  # [victim, aggressor]
    traces: Optional[ThzTraceTable]

    def __post_init__(self):
        self.index = {lid: i for i, lid in enumerate(self.link_ids)}

    def slot_sinr_db(self, active: np.ndarray, slot: int = 0) -> np.ndarray:
        """SINR of each link in ``active`` (sorted ascending indices) when co-scheduled."""
        active = np.asarray(active, dtype=np.int64)
        if active.size == 0:
            return np.zeros(0)
        interf = _kernels.slot_interference(active, self.coupling_mw, self.band)
        out = self.nominal_sinr_db[active] - 10.0 * np.log10(1.0 + interf / self.noise_mw[active])
        if self.traces is not None:
            for k, i in enumerate(active):
                if self.band[i] == BAND_CODE[SUBTHZ]:
                    out[k] = self.traces.lookup(self.link_ids[i], slot)
        return out

    def rates_bps(self, active: np.ndarray, sinr_db: np.ndarray) -> np.ndarray:
        return link_rates_bps(self.bandwidth_hz[np.asarray(active, dtype=np.int64)], sinr_db)


class ChannelState:
    """Seeded large-scale channel for every (transmitter, node) pair of a deployment.

    LOS state and shadowing are drawn once per unordered pair and kept for the run.
    """

    def __init__(
        self,
        nodes: Sequence[IabNode],
        ues: Sequence[Ue],
        config: SimConfig,
        rng: np.random.Generator,
        traces: Optional[ThzTraceTable] = None,
    ):
        self.config = config
        self.traces = traces
        self.nodes = sorted(nodes, key=lambda n: n.iab_id)
        self.ues = sorted(ues, key=lambda u: u.ue_id)
        self._node_idx = {n.iab_id: i for i, n in enumerate(self.nodes)}
        n_nodes = len(self.nodes)
        self._ue_idx = {u.ue_id: n_nodes + i for i, u in enumerate(self.ues)}
        entities = [*self.nodes, *self.ues]
        self.antennas: list[AntennaConfig] = [e.antenna for e in entities]
        self.positions: list[Position] = [e.location for e in entities]
        self.xyz = np.array([[p.x, p.y, p.z] for p in self.positions], dtype=float).reshape(-1, 3)
        self.tx_power_dbm = np.array(
            [config.node_tx_power_dbm] * n_nodes + [config.ue_tx_power_dbm] * len(self.ues)
        )
        n = len(entities)
        d2d = np.hypot(
            self.xyz[:, None, 0] - self.xyz[None, :, 0], self.xyz[:, None, 1] - self.xyz[None, :, 1]
        )
        p_los = los_probabilities(d2d)
        iu = np.triu_indices(n, k=1)
        u = rng.random(len(iu[0]))
        z = rng.standard_normal(len(iu[0]))
        los = np.ones((n, n), dtype=bool)
        los[iu] = u < p_los[iu]
        los.T[iu] = los[iu]
        sigma = np.where(los, SHADOWING_STD_LOS_DB, SHADOWING_STD_NLOS_DB)
        shadow = np.zeros((n, n))
        shadow[iu] = z * sigma[iu]
        shadow.T[iu] = shadow[iu]
        self.los = los
        self.shadowing_db = shadow
        fc_ghz = config.carrier_frequency_hz[MMWAVE] / 1e9
        self.pathloss_db = _kernels.pathloss_matrix(self.xyz, fc_ghz, los) if n else np.zeros((0, 0))
        self.noise_dbm = {
            band: noise_power_dbm(config.bandwidth_hz[band], config.noise_figure_db)
            for band in (MMWAVE, SUBTHZ)
        }
        if n and log.isEnabledFor(logging.DEBUG):
            d3d = np.sqrt(np.sum((self.xyz[:, None, :] - self.xyz[None, :, :]) ** 2, axis=2))
            for a, b in zip(*np.nonzero(np.triu(d3d < 1.0, k=1))):
                log.debug("pathloss distance clamped to 1 m between entities %d and %d", a, b)

    def entity_index(self, kind: str, ident: int) -> int:
        return self._node_idx[ident] if kind == "node" else self._ue_idx[ident]

    def _link_ends(self, link: Link) -> tuple[int, int]:
        src_kind = "node" if link.kind == "backhaul" else "ue"
        return self.entity_index(src_kind, link.from_id), self._node_idx[link.to_id]

    def pair_nominal_sinr_db(self, tx: int, rx: int, band: str = MMWAVE) -> float:
        """Interference-free SNR between entity indices, beams steered at each other."""
        ptx, prx = self.positions[tx], self.positions[rx]
        az_tx, az_rx = ptx.azimuth_to(prx), prx.azimuth_to(ptx)
        g_tx = beam_gain_db(
            self.antennas[tx], angular_offset_deg(beam_center_deg(self.antennas[tx], az_tx), az_tx)
        )
        g_rx = beam_gain_db(
            self.antennas[rx], angular_offset_deg(beam_center_deg(self.antennas[rx], az_rx), az_rx)
        )
        return float(snr_db(
            self.tx_power_dbm[tx],
            g_tx,
            g_rx,
            self.pathloss_db[tx, rx],
            self.shadowing_db[tx, rx],
            self.noise_dbm[band],
        ))

    def node_pair_sinr_db(self, from_node: int, to_node: int) -> float:
        return self.pair_nominal_sinr_db(self._node_idx[from_node], self._node_idx[to_node])

    def ue_node_sinr_db(self, ue_id: int, node_id: int) -> float:
        return self.pair_nominal_sinr_db(self._ue_idx[ue_id], self._node_idx[node_id])

    def nominal_sinr_db(self, link: Link) -> float:
        if link.band == SUBTHZ:
            if self.traces is None or link.path_id not in self.traces:
                raise ConfigError(f"no trace for link {link.path_id}")
            return self.traces.mean_sinr_db(link.path_id)
        return self.pair_nominal_sinr_db(*self._link_ends(link))

    def link_channel(self, links: Sequence[Link]) -> LinkChannel:
        links = list(links)
        ends = [self._link_ends(lk) for lk in links]
        tx = np.array([e[0] for e in ends], dtype=np.int64)
        rx = np.array([e[1] for e in ends], dtype=np.int64)
        band = np.array([BAND_CODE[lk.band] for lk in links], dtype=np.int64)
        if links:
            n_elem = np.array([a.n_elements for a in self.antennas], dtype=np.int64)
            n_beams = np.array([a.codebook_size for a in self.antennas], dtype=np.int64)
            bore = np.array([a.boresight_deg for a in self.antennas], dtype=float)
            loss = self.pathloss_db + self.shadowing_db
            coupling = _kernels.coupling_matrix(
                tx, rx, self.xyz, loss, self.tx_power_dbm.astype(float), n_elem, n_beams, bore
            )
        else:
            coupling = np.zeros((0, 0))
        bw = np.array([self.config.bandwidth_hz[lk.band] for lk in links], dtype=float)
        noise_mw = np.array([10.0 ** (self.noise_dbm[lk.band] / 10.0) for lk in links])
        nominal = np.array([self.nominal_sinr_db(lk) for lk in links], dtype=float)
        return LinkChannel(
            link_ids=tuple(lk.path_id for lk in links),
            band=band,
            bandwidth_hz=bw,
            noise_mw=noise_mw,
            nominal_sinr_db=nominal,
            coupling_mw=coupling,
            traces=self.traces,
        )


def nominal_sinr_db(link: Link, state: ChannelState, config: Optional[SimConfig] = None) -> float:
    return state.nominal_sinr_db(link)


def slot_sinr_db(
    link: Link,
    active_links: Iterable[Link],
    state: ChannelState,
    config: Optional[SimConfig] = None,
    slot: int = 0,
) -> float:
    active = sorted({lk.path_id: lk for lk in active_links}.values(), key=lambda lk: lk.path_id)
    if link.path_id not in {lk.path_id for lk in active}:
        raise ValueError("link must be part of the active set")
    lc = state.link_channel(active)
    idx = np.arange(len(active))
    return float(lc.slot_sinr_db(idx, slot)[lc.index[link.path_id]])
