"""Small hand-built deployments shared by the test modules."""

from __future__ import annotations

import math

from iabsim.channel import pathloss_db
from iabsim.engine import rng_streams
from iabsim.model import Position, SimConfig
from iabsim.scenario import Site, build_topology


def make_topology(nodes, ues=(), parents=None, config=None, **kw):
    """nodes: (id, x, y, is_donor); ues: (x, y); parents: (child, parent) or None for routing."""
    config = config or SimConfig()
    sites = [Site(i, float(x), float(y), 10.0, bool(d)) for i, x, y, d in nodes]
    ue_pos = [Position(float(x), float(y), 1.5) for x, y in ues]
    return build_topology(
        sites, ue_pos, config, rng_streams(config.seed)["channel"], backhaul_links=parents, **kw
    )


def chain(n_nodes, spacing=150.0, ues_on=(), config=None):
    """Donor 0 at the origin, node k at k*spacing feeding node k-1. UEs sit 5 m from their node."""
    nodes = [(k, k * spacing, 0.0, k == 0) for k in range(n_nodes)]
    ues = [(k * spacing, 5.0) for k in ues_on]
    parents = [(k, k - 1) for k in range(1, n_nodes)]
    return make_topology(nodes, ues, parents, config)


def linear_sinr(topo, ch, link, active):
    """Linear SINR of ``link`` with ``active`` co-scheduled, summed power by power.

    Independent of the vectorized kernels: beams are found by scanning the whole
    codebook, gains and pathloss come from the closed forms, and only the sampled
    LOS state and shadowing are read from ``ch``.
    """
    cfg = ch.config
    pos = {("node", n.iab_id): n.location for n in topo.nodes}
    pos.update({("ue", u.ue_id): u.location for u in topo.ues})
    ant = {("node", n.iab_id): n.antenna for n in topo.nodes}
    ant.update({("ue", u.ue_id): u.antenna for u in topo.ues})

    def ends(lk):
        return ("node" if lk.kind == "backhaul" else "ue", lk.from_id), ("node", lk.to_id)

    def bearing(a, b):
        return math.degrees(math.atan2(pos[b].y - pos[a].y, pos[b].x - pos[a].x)) % 360

    def sep(u, v):
        d = abs(u - v) % 360
        return min(d, 360 - d)

    def steer(a, b):
        n = ant[a].codebook_size
        centres = [(ant[a].boresight_deg + k * 360.0 / n) % 360 for k in range(n)]
        return min(centres, key=lambda c: sep(c, bearing(a, b)))

    def gain(a, centre, b):
        e = ant[a].n_elements
        if e == 1:
            return 0.0
        main = 10 * math.log10(e)
        return main if sep(centre, bearing(a, b)) <= 180.0 / ant[a].codebook_size else max(main - 20, -10)

    def rx_mw(t, t_centre, r, r_centre):
        p = cfg.ue_tx_power_dbm if t[0] == "ue" else cfg.node_tx_power_dbm
        i, j = ch.entity_index(*t), ch.entity_index(*r)
        fc = cfg.carrier_frequency_hz["mmwave"] / 1e9
        loss = pathloss_db(fc, pos[t].distance_3d(pos[r]), bool(ch.los[i, j])) + ch.shadowing_db[i, j]
        return 10 ** ((p + gain(t, t_centre, r) + gain(r, r_centre, t) - loss) / 10)

    noise = 10 ** ((-174 + cfg.noise_figure_db + 10 * math.log10(cfg.bandwidth_hz["mmwave"])) / 10)
    t, r = ends(link)
    r_centre = steer(r, t)
    signal = rx_mw(t, steer(t, r), r, r_centre)
    interference = 0.0
    for other in active:
        if other.path_id == link.path_id:
            continue
        ot, orx = ends(other)
        interference += rx_mw(ot, steer(ot, orx), r, r_centre)
    return signal / (noise + interference)
