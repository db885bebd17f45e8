"""Numeric hot paths: pairwise pathloss, beam-coupled link powers, co-slot interference.

Each kernel has a numba ``@njit`` version and a pure-numpy version with identical
semantics. ``IABSIM_DISABLE_NUMBA=1`` (or numba being absent) selects numpy.
Both are always importable so they can be cross-checked and benchmarked.
"""

import os

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("IABSIM_DISABLE_NUMBA", "0") in ("", "0")

SIDELOBE_DROP_DB = 20.0
SIDELOBE_FLOOR_DBI = -10.0


# ---------------------------------------------------------------- numpy path


def _angdiff_np(a, b):
    d = np.abs(np.mod(a - b, 360.0))
    return np.where(d > 180.0, 360.0 - d, d)


def _beam_center_np(bore, n_beams, target_deg):
    width = 360.0 / n_beams
    k = np.mod(np.round((target_deg - bore) / width), n_beams)
    return np.mod(bore + k * width, 360.0)


def _gain_db_np(n_elem, n_beams, offset):
    main = 10.0 * np.log10(n_elem)
    side = np.maximum(main - SIDELOBE_DROP_DB, SIDELOBE_FLOOR_DBI)
    g = np.where(offset <= 180.0 / n_beams, main, side)
    return np.where(n_elem == 1, 0.0, g)


def pathloss_matrix_np(xyz, fc_ghz, los):
    diff = xyz[:, None, :] - xyz[None, :, :]
    d3d = np.sqrt(np.sum(diff * diff, axis=2))
    d3d = np.maximum(d3d, 1.0)
    lg = np.log10(d3d)
    pl_los = 32.4 + 21.0 * lg + 20.0 * np.log10(fc_ghz)
    pl_nlos = np.maximum(pl_los, 35.3 * lg + 22.4 + 21.3 * np.log10(fc_ghz))
    return np.where(los, pl_los, pl_nlos)


def coupling_matrix_np(tx, rx, xyz, loss_db, tx_dbm, n_elem, n_beams, bore):
    """Received power (mW) at link i's receiver from link j's transmitter."""
    az = np.degrees(np.arctan2(
        xyz[None, :, 1] - xyz[:, None, 1], xyz[None, :, 0] - xyz[:, None, 0]
    ))
    az = np.mod(az, 360.0)
    # each transmitter steers toward its own receiver and vice versa
    tx_center = _beam_center_np(bore[tx], n_beams[tx], az[tx, rx])
    rx_center = _beam_center_np(bore[rx], n_beams[rx], az[rx, tx])
    # [i, j]: victim i, aggressor j
    tx_off = _angdiff_np(tx_center[None, :], az[tx[None, :], rx[:, None]])
    rx_off = _angdiff_np(rx_center[:, None], az[rx[:, None], tx[None, :]])
    g_tx = _gain_db_np(n_elem[tx][None, :], n_beams[tx][None, :], tx_off)
    g_rx = _gain_db_np(n_elem[rx][:, None], n_beams[rx][:, None], rx_off)
    p_db = tx_dbm[tx][None, :] + g_tx + g_rx - loss_db[tx[None, :], rx[:, None]]
    return 10.0 ** (p_db / 10.0)


def slot_interference_np(active, coupling, band):
    """Interference sum per active link; ``active`` must be sorted ascending."""
    sub = coupling[np.ix_(active, active)]
    same = band[active][:, None] == band[active][None, :]
    np.fill_diagonal(same, False)
    # cumsum accumulates left to right, matching the compiled loop bit for bit;
    # masked entries add an exact 0.0
    vals = np.where(same, sub, 0.0)
    if vals.shape[1] == 0:
        return np.zeros(0)
    return np.cumsum(vals, axis=1)[:, -1].copy()


# ---------------------------------------------------------------- numba path

if HAVE_NUMBA:

    @njit(cache=True)
    def _angdiff_nb(a, b):
        d = abs((a - b) % 360.0)
        if d > 180.0:
            d = 360.0 - d
        return d

    @njit(cache=True)
    def _beam_center_nb(bore, n_beams, target_deg):
        width = 360.0 / n_beams
        k = np.round((target_deg - bore) / width) % n_beams
        return (bore + k * width) % 360.0

    @njit(cache=True)
    def _gain_db_nb(n_elem, n_beams, offset):
        if n_elem == 1:
            return 0.0
        main = 10.0 * np.log10(n_elem)
        if offset <= 180.0 / n_beams:
            return main
        return max(main - SIDELOBE_DROP_DB, SIDELOBE_FLOOR_DBI)

    @njit(cache=True)
    def _az_nb(xyz, a, b):
        return np.degrees(np.arctan2(xyz[b, 1] - xyz[a, 1], xyz[b, 0] - xyz[a, 0])) % 360.0

    @njit(cache=True)
    def pathloss_matrix_nb(xyz, fc_ghz, los):
        n = xyz.shape[0]
        out = np.empty((n, n))
        lf = np.log10(fc_ghz)
        for a in range(n):
            for b in range(n):
                dx = xyz[a, 0] - xyz[b, 0]
                dy = xyz[a, 1] - xyz[b, 1]
                dz = xyz[a, 2] - xyz[b, 2]
                d = np.sqrt(dx * dx + dy * dy + dz * dz)
                if d < 1.0:
                    d = 1.0
                lg = np.log10(d)
                pl = 32.4 + 21.0 * lg + 20.0 * lf
                if not los[a, b]:
                    pl = max(pl, 35.3 * lg + 22.4 + 21.3 * lf)
                out[a, b] = pl
        return out

    @njit(cache=True)
    def coupling_matrix_nb(tx, rx, xyz, loss_db, tx_dbm, n_elem, n_beams, bore):
        m = xyz.shape[0]
        az = np.empty((m, m))
        for a in range(m):
            for b in range(m):
                az[a, b] = _az_nb(xyz, a, b)
        n = tx.shape[0]
        tx_center = np.empty(n)
        rx_center = np.empty(n)
        for j in range(n):
            t, r = tx[j], rx[j]
            tx_center[j] = _beam_center_nb(bore[t], n_beams[t], az[t, r])
            rx_center[j] = _beam_center_nb(bore[r], n_beams[r], az[r, t])
        out = np.empty((n, n))
        for i in range(n):
            r = rx[i]
            for j in range(n):
                t = tx[j]
                g_tx = _gain_db_nb(n_elem[t], n_beams[t], _angdiff_nb(tx_center[j], az[t, r]))
                g_rx = _gain_db_nb(n_elem[r], n_beams[r], _angdiff_nb(rx_center[i], az[r, t]))
                out[i, j] = 10.0 ** ((tx_dbm[t] + g_tx + g_rx - loss_db[t, r]) / 10.0)
        return out

    @njit(cache=True)
    def slot_interference_nb(active, coupling, band):
        n = active.shape[0]
        out = np.zeros(n)
        for k in range(n):
            i = active[k]
            acc = 0.0
            for m in range(n):
                j = active[m]
                if m != k and band[j] == band[i]:
                    acc += coupling[i, j]
            out[k] = acc
        return out


if USE_NUMBA:
    pathloss_matrix = pathloss_matrix_nb
    coupling_matrix = coupling_matrix_nb
    slot_interference = slot_interference_nb
else:
    pathloss_matrix = pathloss_matrix_np
    coupling_matrix = coupling_matrix_np
    slot_interference = slot_interference_np

BACKEND = "numba" if USE_NUMBA else "numpy"
