"""Time the compiled and numpy channel kernels on the same inputs.

    python benchmarks/bench_kernels.py [--entities 200] [--links 400] [--repeat 20]

Compilation happens in a warm-up call that is excluded from the timings.
"""

import argparse
import time

import numpy as np

from iabsim import _kernels as K


def make_inputs(n_entities, n_links, seed=0):
    rng = np.random.default_rng(seed)
    xyz = np.column_stack([rng.random((n_entities, 2)) * 1000, np.full(n_entities, 10.0)])
    los = rng.random((n_entities, n_entities)) < 0.3
    los = np.triu(los, 1)
    los |= los.T
    tx = rng.integers(0, n_entities, n_links).astype(np.int64)
    rx = ((tx + rng.integers(1, n_entities, n_links)) % n_entities).astype(np.int64)
    n_elem = np.full(n_entities, 64, dtype=np.int64)
    n_beams = np.full(n_entities, 16, dtype=np.int64)
    bore = np.zeros(n_entities)
    tx_dbm = np.full(n_entities, 30.0)
    band = np.zeros(n_links, dtype=np.int64)
    active = np.sort(rng.choice(n_links, n_links // 3, replace=False)).astype(np.int64)
    return xyz, los, tx, rx, n_elem, n_beams, bore, tx_dbm, band, active


def best_of(fn, repeat):
    fn()  # warm-up (numba compiles here)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--entities", type=int, default=200)
    ap.add_argument("--links", type=int, default=400)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    if not K.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")

    xyz, los, tx, rx, n_elem, n_beams, bore, tx_dbm, band, active = make_inputs(args.entities, args.links)
    loss = K.pathloss_matrix_np(xyz, 28.0, los)
    coupling = K.coupling_matrix_np(tx, rx, xyz, loss, tx_dbm, n_elem, n_beams, bore)
    cases = {
        "pathloss_matrix": (
            lambda: K.pathloss_matrix_np(xyz, 28.0, los),
            lambda: K.pathloss_matrix_nb(xyz, 28.0, los),
        ),
        "coupling_matrix": (
            lambda: K.coupling_matrix_np(tx, rx, xyz, loss, tx_dbm, n_elem, n_beams, bore),
            lambda: K.coupling_matrix_nb(tx, rx, xyz, loss, tx_dbm, n_elem, n_beams, bore),
        ),
        "slot_interference": (
            lambda: K.slot_interference_np(active, coupling, band),
            lambda: K.slot_interference_nb(active, coupling, band),
        ),
    }
    print(f"entities={args.entities} links={args.links} active={len(active)} repeat={args.repeat}")
    print(f"{'kernel':<20}{'numpy ms':>12}{'numba ms':>12}{'speedup':>10}")
    for name, (f_np, f_nb) in cases.items():
        t_np = best_of(f_np, args.repeat)
        t_nb = best_of(f_nb, args.repeat)
        print(f"{name:<20}{t_np * 1e3:>12.3f}{t_nb * 1e3:>12.3f}{t_np / t_nb:>9.1f}x")


if __name__ == "__main__":
    main()
