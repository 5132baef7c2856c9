"""Rough FFT bin + restricted MUSIC against a full-grid MUSIC search on the same data."""

import sys
from dataclasses import replace

from coopsense.config import load_experiment
from coopsense.harness import angle_benchmark


def main(n_rx=16, n_tx=16, trials=5):
    exp = load_experiment()
    scene = exp.scene
    scene = replace(scene, array=replace(scene.array, n_rx_pbs=n_rx, n_tx_per_tbs=n_tx))
    rows, reps = angle_benchmark(scene, 0.01, trials=trials, seed=exp.seed)
    for r, rep in zip(rows, reps):
        print(f"trial {r.trial}: restricted ({r.aoa_proposed:+.2f}, {r.aod_proposed:+.2f}) in "
              f"{rep.eps_aoa}x{rep.eps_aod} cells, full ({r.aoa_full:+.2f}, {r.aod_full:+.2f}) in "
              f"{rep.gamma_aoa}x{rep.gamma_aod}; same cell: {r.identical}; "
              f"{r.time_proposed:.3f} s vs {r.time_full:.3f} s")
    tp = sum(r.time_proposed for r in rows)
    tf = sum(r.time_full for r in rows)
    print(f"\npredicted operation ratio {reps[0].ratio:.2f}, measured wall-clock ratio {tf / tp:.2f}")


if __name__ == "__main__":
    main(*(int(a) for a in sys.argv[1:4]))
