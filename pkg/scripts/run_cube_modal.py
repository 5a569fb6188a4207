"""Free vibration of the width-8 cube with a split corner cell.

Writes the first 16 frequencies for every (p, h), the relative error of
modes 7-16 against the spectral-element reference table, and the error
against this solver's own finest run (p = 3 on the finest h).

    python3 scripts/run_cube_modal.py --out results/cube
"""
import argparse
import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from octsbfem.assembly import convergence_rate
from octsbfem.benchmarks import CUBE_REFERENCE, run_cube_modal


@dataclass
class CubeSweep:
    orders: tuple = (1, 2, 3)
    h: tuple = (4.0, 2.0, 1.0)
    n_modes: int = 16
    threads: int = 1
    out: Path = field(default_factory=lambda: Path("results/cube"))


def run(cfg: CubeSweep):
    cfg.out.mkdir(parents=True, exist_ok=True)
    runs = {}
    for p in cfg.orders:
        for h in cfg.h:
            r = run_cube_modal(p, h, cfg.n_modes, cfg.threads)
            runs[p, h] = r
            f = r["frequencies"]
            print(f"p={p} h={h:<3g} dofs={r['n_dofs']:<6d} {r['seconds']:6.1f} s  "
                  f"f7={f[6]:.6f} f9={f[8]:.6f}  rigid max {r['rigid_max']:.1e}")
    finest = runs[max(cfg.orders), min(cfg.h)]["frequencies"][6:16]
    with open(cfg.out / "cube_frequencies.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["p", "h", "n_dofs", *(f"f{k}" for k in range(1, cfg.n_modes + 1))])
        for (p, h), r in runs.items():
            w.writerow([p, h, r["n_dofs"], *(f"{x:.12g}" for x in r["frequencies"])])
    print("\nrates over h (table reference | finest own run; the top order uses its two coarser meshes):")
    for p in cfg.orders:
        tab = [runs[p, h]["mean_rel_error"] for h in cfg.h]
        own = [float(np.mean(np.abs(runs[p, h]["frequencies"][6:16] - finest) / finest)) for h in cfg.h]
        own_rate = convergence_rate(cfg.h[:-1], own[:-1]) if p == max(cfg.orders) else convergence_rate(cfg.h, own)
        print(f"  p={p}: {convergence_rate(cfg.h, tab):6.2f} | {own_rate:6.2f}")
    print(f"reference table f7 = {CUBE_REFERENCE[0]}, f9 = {CUBE_REFERENCE[2]}")
    return runs


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=CubeSweep().out)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--h", type=float, nargs="+", default=list(CubeSweep.h))
    args = ap.parse_args()
    run(CubeSweep(h=tuple(args.h), threads=args.threads, out=args.out))


if __name__ == "__main__":
    main()
