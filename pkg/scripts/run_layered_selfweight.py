"""Two-material column under self-weight with mixed element orders.

    python3 scripts/run_layered_selfweight.py --n 16 --interface 6
"""
import argparse
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from octsbfem.benchmarks import layered_selfweight
from octsbfem.vtk import write_unstructured, QUAD


@dataclass
class LayeredRun:
    n: int = 16
    interface: int = 6
    stiff_order: int = 1
    soft_order: int = 3
    g: float = 9.81
    threads: int = 1
    out: Path = field(default_factory=lambda: Path("results/layered"))


def run(cfg: LayeredRun):
    r = layered_selfweight(cfg.n, cfg.interface, {1: cfg.stiff_order, 2: cfg.soft_order},
                           cfg.g, cfg.threads)
    s = r["model"].surface
    print(f"cells {len(r['mesh'])}  dofs {r['system'].n_dofs}  "
          f"patterns {dict(sorted(s.pattern_histogram().items()))}")
    print(f"weight {r['weight']:.10g}  reaction {r['reaction_z']:.10g}  "
          f"balance error {r['balance_error']:.2e}  residual {r['report'].residual:.2e}")
    cfg.out.mkdir(parents=True, exist_ok=True)
    U = r["report"].u.reshape(-1, 3)
    write_unstructured(cfg.out / "displacement.vtk", "layered self-weight", s.coords,
                       [list(f.node_ids[:4]) for f in s.faces], QUAD,
                       point_data={"displacement": U})
    print(f"max |u| {np.max(np.linalg.norm(U, axis=1)):.6e}")
    return r


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=16)
    ap.add_argument("--interface", type=int, default=6)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--out", type=Path, default=LayeredRun().out)
    args = ap.parse_args()
    run(LayeredRun(n=args.n, interface=args.interface, threads=args.threads, out=args.out))


if __name__ == "__main__":
    main()
