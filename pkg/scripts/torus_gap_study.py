"""Codimension spectra on tori of increasing resolution.

For each torus, prints the smallest defects behind the X-, X+ and
Hdf/HdfD counts, the resulting counts, gap ratios and verdicts.

    python scripts/torus_gap_study.py --sizes 12x8 16x12 24x16
"""
from __future__ import annotations

import argparse
import time
from dataclasses import dataclass

from layerdecomp.mesh import make_torus
from layerdecomp.operators import BoundaryOperators
from layerdecomp.subspaces import Analysis, SubspaceConfig


@dataclass(frozen=True)
class StudyConfig:
    sizes: tuple[tuple[int, int], ...] = ((12, 8), (16, 12), (24, 16))
    R: float = 2.0
    r: float = 0.5
    intersection_tol: float = 0.05
    head: int = 5


def _size(text: str) -> tuple[int, int]:
    nu, nv = text.lower().split("x")
    return int(nu), int(nv)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=_size, nargs="+", default=list(StudyConfig.sizes))
    parser.add_argument("--R", type=float, default=StudyConfig.R)
    parser.add_argument("--r", type=float, default=StudyConfig.r)
    parser.add_argument("--intersection-tol", type=float, default=StudyConfig.intersection_tol)
    args = parser.parse_args()
    cfg = StudyConfig(tuple(args.sizes), args.R, args.r, args.intersection_tol)
    for nu, nv in cfg.sizes:
        t0 = time.perf_counter()
        mesh = make_torus(nu, nv, cfg.R, cfg.r)
        a = Analysis(BoundaryOperators(mesh), SubspaceConfig(intersection_tol=cfg.intersection_tol))
        report = a.codimension_report()
        print(f"torus {nu}x{nv} (N = {mesh.n_panels})")
        for label, cut in (("X-", a.X_cut(-1)), ("X+", a.X_cut(1)), ("Hdf/HdfD", a.quotient)):
            head = ", ".join(f"{d:.3e}" for d in cut.defects[: cfg.head])
            print(f"  {label:9s} count {cut.count} ratio {cut.ratio:9.3g} verdict {report.verdicts[label]:8s} defects [{head}]")
        print(f"  {time.perf_counter() - t0:.1f} s")


if __name__ == "__main__":
    main()
