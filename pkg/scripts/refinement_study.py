"""Refinement study of the discretization-limited invariants.

For a sequence of meshes, prints jump-relation residuals, complement
angles of Ker A+- against M-+, the top principal cosine between M- and M+,
the K_div asymmetry in the energy metric (full and whitened), and the
orthogonality of the decomposition of a smooth field.

    python scripts/refinement_study.py --gen icosphere:1:1 icosphere:2:1 icosphere:3:1
"""
from __future__ import annotations

import argparse
import time
from dataclasses import dataclass

import numpy as np

from layerdecomp.mesh import from_spec, validate
from layerdecomp.operators import BoundaryOperators, jump_residuals, smooth_test_data
from layerdecomp.star_metric import asymmetry
from layerdecomp.subspaces import Analysis, max_cross_inner, whitened_operator


@dataclass(frozen=True)
class StudyConfig:
    specs: tuple[str, ...] = ("icosphere:1:1", "icosphere:2:1", "icosphere:3:1")
    jumps: bool = True


def study(spec: str, jumps: bool) -> dict[str, float]:
    mesh = validate(from_spec(spec))
    a = Analysis(BoundaryOperators(mesh))
    row = {"N": mesh.n_panels}
    if jumps:
        row["jump_max"] = max(jump_residuals(a.ops).values())
    row["angle_minus"] = a.complement_check(-1).max_angle_deg
    row["angle_plus"] = a.complement_check(1).max_angle_deg
    row["cos_M-_M+"] = max_cross_inner(a.M_minus, a.M_plus, a.metric)
    row["asym"] = asymmetry(a.ops.Kdiv.matrix, a.metric)
    Kw = whitened_operator(a.ops.Kdiv, a.metric)
    row["asym_white"] = float(np.linalg.norm(Kw - Kw.T, 2) / np.linalg.norm(Kw, 2))
    d = a.decompose(smooth_test_data(mesh)[1])
    row["inner_max"] = max(abs(v) for v in d.mutual_inners.values())
    return row


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--gen", nargs="+", default=list(StudyConfig.specs))
    parser.add_argument("--no-jumps", action="store_true", help="skip the off-surface jump checks")
    args = parser.parse_args()
    cfg = StudyConfig(tuple(args.gen), not args.no_jumps)
    header = None
    for spec in cfg.specs:
        t0 = time.perf_counter()
        row = study(spec, cfg.jumps)
        if header is None:
            header = list(row)
            print(f"{'mesh':>22} " + " ".join(f"{h:>11}" for h in header) + "  seconds")
        cells = " ".join(f"{row[h]:11d}" if isinstance(row[h], int) else f"{row[h]:11.4g}" for h in header)
        print(f"{spec:>22} {cells}  {time.perf_counter() - t0:7.1f}")


if __name__ == "__main__":
    main()
