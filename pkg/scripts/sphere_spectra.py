"""Sphere spectral study: S and K* on degree-0 and degree-1 harmonics.

Prints, per icosphere level, the relative eigen-residual
||A Y - lam Y||_W / (|lam| ||Y||_W) and the Rayleigh-quotient error for
S (lam = -1/(2n+1)) and K* (lam = 1/(2(2n+1))). Large levels use the
streamed operators and never store an N x N matrix.

    python scripts/sphere_spectra.py --levels 2 3 4
"""
from __future__ import annotations

import argparse
import time
from dataclasses import dataclass

import numpy as np

from layerdecomp.mesh import make_icosphere
from layerdecomp.operators import apply_S_Kstar


@dataclass(frozen=True)
class StudyConfig:
    levels: tuple[int, ...] = (2, 3, 4)
    block: int = 256


ORACLES = {"S_n0": ("S", 0, -1.0), "S_n1": ("S", 1, -1.0 / 3.0), "K_n0": ("K", 0, 0.5), "K_n1": ("K", 1, 1.0 / 6.0)}


def measure(level: int, block: int) -> dict[str, tuple[float, float]]:
    mesh = make_icosphere(level)
    w = mesh.areas
    Y = np.column_stack([np.ones(mesh.n_panels), mesh.normals])
    S, K = apply_S_Kstar(mesh, Y, block=block)
    out = {}
    for name, (op, degree, lam) in ORACLES.items():
        cols = slice(0, 1) if degree == 0 else slice(1, 4)
        AY, Yc = (S if op == "S" else K)[:, cols], Y[:, cols]
        residual = np.sqrt(w @ ((AY - lam * Yc) ** 2).sum(1)) / (abs(lam) * np.sqrt(w @ (Yc ** 2).sum(1)))
        rayleigh = (w @ (AY * Yc).sum(1)) / (w @ (Yc * Yc).sum(1))
        out[name] = (float(residual), float(abs(rayleigh - lam) / abs(lam)))
    return out


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--levels", type=int, nargs="+", default=list(StudyConfig.levels))
    parser.add_argument("--block", type=int, default=StudyConfig.block)
    args = parser.parse_args()
    cfg = StudyConfig(tuple(args.levels), args.block)
    print(f"{'level':>5} {'N':>6} " + " ".join(f"{k + ' res':>11} {k + ' rq':>11}" for k in ORACLES) + "  seconds")
    for level in cfg.levels:
        t0 = time.perf_counter()
        row = measure(level, cfg.block)
        cells = " ".join(f"{r:11.3e} {q:11.3e}" for r, q in row.values())
        print(f"{level:>5} {20 * 4 ** level:>6} {cells}  {time.perf_counter() - t0:7.1f}")


if __name__ == "__main__":
    main()
