"""Command line driver: ``layerdecomp <command> [options]``.

Exit codes: 0 success, 1 invariant failure, 2 input or setup error,
3 rank decision without a spectral gap.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .mesh import MeshError, SurfaceMesh, from_spec, load_mesh, topology, validate
from .operators import (
    AssemblyConfig,
    BoundaryOperators,
    OperatorError,
    dump_filename,
    dump_operator,
    jump_residuals,
    smooth_test_data,
    stack,
    unstack,
)
from .quadrature import QuadratureConfig
from .star_metric import asymmetry, star_inner
from .subspaces import VARIANTS, Analysis, SubspaceConfig, circulation_field

log = logging.getLogger("layerdecomp")

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_NO_GAP = 0, 1, 2, 3

JUMP_TOL = 0.02
ANGLE_TOL_DEG = 5.0
RESIDUAL_TOL = 1e-8
ASYMMETRY_TOL = 0.02
SPHERE_ORACLE_TOL = 0.02
ENERGY_TOL = 0.03
BUILTIN_FIELDS = ("normal", "circulation", "zero", "smooth")


class InputError(Exception):
    """Bad command line, config, mesh or field input (exit code 2)."""


@dataclass(frozen=True)
class RunConfig:
    """Everything that determines a run. Every JSON report embeds it."""

    mesh: str | None = None
    gen: str | None = "icosphere:3:1"
    quad_order: int = QuadratureConfig.far_order
    near_ratio: float = QuadratureConfig.near_ratio
    near_subdivision_depth: int = QuadratureConfig.near_subdivision_depth
    rank_tol: float = SubspaceConfig.rank_tol
    intersection_tol: float = SubspaceConfig.intersection_tol
    orthogonality_tol: float = SubspaceConfig.orthogonality_tol
    gap_ratio: float = SubspaceConfig.gap_ratio
    out: str = "layerdecomp_out"
    dump_operators: bool = False
    dump_spectra: bool = False
    variant: str = "potential"
    b1_interior: int | None = None
    b1_exterior: int | None = None
    flip_kernel_sign: bool = False

    def __post_init__(self):
        for name in ("rank_tol", "intersection_tol", "orthogonality_tol"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise InputError(f"{name} must lie in (0, 1), got {v}")
        if self.variant not in VARIANTS:
            raise InputError(f"variant must be one of {VARIANTS}")
        if self.mesh is None and self.gen is None:
            raise InputError("one of mesh or gen is required")
        if (self.b1_interior is None) != (self.b1_exterior is None):
            raise InputError("set both b1_interior and b1_exterior or neither")

    @property
    def mesh_source(self) -> str:
        return f"file:{self.mesh}" if self.mesh else f"gen:{self.gen}"

    def assembly(self) -> AssemblyConfig:
        try:
            quad = QuadratureConfig(
                far_order=self.quad_order,
                near_subdivision_depth=self.near_subdivision_depth,
                near_ratio=self.near_ratio,
            )
        except ValueError as exc:
            raise InputError(str(exc)) from exc
        return AssemblyConfig(quadrature=quad, flip_kernel_sign=self.flip_kernel_sign)

    def subspaces(self) -> SubspaceConfig:
        return SubspaceConfig(self.rank_tol, self.intersection_tol, self.gap_ratio, self.orthogonality_tol)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


def load_config(path: str | None, overrides: dict) -> RunConfig:
    """JSON config file (all keys optional) with command line overrides on top."""
    data = {}
    if path:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise InputError("config file must hold a JSON object")
        known = {f.name for f in dataclasses.fields(RunConfig)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise InputError(f"unknown config keys {unknown}; known keys are {sorted(known)}")
    data.update({k: v for k, v in overrides.items() if v is not None})
    if data.get("mesh"):
        data["gen"] = None
    try:
        return RunConfig(**data)
    except TypeError as exc:
        raise InputError(str(exc)) from exc


def output_dir(config: RunConfig) -> Path:
    out = Path(config.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InputError(f"cannot create output directory {out}: {exc}") from exc
    if not os.access(out, os.W_OK):
        raise InputError(f"output directory {out} is not writable")
    return out


def build_mesh(config: RunConfig) -> SurfaceMesh:
    if config.mesh:
        return load_mesh(config.mesh)
    return validate(from_spec(config.gen))


def build_topology(config: RunConfig, mesh: SurfaceMesh):
    try:
        return topology(mesh, config.b1_interior, config.b1_exterior)
    except ValueError as exc:
        raise InputError(str(exc)) from exc


def provenance(config: RunConfig, mesh: SurfaceMesh) -> dict:
    return {
        "version": __version__,
        "config": config.as_dict(),
        "mesh": {"source": config.mesh_source, "fingerprint": mesh.fingerprint, "n_panels": mesh.n_panels},
    }


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def emit(report: dict, out: Path | None = None, name: str | None = None) -> None:
    text = json.dumps(report, indent=2, default=_json_default)
    print(text)
    if out is not None and name is not None:
        (out / name).write_text(text + "\n")


# ------------------------------------------------------------ field I/O

FIELD_HEADER = ["panel_index", "vx", "vy", "vz"]


def read_field_csv(path: str | Path, n_panels: int) -> np.ndarray:
    """Read an (N, 3) panel field from CSV with header ``panel_index,vx,vy,vz``."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise InputError(f"cannot read field {path}: {exc}") from exc
    if not rows or [h.strip() for h in rows[0]] != FIELD_HEADER:
        raise InputError(f"field file must start with header {','.join(FIELD_HEADER)}")
    body = [r for r in rows[1:] if r]
    if len(body) != n_panels:
        raise InputError(f"field has {len(body)} rows but the mesh has {n_panels} panels")
    try:
        idx = np.array([int(r[0]) for r in body])
        vals = np.array([[float(v) for v in r[1:4]] for r in body])
    except (ValueError, IndexError) as exc:
        raise InputError(f"malformed field row: {exc}") from exc
    if vals.shape != (n_panels, 3):
        raise InputError("each field row needs three components")
    if sorted(idx.tolist()) != list(range(n_panels)):
        raise InputError("panel_index must enumerate 0..N-1 exactly once")
    if not np.all(np.isfinite(vals)):
        raise InputError("field contains NaN or infinite values")
    out = np.empty_like(vals)
    out[idx] = vals
    return out


def write_field_csv(path: str | Path, values: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(FIELD_HEADER)
        for i, v in enumerate(np.asarray(values, float)):
            w.writerow([i, *(repr(float(x)) for x in v)])


def write_vtk(path: str | Path, points: np.ndarray, fields: dict[str, np.ndarray], title: str = "layerdecomp") -> None:
    """Legacy ASCII POLYDATA: one vertex per panel centroid, vector point data."""
    n = len(points)
    lines = ["# vtk DataFile Version 3.0", title[:255], "ASCII", "DATASET POLYDATA", f"POINTS {n} double"]
    lines += [f"{x:.17g} {y:.17g} {z:.17g}" for x, y, z in points]
    lines.append(f"VERTICES {n} {2 * n}")
    lines += [f"1 {i}" for i in range(n)]
    lines.append(f"POINT_DATA {n}")
    for name, vals in fields.items():
        lines.append(f"VECTORS {name} double")
        lines += [f"{x:.17g} {y:.17g} {z:.17g}" for x, y, z in np.asarray(vals, float)]
    Path(path).write_text("\n".join(lines) + "\n")


def builtin_field(name: str, mesh: SurfaceMesh) -> np.ndarray:
    if name == "normal":
        return mesh.normals.copy()
    if name == "circulation":
        return circulation_field(mesh.centroids)
    if name == "zero":
        return np.zeros((mesh.n_panels, 3))
    if name == "smooth":
        return unstack(smooth_test_data(mesh)[1])
    raise InputError(f"unknown builtin field {name!r}; choose from {BUILTIN_FIELDS}")


# -------------------------------------------------------------- checks

def sphere_radius(mesh: SurfaceMesh, rtol: float = 1e-9) -> float | None:
    """Radius if every vertex lies on one origin-centred sphere."""
    r = np.linalg.norm(mesh.vertices, axis=1)
    return float(r.mean()) if np.ptp(r) <= rtol * r.mean() else None


def _check(name: str, value: float, tol: float, passed: bool | None = None, **extra) -> dict:
    ok = bool(value <= tol) if passed is None else bool(passed)
    return {"name": name, "value": float(value), "tolerance": float(tol), "pass": ok, **extra}


def sphere_oracles(analysis: Analysis, radius: float) -> list[dict]:
    """Checks with closed-form answers on a sphere of the given radius."""
    ops, mesh = analysis.ops, analysis.mesh
    nu = stack(mesh.normals)
    a_minus = ops.A_minus.matrix @ nu
    a_plus = ops.A_plus.matrix @ nu
    # interior extension x / R has divergence 3 / R
    div_in = 3.0 / radius
    w = mesh.areas
    wnorm = lambda v: float(np.sqrt(w @ (v * v)))
    energy = star_inner(nu, nu, analysis.metric)
    exact = 12.0 * np.pi * radius
    return [
        _check("A_plus_nu_ratio", wnorm(a_plus) / wnorm(a_minus), SPHERE_ORACLE_TOL),
        _check("A_minus_nu_vs_3_over_R", wnorm(a_minus - div_in) / wnorm(np.full_like(a_minus, div_in)), SPHERE_ORACLE_TOL),
        _check("energy_nu", abs(energy - exact) / exact, ENERGY_TOL, measured=energy, exact=exact),
    ]


def verify_checks(analysis: Analysis) -> list[dict]:
    """Every invariant with measured value, tolerance and verdict."""
    cfg = analysis.config
    checks = []
    for name, err in jump_residuals(analysis.ops).items():
        checks.append(_check(f"jump_{name}", err, JUMP_TOL))
    for sign, label in ((-1, "minus"), (1, "plus")):
        cc = analysis.complement_check(sign)
        checks.append(_check(f"complement_{label}_deg", cc.max_angle_deg, ANGLE_TOL_DEG, **cc.as_dict()))
    ra = analysis.rank_arithmetic()
    checks.append(_check("rank_arithmetic", abs(ra["sum"] - ra["3N"]), 0, passed=ra["holds"], **ra))
    mesh = analysis.mesh
    fields = {"smooth": builtin_field("smooth", mesh)}
    if analysis.betti.genus == 0:
        fields["normal"] = mesh.normals
    for fname, f in fields.items():
        d = analysis.decompose(stack(f))
        checks.append(_check(f"residual_{fname}", d.reconstruction_residual, RESIDUAL_TOL))
        worst = max(abs(v) for v in d.mutual_inners.values())
        checks.append(_check(f"orthogonality_{fname}", worst, cfg.orthogonality_tol, inners=d.mutual_inners))
    checks.append(_check("Kdiv_asymmetry", asymmetry(analysis.ops.Kdiv.matrix, analysis.metric), ASYMMETRY_TOL))
    report = analysis.codimension_report()
    checks.append(_check("betti_verdicts", 0 if report.all_match else 1, 0, passed=report.all_match,
                         verdicts=report.verdicts))
    radius = sphere_radius(mesh)
    if radius is not None:
        checks += sphere_oracles(analysis, radius)
    return checks


# ------------------------------------------------------------ spectra

def spectra(analysis: Analysis) -> dict[str, np.ndarray]:
    """Singular values behind every rank decision and the X eigenvalues."""
    out = {}
    for label, basis in (("M-", analysis.M_minus), ("M+", analysis.M_plus), ("Hdf", analysis.Hdf)):
        out[f"singular_{label}"] = np.asarray(basis.gap.values)
    out["eigen_X-"] = analysis.X_cut(-1).eigenvalues
    out["eigen_X+"] = analysis.X_cut(1).eigenvalues
    out["defect_Hdf_mod_HdfD"] = analysis.quotient.defects
    return out


def write_spectra(out: Path, spec: dict[str, np.ndarray]) -> list[str]:
    names = []
    for key, vals in spec.items():
        name = f"spectrum_{key.replace('+', 'plus').replace('-', 'minus').replace('/', '_')}.csv"
        with open(out / name, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "value"])
            for i, v in enumerate(vals):
                w.writerow([i, repr(float(v))])
        names.append(name)
    return names


def _dumps(config: RunConfig, analysis: Analysis, out: Path) -> dict:
    files = {}
    if config.dump_operators:
        opdir = out / "operators"
        opdir.mkdir(exist_ok=True)
        files["operators"] = []
        for op in analysis.ops.named().values():
            path = opdir / dump_filename(op.name)
            dump_operator(op, path)
            files["operators"].append(str(path))
    if config.dump_spectra:
        files["spectra"] = write_spectra(out, spectra(analysis))
    return files


# ------------------------------------------------------------ commands

def _analysis(config: RunConfig, mesh: SurfaceMesh) -> Analysis:
    return Analysis(BoundaryOperators(mesh, config.assembly()), config.subspaces(), build_topology(config, mesh))


def cmd_mesh_info(config: RunConfig) -> int:
    mesh = build_mesh(config)
    topo = build_topology(config, mesh)
    emit({**provenance(config, mesh), "topology": topo.as_dict(), "summary": mesh.summary(topo)})
    return EXIT_OK


def cmd_verify(config: RunConfig) -> int:
    mesh = build_mesh(config)
    out = output_dir(config)
    analysis = _analysis(config, mesh)
    checks = verify_checks(analysis)
    passed = all(c["pass"] for c in checks)
    report = {**provenance(config, mesh), "checks": checks, "all_pass": passed,
              "files": _dumps(config, analysis, out)}
    emit(report, out, "verify.json")
    return EXIT_OK if passed else EXIT_FAIL


def cmd_betti(config: RunConfig) -> int:
    mesh = build_mesh(config)
    out = output_dir(config)
    analysis = _analysis(config, mesh)
    rep = analysis.codimension_report()
    report = {**provenance(config, mesh), **rep.as_dict(), "files": _dumps(config, analysis, out)}
    emit(report, out, "betti.json")
    if rep.all_match:
        return EXIT_OK
    return EXIT_NO_GAP if rep.any_no_gap else EXIT_FAIL


def cmd_decompose(config: RunConfig, field_source: str) -> int:
    mesh = build_mesh(config)
    if field_source.startswith("builtin:"):
        f = builtin_field(field_source.split(":", 1)[1], mesh)
    else:
        f = read_field_csv(field_source, mesh.n_panels)
    out = output_dir(config)
    analysis = _analysis(config, mesh)
    variants = ["potential"] if config.variant == "potential" else ["potential", "divfree"]
    names = {"potential": ("g_minus", "g_plus", "h_df"), "divfree": ("f_minus", "f_plus", "f_0")}
    diagnostics, vtk_fields, files = {}, {"input": f}, []
    residual_ok = True
    for variant in variants:
        d = analysis.decompose(stack(f), variant)
        residual_ok &= d.reconstruction_residual <= RESIDUAL_TOL
        diag = d.as_dict()
        diag["star_norms"] = {}
        for name, comp in zip(names[variant], (d.g_minus, d.g_plus, d.h_df)):
            vec = unstack(comp)
            write_field_csv(out / f"{name}.csv", vec)
            files.append(f"{name}.csv")
            vtk_fields[name] = vec
            diag["star_norms"][name] = float(np.sqrt(max(star_inner(comp, comp, analysis.metric), 0.0)))
        diag["star_norms"]["input"] = float(np.sqrt(max(star_inner(stack(f), stack(f), analysis.metric), 0.0)))
        diagnostics[variant] = diag
    write_vtk(out / "decomposition.vtk", mesh.centroids, vtk_fields)
    files.append("decomposition.vtk")
    report = {**provenance(config, mesh), "field": field_source, "diagnostics": diagnostics,
              "files": files, "dumps": _dumps(config, analysis, out)}
    emit(report, out, "decompose.json")
    return EXIT_OK if residual_ok else EXIT_FAIL


def cmd_spectrum(config: RunConfig) -> int:
    mesh = build_mesh(config)
    out = output_dir(config)
    analysis = _analysis(config, mesh)
    spec = spectra(analysis)
    files = write_spectra(out, spec)
    if config.dump_operators:
        files += _dumps(dataclasses.replace(config, dump_spectra=False), analysis, out)["operators"]
    summary = {}
    for sign, label in ((-1, "X-"), (1, "X+")):
        cut = analysis.X_cut(sign)
        ev = cut.eigenvalues
        summary[label] = {
            "eigenvalues_head": ev[:8].tolist(),
            "n_at_least": int(np.sum(ev >= 1.0 - config.intersection_tol)),
            "threshold": 1.0 - config.intersection_tol,
            **cut.as_dict(),
        }
    summary["Hdf/HdfD"] = analysis.quotient.as_dict()
    for label, basis in (("M-", analysis.M_minus), ("M+", analysis.M_plus), ("Hdf", analysis.Hdf)):
        summary[label] = basis.gap_report()
    emit({**provenance(config, mesh), "spectra": summary, "files": files}, out, "spectrum.json")
    return EXIT_OK


# ---------------------------------------------------------------- main

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group()
    src.add_argument("--mesh", help="OFF or OBJ surface mesh file")
    src.add_argument("--gen", help="generator spec icosphere:k:r or torus:nu:nv:R:r")
    common.add_argument("--config", help="JSON file with RunConfig keys")
    common.add_argument("--rank-tol", type=float, dest="rank_tol")
    common.add_argument("--quad-order", type=int, dest="quad_order", help="far-field Gauss order")
    common.add_argument("--near-ratio", type=float, dest="near_ratio")
    common.add_argument("--out", help="output directory")
    common.add_argument("--dump-operators", action="store_const", const=True, dest="dump_operators")
    common.add_argument("--dump-spectra", action="store_const", const=True, dest="dump_spectra")
    common.add_argument("--variant", choices=VARIANTS)
    common.add_argument("--b1-split", dest="b1_split", metavar="I,E",
                        help="interior,exterior first Betti numbers for knotted embeddings (default g,g)")
    common.add_argument("--flip-kernel-sign", action="store_const", const=True, dest="flip_kernel_sign",
                        help=argparse.SUPPRESS)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="layerdecomp", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("mesh-info", parents=[common], help="topology summary of a mesh")
    sub.add_parser("verify", parents=[common], help="run every invariant check")
    sub.add_parser("betti", parents=[common], help="codimension report against Betti numbers")
    dec = sub.add_parser("decompose", parents=[common], help="split a panel field into components")
    dec.add_argument("field", help="CSV file, or builtin:normal|circulation|zero|smooth")
    sub.add_parser("spectrum", parents=[common], help="dump spectra behind every rank decision")
    return parser


CONFIG_KEYS = ("mesh", "gen", "rank_tol", "quad_order", "near_ratio", "out", "dump_operators",
               "dump_spectra", "variant", "flip_kernel_sign")


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        overrides = {k: getattr(args, k) for k in CONFIG_KEYS}
        if args.b1_split:
            try:
                overrides["b1_interior"], overrides["b1_exterior"] = (int(v) for v in args.b1_split.split(","))
            except ValueError as exc:
                raise InputError(f"--b1-split expects two integers I,E: {exc}") from exc
        config = load_config(args.config, overrides)
        if args.command == "mesh-info":
            return cmd_mesh_info(config)
        if args.command == "verify":
            return cmd_verify(config)
        if args.command == "betti":
            return cmd_betti(config)
        if args.command == "decompose":
            return cmd_decompose(config, args.field)
        return cmd_spectrum(config)
    except (InputError, MeshError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (OperatorError, np.linalg.LinAlgError) as exc:
        print(f"setup error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
