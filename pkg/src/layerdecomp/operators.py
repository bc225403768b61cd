"""Discrete layer-potential operators by centroid collocation.

Coefficient vectors hold panel-centroid values. Scalar densities have
length N; vector fields are stored component-major, ``[f_x, f_y, f_z]``,
length 3N (see :func:`stack` / :func:`unstack`). The duality pairing is the
area-weighted dot product, so every adjoint here is an adjoint in that
weighting.

The fundamental solution is ``Gamma(x) = -1 / (4 pi |x|)``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.linalg as sla

from .mesh import SurfaceMesh, require_connected
from .quadrature import QuadratureConfig, pairwise_integrals

log = logging.getLogger(__name__)

FOUR_PI = 4.0 * np.pi


class OperatorError(RuntimeError):
    pass


@dataclass(frozen=True)
class SpaceTag:
    kind: str  # "scalar_panel" | "vector_panel"
    dimension: int

    @classmethod
    def scalar(cls, n: int) -> "SpaceTag":
        return cls("scalar_panel", n)

    @classmethod
    def vector(cls, n: int) -> "SpaceTag":
        return cls("vector_panel", 3 * n)


@dataclass(frozen=True, eq=False)
class DiscreteOperator:
    matrix: np.ndarray
    domain: SpaceTag
    codomain: SpaceTag
    name: str

    def __post_init__(self):
        if self.matrix.shape != (self.codomain.dimension, self.domain.dimension):
            raise OperatorError(
                f"{self.name}: matrix shape {self.matrix.shape} does not match "
                f"{self.codomain.dimension}x{self.domain.dimension}"
            )
        self.matrix.setflags(write=False)

    def __matmul__(self, other):
        if isinstance(other, DiscreteOperator):
            return DiscreteOperator(self.matrix @ other.matrix, other.domain, self.codomain, f"{self.name}*{other.name}")
        return self.matrix @ other

    @property
    def shape(self):
        return self.matrix.shape


def stack(field_: np.ndarray) -> np.ndarray:
    """(N, 3) per-panel vectors -> component-major (3N,) coefficients."""
    return np.asarray(field_, float).T.ravel()


def unstack(vec: np.ndarray) -> np.ndarray:
    """Inverse of :func:`stack` for a single vector."""
    vec = np.asarray(vec)
    return vec.reshape(3, -1).T


def vector_weights(mesh: SurfaceMesh) -> np.ndarray:
    return np.tile(mesh.areas, 3)


# -------------------------------------------------------------- kernels

@dataclass(frozen=True)
class AssemblyConfig:
    quadrature: QuadratureConfig = field(default_factory=QuadratureConfig)
    # test hook: use +grad_x Gamma where grad_y Gamma is meant
    flip_kernel_sign: bool = False


@dataclass(frozen=True, eq=False)
class PanelIntegrals:
    """Raw collocation integrals at centroids: 1/r and (x - y)/r^3."""

    potential: np.ndarray  # (N, N)
    gradient: np.ndarray   # (N, N, 3)


_CACHE: dict = {}


def panel_integrals(mesh: SurfaceMesh, config: AssemblyConfig = AssemblyConfig()) -> PanelIntegrals:
    key = (mesh.fingerprint, config.quadrature)
    if key not in _CACHE:
        n = mesh.n_panels
        log.info("assembling panel integrals for %d panels", n)
        pot, grad = pairwise_integrals(
            mesh.centroids, mesh.panel_vertices, config.quadrature, self_index=np.arange(n)
        )
        pot.setflags(write=False)
        grad.setflags(write=False)
        if len(_CACHE) > 4:
            _CACHE.pop(next(iter(_CACHE)))
        _CACHE[key] = PanelIntegrals(pot, grad)
    return _CACHE[key]


def kernel_gradient(raw_gradient: np.ndarray, wrt: str, flip: bool = False) -> np.ndarray:
    """Panel integrals of grad Gamma(x - y) with respect to ``x`` or ``y``.

    Single place where the sign conventions live:
    grad_x Gamma(x - y) = (x - y) / (4 pi |x - y|^3) = -grad_y Gamma(x - y).
    """
    gx = raw_gradient / FOUR_PI
    if wrt == "x":
        return gx
    if wrt == "y":
        return gx if flip else -gx
    raise ValueError("wrt must be 'x' or 'y'")


# ------------------------------------------------------------ operators

def assemble_S(mesh: SurfaceMesh, config: AssemblyConfig = AssemblyConfig(), check: bool = True) -> DiscreteOperator:
    """Single layer density-to-trace matrix (N x N)."""
    raw = panel_integrals(mesh, config)
    S = -raw.potential / FOUR_PI
    if check:
        WS = mesh.areas[:, None] * S
        sym = 0.5 * (WS + WS.T)
        try:
            np.linalg.cholesky(-sym)
        except np.linalg.LinAlgError as exc:
            raise OperatorError("area-weighted single layer matrix is not negative definite") from exc
    n = mesh.n_panels
    return DiscreteOperator(S, SpaceTag.scalar(n), SpaceTag.scalar(n), "S")


def vector_block(op: DiscreteOperator, name: str | None = None) -> DiscreteOperator:
    """Three-fold block diagonal copy of a scalar operator."""
    n = op.domain.dimension
    return DiscreteOperator(
        np.kron(np.eye(3), op.matrix), SpaceTag.vector(n), SpaceTag.vector(n), name or f"{op.name}_vec"
    )


def assemble_Kstar(mesh: SurfaceMesh, config: AssemblyConfig = AssemblyConfig()) -> DiscreteOperator:
    """Neumann-Poincare operator K* (N x N).

    Realized as the area-weighted transpose of the collocated double layer,
    ``K* = W^{-1} D^T W`` with ``D_ij = int_{T_j} nu_j . grad_y Gamma(c_i - y)``.
    The double layer of a constant is an exact solid angle, so the discrete
    K* has the eigenvalue 1/2 exactly and its eigenvector is the discrete
    equilibrium density. Collocating nu_x . grad_x Gamma directly converges
    only at first order.
    """
    gx = kernel_gradient(panel_integrals(mesh, config).gradient, "x")
    w = mesh.areas
    # D_ji = -nu_i . gx_ji ; K*_ij = (w_j / w_i) D_ji
    D_T = -np.einsum("jik,ik->ij", gx, mesh.normals)
    K = D_T * w[None, :] / w[:, None]
    n = mesh.n_panels
    return DiscreteOperator(K, SpaceTag.scalar(n), SpaceTag.scalar(n), "K*")


def assemble_J(mesh: SurfaceMesh, config: AssemblyConfig = AssemblyConfig()) -> DiscreteOperator:
    """J[f] = -p.v. int grad_y Gamma(x - y) . f(y), vector -> scalar (N x 3N)."""
    gy = kernel_gradient(panel_integrals(mesh, config).gradient, "y", config.flip_kernel_sign)
    J = -np.concatenate([gy[:, :, k] for k in range(3)], axis=1)
    n = mesh.n_panels
    return DiscreteOperator(J, SpaceTag.vector(n), SpaceTag.scalar(n), "J")


def assemble_Jstar(mesh: SurfaceMesh, config: AssemblyConfig = AssemblyConfig()) -> DiscreteOperator:
    """J*[phi] = -p.v. int grad_x Gamma(x - y) phi(y), scalar -> vector (3N x N).

    Collocated from its own kernel, not formed as a transpose of J. Its
    normal part is therefore the collocated normal derivative, which is what
    the two-sided limits of the panelwise single layer converge to; the
    separately assembled K* is the more accurate spectral approximation.
    """
    gx = kernel_gradient(panel_integrals(mesh, config).gradient, "x")
    Js = -np.concatenate([gx[:, :, k] for k in range(3)], axis=0)
    n = mesh.n_panels
    return DiscreteOperator(Js, SpaceTag.scalar(n), SpaceTag.vector(n), "J*")


def _kdiv_blocks(gy: np.ndarray, nu_src: np.ndarray) -> np.ndarray:
    """(3, 3, M, N) blocks of the divergence-free double layer kernel.

    gy : (M, N, 3) panel integrals of grad_y Gamma; nu_src : (N, 3).
    Kernel acting on f: gy (nu.f) - nu (gy.f) + (gy.nu) f.
    """
    gdn = np.einsum("ijk,jk->ij", gy, nu_src)
    out = np.empty((3, 3) + gy.shape[:2])
    for a in range(3):
        for b in range(3):
            out[a, b] = gy[:, :, a] * nu_src[None, :, b] - nu_src[None, :, a] * gy[:, :, b]
            if a == b:
                out[a, b] += gdn
    return out


def assemble_Kdiv(mesh: SurfaceMesh, config: AssemblyConfig = AssemblyConfig()) -> DiscreteOperator:
    """Boundary operator of the divergence-free double layer (3N x 3N)."""
    gy = kernel_gradient(panel_integrals(mesh, config).gradient, "y", config.flip_kernel_sign)
    blocks = _kdiv_blocks(gy, mesh.normals)
    K = np.block([[blocks[a, b] for b in range(3)] for a in range(3)])
    n = mesh.n_panels
    return DiscreteOperator(K, SpaceTag.vector(n), SpaceTag.vector(n), "Kdiv")


def nu_dot(mesh: SurfaceMesh) -> np.ndarray:
    """(N x 3N) matrix of f -> nu . f panelwise."""
    n = mesh.n_panels
    return np.concatenate([np.diag(mesh.normals[:, k]) for k in range(3)], axis=1).reshape(n, 3 * n)


def nu_times(mesh: SurfaceMesh) -> np.ndarray:
    """(3N x N) matrix of phi -> phi nu panelwise."""
    return nu_dot(mesh).T.copy()


class SingleLayerSolver:
    """LU factorization of S reused for every S^{-1} application."""

    def __init__(self, S: DiscreteOperator):
        self.S = S
        self.lu = sla.lu_factor(S.matrix)
        self.n = S.domain.dimension
        self.condition = float(np.linalg.cond(S.matrix))
        if not np.isfinite(self.condition) or self.condition > 1e12:
            raise OperatorError(f"single layer matrix is singular or ill-conditioned (cond {self.condition:.3g})")

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """S^{-1} for scalar (N, ...) or component-major vector (3N, ...) input."""
        rhs = np.asarray(rhs, float)
        if rhs.shape[0] == self.n:
            return sla.lu_solve(self.lu, rhs)
        if rhs.shape[0] == 3 * self.n:
            parts = np.split(rhs, 3, axis=0)
            return np.concatenate([sla.lu_solve(self.lu, p) for p in parts], axis=0)
        raise OperatorError(f"dimension mismatch: {rhs.shape[0]} vs {self.n}")

    def right_inverse(self, B: np.ndarray) -> np.ndarray:
        """B @ S_vec^{-1} for B with 3N columns (or N columns)."""
        B = np.asarray(B, float)
        if B.shape[1] == self.n:
            return sla.lu_solve(self.lu, B.T, trans=1).T
        parts = np.split(B, 3, axis=1)
        return np.concatenate([sla.lu_solve(self.lu, p.T, trans=1).T for p in parts], axis=1)


def build_Apm(S_solver: SingleLayerSolver, J: DiscreteOperator, mesh: SurfaceMesh, sign: int) -> DiscreteOperator:
    """A_+- = (+-1/2 nu. + J) S^{-1}: divergence of the harmonic extension on side +-."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    B = 0.5 * sign * nu_dot(mesh) + J.matrix
    n = mesh.n_panels
    return DiscreteOperator(S_solver.right_inverse(B), SpaceTag.vector(n), SpaceTag.scalar(n), f"A{'+' if sign > 0 else '-'}")


def build_M_generator(mesh: SurfaceMesh, Jstar: DiscreteOperator, sign: int) -> DiscreteOperator:
    """psi -> grad S[psi] restricted from side +- (3N x N); its range is M^+-."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    M = 0.5 * sign * nu_times(mesh) - Jstar.matrix
    n = mesh.n_panels
    return DiscreteOperator(M, SpaceTag.scalar(n), SpaceTag.vector(n), f"gradS{'+' if sign > 0 else '-'}")


def build_Apm_adjoint(S_solver: SingleLayerSolver, Jstar: DiscreteOperator, mesh: SurfaceMesh, sign: int) -> DiscreteOperator:
    """A_+-^* phi = S^{-1}[+-1/2 phi nu + J* phi] (3N x N)."""
    B = 0.5 * sign * nu_times(mesh) + Jstar.matrix
    n = mesh.n_panels
    return DiscreteOperator(S_solver.solve(B), SpaceTag.scalar(n), SpaceTag.vector(n), f"A{'+' if sign > 0 else '-'}*")


def equilibrium_density(Kstar: DiscreteOperator, areas: np.ndarray) -> np.ndarray:
    """Kernel vector of (-1/2 I + K*) normalized to unit total charge."""
    n = Kstar.domain.dimension
    _, s, vt = np.linalg.svd(Kstar.matrix - 0.5 * np.eye(n))
    phi = vt[-1]
    return phi / float(areas @ phi)


def apply_S_Kstar(
    mesh: SurfaceMesh,
    densities: np.ndarray,
    config: AssemblyConfig = AssemblyConfig(),
    block: int = 256,
) -> tuple[np.ndarray, np.ndarray]:
    """``S @ densities`` and ``K* @ densities`` without storing N x N matrices.

    Same discretization as :func:`assemble_S` and :func:`assemble_Kstar`,
    streamed over blocks of collocation points for meshes too large to
    assemble densely.
    """
    phi = np.asarray(densities, float)
    squeeze = phi.ndim == 1
    phi = phi.reshape(mesh.n_panels, -1)
    w = mesh.areas
    S_out = np.zeros_like(phi)
    # K*_ij = (w_j / w_i) D_ji, so K* phi = W^{-1} D^T (W phi)
    DT_out = np.zeros_like(phi)
    wphi = w[:, None] * phi
    for lo in range(0, mesh.n_panels, block):
        rows = np.arange(lo, min(lo + block, mesh.n_panels))
        pot, grad = pairwise_integrals(mesh.centroids[rows], mesh.panel_vertices, config.quadrature,
                                       self_index=rows)
        S_out[rows] = -(pot @ phi) / FOUR_PI
        gx = kernel_gradient(grad, "x")
        D_block = -np.einsum("jik,ik->ji", gx, mesh.normals)  # rows j of D
        DT_out += D_block.T @ wphi[rows]
    K_out = DT_out / w[:, None]
    if squeeze:
        return S_out[:, 0], K_out[:, 0]
    return S_out, K_out


# ------------------------------------------------------------- bundles

class BoundaryOperators:
    """All operators for one mesh and configuration, built lazily."""

    def __init__(self, mesh: SurfaceMesh, config: AssemblyConfig = AssemblyConfig()):
        require_connected(mesh)
        self.mesh = mesh
        self.config = config
        self.n = mesh.n_panels

    @cached_property
    def S(self) -> DiscreteOperator:
        return assemble_S(self.mesh, self.config)

    @cached_property
    def S_solver(self) -> SingleLayerSolver:
        return SingleLayerSolver(self.S)

    @cached_property
    def Kstar(self) -> DiscreteOperator:
        return assemble_Kstar(self.mesh, self.config)

    @cached_property
    def J(self) -> DiscreteOperator:
        return assemble_J(self.mesh, self.config)

    @cached_property
    def Jstar(self) -> DiscreteOperator:
        return assemble_Jstar(self.mesh, self.config)

    @cached_property
    def Kdiv(self) -> DiscreteOperator:
        return assemble_Kdiv(self.mesh, self.config)

    @cached_property
    def A_minus(self) -> DiscreteOperator:
        return build_Apm(self.S_solver, self.J, self.mesh, -1)

    @cached_property
    def A_plus(self) -> DiscreteOperator:
        return build_Apm(self.S_solver, self.J, self.mesh, +1)

    def A(self, sign: int) -> DiscreteOperator:
        return self.A_plus if sign > 0 else self.A_minus

    @cached_property
    def M_gen_minus(self) -> DiscreteOperator:
        return build_M_generator(self.mesh, self.Jstar, -1)

    @cached_property
    def M_gen_plus(self) -> DiscreteOperator:
        return build_M_generator(self.mesh, self.Jstar, +1)

    def M_gen(self, sign: int) -> DiscreteOperator:
        return self.M_gen_plus if sign > 0 else self.M_gen_minus

    @cached_property
    def phi0(self) -> np.ndarray:
        return equilibrium_density(self.Kstar, self.mesh.areas)

    def named(self) -> dict[str, DiscreteOperator]:
        return {
            op.name: op
            for op in (self.S, self.Kstar, self.J, self.Jstar, self.Kdiv, self.A_minus, self.A_plus,
                       self.M_gen_minus, self.M_gen_plus)
        }


# ------------------------------------------------------- off-surface

def _distance_to_surface(points: np.ndarray, mesh: SurfaceMesh, k: int = 8):
    from scipy.spatial import cKDTree

    tree = cKDTree(mesh.centroids)
    k = min(k, mesh.n_panels)
    _, idx = tree.query(points, k=k)
    idx = np.atleast_2d(idx).reshape(len(points), k)
    tris = mesh.panel_vertices[idx]  # (P, k, 3, 3)
    d = _point_triangle_distance(np.broadcast_to(points[:, None, :], idx.shape + (3,)), tris)
    best = np.argmin(d, axis=1)
    rows = np.arange(len(points))
    return d[rows, best], idx[rows, best]


def _point_triangle_distance(x: np.ndarray, tri: np.ndarray) -> np.ndarray:
    a, b, c = tri[..., 0, :], tri[..., 1, :], tri[..., 2, :]
    n = np.cross(b - a, c - a)
    n /= np.linalg.norm(n, axis=-1, keepdims=True)
    h = np.einsum("...k,...k->...", x - a, n)
    xp = x - h[..., None] * n
    inside = np.ones(h.shape, bool)
    for p, q in ((a, b), (b, c), (c, a)):
        inside &= np.einsum("...k,...k->...", np.cross(q - p, xp - p), n) >= 0
    seg = []
    for p, q in ((a, b), (b, c), (c, a)):
        e = q - p
        t = np.clip(np.einsum("...k,...k->...", x - p, e) / np.einsum("...k,...k->...", e, e), 0, 1)
        seg.append(np.linalg.norm(x - (p + t[..., None] * e), axis=-1))
    return np.where(inside, np.abs(h), np.min(seg, axis=0))


OFFSURFACE_KINDS = ("S_scalar", "S_vector", "grad_S", "div_S", "D_div")


def eval_offsurface(
    mesh: SurfaceMesh,
    density: np.ndarray,
    points: np.ndarray,
    which: str,
    config: AssemblyConfig = AssemblyConfig(),
    min_relative_distance: float = 0.1,
) -> np.ndarray:
    """Evaluate a layer potential of a panel density at points off the surface.

    ``which`` selects the single layer of a scalar density (``S_scalar``) or
    of a stacked vector field (``S_vector``), the gradient of the scalar
    single layer (``grad_S``), the divergence of the vector single layer
    (``div_S``) or the divergence-free double layer of a vector field
    (``D_div``).
    """
    if which not in OFFSURFACE_KINDS:
        raise ValueError(f"which must be one of {OFFSURFACE_KINDS}")
    points = np.atleast_2d(np.asarray(points, float))
    dist, nearest = _distance_to_surface(points, mesh)
    too_close = dist < min_relative_distance * mesh.diameters[nearest]
    if np.any(too_close):
        bad = np.flatnonzero(too_close)[:5].tolist()
        raise ValueError(f"points {bad} are closer than {min_relative_distance} panel diameters to the surface")
    pot, grad = pairwise_integrals(points, mesh.panel_vertices, config.quadrature, want_gradient=which != "S_scalar" and which != "S_vector")
    density = np.asarray(density, float)
    if which == "S_scalar":
        return -(pot @ density) / FOUR_PI
    if which == "S_vector":
        return -(pot @ unstack(density)) / FOUR_PI
    gx = kernel_gradient(grad, "x")
    if which == "grad_S":
        return np.einsum("pjk,j->pk", gx, density)
    if which == "div_S":
        return np.einsum("pjk,jk->p", gx, unstack(density))
    gy = kernel_gradient(grad, "y", config.flip_kernel_sign)
    f = unstack(density)
    nu = mesh.normals
    nf = np.einsum("jk,jk->j", nu, f)
    gf = np.einsum("pjk,jk->pj", gy, f)
    gn = np.einsum("pjk,jk->pj", gy, nu)
    return (
        np.einsum("pjk,j->pk", gy, nf)
        - np.einsum("pj,jk->pk", gf, nu)
        + np.einsum("pj,jk->pk", gn, f)
    )


def two_sided_limits(
    mesh: SurfaceMesh,
    density: np.ndarray,
    which: str,
    config: AssemblyConfig = AssemblyConfig(),
    panels: np.ndarray | None = None,
    steps: tuple[float, ...] = (0.025, 0.05, 0.075),
):
    """Interior and exterior limits at panel centroids.

    Probes sit at c -+ t d nu for t in ``steps``, d the panel diameter, and
    are extrapolated to t = 0 with the interpolating polynomial.

    Returns (minus_limit, plus_limit) evaluated at ``panels``.
    """
    if panels is None:
        panels = np.arange(mesh.n_panels)
    t = np.asarray(steps, float)
    if t.ndim != 1 or len(t) < 2 or np.any(t <= 0) or len(np.unique(t)) != len(t):
        raise ValueError("steps must be at least two distinct positive offsets")
    # Lagrange weights for evaluation at zero
    weights = np.array([np.prod([tj / (tj - ti) for tj in t if tj != ti]) for ti in t])
    c = mesh.centroids[panels]
    nu = mesh.normals[panels]
    d = mesh.diameters[panels][:, None]
    out = []
    for side in (-1.0, 1.0):
        limit = 0.0
        for wi, ti in zip(weights, t):
            probe = c + side * ti * d * nu
            limit = limit + wi * eval_offsurface(mesh, density, probe, which, config,
                                                 min_relative_distance=0.5 * t.min())
        out.append(limit)
    return out[0], out[1]


JUMP_RELATIONS = ("normal_derivative", "divergence", "gradient", "Kdiv")


def smooth_test_data(mesh: SurfaceMesh) -> tuple[np.ndarray, np.ndarray]:
    """A smooth scalar density and a smooth vector field sampled at centroids."""
    c = mesh.centroids / (0.5 * np.ptp(mesh.vertices, axis=0).max())
    phi = 1.0 + c[:, 0] + 0.5 * c[:, 1] ** 2
    f = np.stack([1.0 + c[:, 1], c[:, 2] * c[:, 0], 0.3 + c[:, 0] ** 2], axis=1)
    return phi, stack(f)


def _rel(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


def jump_residuals(
    operators: "BoundaryOperators",
    n_probe: int = 60,
    seed: int = 0,
    steps: tuple[float, ...] = (0.025, 0.05, 0.075),
) -> dict[str, float]:
    """Relative errors of the two-sided limits against the on-surface operators.

    Each entry is the worse of the interior and exterior relative errors
    (for the normal derivative, the error of the jump itself), measured on
    ``n_probe`` randomly chosen panels with smooth test data.
    """
    mesh, cfg = operators.mesh, operators.config
    phi, fs = smooth_test_data(mesh)
    f = unstack(fs)
    rng = np.random.default_rng(seed)
    P = np.sort(rng.choice(mesh.n_panels, min(n_probe, mesh.n_panels), replace=False))
    nu = mesh.normals[P]
    out = {}

    lm, lp = two_sided_limits(mesh, phi, "grad_S", cfg, P, steps)
    jump_n = np.einsum("ij,ij->i", lp - lm, nu)
    out["normal_derivative"] = _rel(jump_n, phi[P])
    Js = unstack(operators.Jstar.matrix @ phi)[P]
    half = 0.5 * phi[P, None] * nu
    out["gradient"] = max(_rel(lp, half - Js), _rel(lm, -half - Js))

    lm, lp = two_sided_limits(mesh, fs, "div_S", cfg, P, steps)
    Jf = (operators.J.matrix @ fs)[P]
    half = 0.5 * np.einsum("ij,ij->i", f[P], nu)
    out["divergence"] = max(_rel(lp, half + Jf), _rel(lm, -half + Jf))

    lm, lp = two_sided_limits(mesh, fs, "D_div", cfg, P, steps)
    Kf = unstack(operators.Kdiv.matrix @ fs)[P]
    out["Kdiv"] = max(_rel(lp, Kf - 0.5 * f[P]), _rel(lm, Kf + 0.5 * f[P]))
    return out


# ------------------------------------------------------------- dumps

_DUMP_NAMES = str.maketrans({"*": "star", "+": "_plus", "-": "_minus"})


def dump_filename(name: str) -> str:
    return f"{name.translate(_DUMP_NAMES)}.bin"


def dump_operator(op: DiscreteOperator, path: str | Path) -> None:
    """Raw dump: int64 rows, int64 cols, int64 name length, UTF-8 name, then
    row-major little-endian float64 entries."""
    mat = np.ascontiguousarray(op.matrix, dtype="<f8")
    name = op.name.encode()
    with open(path, "wb") as fh:
        fh.write(np.array([mat.shape[0], mat.shape[1], len(name)], dtype="<i8").tobytes())
        fh.write(name)
        fh.write(mat.tobytes(order="C"))


def load_operator_dump(path: str | Path) -> tuple[str, np.ndarray]:
    raw = Path(path).read_bytes()
    rows, cols, n = np.frombuffer(raw[:24], dtype="<i8")
    name = raw[24:24 + n].decode()
    mat = np.frombuffer(raw[24 + n:], dtype="<f8")
    if mat.size != rows * cols:
        raise ValueError(f"{path}: expected {rows * cols} entries, found {mat.size}")
    return name, mat.reshape(rows, cols).copy()
