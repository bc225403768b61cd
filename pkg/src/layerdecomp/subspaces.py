"""Discrete subspaces of surface vector fields and the two decompositions.

Subspaces live in the 3N-dimensional space of panelwise vector fields with
the energy metric of :mod:`layerdecomp.star_metric`:

* ``M-`` / ``M+``: ranges of the gradient-trace generators,
* ``Hdf-`` / ``Hdf+``: kernels of the divergence maps ``A-`` / ``A+``,
  ``Hdf`` the kernel of both,
* ``Hdrf-`` / ``Hdrf+``: kernels of ``K_div - 1/2`` / ``K_div + 1/2``,
* ``X-`` / ``X+``: fields of ``Hdf`` that ``K_div`` maps to ``+1/2`` / ``-1/2``
  times themselves,
* ``HdfD``: range of ``(K_div + 1/2)(K_div - 1/2)``.

Every integer claim carries the spectrum around its cut.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg as sla

from .mesh import TopologySummary, topology
from .operators import BoundaryOperators, DiscreteOperator
from .star_metric import (
    StarMetric,
    SubspaceBasis,
    basis_from_whitened,
    build_metric,
    principal_angles,
    rank_cut,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SubspaceConfig:
    rank_tol: float = 1e-6
    intersection_tol: float = 0.05
    gap_ratio: float = 10.0
    orthogonality_tol: float = 0.02

    def __post_init__(self):
        for name in ("rank_tol", "intersection_tol", "orthogonality_tol"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {v}")
        if self.gap_ratio <= 1.0:
            raise ValueError("gap_ratio must exceed 1")


def _side(sign) -> int:
    if sign in (1, "+", "plus"):
        return 1
    if sign in (-1, "-", "minus"):
        return -1
    raise ValueError(f"side must be + or -, got {sign!r}")


def _sym(sign: int) -> str:
    return "+" if sign > 0 else "-"


# --------------------------------------------------------------- ranges

def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def basis_M(side, operators: BoundaryOperators, metric: StarMetric, rank_tol: float,
            gap_ratio: float = 10.0) -> SubspaceBasis:
    """Range of the gradient-trace generator on side ``side``.

    Singular values are those of the generator from the scalar energy metric
    to the vector one, so smooth and oscillating densities are weighed alike.
    The interior generator annihilates the equilibrium density ``phi0`` (its
    single layer is constant inside); that direction is removed from the
    domain and the size of its image is kept as ``phi0_defect``, the gap
    evidence for rank N - 1.
    """
    sign = _side(side)
    gen = operators.M_gen(sign).matrix
    Y = metric.whiten(metric.pull_scalar(gen))
    notes = {}
    if sign < 0:
        z0 = _unit(metric.whiten_scalar(operators.phi0))
        image = Y @ z0
        Y = Y - np.outer(image, z0)
        notes["phi0_defect"] = float(np.linalg.norm(image))
    U, s, _ = np.linalg.svd(Y, full_matrices=False)
    if sign < 0:
        s, U = s[:-1], U[:, :-1]
        notes["phi0_defect"] /= float(s[0])
        notes["phi0_ratio"] = float(s[-1] / s[0] / notes["phi0_defect"]) if notes["phi0_defect"] > 0 else None
    cut = rank_cut(s, rank_tol, gap_ratio, size=max(Y.shape))
    return basis_from_whitened(U[:, :cut.rank], metric, f"M{_sym(sign)}", rank_tol, cut, **notes)


def _kernel(Bw: np.ndarray, rank_tol: float, gap_ratio: float, deficiency: int = 0):
    """Kernel of a whitened operator: returns (orthonormal kernel, cut, row space).

    ``deficiency`` known zero singular values (removed by construction) are
    dropped before the rank decision.
    """
    _, s, vt = np.linalg.svd(Bw, full_matrices=True)
    s = s[:len(s) - deficiency] if deficiency else s
    cut = rank_cut(s, rank_tol, gap_ratio, size=max(Bw.shape))
    return vt[cut.rank:].T, cut, vt[:cut.rank].T


def whitened_divergence(A: DiscreteOperator, metric: StarMetric, phi0: np.ndarray | None = None):
    """A read from the vector energy metric into the scalar dual energy metric.

    With ``phi0`` the output direction paired with the equilibrium density is
    removed (the exterior map satisfies ``A+^* phi0 = 0``). Returns the
    matrix and the relative size of the removed row (0 without deflation).
    """
    Bw = metric.whiten_dual(metric.pull(A.matrix))
    if phi0 is None:
        return Bw, 0.0
    u = _unit(sla.solve_triangular(metric.dual_chol, metric.weights * phi0, lower=True))
    row = u @ Bw
    defect = float(np.linalg.norm(row) / np.linalg.norm(Bw, 2))
    return Bw - np.outer(u, row), defect


def _divergence_stack(side, operators: BoundaryOperators, metric: StarMetric):
    if side == "both":
        Bm, _ = whitened_divergence(operators.A_minus, metric)
        Bp, defect = whitened_divergence(operators.A_plus, metric, operators.phi0)
        return np.vstack([Bm, Bp]), defect, 1, "Hdf"
    sign = _side(side)
    if sign > 0:
        Bp, defect = whitened_divergence(operators.A_plus, metric, operators.phi0)
        return Bp, defect, 1, "Hdf+"
    Bm, _ = whitened_divergence(operators.A_minus, metric)
    return Bm, 0.0, 0, "Hdf-"


def basis_Hdf(side, operators: BoundaryOperators, metric: StarMetric, rank_tol: float,
              gap_ratio: float = 10.0) -> SubspaceBasis:
    """Kernel of ``A-``, ``A+`` or (``side="both"``) of the stacked pair."""
    Bw, defect, deficiency, label = _divergence_stack(side, operators, metric)
    K, cut, _ = _kernel(Bw, rank_tol, gap_ratio, deficiency)
    notes = {"phi0_defect": defect} if deficiency else {}
    return basis_from_whitened(K, metric, label, rank_tol, cut, **notes)


def whitened_operator(op: DiscreteOperator | np.ndarray, metric: StarMetric) -> np.ndarray:
    """L^T A L^{-T}: a 3N x 3N operator in *-orthonormal coordinates."""
    A = op.matrix if isinstance(op, DiscreteOperator) else op
    return metric.whiten(metric.pull(A))


def basis_Hdrf(side, K_div: DiscreteOperator, metric: StarMetric, rank_tol: float,
               gap_ratio: float = 10.0, Kw: np.ndarray | None = None) -> SubspaceBasis:
    """Kernel of ``K_div - 1/2`` (side ``-``) or ``K_div + 1/2`` (side ``+``)."""
    sign = _side(side)
    Kw = whitened_operator(K_div, metric) if Kw is None else Kw
    B = Kw + 0.5 * sign * np.eye(Kw.shape[0])
    K, cut, _ = _kernel(B, rank_tol, gap_ratio)
    return basis_from_whitened(K, metric, f"Hdrf{_sym(sign)}", rank_tol, cut)


def basis_HdfD(K_div: DiscreteOperator, metric: StarMetric, rank_tol: float,
               gap_ratio: float = 10.0, Kw: np.ndarray | None = None) -> SubspaceBasis:
    """Range of ``(K_div + 1/2)(K_div - 1/2)``."""
    Kw = whitened_operator(K_div, metric) if Kw is None else Kw
    I = np.eye(Kw.shape[0])
    P = (Kw + 0.5 * I) @ (Kw - 0.5 * I)
    U, s, _ = np.linalg.svd(P)
    cut = rank_cut(s, rank_tol, gap_ratio, size=P.shape[0])
    return basis_from_whitened(U[:, :cut.rank], metric, "HdfD", rank_tol, cut)


# -------------------------------------------------------- intersections

@dataclass(frozen=True, eq=False)
class CountCut:
    """Count of near-zero defects ``d`` (ascending) inside ``[0, tol]``.

    The count is cut at the largest relative gap ``d[k] / d[k-1]`` inside the
    window (ties to the smaller count, flagged). A zero count has no lower
    neighbour: it is clean when the window is empty, and its ratio is
    reported as ``d[0] / tol``.
    """

    count: int
    defects: np.ndarray
    tol: float
    ratio: float
    clean: bool
    tied: bool = False

    @property
    def eigenvalues(self) -> np.ndarray:
        """``1 - d``, comparable with projector-product eigenvalues."""
        return 1.0 - self.defects

    def as_dict(self) -> dict:
        d = self.defects
        k = self.count
        return {
            "count": k,
            "tol": self.tol,
            "bracket": [float(d[k - 1]) if k > 0 else None, float(d[k]) if k < len(d) else None],
            "ratio": float(self.ratio) if np.isfinite(self.ratio) else None,
            "clean": bool(self.clean),
            "tied": bool(self.tied),
        }


def count_cut(defects: np.ndarray, tol: float, gap_ratio: float = 10.0) -> CountCut:
    d = np.sort(np.asarray(defects, float))
    k0 = int(np.sum(d <= tol))
    if k0 == 0:
        ratio = d[0] / tol if len(d) else np.inf
        return CountCut(0, d, tol, ratio, True)
    if k0 == len(d):
        return CountCut(k0, d, tol, 1.0, False)
    with np.errstate(divide="ignore", invalid="ignore"):
        gaps = d[1:k0 + 1] / d[:k0]
    gaps = np.where(np.isnan(gaps), 1.0, gaps)
    best = float(np.max(gaps))
    hits = np.flatnonzero(np.isclose(gaps, best, rtol=1e-9) | (gaps == best))
    k = int(hits[0]) + 1
    return CountCut(k, d, tol, best, best >= gap_ratio, tied=len(hits) > 1)


def basis_X(side, Kw: np.ndarray, Hdf_basis: SubspaceBasis, metric: StarMetric,
            intersection_tol: float = 0.05, gap_ratio: float = 10.0) -> tuple[SubspaceBasis, CountCut]:
    """Fields of ``Hdf`` that also lie in ``Hdrf-`` (side ``-``) or ``Hdrf+``.

    For ``h`` in ``Hdf`` with unit energy, the defect is the squared norm
    ``||(K_div -+ 1/2) h||_*^2``; it vanishes exactly on the intersection.
    The defects are the squared singular values of ``K_div -+ 1/2`` restricted
    to ``Hdf`` and play the role of ``1 - mu`` for the eigenvalues ``mu`` of
    the projector product.
    """
    sign = _side(side)
    Q = metric.whiten(Hdf_basis.columns)
    T = (Kw @ Q) + 0.5 * sign * Q
    _, s, vt = np.linalg.svd(T, full_matrices=False)
    order = np.argsort(s)
    d = s[order] ** 2
    cut = count_cut(d, intersection_tol, gap_ratio)
    V = vt[order[:cut.count]].T
    basis = basis_from_whitened(Q @ V, metric, f"X{_sym(sign)}", None, None)
    return basis, cut


def quotient_count(Kw: np.ndarray, Hdf_basis: SubspaceBasis, metric: StarMetric,
                   intersection_tol: float = 0.05, gap_ratio: float = 10.0) -> CountCut:
    """Directions of ``Hdf`` orthogonal to the range of ``(K_div + 1/2)(K_div - 1/2)``.

    These span ``Hdf`` modulo ``HdfD``. The defects are the singular values of
    ``Q^T P`` with ``Q`` an orthonormal basis of ``Hdf`` and ``P`` the product;
    the product is already quadratic in the distance to the kernels, so the
    singular values are used unsquared.
    """
    Q = metric.whiten(Hdf_basis.columns)
    left = Q.T @ Kw - 0.5 * Q.T
    QtP = left @ Kw + 0.5 * left
    s = np.linalg.svd(QtP, compute_uv=False)
    return count_cut(np.sort(s), intersection_tol, gap_ratio)


# ----------------------------------------------------------- complement

@dataclass(frozen=True, eq=False)
class ComplementCheck:
    side: int
    angles_deg: np.ndarray
    kernel_dim: int
    complement_dim: int
    M_dim: int

    @property
    def max_angle_deg(self) -> float:
        return float(self.angles_deg.max()) if len(self.angles_deg) else 0.0

    def as_dict(self) -> dict:
        return {
            "side": _sym(self.side),
            "max_angle_deg": self.max_angle_deg,
            "median_angle_deg": float(np.median(self.angles_deg)) if len(self.angles_deg) else 0.0,
            "kernel_dim": self.kernel_dim,
            "complement_dim": self.complement_dim,
            "M_dim": self.M_dim,
        }


def verify_complement(side, operators: BoundaryOperators, M_opposite: SubspaceBasis, metric: StarMetric,
                      rank_tol: float) -> ComplementCheck:
    """Principal angles between the *-complement of ``Ker A`` and ``M`` of the other side.

    The complement of the kernel is the row space of the whitened operator.
    """
    sign = _side(side)
    Bw, _, deficiency, _ = _divergence_stack(sign, operators, metric)
    ker, cut, rows = _kernel(Bw, rank_tol, 10.0, deficiency)
    comp = basis_from_whitened(rows, metric, "Hdf", rank_tol, cut)
    ang = np.degrees(principal_angles(comp, M_opposite, metric))
    return ComplementCheck(sign, ang, ker.shape[1], rows.shape[1], M_opposite.dim)


# -------------------------------------------------------- decomposition

@dataclass(frozen=True, eq=False)
class DecompositionResult:
    g_minus: np.ndarray
    g_plus: np.ndarray
    h_df: np.ndarray
    residual: np.ndarray
    reconstruction_residual: float
    mutual_inners: dict
    variant: str

    def as_dict(self) -> dict:
        return {
            "variant": self.variant,
            "reconstruction_residual": self.reconstruction_residual,
            "mutual_inners": self.mutual_inners,
        }


VARIANTS = ("potential", "divfree")


def _normalized_inner(a, b, metric: StarMetric) -> float:
    wa, wb = metric.whiten(a), metric.whiten(b)
    na, nb = np.linalg.norm(wa), np.linalg.norm(wb)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(wa @ wb / (na * nb))


def decompose(f: np.ndarray, bases: tuple[SubspaceBasis, SubspaceBasis, SubspaceBasis], metric: StarMetric,
              variant: str = "potential") -> DecompositionResult:
    """Split ``f`` along three subspaces.

    The coefficients solve the least-squares problem for the joint basis in
    the *-metric, so the components sum to the projection of ``f`` onto the
    sum of the subspaces; when the subspaces are *-orthogonal this is the sum
    of the three orthogonal projections.
    """
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    f = np.asarray(f, float)
    if not np.all(np.isfinite(f)):
        raise ValueError("field contains non-finite values")
    Qs = [metric.whiten(b.columns) for b in bases]
    Q = np.hstack(Qs)
    y = metric.whiten(f)
    if Q.shape[1]:
        c, *_ = np.linalg.lstsq(Q, y, rcond=None)
    else:
        c = np.zeros(0)
    parts, start = [], 0
    for B in bases:
        k = B.dim
        parts.append(B.columns @ c[start:start + k])
        start += k
    res = f - parts[0] - parts[1] - parts[2]
    ny = np.linalg.norm(y)
    rel = float(np.linalg.norm(metric.whiten(res)) / ny) if ny > 0 else 0.0
    inners = {
        "minus_plus": _normalized_inner(parts[0], parts[1], metric),
        "minus_h": _normalized_inner(parts[0], parts[2], metric),
        "plus_h": _normalized_inner(parts[1], parts[2], metric),
    }
    return DecompositionResult(parts[0], parts[1], parts[2], res, rel, inners, variant)


def max_cross_inner(A: SubspaceBasis, B: SubspaceBasis, metric: StarMetric) -> float:
    """Largest |<a, b>*| over unit vectors of two subspaces (top principal cosine)."""
    if A.dim == 0 or B.dim == 0:
        return 0.0
    return float(np.cos(principal_angles(A, B, metric)[0]))


def join(label: str, *bases: SubspaceBasis, metric: StarMetric) -> SubspaceBasis:
    """Orthonormal basis of the sum of subspaces."""
    Q = np.hstack([metric.whiten(b.columns) for b in bases])
    if Q.shape[1] == 0:
        return SubspaceBasis(Q, label)
    U, s, _ = np.linalg.svd(Q, full_matrices=False)
    r = int(np.sum(s > 1e-10 * s[0]))
    return basis_from_whitened(U[:, :r], metric, label)


def complement_in(label: str, outer: SubspaceBasis, inner: SubspaceBasis, metric: StarMetric) -> SubspaceBasis:
    """*-orthogonal complement of ``inner`` inside ``outer``."""
    Qo = metric.whiten(outer.columns)
    Qi = metric.whiten(inner.columns)
    R = Qo - Qi @ (Qi.T @ Qo)
    U, s, _ = np.linalg.svd(R, full_matrices=False)
    k = outer.dim - inner.dim
    return basis_from_whitened(U[:, :max(k, 0)], metric, label)


# ------------------------------------------------------------- analysis

@dataclass(frozen=True, eq=False)
class CodimensionReport:
    dim_X_minus: int
    dim_X_plus: int
    dim_Hdf_mod_HdfD: int
    gaps: dict
    betti: TopologySummary
    verdicts: dict
    dims: dict = field(default_factory=dict)

    @property
    def all_match(self) -> bool:
        return all(v == "match" for v in self.verdicts.values())

    @property
    def any_no_gap(self) -> bool:
        return any(v == "no-gap" for v in self.verdicts.values())

    def as_dict(self) -> dict:
        return {
            "dim_X_minus": self.dim_X_minus,
            "dim_X_plus": self.dim_X_plus,
            "dim_Hdf_mod_HdfD": self.dim_Hdf_mod_HdfD,
            "betti": self.betti.as_dict(),
            "verdicts": self.verdicts,
            "gaps": self.gaps,
            "dims": self.dims,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.as_dict(), **kw)


def _verdict(measured: int, expected: int, clean: bool) -> str:
    if not clean:
        return "no-gap"
    return "match" if measured == expected else "mismatch"


class Analysis:
    """Lazily built subspaces, decompositions and reports for one mesh."""

    def __init__(self, operators: BoundaryOperators, config: SubspaceConfig = SubspaceConfig(),
                 betti: TopologySummary | None = None):
        self.ops = operators
        self.mesh = operators.mesh
        self.config = config
        self.n = operators.n
        self.betti = betti or topology(self.mesh)

    @cached_property
    def metric(self) -> StarMetric:
        return build_metric(self.ops.S, self.mesh.areas)

    @cached_property
    def Kw(self) -> np.ndarray:
        return whitened_operator(self.ops.Kdiv, self.metric)

    def _tol(self):
        return self.config.rank_tol, self.config.gap_ratio

    @cached_property
    def M_minus(self) -> SubspaceBasis:
        return basis_M(-1, self.ops, self.metric, *self._tol())

    @cached_property
    def M_plus(self) -> SubspaceBasis:
        return basis_M(+1, self.ops, self.metric, *self._tol())

    def M(self, sign: int) -> SubspaceBasis:
        return self.M_plus if sign > 0 else self.M_minus

    @cached_property
    def Hdf(self) -> SubspaceBasis:
        return basis_Hdf("both", self.ops, self.metric, *self._tol())

    def Hdf_side(self, sign: int) -> SubspaceBasis:
        return basis_Hdf(sign, self.ops, self.metric, *self._tol())

    def Hdrf(self, sign: int) -> SubspaceBasis:
        return basis_Hdrf(sign, self.ops.Kdiv, self.metric, *self._tol(), Kw=self.Kw)

    @cached_property
    def HdfD_range(self) -> SubspaceBasis:
        return basis_HdfD(self.ops.Kdiv, self.metric, *self._tol(), Kw=self.Kw)

    @cached_property
    def _X(self):
        c = self.config
        return {s: basis_X(s, self.Kw, self.Hdf, self.metric, c.intersection_tol, c.gap_ratio) for s in (-1, 1)}

    def X(self, sign: int) -> SubspaceBasis:
        return self._X[sign][0]

    def X_cut(self, sign: int) -> CountCut:
        return self._X[sign][1]

    @cached_property
    def quotient(self) -> CountCut:
        c = self.config
        return quotient_count(self.Kw, self.Hdf, self.metric, c.intersection_tol, c.gap_ratio)

    @cached_property
    def HdfD(self) -> SubspaceBasis:
        """Complement of X- + X+ inside Hdf (Hdf = HdfD + X- + X+)."""
        X = join("HdfD", self.X(-1), self.X(1), metric=self.metric)
        return complement_in("HdfD", self.Hdf, X, self.metric)

    def Hdrf_constructive(self, sign: int) -> SubspaceBasis:
        """M + X on one side."""
        return join(f"Hdrf{_sym(sign)}", self.M(sign), self.X(sign), metric=self.metric)

    def bases(self, variant: str):
        if variant == "potential":
            return self.M_minus, self.M_plus, self.Hdf
        if variant == "divfree":
            return self.Hdrf_constructive(-1), self.Hdrf_constructive(1), self.HdfD
        raise ValueError(f"variant must be one of {VARIANTS}")

    def decompose(self, f: np.ndarray, variant: str = "potential") -> DecompositionResult:
        return decompose(f, self.bases(variant), self.metric, variant)

    def complement_check(self, sign: int) -> ComplementCheck:
        return verify_complement(sign, self.ops, self.M(-sign), self.metric, self.config.rank_tol)

    def rank_arithmetic(self) -> dict:
        total = self.M_minus.dim + self.M_plus.dim + self.Hdf.dim
        return {
            "rank_M_minus": self.M_minus.dim,
            "rank_M_plus": self.M_plus.dim,
            "dim_Hdf": self.Hdf.dim,
            "sum": total,
            "3N": 3 * self.n,
            "holds": total == 3 * self.n,
        }

    def codimension_report(self) -> CodimensionReport:
        xm, xp, q = self.X_cut(-1), self.X_cut(1), self.quotient
        upstream = all(b.clean for b in (self.M_minus, self.M_plus, self.Hdf))
        b = self.betti
        consistent = q.count == xm.count + xp.count
        verdicts = {
            "X-": _verdict(xm.count, b.b1_interior, xm.clean and upstream),
            "X+": _verdict(xp.count, b.b1_exterior, xp.clean and upstream),
            "Hdf/HdfD": _verdict(q.count, b.b1_boundary, q.clean and upstream and consistent),
        }
        gaps = {
            "X-": xm.as_dict(),
            "X+": xp.as_dict(),
            "Hdf/HdfD": q.as_dict(),
            "M-": self.M_minus.gap_report(),
            "M+": self.M_plus.gap_report(),
            "Hdf": self.Hdf.gap_report(),
        }
        dims = {"N": self.n, **self.rank_arithmetic(), "quotient_consistent": consistent}
        return CodimensionReport(xm.count, xp.count, q.count, gaps, b, verdicts, dims)


def circulation_field(centroids: np.ndarray, axis_point=(0.0, 0.0, 0.0)) -> np.ndarray:
    """(-y, x, 0) / (x^2 + y^2) about the z-axis: curl- and divergence-free off the axis."""
    c = np.asarray(centroids, float) - np.asarray(axis_point, float)
    x, y = c[:, 0], c[:, 1]
    r2 = x * x + y * y
    return np.stack([-y / r2, x / r2, np.zeros_like(x)], axis=1)
