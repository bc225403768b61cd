"""Energy inner product on panel vector fields and subspace utilities.

The energy inner product ``<f, g>* = -<S^{-1} f, g>`` is realized on
component-major coefficient vectors as ``f^T G g`` with

    G = I_3 (x) G_s,   G_s = -W (sym(W S))^{-1} W,

where ``W`` holds the panel areas and ``sym`` is the symmetric part. ``G_s``
is symmetric positive definite whenever the area-weighted single layer matrix
is negative definite. All rank decisions below are made on singular values of
operators written in orthonormal coordinates of the relevant metrics
("whitened"), so that they do not depend on the mesh scaling.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .operators import DiscreteOperator, OperatorError

SUBSPACE_LABELS = ("M-", "M+", "Hdf-", "Hdf+", "Hdf", "Hdrf-", "Hdrf+", "HdfD", "X-", "X+")


@dataclass(frozen=True, eq=False)
class StarMetric:
    """Gram matrix of the energy inner product, stored as its scalar block.

    Attributes
    ----------
    scalar_gram : (N, N) array
        ``G_s``; the vector Gram matrix is ``kron(I_3, G_s)``.
    chol : (N, N) array
        Lower Cholesky factor of ``G_s``.
    dual_gram : (N, N) array
        ``H_s = -sym(W S)``, the energy of scalar densities; used to measure
        outputs of the divergence maps.
    dual_chol : (N, N) array
        Lower Cholesky factor of ``H_s``.
    """

    scalar_gram: np.ndarray
    chol: np.ndarray
    dual_gram: np.ndarray
    dual_chol: np.ndarray
    weights: np.ndarray

    @property
    def n(self) -> int:
        return self.scalar_gram.shape[0]

    @property
    def matrix(self) -> np.ndarray:
        """Full 3N x 3N Gram matrix."""
        return np.kron(np.eye(3), self.scalar_gram)

    # blockwise helpers; X is (3N,) or (3N, k)
    def _blocks(self, X):
        X = np.asarray(X, float)
        if X.shape[0] != 3 * self.n:
            raise OperatorError(f"expected leading dimension {3 * self.n}, got {X.shape[0]}")
        return np.split(X, 3, axis=0)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """G @ X."""
        return np.concatenate([self.scalar_gram @ b for b in self._blocks(X)], axis=0)

    def whiten(self, X: np.ndarray) -> np.ndarray:
        """L^T @ X, an isometry from the *-metric to the Euclidean one."""
        return np.concatenate([self.chol.T @ b for b in self._blocks(X)], axis=0)

    def unwhiten(self, Y: np.ndarray) -> np.ndarray:
        """Inverse of :meth:`whiten`."""
        return np.concatenate(
            [sla.solve_triangular(self.chol, b, lower=True, trans="T") for b in self._blocks(Y)], axis=0
        )

    def pull(self, A: np.ndarray) -> np.ndarray:
        """A @ L^{-T} for a matrix with 3N columns (an operator read in whitened input coordinates)."""
        At = np.asarray(A, float).T
        return np.concatenate(
            [sla.solve_triangular(self.chol, b, lower=True) for b in self._blocks(At)], axis=0
        ).T

    def pull_scalar(self, A: np.ndarray) -> np.ndarray:
        """A @ L_s^{-T} for a matrix with N columns."""
        return sla.solve_triangular(self.chol, np.asarray(A, float).T, lower=True).T

    def whiten_scalar(self, X: np.ndarray) -> np.ndarray:
        return self.chol.T @ np.asarray(X, float)

    def unwhiten_scalar(self, Y: np.ndarray) -> np.ndarray:
        return sla.solve_triangular(self.chol, np.asarray(Y, float), lower=True, trans="T")

    def whiten_dual(self, X: np.ndarray) -> np.ndarray:
        return self.dual_chol.T @ np.asarray(X, float)


def _spd_cholesky(M: np.ndarray, what: str) -> np.ndarray:
    try:
        return np.linalg.cholesky(M)
    except np.linalg.LinAlgError as exc:
        raise OperatorError(f"{what} is not positive definite") from exc


def build_metric(S: DiscreteOperator, weights: np.ndarray) -> StarMetric:
    """Energy Gram matrix from the scalar single layer matrix and panel areas."""
    w = np.asarray(weights, float)
    if S.matrix.shape != (len(w), len(w)):
        raise OperatorError("single layer matrix and weights disagree in size")
    WS = w[:, None] * S.matrix
    H = -0.5 * (WS + WS.T)
    Lh = _spd_cholesky(H, "-sym(W S)")
    # G_s = W H^{-1} W
    Y = sla.cho_solve((Lh, True), np.diag(w))
    G = w[:, None] * Y
    G = 0.5 * (G + G.T)
    return StarMetric(G, _spd_cholesky(G, "energy Gram matrix"), H, Lh, w)


def star_inner(f: np.ndarray, g: np.ndarray, metric: StarMetric) -> float:
    return float(np.asarray(f, float) @ metric.apply(g))


def star_norm(f: np.ndarray, metric: StarMetric) -> float:
    return float(np.linalg.norm(metric.whiten(f)))


def norm_equivalence(metric: StarMetric) -> dict:
    """Extreme ratios ||f||_* / ||f||_W over all panel fields.

    The continuum norms are not equivalent; the spread grows like h^{-1/2}
    and is reported as a diagnostic only.
    """
    w = metric.weights
    ev = sla.eigvalsh(metric.scalar_gram, np.diag(w))
    return {"min_ratio": float(np.sqrt(ev[0])), "max_ratio": float(np.sqrt(ev[-1]))}


# ------------------------------------------------------------ rank cuts

@dataclass(frozen=True, eq=False)
class RankCut:
    """Outcome of a numerical rank decision.

    ``values`` are normalized by the largest one and sorted in decreasing
    order. ``retained`` and ``discarded`` bracket the cut; ``ratio`` is their
    quotient (or ``retained / rank_tol`` when nothing is discarded).
    """

    rank: int
    values: np.ndarray
    rank_tol: float
    retained: float | None
    discarded: float | None
    ratio: float
    clean: bool
    tied: bool = False
    below_floor: bool = False

    def as_dict(self) -> dict:
        return {
            "rank": self.rank,
            "rank_tol": self.rank_tol,
            "bracket": [self.retained, self.discarded],
            "ratio": _finite(self.ratio),
            "clean": bool(self.clean),
            "tied": bool(self.tied),
            "below_floor": bool(self.below_floor),
        }


def _finite(x: float):
    return float(x) if np.isfinite(x) else None


def rank_cut(values: np.ndarray, rank_tol: float, gap_ratio: float = 10.0, size: int | None = None) -> RankCut:
    """Numerical rank of a spectrum of singular values.

    Values at or below ``rank_tol`` times the largest are candidates for zero.
    Among admissible cuts the one with the largest relative gap is taken;
    ties go to the smaller rank and are flagged. The cut is clean when the
    bracketing ratio is at least ``gap_ratio``. A tolerance below the
    floating-point floor ``size * eps`` cannot certify anything and is never
    clean.
    """
    if not 0.0 < rank_tol < 1.0:
        raise ValueError("rank_tol must lie in (0, 1)")
    s = np.sort(np.abs(np.asarray(values, float)))[::-1]
    size = size or max(len(s), 1)
    floor = size * np.finfo(float).eps
    below_floor = rank_tol < floor
    if len(s) == 0 or s[0] == 0.0:
        return RankCut(0, s, rank_tol, None, None, np.inf, not below_floor, below_floor=below_floor)
    s = s / s[0]
    r0 = int(np.sum(s > rank_tol))
    if r0 == len(s):
        ratio = s[-1] / rank_tol
        return RankCut(len(s), s, rank_tol, float(s[-1]), None, ratio,
                       bool(ratio >= gap_ratio and not below_floor), below_floor=below_floor)
    with np.errstate(divide="ignore"):
        gaps = s[r0 - 1:-1] / s[r0:]
    best = float(np.max(gaps))
    hits = np.flatnonzero(np.isclose(gaps, best, rtol=1e-9) | (gaps == best))
    r = r0 + int(hits[0])
    return RankCut(
        r, s, rank_tol, float(s[r - 1]), float(s[r]), best,
        bool(best >= gap_ratio and not below_floor), tied=len(hits) > 1, below_floor=below_floor,
    )


@dataclass(frozen=True, eq=False)
class SubspaceBasis:
    """G-orthonormal basis of a discrete subspace.

    Attributes
    ----------
    columns : (3N, k) array with ``columns.T @ G @ columns = I``.
    label : one of :data:`SUBSPACE_LABELS`.
    rank_tol : tolerance used for the rank decision.
    gap : the rank decision, or ``None`` when none was made.
    """

    columns: np.ndarray
    label: str
    rank_tol: float | None = None
    gap: RankCut | None = None
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.label not in SUBSPACE_LABELS:
            raise ValueError(f"unknown subspace label {self.label!r}")
        if self.columns.ndim != 2:
            raise ValueError("columns must be a 2-d array")

    @property
    def dim(self) -> int:
        return self.columns.shape[1]

    @property
    def clean(self) -> bool:
        return self.gap is None or self.gap.clean

    def gap_report(self) -> dict:
        out = {"label": self.label, "dim": self.dim}
        if self.gap is not None:
            out.update(self.gap.as_dict())
        out.update(self.notes)
        return out


def orthonormalize(columns: np.ndarray, metric: StarMetric, rank_tol: float, label: str,
                   gap_ratio: float = 10.0, input_whitening=None) -> SubspaceBasis:
    """G-orthonormal basis of the numerical range of ``columns``.

    ``input_whitening`` optionally maps orthonormal input coordinates to the
    columns' own coordinates, so that singular values are measured between
    two metrics rather than against the Euclidean norm of the coefficients.
    """
    X = np.asarray(columns, float)
    if input_whitening is not None:
        X = input_whitening(X.T).T
    Y = metric.whiten(X)
    U, s, _ = np.linalg.svd(Y, full_matrices=False)
    cut = rank_cut(s, rank_tol, gap_ratio, size=max(Y.shape))
    if cut.rank == Y.shape[1] and input_whitening is None:
        # full rank: Gram-Schmidt keeps the input order, and an orthonormal
        # input comes back unchanged
        Q, R = np.linalg.qr(Y)
        return SubspaceBasis(metric.unwhiten(Q * np.sign(np.diag(R))), label, rank_tol, cut)
    return SubspaceBasis(metric.unwhiten(U[:, :cut.rank]), label, rank_tol, cut)


def basis_from_whitened(Q: np.ndarray, metric: StarMetric, label: str, rank_tol=None, gap=None, **notes) -> SubspaceBasis:
    return SubspaceBasis(metric.unwhiten(Q), label, rank_tol, gap, dict(notes))


def star_projector(basis: SubspaceBasis, metric: StarMetric) -> np.ndarray:
    """G-orthogonal projector ``B B^T G`` onto the span of a basis (3N x 3N)."""
    B = basis.columns
    return B @ metric.apply(B).T


def project(f: np.ndarray, basis: SubspaceBasis, metric: StarMetric) -> np.ndarray:
    B = basis.columns
    return B @ (metric.apply(B).T @ f)


def principal_angles(A: SubspaceBasis | np.ndarray, B: SubspaceBasis | np.ndarray, metric: StarMetric) -> np.ndarray:
    """Principal angles (radians, ascending) between two G-orthonormal bases.

    Computed from sines for accuracy near zero. Returns min(dim A, dim B)
    angles.
    """
    Qa = metric.whiten(A.columns if isinstance(A, SubspaceBasis) else A)
    Qb = metric.whiten(B.columns if isinstance(B, SubspaceBasis) else B)
    if Qa.shape[1] > Qb.shape[1]:
        Qa, Qb = Qb, Qa
    if Qa.shape[1] == 0:
        return np.zeros(0)
    R = Qa - Qb @ (Qb.T @ Qa)
    sines = np.clip(np.linalg.svd(R, compute_uv=False), 0.0, 1.0)
    return np.sort(np.arcsin(sines))


def adjoint(op: np.ndarray, metric: StarMetric) -> np.ndarray:
    """G-adjoint ``G^{-1} A^T G`` of a 3N x 3N matrix."""
    AtG = metric.apply(np.asarray(op, float)).T
    return np.concatenate([sla.cho_solve((metric.chol, True), b) for b in np.split(AtG, 3, axis=0)], axis=0)


def asymmetry(op: np.ndarray, metric: StarMetric) -> float:
    """||G A - A^T G|| / ||G A|| in the spectral norm."""
    GA = metric.apply(np.asarray(op, float))
    return float(np.linalg.norm(GA - GA.T, 2) / np.linalg.norm(GA, 2))
