"""Panel integrals of 1/|x - y| and (x - y)/|x - y|^3 over flat triangles.

Closed-form edge formulas are used for near and self interactions and a
symmetric Gauss rule for well-separated pairs. The Laplace constants
(the -1/(4 pi) of the fundamental solution) are applied by the callers in
:mod:`layerdecomp.operators`.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

__all__ = [
    "QuadratureConfig",
    "Regime",
    "PanelIntegralRequest",
    "gauss_rule",
    "classify",
    "edge_integrals",
    "solid_angle",
    "potential_closed",
    "gradient_closed",
    "panel_potential",
    "panel_gradient",
    "pv_self_gradient",
    "pairwise_integrals",
]


class Regime(str, enum.Enum):
    FAR = "far"
    NEAR = "near"
    SELF = "self"


@dataclass(frozen=True)
class QuadratureConfig:
    far_order: int = 12
    near_subdivision_depth: int = 3
    near_ratio: float = 2.0
    # cross-validation path: subdivision + excision instead of edge formulas
    numerical_fallback: bool = False

    def __post_init__(self):
        if self.far_order not in _RULES:
            raise ValueError(f"far_order must be one of {sorted(_RULES)}")
        if not 0 <= self.near_subdivision_depth <= 6:
            raise ValueError("near_subdivision_depth must be in [0, 6]")
        if self.near_ratio <= 0:
            raise ValueError("near_ratio must be positive")


def _perm3(a, b, c):
    return [(a, b, c), (b, c, a), (c, a, b)]


def _perm6(a, b, c):
    return [(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)]


def _build_rules():
    rules = {1: ([(1 / 3, 1 / 3, 1 / 3)], [1.0])}
    rules[3] = (_perm3(2 / 3, 1 / 6, 1 / 6), [1 / 3] * 3)
    a1, b1, w1 = 0.445948490915965, 0.108103018168070, 0.223381589678011
    a2, b2, w2 = 0.091576213509771, 0.816847572980459, 0.109951743655322
    rules[6] = (_perm3(b1, a1, a1) + _perm3(b2, a2, a2), [w1] * 3 + [w2] * 3)
    # Dunavant degree 6
    pts = (
        _perm3(0.501426509658179, 0.249286745170910, 0.249286745170910)
        + _perm3(0.873821971016996, 0.063089014491502, 0.063089014491502)
        + _perm6(0.053145049844817, 0.310352451033784, 0.636502499121399)
    )
    wts = [0.116786275726379] * 3 + [0.050844906370207] * 3 + [0.082851075618374] * 6
    rules[12] = (pts, wts)
    out = {}
    for k, (p, w) in rules.items():
        p = np.array(p, dtype=float)
        w = np.array(w, dtype=float)
        out[k] = (p / p.sum(axis=1, keepdims=True), w / w.sum())
    return out


_RULES = _build_rules()


def gauss_rule(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Barycentric points (k, 3) and weights (k,) summing to one."""
    return _RULES[order]


@dataclass(frozen=True)
class PanelIntegralRequest:
    target: np.ndarray
    panel: np.ndarray
    kind: str = "potential"
    regime: Regime = Regime.FAR


def _diameter(tri: np.ndarray) -> np.ndarray:
    return np.max(np.linalg.norm(tri - np.roll(tri, 1, axis=-2), axis=-1), axis=-1)


def classify(target, panel, config: QuadratureConfig = QuadratureConfig(), is_self: bool = False) -> Regime:
    """Regime for one target/panel pair.

    ``is_self`` marks the collocation point of the panel itself. Distances
    are measured to the panel centroid, which bounds the true distance from
    above by at most one diameter.
    """
    if is_self:
        return Regime.SELF
    panel = np.asarray(panel, float)
    d = np.linalg.norm(np.asarray(target, float) - panel.mean(axis=0))
    return Regime.NEAR if d < config.near_ratio * _diameter(panel) else Regime.FAR


# ----------------------------------------------------------- closed forms

def _panel_frame(tri: np.ndarray):
    """Unit normal, edge vectors, edge lengths and in-plane outward edge normals."""
    p0, p1, p2 = tri[..., 0, :], tri[..., 1, :], tri[..., 2, :]
    n = np.cross(p1 - p0, p2 - p0)
    n /= np.linalg.norm(n, axis=-1, keepdims=True)
    start = tri
    end = np.roll(tri, -1, axis=-2)
    edge = end - start
    length = np.linalg.norm(edge, axis=-1)
    tangent = edge / length[..., None]
    outward = np.cross(tangent, n[..., None, :])
    return n, start, end, length, tangent, outward


def edge_integrals(x: np.ndarray, tri: np.ndarray) -> np.ndarray:
    """Line integrals of 1/|x - y| along the three edges (p_k -> p_{k+1}).

    Broadcasts ``x`` (..., 3) against ``tri`` (..., 3, 3); returns (..., 3).
    Infinite when ``x`` lies on an edge.
    """
    _, start, end, length, tangent, _ = _panel_frame(tri)
    xs = np.asarray(x)[..., None, :]
    a = xs - start
    b = xs - end
    r1 = np.linalg.norm(a, axis=-1)
    r2 = np.linalg.norm(b, axis=-1)
    s0 = np.einsum("...k,...k->...", a, tangent)
    d2 = np.sum(np.cross(a, tangent) ** 2, axis=-1)
    rest = length - s0
    # the two denominators cancel catastrophically on the edge line; use
    # the conjugate form r^2 - s^2 = d^2 there
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        den = np.where(s0 <= 0, r1 - s0, d2 / (r1 + s0))
        num = np.where(rest >= 0, r2 + rest, d2 / (r2 - rest))
        out = np.log(num / den)
    return np.where(d2 > 0, out, np.where((s0 > 0) & (rest > 0), np.inf, out))


def solid_angle(x: np.ndarray, tri: np.ndarray) -> np.ndarray:
    """Signed solid angle of the triangle seen from ``x``.

    Positive when ``x`` is on the side the normal points to, so that it
    equals the integral of (x - y).n / |x - y|^3 over the panel.
    """
    r = tri - np.asarray(x)[..., None, :]
    d = np.linalg.norm(r, axis=-1)
    a, b, c = r[..., 0, :], r[..., 1, :], r[..., 2, :]
    da, db, dc = d[..., 0], d[..., 1], d[..., 2]
    triple = np.einsum("...k,...k->...", a, np.cross(b, c))
    denom = (
        da * db * dc
        + np.einsum("...k,...k->...", a, b) * dc
        + np.einsum("...k,...k->...", a, c) * db
        + np.einsum("...k,...k->...", b, c) * da
    )
    return -2.0 * np.arctan2(triple, denom)


def potential_closed(x: np.ndarray, tri: np.ndarray) -> np.ndarray:
    """Exact integral of 1/|x - y| over flat triangles."""
    n, start, _, _, _, outward = _panel_frame(tri)
    xs = np.asarray(x)
    h = np.einsum("...k,...k->...", xs - start[..., 0, :], n)
    # signed in-plane distance from the projected target to each edge line
    t = np.einsum("...ek,...ek->...e", start - xs[..., None, :], outward)
    edges = edge_integrals(xs, tri)
    # t log(1/t) -> 0: a target on an edge line gets no contribution from it
    tiny = 1e-14 * _diameter(tri)[..., None]
    with np.errstate(invalid="ignore"):
        line = np.where(np.abs(t) <= tiny, 0.0, t * edges).sum(axis=-1)
    return line - np.abs(h) * np.abs(solid_angle(xs, tri))


def gradient_closed(x: np.ndarray, tri: np.ndarray) -> np.ndarray:
    """Exact integral of (x - y)/|x - y|^3 over flat triangles.

    For ``x`` inside the panel this is the Cauchy principal value (normal
    component zero).
    """
    n, start, _, length, _, outward = _panel_frame(tri)
    edges = edge_integrals(x, tri)
    tangential = np.einsum("...e,...ek->...k", edges, outward)
    h = np.einsum("...k,...k->...", np.asarray(x) - start[..., 0, :], n)
    # in-plane targets: the solid angle jumps by 4 pi across the panel and
    # its principal value is zero
    in_plane = np.abs(h) <= 1e-13 * length.max(axis=-1)
    normal = np.where(in_plane, 0.0, solid_angle(x, tri))
    return tangential + normal[..., None] * n


# ----------------------------------------------------------- numerical path

def _gauss_points(tri: np.ndarray, order: int):
    bary, w = gauss_rule(order)
    pts = np.einsum("qv,...vk->...qk", bary, tri)
    area = 0.5 * np.linalg.norm(
        np.cross(tri[..., 1, :] - tri[..., 0, :], tri[..., 2, :] - tri[..., 0, :]), axis=-1
    )
    return pts, area[..., None] * w


def potential_gauss(x: np.ndarray, tri: np.ndarray, order: int = 6) -> np.ndarray:
    pts, w = _gauss_points(tri, order)
    r = np.linalg.norm(np.asarray(x)[..., None, :] - pts, axis=-1)
    return np.sum(w / r, axis=-1)


def gradient_gauss(x: np.ndarray, tri: np.ndarray, order: int = 6) -> np.ndarray:
    pts, w = _gauss_points(tri, order)
    diff = np.asarray(x)[..., None, :] - pts
    r = np.linalg.norm(diff, axis=-1)
    return np.einsum("...q,...qk->...k", w / r ** 3, diff)


def _subdivide(tri: np.ndarray) -> np.ndarray:
    a, b, c = tri
    ab, bc, ca = (a + b) / 2, (b + c) / 2, (c + a) / 2
    return np.array([[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]])


def _subdivided_sum(x, tri, depth, order, kernel, exact):
    """Split ``depth`` times; Gauss on pieces well away from x, ``exact`` on the rest."""
    pieces = tri[None]
    for _ in range(depth):
        pieces = np.concatenate([_subdivide(p) for p in pieces])
    dist = np.linalg.norm(pieces.mean(axis=1) - x, axis=-1)
    far = dist >= 4.0 * _diameter(pieces)
    total = kernel(np.broadcast_to(x, (int(far.sum()), 3)), pieces[far], order).sum(axis=0)
    for piece in pieces[~far]:
        total = total + exact(x, piece)
    return total


def _apex_polar(x, tri, want: str):
    """Polar quadrature about the foot point p of x on the panel plane.

    The panel is the signed sum of the triangles (p, v_k, v_k+1); on each
    the radial integral is done in closed form and the angular one by
    adaptive quadrature. Valid for any x off the plane and for in-plane x
    outside the panel.
    """
    from scipy.integrate import quad

    n = _panel_frame(tri)[0]
    h = float(np.dot(x - tri[0], n))
    p = x - h * n
    e1 = (tri[1] - tri[0]) / np.linalg.norm(tri[1] - tri[0])
    e2 = np.cross(n, e1)
    ah = abs(h)
    pot, grad = 0.0, np.zeros(3)
    for k in range(3):
        a, b = tri[k] - p, tri[(k + 1) % 3] - p
        ta = np.arctan2(a @ e2, a @ e1)
        delta = np.arctan2(np.cross(a, b) @ n, a @ b)
        m = np.cross(b - a, n)
        m /= np.linalg.norm(m)
        d = float(a @ m)
        if abs(d) <= 1e-15 * _diameter(tri) or delta == 0.0:
            continue
        tm = np.arctan2(m @ e2, m @ e1)

        def rho(t):
            return d / np.cos(t - tm)

        opts = dict(limit=200, epsabs=1e-15, epsrel=1e-13)
        if want == "potential":
            pot += quad(lambda t: np.sqrt(rho(t) ** 2 + h * h) - ah, ta, ta + delta, **opts)[0]
            continue
        if ah > 0:
            radial = lambda t: np.arcsinh(rho(t) / ah) - rho(t) / np.sqrt(rho(t) ** 2 + h * h)
            grad += h * n * quad(lambda t: 1.0 / ah - 1.0 / np.sqrt(rho(t) ** 2 + h * h), ta, ta + delta, **opts)[0]
        else:
            # the divergent log terms cancel in the signed sum for p outside the panel
            radial = lambda t: np.log(rho(t))
        grad -= e1 * quad(lambda t: np.cos(t) * radial(t), ta, ta + delta, **opts)[0]
        grad -= e2 * quad(lambda t: np.sin(t) * radial(t), ta, ta + delta, **opts)[0]
    return pot if want == "potential" else grad


def _polar_setup(x, tri):
    """In-plane polar frame around x; None unless x is strictly inside tri."""
    n = _panel_frame(tri)[0]
    h = np.dot(x - tri[0], n)
    if abs(h) > 1e-12 * _diameter(tri):
        return None
    xp = x - h * n
    m = [np.cross(tri[(k + 1) % 3] - tri[k], n) for k in range(3)]
    dist = [np.dot(tri[k] - xp, m[k]) / np.linalg.norm(m[k]) for k in range(3)]
    if min(dist) <= 0:
        return None
    e1 = (tri[1] - tri[0]) / np.linalg.norm(tri[1] - tri[0])
    e2 = np.cross(n, e1)

    def rho_max(theta):
        d = np.cos(theta) * e1 + np.sin(theta) * e2
        best = np.inf
        for k in range(3):
            denom = np.dot(d, m[k])
            if denom > 0:
                best = min(best, np.dot(tri[k] - xp, m[k]) / denom)
        return best

    corners = sorted(
        float(np.mod(np.arctan2(np.dot(v - xp, e2), np.dot(v - xp, e1)), 2 * np.pi)) for v in tri
    )
    return e1, e2, rho_max, corners


def _polar_quad(f, corners):
    from scipy.integrate import quad

    cuts = [0.0] + corners + [2 * np.pi]
    return sum(
        quad(f, a, b, limit=200, epsabs=1e-14, epsrel=1e-13)[0] for a, b in zip(cuts[:-1], cuts[1:]) if b > a
    )


def _fallback_potential(x, tri, config):
    setup = _polar_setup(x, tri)
    if setup is None:
        return _subdivided_sum(x, tri, config.near_subdivision_depth, 12, potential_gauss,
                               lambda y, t: _apex_polar(y, t, "potential"))
    _, _, rho_max, corners = setup
    # in polar coordinates around x the 1/r singularity cancels the Jacobian
    return _polar_quad(rho_max, corners)


def _fallback_gradient(x, tri, config, eps_list=(1e-3, 5e-4)):
    """Subdivision away from x; disk excision and extrapolation on the panel."""
    setup = _polar_setup(x, tri)
    if setup is None:
        return _subdivided_sum(x, tri, config.near_subdivision_depth, 12, gradient_gauss,
                               lambda y, t: _apex_polar(y, t, "gradient"))
    e1, e2, rho_max, corners = setup
    scale = _diameter(tri)

    def excised(eps):
        # radial integral of -rho_hat / rho from eps to the boundary
        out = np.zeros(3)
        for e, trig in ((e1, np.cos), (e2, np.sin)):
            out += e * _polar_quad(lambda t: -trig(t) * np.log(rho_max(t) / (eps * scale)), corners)
        return out

    v1, v2 = excised(eps_list[0]), excised(eps_list[1])
    r = eps_list[0] / eps_list[1]
    return (r * v2 - v1) / (r - 1)


# ---------------------------------------------------------- public API

def _check_panel(panel) -> np.ndarray:
    panel = np.asarray(panel, dtype=float)
    if panel.shape != (3, 3):
        raise ValueError("panel must be a (3, 3) array of vertices")
    area2 = np.linalg.norm(np.cross(panel[1] - panel[0], panel[2] - panel[0]))
    if not area2 > 1e-14 * _diameter(panel) ** 2:
        raise ValueError("degenerate panel")
    return panel


def panel_potential(target, panel, config: QuadratureConfig = QuadratureConfig()) -> float:
    """Integral of 1/|x - y| over the panel (weakly singular on the panel)."""
    panel = _check_panel(panel)
    x = np.asarray(target, dtype=float)
    if classify(x, panel, config) is Regime.FAR:
        return float(potential_gauss(x, panel, config.far_order))
    if config.numerical_fallback:
        return float(_fallback_potential(x, panel, config))
    return float(potential_closed(x, panel))


def panel_gradient(target, panel, config: QuadratureConfig = QuadratureConfig()) -> np.ndarray:
    """Integral of (x - y)/|x - y|^3 over the panel; principal value on it."""
    panel = _check_panel(panel)
    x = np.asarray(target, dtype=float)
    if classify(x, panel, config) is Regime.FAR:
        return gradient_gauss(x, panel, config.far_order)
    if config.numerical_fallback:
        return _fallback_gradient(x, panel, config)
    return gradient_closed(x, panel)


def pv_self_gradient(panel, config: QuadratureConfig = QuadratureConfig()) -> np.ndarray:
    """Principal value of the gradient integral at the panel centroid."""
    panel = _check_panel(panel)
    c = panel.mean(axis=0)
    if config.numerical_fallback:
        return _fallback_gradient(c, panel, config)
    return gradient_closed(c, panel)


# ------------------------------------------------------ batched assembly

def pairwise_integrals(
    targets: np.ndarray,
    panels: np.ndarray,
    config: QuadratureConfig = QuadratureConfig(),
    self_index: np.ndarray | None = None,
    want_gradient: bool = True,
    chunk: int = 128,
):
    """Potential and gradient integrals for every (target, panel) pair.

    Parameters
    ----------
    targets : (M, 3)
    panels : (P, 3, 3)
    self_index : optional (M,) array, panel index whose centroid is the
        target (-1 for none); those pairs use the principal value.

    Returns
    -------
    pot : (M, P)
    grad : (M, P, 3) or None
    """
    targets = np.asarray(targets, float)
    panels = np.asarray(panels, float)
    M, P = len(targets), len(panels)
    cent = panels.mean(axis=1)
    diam = _diameter(panels)
    pot = np.empty((M, P))
    grad = np.empty((M, P, 3)) if want_gradient else None
    for lo in range(0, M, chunk):
        x = targets[lo: lo + chunk]
        dist = np.linalg.norm(x[:, None, :] - cent[None], axis=-1)
        near = dist < config.near_ratio * diam[None]
        if self_index is not None:
            rows = np.arange(lo, min(lo + chunk, M))
            si = self_index[rows]
            ok = si >= 0
            near[np.flatnonzero(ok), si[ok]] = True
        xb = np.broadcast_to(x[:, None, :], (len(x), P, 3))
        pb = np.broadcast_to(panels[None], (len(x), P, 3, 3))
        pot[lo: lo + chunk] = potential_gauss(xb, pb, config.far_order)
        if want_gradient:
            grad[lo: lo + chunk] = gradient_gauss(xb, pb, config.far_order)
        ii, jj = np.nonzero(near)
        if ii.size:
            pot[lo + ii, jj] = potential_closed(x[ii], panels[jj])
            if want_gradient:
                grad[lo + ii, jj] = gradient_closed(x[ii], panels[jj])
    return pot, grad
