import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from layerdecomp.quadrature import (
    PanelIntegralRequest,
    QuadratureConfig,
    Regime,
    classify,
    gauss_rule,
    gradient_closed,
    gradient_gauss,
    pairwise_integrals,
    panel_gradient,
    panel_potential,
    potential_closed,
    potential_gauss,
    pv_self_gradient,
)

RIGHT = np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0]])
EQUILATERAL = np.array([[0.0, 0, 0], [1, 0, 0], [0.5, np.sqrt(3) / 2, 0]])
FALLBACK = QuadratureConfig(numerical_fallback=True)

# Independent oracles: polar-coordinate quadrature about the centroid,
# scipy.integrate.quad per angular sector (rho_max(theta) for the potential,
# -int u(theta) log rho_max(theta) dtheta for the excised gradient limit).
RIGHT_CENTROID_POTENTIAL = 2.4072299231640097
RIGHT_PV_GRADIENT = np.array([0.24666258289696819, 0.2466625828969689, 0.0])


def _random_panel(rng):
    while True:
        tri = rng.normal(size=(3, 3))
        if np.linalg.norm(np.cross(tri[1] - tri[0], tri[2] - tri[0])) > 0.3:
            return tri


def _rel(a, b):
    return np.linalg.norm(np.asarray(a) - b) / np.linalg.norm(b)


def test_right_triangle_centroid_potential():
    value = panel_potential(RIGHT.mean(axis=0), RIGHT)
    assert abs(value - RIGHT_CENTROID_POTENTIAL) < 1e-10


def test_right_triangle_pv_gradient():
    assert np.max(np.abs(pv_self_gradient(RIGHT) - RIGHT_PV_GRADIENT)) < 1e-6


def test_fallback_matches_oracles():
    c = RIGHT.mean(axis=0)
    assert abs(panel_potential(c, RIGHT, FALLBACK) - RIGHT_CENTROID_POTENTIAL) < 1e-10
    assert np.max(np.abs(pv_self_gradient(RIGHT, FALLBACK) - RIGHT_PV_GRADIENT)) < 1e-6


def test_far_potential_monopole():
    c = RIGHT.mean(axis=0)
    diam = np.sqrt(2.0)
    x = c + 100 * diam * np.array([0.3, -0.5, 0.81]) / np.linalg.norm([0.3, -0.5, 0.81])
    d = np.linalg.norm(x - c)
    assert abs(panel_potential(x, RIGHT) - 0.5 / d) / (0.5 / d) < 1e-3


def test_far_gradient_monopole():
    c = RIGHT.mean(axis=0)
    x = c + np.array([60.0, 80.0, 90.0])
    r = x - c
    expected = 0.5 * r / np.linalg.norm(r) ** 3
    assert _rel(panel_gradient(x, RIGHT), expected) < 1e-3


def test_in_plane_normal_component_vanishes():
    for x in ([0.2, 0.2, 0], [2.0, -1.0, 0], [0.9, 0.9, 0], [30.0, 4.0, 0]):
        assert panel_gradient(x, RIGHT)[2] == 0.0


def test_equilateral_pv_vanishes():
    assert np.max(np.abs(pv_self_gradient(EQUILATERAL))) < 1e-14


def test_pv_lies_in_panel_plane(rng):
    for _ in range(20):
        tri = _random_panel(rng)
        n = np.cross(tri[1] - tri[0], tri[2] - tri[0])
        g = pv_self_gradient(tri)
        assert abs(g @ n) <= 1e-12 * np.linalg.norm(g) * np.linalg.norm(n) + 1e-14


def test_mirrored_panel_mirrored_pv():
    mirror = np.diag([-1.0, 1.0, 1.0])
    tri = RIGHT + [0.1, 0.2, 0.0]
    mirrored = (tri @ mirror)[::-1]
    assert np.allclose(pv_self_gradient(mirrored), pv_self_gradient(tri) @ mirror, atol=1e-14)


def test_degenerate_panel_rejected():
    flat = np.array([[0.0, 0, 0], [1, 0, 0], [2, 0, 0]])
    with pytest.raises(ValueError, match="degenerate"):
        panel_potential([0, 0, 1.0], flat)
    with pytest.raises(ValueError):
        panel_gradient([0, 0, 1.0], flat)


def test_config_validation():
    with pytest.raises(ValueError):
        QuadratureConfig(far_order=5)
    with pytest.raises(ValueError):
        QuadratureConfig(near_subdivision_depth=7)
    with pytest.raises(ValueError):
        QuadratureConfig(near_ratio=0.0)


@pytest.mark.parametrize("order", [1, 3, 6, 12])
def test_gauss_rules_integrate_constants(order):
    pts, wts = gauss_rule(order)
    assert abs(wts.sum() - 1.0) < 1e-14
    assert np.all(pts >= -1e-14)


def test_classify_regimes():
    c = RIGHT.mean(axis=0)
    cfg = QuadratureConfig()
    assert classify(c, RIGHT, cfg, is_self=True) is Regime.SELF
    assert classify(c + [0, 0, 0.5], RIGHT, cfg) is Regime.NEAR
    assert classify(c + [0, 0, 10.0], RIGHT, cfg) is Regime.FAR
    req = PanelIntegralRequest(c, RIGHT, "gradient", Regime.SELF)
    assert req.kind == "gradient"


def test_corpus_against_numerical_oracles():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(100):
        tri = _random_panel(rng)
        c = tri.mean(axis=0)
        n = np.cross(tri[1] - tri[0], tri[2] - tri[0])
        n /= np.linalg.norm(n)
        bary = rng.dirichlet([2.0, 2.0, 2.0])
        in_plane = bary @ tri
        off = c + rng.normal(size=3) * 0.7
        worst = max(worst, _rel(potential_closed(in_plane, tri), panel_potential(in_plane, tri, FALLBACK)))
        worst = max(worst, _rel(gradient_closed(c, tri), pv_self_gradient(tri, FALLBACK)))
        worst = max(worst, _rel(potential_closed(off, tri), panel_potential(off, tri, FALLBACK)))
        worst = max(worst, _rel(gradient_closed(off, tri), panel_gradient(off, tri, FALLBACK)))
    assert worst < 1e-6


def test_crossover_continuity():
    rng = np.random.default_rng(7)
    cfg = QuadratureConfig()
    worst = 0.0
    for _ in range(50):
        tri = _random_panel(rng)
        diam = np.max(np.linalg.norm(tri - np.roll(tri, 1, axis=0), axis=1))
        u = rng.normal(size=3)
        x = tri.mean(axis=0) + cfg.near_ratio * diam * u / np.linalg.norm(u)
        worst = max(worst, abs(potential_gauss(x, tri, cfg.far_order) / potential_closed(x, tri) - 1))
        worst = max(worst, _rel(gradient_gauss(x, tri, cfg.far_order), gradient_closed(x, tri)))
    assert worst < 1e-6


def test_gradient_is_minus_potential_derivative():
    tri = RIGHT
    x = np.array([3.0, -2.0, 1.5])
    h = 1e-3
    fd = np.array([(panel_potential(x + h * e, tri) - panel_potential(x - h * e, tri)) / (2 * h) for e in np.eye(3)])
    # d/dx int 1/|x - y| = -int (x - y)/|x - y|^3
    assert _rel(-fd, panel_gradient(x, tri)) < 1e-5


def test_pairwise_matches_single_calls(rng):
    panels = np.stack([_random_panel(rng) for _ in range(6)])
    targets = panels.mean(axis=1)
    pot, grad = pairwise_integrals(targets, panels, self_index=np.arange(6))
    for i in range(6):
        for j in range(6):
            p = panel_potential(targets[i], panels[j])
            g = pv_self_gradient(panels[j]) if i == j else panel_gradient(targets[i], panels[j])
            assert abs(pot[i, j] - p) <= 1e-12 * abs(p)
            assert np.allclose(grad[i, j], g, rtol=1e-12, atol=1e-14)


coords = st.floats(-3, 3, allow_nan=False)
vec3 = st.tuples(coords, coords, coords).map(np.array)


@given(shift=vec3, x=vec3)
def test_translation_invariance(shift, x):
    tri = RIGHT + [0.0, 0.0, 0.25]
    assert panel_potential(x + shift, tri + shift) == pytest.approx(panel_potential(x, tri), rel=1e-12)
    assert np.allclose(panel_gradient(x + shift, tri + shift), panel_gradient(x, tri), rtol=1e-10, atol=1e-12)


def test_translation_bit_identical_on_exact_shift():
    # shifts exactly representable in both coordinates keep every floating difference identical
    x = np.array([0.25, 0.5, 0.75])
    shift = np.array([2.0, -4.0, 8.0])
    assert panel_potential(x + shift, RIGHT + shift) == panel_potential(x, RIGHT)


@given(angle=st.floats(0, 2 * np.pi), x=vec3)
def test_rotation_equivariance(angle, x):
    c, s = np.cos(angle), np.sin(angle)
    Rz = np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])
    tri = RIGHT + [0.0, 0.0, 0.1]
    assert panel_potential(Rz @ x, tri @ Rz.T) == pytest.approx(panel_potential(x, tri), rel=1e-9, abs=1e-12)
    assert np.allclose(panel_gradient(Rz @ x, tri @ Rz.T), Rz @ panel_gradient(x, tri), rtol=1e-8, atol=1e-10)


@given(x=vec3)
def test_potential_positive_and_bounded(x):
    pot = panel_potential(x, RIGHT)
    d = np.linalg.norm(x - RIGHT, axis=1).max()
    assert pot > 0
    assert pot >= 0.5 / d - 1e-12
