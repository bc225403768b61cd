import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from layerdecomp.operators import stack
from layerdecomp.star_metric import orthonormalize, project, star_norm
from layerdecomp.subspaces import (
    Analysis,
    SubspaceConfig,
    circulation_field,
    count_cut,
    decompose,
    join,
    max_cross_inner,
    verify_complement,
)


def _distance(f, basis, metric):
    """Relative *-distance of f to span(basis)."""
    return star_norm(f - project(f, basis, metric), metric) / star_norm(f, metric)


def _max_distance(basis, target, metric, stride=1):
    cols = basis.columns[:, ::stride]
    return max((_distance(cols[:, i], target, metric) for i in range(cols.shape[1])), default=0.0)


def _rel_norm(a, b, metric):
    return star_norm(a, metric) / star_norm(b, metric)


# ---------------------------------------------------------------- M

@pytest.mark.parametrize("name", ["sphere3", "torus24"])
def test_generator_ranks(request, name):
    a = request.getfixturevalue(name)
    assert (a.M_minus.dim, a.M_plus.dim) == (a.n - 1, a.n)
    assert a.M_minus.clean and a.M_plus.clean


def test_normal_in_exterior_M(sphere3):
    nu = stack(sphere3.mesh.normals)
    assert _distance(nu, sphere3.M_plus, sphere3.metric) <= 0.01


def test_M_bases_star_orthonormal(sphere2):
    for B in (sphere2.M_minus, sphere2.M_plus, sphere2.Hdf):
        C = B.columns
        assert np.allclose(C.T @ sphere2.metric.apply(C), np.eye(B.dim), atol=1e-8)


# -------------------------------------------------------------- Hdf

def test_normal_in_exterior_kernel(sphere3):
    nu = stack(sphere3.mesh.normals)
    assert _distance(nu, sphere3.Hdf_side(1), sphere3.metric) <= 0.01


@pytest.mark.parametrize("name", ["sphere3", "torus24"])
@pytest.mark.parametrize("sign", [1, -1])
def test_kernel_plus_opposite_M_fill_space(request, name, sign):
    a = request.getfixturevalue(name)
    assert a.Hdf_side(sign).dim + a.M(-sign).dim == 3 * a.n


def test_Hdf_dimension_sphere(sphere3):
    assert sphere3.Hdf.dim == sphere3.n + 1 and sphere3.Hdf.clean


@pytest.mark.parametrize("name", ["sphere3", "torus24"])
def test_rank_arithmetic(request, name):
    r = request.getfixturevalue(name).rank_arithmetic()
    assert r["holds"] and r["sum"] == r["3N"]


# ------------------------------------------------------------- Hdrf

@pytest.mark.parametrize("name", ["sphere2", "torus12"])
@pytest.mark.parametrize("sign", [1, -1])
def test_M_inside_Hdrf(request, name, sign):
    a = request.getfixturevalue(name)
    assert _max_distance(a.M(sign), a.Hdrf(sign), a.metric, stride=8) <= 0.02


@pytest.mark.parametrize("sign", [1, -1])
def test_Hdrf_dimension_sphere(sphere2, sign):
    assert sphere2.Hdrf(sign).dim == sphere2.M(sign).dim


@pytest.mark.parametrize("sign", [1, -1])
def test_Hdrf_dimension_torus(torus12, sign):
    assert torus12.Hdrf(sign).dim == torus12.M(sign).dim + 1


@pytest.mark.parametrize("sign", [1, -1])
def test_constructive_Hdrf_contains_M_and_X(torus24, sign):
    H = torus24.Hdrf_constructive(sign)
    assert H.dim == torus24.M(sign).dim + torus24.X(sign).dim


# ---------------------------------------------------------------- X

@pytest.mark.parametrize("sign", [1, -1])
def test_X_trivial_on_sphere(sphere3, sign):
    cut = sphere3.X_cut(sign)
    assert cut.count == 0 and cut.clean
    assert np.all(cut.eigenvalues < 0.95)


def test_X_minus_torus(torus24):
    cut = torus24.X_cut(-1)
    assert cut.count == 1 and cut.clean and cut.ratio >= 10


def test_X_plus_torus(torus24):
    cut = torus24.X_cut(1)
    assert cut.count == 1 and cut.clean and cut.ratio >= 10


def test_circulation_field_in_interior_drf(torus24):
    a = torus24
    h = stack(circulation_field(a.mesh.centroids))
    span = join("Hdrf-", a.M_minus, a.X(-1), metric=a.metric)
    inside = _rel_norm(project(h, span, a.metric), h, a.metric)
    in_X = _rel_norm(project(h, a.X(-1), a.metric), h, a.metric)
    assert inside >= 0.9 and in_X >= 0.1


def test_circulation_field_is_divergence_free_and_curl_free():
    rng = np.random.default_rng(3)
    x = rng.uniform(0.5, 2.0, size=(20, 3))
    eps = 1e-5
    jac = np.empty((20, 3, 3))
    for k in range(3):
        e = np.zeros(3)
        e[k] = eps
        jac[:, :, k] = (circulation_field(x + e) - circulation_field(x - e)) / (2 * eps)
    assert np.abs(np.trace(jac, axis1=1, axis2=2)).max() <= 1e-8
    assert np.abs(jac - jac.transpose(0, 2, 1)).max() <= 1e-8


# ------------------------------------------------------------- HdfD

@pytest.mark.parametrize("name", ["sphere2", "torus12"])
def test_HdfD_inside_Hdf(request, name):
    a = request.getfixturevalue(name)
    assert _max_distance(a.HdfD_range, a.Hdf, a.metric, stride=16) <= 0.02


def test_HdfD_equals_Hdf_sphere(sphere2):
    assert sphere2.HdfD_range.dim == sphere2.Hdf.dim


def test_HdfD_codimension_torus(torus12):
    assert torus12.Hdf.dim - torus12.HdfD_range.dim == 2


def test_quotient_torus(torus24):
    q = torus24.quotient
    assert q.count == 2 and q.clean


@pytest.mark.parametrize("name", ["sphere3", "torus24"])
def test_Hdf_split_into_HdfD_and_X(request, name):
    a = request.getfixturevalue(name)
    assert a.Hdf.dim == a.HdfD.dim + a.X(-1).dim + a.X(1).dim


# ------------------------------------------------------- complement

@pytest.mark.parametrize("name", ["sphere3", "torus24"])
@pytest.mark.parametrize("sign", [1, -1])
def test_complement_angle(request, name, sign):
    a = request.getfixturevalue(name)
    assert a.complement_check(sign).max_angle_deg <= 5.0


def test_complement_against_random_subspace(sphere2, rng):
    a = sphere2
    random_basis = orthonormalize(rng.normal(size=(3 * a.n, a.n)), a.metric, 1e-6, "M+")
    check = verify_complement(-1, a.ops, random_basis, a.metric, a.config.rank_tol)
    assert check.max_angle_deg >= 80.0


# ----------------------------------------------------- decomposition

def test_decompose_normal_sphere(sphere3):
    a = sphere3
    nu = stack(a.mesh.normals)
    d = a.decompose(nu)
    assert _rel_norm(d.g_plus - nu, nu, a.metric) <= 0.02
    assert _rel_norm(d.g_minus, nu, a.metric) <= 0.02
    assert _rel_norm(d.h_df, nu, a.metric) <= 0.02


@given(seed=st.integers(0, 2**31), variant=st.sampled_from(["potential", "divfree"]))
def test_decompose_reconstructs(torus12, seed, variant):
    f = np.random.default_rng(seed).normal(size=3 * torus12.n)
    d = torus12.decompose(f, variant)
    assert d.reconstruction_residual <= 1e-8
    assert np.allclose(d.g_minus + d.g_plus + d.h_df + d.residual, f, rtol=0, atol=1e-12 * np.abs(f).max())


def test_decompose_zero_field(sphere2):
    d = sphere2.decompose(np.zeros(3 * sphere2.n))
    for part in (d.g_minus, d.g_plus, d.h_df):
        assert not part.any()
    assert d.reconstruction_residual == 0.0


def test_decompose_rejects_nan(sphere2):
    f = np.zeros(3 * sphere2.n)
    f[0] = np.nan
    with pytest.raises(ValueError, match="non-finite"):
        sphere2.decompose(f)


def test_decompose_rank_deficit_reports_residual(sphere2, rng):
    f = rng.normal(size=3 * sphere2.n)
    d = decompose(f, (sphere2.M_minus, sphere2.M_plus, sphere2.X(1)), sphere2.metric)
    assert d.reconstruction_residual > 0.1


def test_decompose_circulation_torus(torus24):
    a = torus24
    h = stack(circulation_field(a.mesh.centroids))
    assert _rel_norm(a.decompose(h).h_df, h, a.metric) >= 0.1
    d = a.decompose(h, "divfree")
    assert _rel_norm(d.g_minus - h, h, a.metric) <= 0.02


@pytest.mark.parametrize("name", ["sphere3", "torus24"])
def test_decomposition_components_orthogonal(request, name):
    a = request.getfixturevalue(name)
    from layerdecomp.operators import smooth_test_data

    _, f = smooth_test_data(a.mesh)
    d = a.decompose(f)
    assert max(abs(v) for v in d.mutual_inners.values()) <= 0.02


@pytest.mark.parametrize("name", ["sphere3", "torus24"])
def test_M_minus_orthogonal_to_M_plus(request, name):
    a = request.getfixturevalue(name)
    assert max_cross_inner(a.M_minus, a.M_plus, a.metric) <= 0.02


def test_decomposition_json(sphere2, rng):
    d = sphere2.decompose(rng.normal(size=3 * sphere2.n))
    out = json.loads(json.dumps(d.as_dict()))
    assert set(out) == {"variant", "reconstruction_residual", "mutual_inners"}


# ------------------------------------------------------ codimensions

def test_codimension_report_sphere(sphere3):
    r = sphere3.codimension_report()
    assert (r.dim_X_minus, r.dim_X_plus, r.dim_Hdf_mod_HdfD) == (0, 0, 0)
    assert r.all_match


def test_codimension_report_torus(torus24):
    r = torus24.codimension_report()
    assert (r.dim_X_minus, r.dim_X_plus, r.dim_Hdf_mod_HdfD) == (1, 1, 2)
    assert r.all_match


def test_codimension_tight_tolerance_is_no_gap(torus12):
    a = Analysis(torus12.ops, SubspaceConfig(rank_tol=1e-14))
    r = a.codimension_report()
    assert r.any_no_gap and not r.all_match


def test_codimension_report_json(torus12):
    out = json.loads(torus12.codimension_report().to_json())
    assert out["betti"]["b1_boundary"] == 2
    assert set(out["verdicts"]) == {"X-", "X+", "Hdf/HdfD"}
    assert out["dims"]["3N"] == 3 * torus12.n


# ------------------------------------------------------- count cuts

@given(k=st.integers(0, 4), extra=st.integers(1, 10), seed=st.integers(0, 2**31))
def test_count_cut_planted(k, extra, seed):
    rng = np.random.default_rng(seed)
    small = rng.uniform(1e-6, 1e-4, size=k)
    large = rng.uniform(0.2, 1.0, size=extra)
    cut = count_cut(np.concatenate([large, small]), tol=0.05)
    assert cut.count == k and cut.clean
    assert np.all(np.diff(cut.defects) >= 0)


def test_count_cut_all_small_not_clean():
    cut = count_cut(np.array([1e-4, 2e-4]), tol=0.05)
    assert not cut.clean


def test_subspace_config_validation():
    with pytest.raises(ValueError):
        SubspaceConfig(rank_tol=0.0)
    with pytest.raises(ValueError):
        SubspaceConfig(gap_ratio=1.0)
