import numpy as np
import pytest

from quadcurl.basis import (
    DMomentBasis, ScalarBasis, VectorBasis, dim_dspace, dim_poly,
    monomial_exponents,
)
from quadcurl.quadrature import quad_tet, quad_tri

REF_TET = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1.0]])


@pytest.fixture
def jittered_tet():
    rng = np.random.default_rng(42)
    return REF_TET + 0.15 * rng.standard_normal((4, 3))


def tri_frame(verts):
    n = np.cross(verts[1] - verts[0], verts[2] - verts[0])
    n /= np.linalg.norm(n)
    t1 = verts[1] - verts[0]
    t1 /= np.linalg.norm(t1)
    return np.stack([t1, np.cross(n, t1)]), n


def test_dimensions():
    for j in range(4):
        assert dim_poly(j, 3) == (j + 1) * (j + 2) * (j + 3) // 6
        assert dim_poly(j, 2) == (j + 1) * (j + 2) // 2
        assert dim_poly(j, 1) == j + 1
        assert len(monomial_exponents(j, 3)) == dim_poly(j, 3)
    for j in (1, 2, 3):
        assert dim_dspace(j, 3) == j * (j + 1) * (j + 3) // 2
        assert dim_dspace(j, 2) == j * (j + 2)
    assert dim_dspace(1, 2) == 3


@pytest.mark.parametrize("deg", [0, 1, 2, 3])
def test_orthonormality_tet(jittered_tet, deg):
    b = ScalarBasis(deg, jittered_tet)
    pts, w = quad_tet(2 * deg).map_to(jittered_tet)
    V = b.eval(pts)
    G = (V * w[:, None]).T @ V
    assert np.abs(G - np.eye(b.dim)).max() < 1e-10


@pytest.mark.parametrize("deg", [0, 1, 2, 3])
def test_orthonormality_tri(deg):
    rng = np.random.default_rng(7)
    verts = np.array([[0.1, 0, 0.3], [1, 0.2, 0.4], [0.3, 0.9, 0.1]])
    verts += 0.05 * rng.standard_normal((3, 3))
    frame, _ = tri_frame(verts)
    b = ScalarBasis(deg, verts, frame=frame)
    pts, w = quad_tri(2 * deg).map_to(verts)
    V = b.eval(pts)
    G = (V * w[:, None]).T @ V
    assert np.abs(G - np.eye(b.dim)).max() < 1e-10


def test_gradient_matches_finite_differences(jittered_tet):
    b = ScalarBasis(3, jittered_tet)
    rng = np.random.default_rng(3)
    pts = jittered_tet.mean(axis=0) + 0.05 * rng.standard_normal((5, 3))
    _, grads = b.eval_grad(pts)
    h = 1e-6
    for d in range(3):
        e = np.zeros(3)
        e[d] = h
        fd = (b.eval(pts + e) - b.eval(pts - e)) / (2 * h)
        assert np.abs(fd - grads[:, :, d]).max() < 1e-6


def test_hessian_matches_finite_differences(jittered_tet):
    b = ScalarBasis(3, jittered_tet)
    pts = jittered_tet.mean(axis=0)[None, :] + np.array([[0.01, -0.02, 0.03]])
    _, _, H = b.eval_hess(pts)
    h = 1e-4
    for d1 in range(3):
        for d2 in range(3):
            e1, e2 = np.zeros(3), np.zeros(3)
            e1[d1] = h
            e2[d2] = h
            fd = (b.eval(pts + e1 + e2) - b.eval(pts + e1 - e2)
                  - b.eval(pts - e1 + e2) + b.eval(pts - e1 - e2)) / (4 * h * h)
            assert np.abs(fd - H[:, :, d1, d2]).max() < 1e-4


def test_curl_of_constant_vector_is_zero(jittered_tet):
    vb = VectorBasis(ScalarBasis(0, jittered_tet))
    pts = jittered_tet.mean(axis=0)[None, :]
    assert np.abs(vb.curl(pts)).max() == 0.0


def test_divergence_of_identity_field(jittered_tet):
    vb = VectorBasis(ScalarBasis(1, jittered_tet))
    pts, w = quad_tet(4).map_to(jittered_tet)
    coef = np.einsum("ncj,nc,n->j", vb.eval(pts), pts, w)
    div = vb.div(pts) @ coef
    assert np.abs(div - 3.0).max() < 1e-12


def test_curl_of_rotation_field(jittered_tet):
    vb = VectorBasis(ScalarBasis(1, jittered_tet))
    pts, w = quad_tet(4).map_to(jittered_tet)
    f = np.stack([-pts[:, 1], pts[:, 0], np.zeros(len(pts))], axis=1)
    coef = np.einsum("ncj,nc,n->j", vb.eval(pts), f, w)
    curl = np.einsum("ncj,j->nc", vb.curl(pts), coef)
    assert np.abs(curl - np.array([0, 0, 2.0])).max() < 1e-12


@pytest.mark.parametrize("deg", [2, 3])
def test_curlcurl_in_lower_degree_span(jittered_tet, deg):
    # curlcurl of a degree-k vector polynomial is a degree-(k-2) polynomial
    vb = VectorBasis(ScalarBasis(deg, jittered_tet))
    low = VectorBasis(ScalarBasis(deg - 2, jittered_tet))
    pts, w = quad_tet(2 * deg + 2).map_to(jittered_tet)
    cc = vb.curlcurl(pts)
    lowv = low.eval(pts)
    proj = np.einsum("ncj,nci,n->ij", cc, lowv, w)  # (low_i, cc_j) coefficients
    recon = np.einsum("nci,ij->ncj", lowv, proj)
    assert np.abs(cc - recon).max() < 1e-10


def test_curlcurl_consistent_with_curl_of_curl(jittered_tet):
    # project the curl field and differentiate once more
    vb = VectorBasis(ScalarBasis(3, jittered_tet))
    lower = VectorBasis(ScalarBasis(2, jittered_tet))
    pts, w = quad_tet(8).map_to(jittered_tet)
    curl = vb.curl(pts)
    coef = np.einsum("ncj,nck,n->kj", curl, lower.eval(pts), w)
    curl_of_curl = np.einsum("nck,kj->ncj", lower.curl(pts), coef)
    assert np.abs(curl_of_curl - vb.curlcurl(pts)).max() < 1e-9


def test_face_vector_basis_tangential():
    verts = np.array([[0.2, 0.1, 0], [1, 0, 0.5], [0.4, 1.2, 0.3]])
    frame, n = tri_frame(verts)
    vb = VectorBasis(ScalarBasis(2, verts, frame=frame))
    assert vb.dim == 2 * dim_poly(2, 2)
    pts, _ = quad_tri(4).map_to(verts)
    vals = vb.eval(pts)
    assert np.abs(np.einsum("ncj,c->nj", vals, n)).max() < 1e-13


def test_dmoment_space_contains_position_scaling():
    # D_1 on a tet is spanned by constants and x; the radial field x - x0
    # must be exactly representable
    verts = REF_TET
    d = DMomentBasis(1, verts)
    pts, w = quad_tet(4).map_to(verts)
    vals = d.eval(pts)  # (n, 3, 4)
    target = pts - verts.mean(axis=0)
    coef, *_ = np.linalg.lstsq(
        vals.transpose(0, 1, 2).reshape(-1, d.dim), target.ravel(), rcond=None)
    recon = np.einsum("ncj,j->nc", vals, coef)
    assert np.abs(recon - target).max() < 1e-12
