"""Moment projections onto the discrete spaces.

Elementwise/facewise L2 projections, volumetric H(div) and H(curl)
projections defined through face/edge/interior moments, and the surface
projection used to impose the tangential boundary data.  All operations
are pure per-element/per-face computations.
"""

from dataclasses import dataclass

import numpy as np

from .basis import DMomentBasis, ScalarBasis, VectorBasis, dim_poly, monomial_exponents, eval_monomials
from .errors import AssemblyError
from .mesh import TET_EDGES, TET_FACES
from .quadrature import quad_seg, quad_tet, quad_tri

# moment systems are tiny (<= 30 unknowns); reject only near-exact singularity
_COND_LIMIT = 1e12


@dataclass
class ProjectionCoeffs:
    """Coefficient vector of a projection in a concrete basis."""

    space: str
    degree: int
    coeffs: np.ndarray
    basis: object

    def __post_init__(self):
        if len(self.coeffs) != self.basis.dim:
            raise AssemblyError(
                f"coefficient length {len(self.coeffs)} does not match "
                f"space dimension {self.basis.dim}")


def _solve_moments(M, rhs, what):
    if np.linalg.cond(M) > _COND_LIMIT:
        raise AssemblyError(f"singular moment matrix in {what}")
    return np.linalg.solve(M, rhs)


def l2_project_element(func, tet_verts, degree, vector=False, rule_degree=None):
    """L2 projection onto P_degree (scalar) or [P_degree]^3 on one tet."""
    scalar = ScalarBasis(degree, tet_verts)
    basis = VectorBasis(scalar) if vector else scalar
    rule = quad_tet(rule_degree if rule_degree is not None else 2 * degree + 2)
    pts, w = rule.map_to(np.asarray(tet_verts, dtype=float))
    coeffs = _l2_coeffs(func, basis, pts, w)
    return ProjectionCoeffs("tet-vector" if vector else "tet-scalar",
                            degree, coeffs, basis)


def l2_project_face(func, face_verts, frame, degree, vector=False, rule_degree=None):
    """L2 projection onto P_degree(F), tangential-vector valued if ``vector``.

    A vector field is projected componentwise in the face frame, which
    drops any normal component it may carry.
    """
    scalar = ScalarBasis(degree, face_verts, frame=frame)
    basis = VectorBasis(scalar) if vector else scalar
    rule = quad_tri(rule_degree if rule_degree is not None else 2 * degree + 2)
    pts, w = rule.map_to(np.asarray(face_verts, dtype=float))
    coeffs = _l2_coeffs(func, basis, pts, w)
    return ProjectionCoeffs("face-vector" if vector else "face-scalar",
                            degree, coeffs, basis)


def _l2_coeffs(func, basis, pts, w):
    f = np.asarray(func(pts), dtype=float)
    if isinstance(basis, VectorBasis):
        vals = basis.eval(pts)  # (n, 3, N)
        return np.einsum("ncj,nc,n->j", vals, f, w)
    return np.einsum("nj,n,n->j", basis.eval(pts), f, w)


def _tet_face_geometry(verts):
    """Per local face: vertices, outward unit normal, tangent frame."""
    verts = np.asarray(verts, dtype=float)
    centroid = verts.mean(axis=0)
    out = []
    for tri in TET_FACES:
        fv = verts[tri]
        n = np.cross(fv[1] - fv[0], fv[2] - fv[0])
        n /= np.linalg.norm(n)
        if np.dot(n, fv.mean(axis=0) - centroid) < 0:
            n = -n
        t1 = fv[1] - fv[0]
        t1 /= np.linalg.norm(t1)
        t2 = np.cross(n, t1)
        out.append((fv, n, np.stack([t1, t2])))
    return out


def _edge_local(pts, a, b):
    t = b - a
    length = np.linalg.norm(t)
    t = t / length
    s = (pts - 0.5 * (a + b)) @ t / length  # in [-1/2, 1/2]
    return t, s


def hdiv_project(func, tet_verts, degree, rule_degree=None):
    """H(div) moment projection into D_degree(T).

    Face moments match normal components against P_{degree-1}(F) and,
    for degree >= 2, interior moments against [P_{degree-2}]^3.
    """
    if degree < 1:
        raise AssemblyError("H(div) projection needs degree >= 1")
    verts = np.asarray(tet_verts, dtype=float)
    dbasis = DMomentBasis(degree, verts)
    rd = rule_degree if rule_degree is not None else 2 * degree + 2
    rows_M, rows_b = [], []

    for fv, n, frame in _tet_face_geometry(verts):
        pts, w = quad_tri(rd).map_to(fv)
        test = ScalarBasis(degree - 1, fv, frame=frame, orthonormalize=False)
        q = test.eval(pts)
        dn = np.einsum("ncj,c->nj", dbasis.eval(pts), n)
        fn = np.asarray(func(pts), dtype=float) @ n
        rows_M.append(np.einsum("nm,nj,n->mj", q, dn, w))
        rows_b.append(np.einsum("nm,n,n->m", q, fn, w))

    if degree >= 2:
        pts, w = quad_tet(rd).map_to(verts)
        test = VectorBasis(ScalarBasis(degree - 2, verts, orthonormalize=False))
        tv = test.eval(pts)
        dv = dbasis.eval(pts)
        f = np.asarray(func(pts), dtype=float)
        rows_M.append(np.einsum("ncm,ncj,n->mj", tv, dv, w))
        rows_b.append(np.einsum("ncm,nc,n->m", tv, f, w))

    M = np.vstack(rows_M)
    b = np.concatenate(rows_b)
    coeffs = _solve_moments(M, b, "hdiv_project")
    return ProjectionCoeffs("tet-D", degree, coeffs, dbasis)


def hcurl_project(func, tet_verts, degree, rule_degree=None):
    """H(curl) moment projection into [P_degree(T)]^3.

    Edge moments match tangential components against P_degree(E); face
    moments against D_{degree-1}(F) for degree >= 2; interior moments
    against D_{degree-2}(T) for degree >= 3.
    """
    if degree < 1:
        raise AssemblyError("H(curl) projection needs degree >= 1")
    verts = np.asarray(tet_verts, dtype=float)
    basis = VectorBasis(ScalarBasis(degree, verts))
    rd = rule_degree if rule_degree is not None else 2 * degree + 2
    erule = quad_seg(max(rd, 10))
    rows_M, rows_b = [], []

    for ea, eb in TET_EDGES:
        a, b = verts[ea], verts[eb]
        pts, w = erule.map_to(np.stack([a, b]))
        t, s = _edge_local(pts, a, b)
        q = s[:, None] ** np.arange(degree + 1)[None, :]
        bt = np.einsum("ncj,c->nj", basis.eval(pts), t)
        ft = np.asarray(func(pts), dtype=float) @ t
        rows_M.append(np.einsum("nm,nj,n->mj", q, bt, w))
        rows_b.append(np.einsum("nm,n,n->m", q, ft, w))

    if degree >= 2:
        for fv, n, frame in _tet_face_geometry(verts):
            pts, w = quad_tri(rd).map_to(fv)
            test = DMomentBasis(degree - 1, fv, frame=frame)
            tv = test.eval(pts)
            bv = basis.eval(pts)
            f = np.asarray(func(pts), dtype=float)
            rows_M.append(np.einsum("ncm,ncj,n->mj", tv, bv, w))
            rows_b.append(np.einsum("ncm,nc,n->m", tv, f, w))

    if degree >= 3:
        pts, w = quad_tet(rd).map_to(verts)
        test = DMomentBasis(degree - 2, verts)
        tv = test.eval(pts)
        bv = basis.eval(pts)
        f = np.asarray(func(pts), dtype=float)
        rows_M.append(np.einsum("ncm,ncj,n->mj", tv, bv, w))
        rows_b.append(np.einsum("ncm,nc,n->m", tv, f, w))

    M = np.vstack(rows_M)
    b = np.concatenate(rows_b)
    coeffs = _solve_moments(M, b, "hcurl_project")
    return ProjectionCoeffs("tet-vector", degree, coeffs, basis)


def commuting_residual(func, curl_func, tet_verts, degree, rule_degree=None):
    """L2 norm of curl(Pi_curl v) - Pi_div(curl v) on one tet."""
    verts = np.asarray(tet_verts, dtype=float)
    pc = hcurl_project(func, verts, degree, rule_degree)
    pd = hdiv_project(curl_func, verts, degree, rule_degree)
    rule = quad_tet(2 * degree + 2)
    pts, w = rule.map_to(verts)
    lhs = np.einsum("ncj,j->nc", pc.basis.curl(pts), pc.coeffs)
    rhs = np.einsum("ncj,j->nc", pd.basis.eval(pts), pd.coeffs)
    return float(np.sqrt(np.einsum("nc,nc,n->", lhs - rhs, lhs - rhs, w)))


def _face_edge_normals(face_verts, normal):
    """In-plane outward unit normal per edge of a triangular face."""
    fv = np.asarray(face_verts, dtype=float)
    centroid = fv.mean(axis=0)
    out = []
    for i, j in ((0, 1), (0, 2), (1, 2)):
        t = fv[j] - fv[i]
        t /= np.linalg.norm(t)
        ne = np.cross(t, normal)
        if np.dot(ne, 0.5 * (fv[i] + fv[j]) - centroid) < 0:
            ne = -ne
        out.append(((fv[i], fv[j]), ne))
    return out


def project_boundary_u(g1, face_verts, frame, normal, k, edge_rule_degree=None,
                       face_rule_degree=None, basis=None):
    """Surface H(div)-type projection of the tangential datum ``g1``.

    On a boundary face the result w in the tangential [P_k(F)]^2 space
    matches the edge moments of ``g1 . n_E`` against P_k(E) and, for
    k >= 2, the face moments against ``n x D_{k-1}(F)``.  The trace
    constraint of the scheme is then ``n x uhat = w``.
    """
    fv = np.asarray(face_verts, dtype=float)
    if basis is None:
        basis = VectorBasis(ScalarBasis(k, fv, frame=frame))
    erule = quad_seg(edge_rule_degree if edge_rule_degree is not None
                     else max(2 * k + 2, 10))
    rows_M, rows_b = [], []

    for (a, b), ne in _face_edge_normals(fv, normal):
        pts, w = erule.map_to(np.stack([a, b]))
        _, s = _edge_local(pts, a, b)
        q = s[:, None] ** np.arange(k + 1)[None, :]
        bn = np.einsum("ncj,c->nj", basis.eval(pts), ne)
        gn = np.asarray(g1(pts), dtype=float) @ ne
        rows_M.append(np.einsum("nm,nj,n->mj", q, bn, w))
        rows_b.append(np.einsum("nm,n,n->m", q, gn, w))

    if k >= 2:
        rd = face_rule_degree if face_rule_degree is not None else max(2 * k + 2, 10)
        pts, w = quad_tri(rd).map_to(fv)
        test = DMomentBasis(k - 1, fv, frame=frame)
        rot = np.cross(normal[None, :, None], test.eval(pts), axis=1)
        bv = basis.eval(pts)
        g = np.asarray(g1(pts), dtype=float)
        rows_M.append(np.einsum("ncm,ncj,n->mj", rot, bv, w))
        rows_b.append(np.einsum("ncm,nc,n->m", rot, g, w))

    M = np.vstack(rows_M)
    b = np.concatenate(rows_b)
    coeffs = _solve_moments(M, b, "project_boundary_u")
    return ProjectionCoeffs("face-vector", k, coeffs, basis)


def project_boundary_c(g2, face_verts, frame, k, rule_degree=None, basis=None):
    """Facewise tangential L2 projection of ``g2`` at degree k-1."""
    fv = np.asarray(face_verts, dtype=float)
    if basis is None:
        basis = VectorBasis(ScalarBasis(k - 1, fv, frame=frame))
    rule = quad_tri(rule_degree if rule_degree is not None else max(2 * k + 2, 10))
    pts, w = rule.map_to(fv)
    coeffs = _l2_coeffs(g2, basis, pts, w)
    return ProjectionCoeffs("face-vector", k - 1, coeffs, basis)
