"""HDG assembly, static condensation and recovery for the quad-curl system.

Element-local unknowns are the curl-curl auxiliary field r, the primal
field u and the multiplier p; the globally coupled unknowns are the face
traces (uhat, chat, phat).  The local saddle blocks are symmetric, the
interior block is eliminated per element by dense LU, and the resulting
Schur complement couples face unknowns only.

Element loops are embarrassingly parallel in principle; this
implementation runs them serially so the assembled matrix is bitwise
deterministic.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .basis import ScalarBasis, VectorBasis, dim_poly
from .errors import CondensationError, SizeLimitError
from .projection import project_boundary_c, project_boundary_u
from .quadrature import quad_tet, quad_tri

_PIVOT_RATIO = 1e-12


@dataclass(frozen=True)
class DofLayout:
    """Block sizes of the interior and face unknowns for one degree k."""

    k: int
    nr: int    # 3 * dim P_{k-1}(T)
    nu: int    # 3 * dim P_k(T)
    npp: int   # dim P_k(T)
    nuh: int   # 2 * dim P_k(F)
    nch: int   # 2 * dim P_{k-1}(F)
    nph: int   # dim P_k(F)

    @property
    def n_interior(self):
        return self.nr + self.nu + self.npp

    @property
    def face_block(self):
        return self.nuh + self.nch + self.nph

    def face_dof_total(self, mesh):
        return mesh.nfaces * self.face_block


def make_layout(k: int) -> DofLayout:
    return DofLayout(k=k,
                     nr=3 * dim_poly(k - 1, 3),
                     nu=3 * dim_poly(k, 3),
                     npp=dim_poly(k, 3),
                     nuh=2 * dim_poly(k, 2),
                     nch=2 * dim_poly(k - 1, 2),
                     nph=dim_poly(k, 2))


class HDGSpaces:
    """Per-mesh basis bundle: element and face bases plus the dof layout.

    Orthonormalization coefficients only depend on the entity geometry
    relative to its centroid, so congruent (translated) entities share
    one coefficient table; on structured meshes this collapses the
    construction cost to a handful of Cholesky solves.
    """

    def __init__(self, mesh, k):
        if k < 1:
            raise CondensationError(f"polynomial degree must be >= 1, got {k}")
        self.mesh = mesh
        self.k = k
        self.layout = make_layout(k)
        memo = {}

        def shared(degree, verts, frame=None):
            rel = verts - verts.mean(axis=0)
            key = (degree, rel.tobytes(),
                   frame.tobytes() if frame is not None else None)
            hit = memo.get(key)
            basis = ScalarBasis(degree, verts, frame=frame,
                                orthonormalize=hit is None)
            if hit is None:
                memo[key] = basis.coeff
            else:
                basis.coeff = hit
            return basis

        self.r_basis = []
        self.u_basis = []
        self.p_basis = []
        for t in range(mesh.ntets):
            verts = mesh.tet_verts(t)
            self.r_basis.append(VectorBasis(shared(k - 1, verts)))
            self.u_basis.append(VectorBasis(shared(k, verts)))
            self.p_basis.append(shared(k, verts))
        self.uhat_basis = []
        self.chat_basis = []
        self.phat_basis = []
        for f in range(mesh.nfaces):
            fv = mesh.face_verts(f)
            frame = np.stack([mesh.face_t1[f], mesh.face_t2[f]])
            self.uhat_basis.append(VectorBasis(shared(k, fv, frame=frame)))
            self.chat_basis.append(VectorBasis(shared(k - 1, fv, frame=frame)))
            self.phat_basis.append(shared(k, fv, frame=frame))
        self.vol_rule = quad_tet(2 * k + 2)
        self.face_rule = quad_tri(2 * k + 2)


@dataclass
class LocalSystem:
    """Symmetric local block system over [r|u|p ; (uhat|chat|phat) x 4]."""

    A: np.ndarray
    b: np.ndarray
    n_interior: int
    face_ids: np.ndarray


def _crossn(n, arr):
    # n x arr for arr of shape (nq, 3, N)
    out = np.empty_like(arr)
    out[:, 0] = n[1] * arr[:, 2] - n[2] * arr[:, 1]
    out[:, 1] = n[2] * arr[:, 0] - n[0] * arr[:, 2]
    out[:, 2] = n[0] * arr[:, 1] - n[1] * arr[:, 0]
    return out


def _ip(w, A, B):
    return np.einsum("qci,q,qcj->ij", A, w, B)


def _ips(w, a, b):
    return np.einsum("qi,q,qj->ij", a, w, b)


def stab_lengths(mesh, fid):
    """Penalty length scales (h_u, h_p) of one face.

    The vector-trace penalties (the h^-3 and h^-1 terms acting on the
    tangential mismatches) use the smallest-enclosing-circle radius; the
    scalar-trace penalty uses the full circle diameter.  The reference
    results this solver is validated against pin both normalizations:
    either choice applied uniformly shifts the primal-field or the
    multiplier error by well over a factor of two.
    """
    return 0.5 * mesh.face_h[fid], mesh.face_h[fid]


class _FaceEval:
    """Evaluations of all bases of one (element, local face) pair."""

    def __init__(self, spaces, t, lf):
        mesh = spaces.mesh
        fid = mesh.tet_faces[t, lf]
        self.fid = fid
        self.sign = mesh.tet_face_sign(t, lf)
        self.n = self.sign * mesh.face_normal[fid]
        self.hu, self.hp = stab_lengths(mesh, fid)
        pts, self.w = spaces.face_rule.map_to(mesh.face_verts(fid))
        self.pts = pts
        self.Rv = spaces.r_basis[t].eval(pts)
        self.curlR = spaces.r_basis[t].curl(pts)
        Uv = spaces.u_basis[t].eval(pts)
        curlU = spaces.u_basis[t].curl(pts)
        self.Uv = Uv
        self.curlU = curlU
        self.nxU = _crossn(self.n, Uv)
        self.nxcU = _crossn(self.n, curlU)
        self.ndotU = np.einsum("qcj,c->qj", Uv, self.n)
        self.Pv = spaces.p_basis[t].eval(pts)
        Fu = spaces.uhat_basis[fid].eval(pts)
        Fc = spaces.chat_basis[fid].eval(pts)
        self.Fu = Fu
        self.Fc = Fc
        self.nxFu = _crossn(self.n, Fu)
        self.nxFc = _crossn(self.n, Fc)
        self.Fp = spaces.phat_basis[fid].eval(pts)


def assemble_local(spaces: HDGSpaces, t: int, case=None) -> LocalSystem:
    """Assemble the symmetric local matrix and load vector of element ``t``.

    Realizes a_h, b_h, c_h and the stabilizations s_h^u (weights h_F^-3
    and h_F^-1) and s_h^p (weight h_F^-1); the u-test row carries -s_h^u
    and the load -(f, v), the p-test row carries +s_h^p and (g, q).
    """
    lay = spaces.layout
    mesh = spaces.mesh
    n_int = lay.n_interior
    fb = lay.face_block
    nloc = n_int + 4 * fb
    A = np.zeros((nloc, nloc))
    b = np.zeros(nloc)

    sr = slice(0, lay.nr)
    su = slice(lay.nr, lay.nr + lay.nu)
    sp_ = slice(lay.nr + lay.nu, n_int)

    verts = mesh.tet_verts(t)
    pts, w = spaces.vol_rule.map_to(verts)
    Rv = spaces.r_basis[t].eval(pts)
    ccR = spaces.r_basis[t].curlcurl(pts)
    Uv = spaces.u_basis[t].eval(pts)
    divU = spaces.u_basis[t].div(pts)
    Pv = spaces.p_basis[t].eval(pts)

    A[sr, sr] += _ip(w, Rv, Rv)
    K = -_ip(w, ccR, Uv)                       # -(u, curlcurl s)
    A[sr, su] += K
    A[su, sr] += K.T
    D = _ips(w, Pv, divU)                      # (div u, q)
    A[sp_, su] += D
    A[su, sp_] += D.T

    if case is not None:
        fv = np.asarray(case.f(pts), dtype=float)
        b[su] -= np.einsum("qcj,qc,q->j", Uv, fv, w)
        gv = np.asarray(case.g(pts), dtype=float)
        b[sp_] += np.einsum("qj,q,q->j", Pv, gv, w)

    for lf in range(4):
        ev = _FaceEval(spaces, t, lf)
        w3 = ev.hu ** -3
        w1 = ev.hu ** -1
        wp = ev.hp ** -1
        o = n_int + lf * fb
        fu = slice(o, o + lay.nuh)
        fc = slice(o + lay.nuh, o + lay.nuh + lay.nch)
        fp = slice(o + lay.nuh + lay.nch, o + fb)

        B = -_ip(ev.w, ev.curlR, ev.nxFu)      # -(n x uhat, curl s)
        A[sr, fu] += B
        A[fu, sr] += B.T
        B = -_ip(ev.w, ev.Rv, ev.nxFc)         # -(n x chat, s)
        A[sr, fc] += B
        A[fc, sr] += B.T

        A[su, su] -= w3 * _ip(ev.w, ev.nxU, ev.nxU) + w1 * _ip(ev.w, ev.nxcU, ev.nxcU)
        B = w3 * _ip(ev.w, ev.nxU, ev.nxFu)
        A[su, fu] += B
        A[fu, su] += B.T
        B = w1 * _ip(ev.w, ev.nxcU, ev.nxFc)
        A[su, fc] += B
        A[fc, su] += B.T
        A[fu, fu] -= w3 * _ip(ev.w, ev.nxFu, ev.nxFu)
        A[fc, fc] -= w1 * _ip(ev.w, ev.nxFc, ev.nxFc)

        B = -_ips(ev.w, ev.ndotU, ev.Fp)       # -<n.u, qhat>
        A[su, fp] += B
        A[fp, su] += B.T

        A[sp_, sp_] += wp * _ips(ev.w, ev.Pv, ev.Pv)
        B = -wp * _ips(ev.w, ev.Pv, ev.Fp)
        A[sp_, fp] += B
        A[fp, sp_] += B.T
        A[fp, fp] += wp * _ips(ev.w, ev.Fp, ev.Fp)

    return LocalSystem(A=A, b=b, n_interior=n_int, face_ids=mesh.tet_faces[t])


def _rotate_to_uhat(coeffs):
    # trace constraint is n x uhat = w; in the (t1, t2) frame the
    # coefficients of uhat = w x n are (w_t2, -w_t1)
    m = len(coeffs) // 2
    return np.concatenate([coeffs[m:], -coeffs[:m]])


def boundary_values(spaces: HDGSpaces, case=None) -> np.ndarray:
    """Constrained face-dof values: per boundary face [uhat | chat | phat].

    uhat comes from the surface H(div) projection of g1 = n x u, chat
    from the facewise L2 projection of g2 = n x curl u at degree k-1,
    and phat is zero on the boundary.
    """
    mesh = spaces.mesh
    lay = spaces.layout
    bc = np.zeros((mesh.nfaces, lay.face_block))
    if case is None:
        return bc
    for f in np.flatnonzero(mesh.boundary_face):
        n = mesh.face_normal[f]
        fv = mesh.face_verts(f)
        frame = np.stack([mesh.face_t1[f], mesh.face_t2[f]])

        def g1(pts):
            return np.cross(n[None, :], np.asarray(case.u(pts), dtype=float))

        def g2(pts):
            return np.cross(n[None, :], np.asarray(case.curl_u(pts), dtype=float))

        wu = project_boundary_u(g1, fv, frame, n, spaces.k,
                                basis=spaces.uhat_basis[f]).coeffs
        wc = project_boundary_c(g2, fv, frame, spaces.k,
                                basis=spaces.chat_basis[f]).coeffs
        bc[f, :lay.nuh] = _rotate_to_uhat(wu)
        bc[f, lay.nuh:lay.nuh + lay.nch] = _rotate_to_uhat(wc)
        # phat = 0 on the boundary
    return bc


@dataclass
class CondensedSystem:
    """Face-unknown Schur system plus per-element recovery data."""

    matrix: sp.csr_matrix
    rhs: np.ndarray
    spaces: HDGSpaces
    bc: np.ndarray                 # (F, face_block) constrained values
    face_free_pos: np.ndarray      # (F,) free-face ordinal or -1
    free_faces: np.ndarray
    recovery: list                 # per element: (shared kernel, load vector)
    ndof_total: int                # face dofs incl. constrained ones

    @property
    def nfree(self):
        return self.matrix.shape[0]


class _ElementKernel:
    """Cached load-independent element data: local matrix, interior
    factorization and Schur complement for one congruence class."""

    def __init__(self, spaces, t):
        mesh = spaces.mesh
        lay = spaces.layout
        n_int = lay.n_interior
        fb = lay.face_block
        self.A = assemble_local(spaces, t).A
        self.A_if_full = self.A[:n_int, n_int:].copy()
        try:
            self.lu = sla.lu_factor(self.A[:n_int, :n_int])
        except sla.LinAlgError as exc:
            raise CondensationError(
                f"interior block of element {t} is singular: {exc}", element=t)
        d = np.abs(np.diag(self.lu[0]))
        if d.min() <= _PIVOT_RATIO * d.max():
            raise CondensationError(
                f"interior block of element {t} is numerically singular "
                f"(pivot ratio {d.min() / d.max():.2e})", element=t)

        self.keep = np.concatenate(
            [np.arange(n_int + lf * fb, n_int + (lf + 1) * fb)
             for lf in range(4)
             if not mesh.boundary_face[mesh.tet_faces[t, lf]]]
        ) if not mesh.boundary_face[mesh.tet_faces[t]].all() else np.empty(0, int)
        self.A_if = self.A[:n_int, self.keep]
        A_ff = self.A[np.ix_(self.keep, self.keep)]
        self.S = A_ff - self.A_if.T @ sla.lu_solve(self.lu, self.A_if)

        pts, w = spaces.vol_rule.map_to(mesh.tet_verts(t))
        self.load_w = w
        self.load_U = spaces.u_basis[t].eval(pts)
        self.load_P = spaces.p_basis[t].eval(pts)


def _element_key(spaces, t):
    """Exact congruence-class key of one element.

    Captures everything the load-independent local system depends on:
    relative element/face geometry, face frames, the normals as seen by
    this element, the penalty lengths and the boundary pattern.  On
    non-structured meshes keys simply never repeat.
    """
    mesh = spaces.mesh
    verts = mesh.tet_verts(t)
    c = verts.mean(axis=0)
    parts = [(verts - c).tobytes()]
    for lf in range(4):
        fid = mesh.tet_faces[t, lf]
        parts.append((mesh.face_verts(fid) - c).tobytes())
        parts.append(mesh.face_t1[fid].tobytes())
        parts.append(mesh.face_t2[fid].tobytes())
        parts.append((mesh.tet_face_sign(t, lf) * mesh.face_normal[fid]).tobytes())
        parts.append(float(mesh.face_h[fid]).hex())
        parts.append(str(bool(mesh.boundary_face[fid])))
    return b"|".join(p if isinstance(p, bytes) else p.encode() for p in parts)


def condense(spaces: HDGSpaces, case=None, bc=None) -> CondensedSystem:
    """Eliminate interior unknowns and constrained boundary-face dofs.

    Schur complements are accumulated facewise into a sparse symmetric
    system over the interior-face dofs; boundary values move to the
    right-hand side.  Congruent elements share one kernel (matrix,
    factorization, Schur complement), so structured meshes assemble in
    time proportional to the load evaluations only.
    """
    mesh = spaces.mesh
    lay = spaces.layout
    fb = lay.face_block
    n_int = lay.n_interior
    if bc is None:
        bc = boundary_values(spaces, case)

    free_faces = np.flatnonzero(~mesh.boundary_face)
    face_free_pos = np.full(mesh.nfaces, -1, dtype=np.int64)
    face_free_pos[free_faces] = np.arange(len(free_faces))
    nfree = len(free_faces) * fb

    rhs = np.zeros(nfree)
    recovery = []
    rows, cols, vals = [], [], []
    kernels = {}

    for t in range(mesh.ntets):
        key = _element_key(spaces, t)
        kern = kernels.get(key)
        if kern is None:
            kern = kernels[key] = _ElementKernel(spaces, t)

        b = np.zeros(n_int + 4 * fb)
        if case is not None:
            pts = spaces.vol_rule.points @ mesh.tet_verts(t)
            fv = np.asarray(case.f(pts), dtype=float)
            b[lay.nr:lay.nr + lay.nu] = -np.einsum(
                "qcj,qc,q->j", kern.load_U, fv, kern.load_w)
            gv = np.asarray(case.g(pts), dtype=float)
            b[lay.nr + lay.nu:n_int] = np.einsum(
                "qj,q,q->j", kern.load_P, gv, kern.load_w)
        b_int = b[:n_int].copy()

        gdofs = []
        for lf, fid in enumerate(mesh.tet_faces[t]):
            if mesh.boundary_face[fid]:
                v = bc[fid]
                if np.any(v):
                    cols_lf = np.arange(n_int + lf * fb, n_int + (lf + 1) * fb)
                    b = b - kern.A[:, cols_lf] @ v
            else:
                gdofs.append(face_free_pos[fid] * fb + np.arange(fb))
        gdofs = np.concatenate(gdofs) if gdofs else np.empty(0, dtype=int)
        recovery.append((kern, b_int))

        if len(kern.keep):
            rloc = b[kern.keep] - kern.A_if.T @ sla.lu_solve(kern.lu, b[:n_int])
            rhs[gdofs] += rloc
            gi, gj = np.meshgrid(gdofs, gdofs, indexing="ij")
            rows.append(gi.ravel())
            cols.append(gj.ravel())
            vals.append(kern.S.ravel())

    matrix = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(nfree, nfree)).tocsr()
    matrix.sum_duplicates()
    return CondensedSystem(matrix=matrix, rhs=rhs, spaces=spaces, bc=bc,
                           face_free_pos=face_free_pos, free_faces=free_faces,
                           recovery=recovery,
                           ndof_total=lay.face_dof_total(mesh))


@dataclass
class SolutionFields:
    """Elementwise (r, u, p) and facewise (uhat, chat, phat) coefficients."""

    k: int
    r: np.ndarray
    u: np.ndarray
    p: np.ndarray
    uhat: np.ndarray
    chat: np.ndarray
    phat: np.ndarray

    def __sub__(self, other):
        return SolutionFields(self.k, self.r - other.r, self.u - other.u,
                              self.p - other.p, self.uhat - other.uhat,
                              self.chat - other.chat, self.phat - other.phat)


def face_vector(cs: CondensedSystem, x_free: np.ndarray) -> np.ndarray:
    """Full per-face dof array combining solved and constrained values."""
    lay = cs.spaces.layout
    fb = lay.face_block
    xf = cs.bc.copy()
    for pos, fid in enumerate(cs.free_faces):
        xf[fid] = x_free[pos * fb:(pos + 1) * fb]
    return xf


def recover_interior(cs: CondensedSystem, x_free: np.ndarray) -> SolutionFields:
    """Back-substitute face values into the per-element interior systems."""
    spaces = cs.spaces
    mesh = spaces.mesh
    lay = spaces.layout
    xf = face_vector(cs, x_free)

    r = np.zeros((mesh.ntets, lay.nr))
    u = np.zeros((mesh.ntets, lay.nu))
    p = np.zeros((mesh.ntets, lay.npp))
    for t in range(mesh.ntets):
        kern, b_int = cs.recovery[t]
        xface = xf[mesh.tet_faces[t]].ravel()
        xi = sla.lu_solve(kern.lu, b_int - kern.A_if_full @ xface)
        r[t] = xi[:lay.nr]
        u[t] = xi[lay.nr:lay.nr + lay.nu]
        p[t] = xi[lay.nr + lay.nu:]
    return SolutionFields(k=spaces.k, r=r, u=u, p=p,
                          uhat=xf[:, :lay.nuh],
                          chat=xf[:, lay.nuh:lay.nuh + lay.nch],
                          phat=xf[:, lay.nuh + lay.nch:])


@dataclass(frozen=True)
class SigmaNorm:
    r: float
    u: float
    p: float

    @property
    def total(self):
        return float(np.sqrt(self.r ** 2 + self.u ** 2 + self.p ** 2))


def sigma_norm(spaces: HDGSpaces, fields: SolutionFields) -> SigmaNorm:
    """Components (||r||, ||(u,uhat,chat)||_U, ||(p,phat)||_P).

    The U-norm collects curlcurl, the h_F^{-3/2} and h_F^{-1/2} trace
    mismatches, the scaled divergence and the normal-jump terms; the
    P-norm uses the h_F^{-1/2} mismatch weight.
    """
    mesh = spaces.mesh
    lay = spaces.layout
    acc_r = acc_cc = acc_tu = acc_tc = acc_div = acc_jump = 0.0
    acc_gp = acc_tp = 0.0

    for t in range(mesh.ntets):
        pts, w = spaces.vol_rule.map_to(mesh.tet_verts(t))
        rv = np.einsum("qcj,j->qc", spaces.r_basis[t].eval(pts), fields.r[t])
        acc_r += np.einsum("qc,qc,q->", rv, rv, w)
        cc = np.einsum("qcj,j->qc", spaces.u_basis[t].curlcurl(pts), fields.u[t])
        acc_cc += np.einsum("qc,qc,q->", cc, cc, w)
        dv = spaces.u_basis[t].div(pts) @ fields.u[t]
        acc_div += mesh.tet_h[t] ** 2 * np.einsum("q,q,q->", dv, dv, w)
        _, gp = spaces.p_basis[t].eval_grad(pts)
        g = np.einsum("qjc,j->qc", gp, fields.p[t])
        acc_gp += mesh.tet_h[t] ** 2 * np.einsum("qc,qc,q->", g, g, w)

        for lf in range(4):
            ev = _FaceEval(spaces, t, lf)
            fid = ev.fid
            tu = (np.einsum("qcj,j->qc", ev.nxU, fields.u[t])
                  - np.einsum("qcj,j->qc", ev.nxFu, fields.uhat[fid]))
            acc_tu += ev.hu ** -3 * np.einsum("qc,qc,q->", tu, tu, ev.w)
            tc = (np.einsum("qcj,j->qc", ev.nxcU, fields.u[t])
                  - np.einsum("qcj,j->qc", ev.nxFc, fields.chat[fid]))
            acc_tc += ev.hu ** -1 * np.einsum("qc,qc,q->", tc, tc, ev.w)
            tp = ev.Pv @ fields.p[t] - ev.Fp @ fields.phat[fid]
            acc_tp += ev.hp ** -1 * np.einsum("q,q,q->", tp, tp, ev.w)

    for fid in np.flatnonzero(~mesh.boundary_face):
        pts, w = spaces.face_rule.map_to(mesh.face_verts(fid))
        nf = mesh.face_normal[fid]
        jump = np.zeros(len(pts))
        for t in mesh.face_tets[fid]:
            uv = np.einsum("qcj,j->qc", spaces.u_basis[t].eval(pts), fields.u[t])
            sgn = 1.0 if mesh.face_tets[fid, 0] == t else -1.0
            jump += sgn * (uv @ nf)
        acc_jump += stab_lengths(mesh, fid)[0] * np.einsum("q,q,q->", jump, jump, w)

    return SigmaNorm(r=float(np.sqrt(acc_r)),
                     u=float(np.sqrt(acc_cc + acc_tu + acc_tc + acc_div + acc_jump)),
                     p=float(np.sqrt(acc_gp + acc_tp)))


def sample_fields(spaces: HDGSpaces, u, curl_u, r, p) -> SolutionFields:
    """L2-sample closed-form fields into the discrete spaces.

    Traces take the tangential parts of u and curl u and the trace of p;
    for polynomial data of matching degree the sampling is exact.
    """
    mesh = spaces.mesh
    lay = spaces.layout
    k = spaces.k
    out = SolutionFields(k=k,
                         r=np.zeros((mesh.ntets, lay.nr)),
                         u=np.zeros((mesh.ntets, lay.nu)),
                         p=np.zeros((mesh.ntets, lay.npp)),
                         uhat=np.zeros((mesh.nfaces, lay.nuh)),
                         chat=np.zeros((mesh.nfaces, lay.nch)),
                         phat=np.zeros((mesh.nfaces, lay.nph)))
    deg = 2 * k + 4
    for t in range(mesh.ntets):
        pts, w = quad_tet(deg).map_to(mesh.tet_verts(t))
        out.r[t] = np.einsum("qcj,qc,q->j", spaces.r_basis[t].eval(pts),
                             np.asarray(r(pts), dtype=float), w)
        out.u[t] = np.einsum("qcj,qc,q->j", spaces.u_basis[t].eval(pts),
                             np.asarray(u(pts), dtype=float), w)
        out.p[t] = np.einsum("qj,q,q->j", spaces.p_basis[t].eval(pts),
                             np.asarray(p(pts), dtype=float), w)
    for f in range(mesh.nfaces):
        pts, w = quad_tri(deg).map_to(mesh.face_verts(f))
        out.uhat[f] = np.einsum("qcj,qc,q->j", spaces.uhat_basis[f].eval(pts),
                                np.asarray(u(pts), dtype=float), w)
        out.chat[f] = np.einsum("qcj,qc,q->j", spaces.chat_basis[f].eval(pts),
                                np.asarray(curl_u(pts), dtype=float), w)
        out.phat[f] = np.einsum("qj,q,q->j", spaces.phat_basis[f].eval(pts),
                                np.asarray(p(pts), dtype=float), w)
    return out


def full_dense_system(spaces: HDGSpaces, case=None, bc=None):
    """Uncondensed dense system over [element interiors | free face dofs].

    Oracle for the condensation path and the inf-sup diagnostic; raises
    SizeLimitError beyond a few thousand unknowns.
    """
    mesh = spaces.mesh
    lay = spaces.layout
    fb = lay.face_block
    n_int = lay.n_interior
    if bc is None:
        bc = boundary_values(spaces, case)

    free_faces = np.flatnonzero(~mesh.boundary_face)
    face_free_pos = np.full(mesh.nfaces, -1, dtype=np.int64)
    face_free_pos[free_faces] = np.arange(len(free_faces))
    n_int_total = mesh.ntets * n_int
    n = n_int_total + len(free_faces) * fb
    if n > 8000:
        raise SizeLimitError(f"dense system of size {n} exceeds the cap")

    A = np.zeros((n, n))
    b = np.zeros(n)
    for t in range(mesh.ntets):
        loc = assemble_local(spaces, t, case)
        At, bt = loc.A, loc.b
        gd = [np.arange(t * n_int, (t + 1) * n_int)]
        for lf, fid in enumerate(loc.face_ids):
            cols_lf = np.arange(n_int + lf * fb, n_int + (lf + 1) * fb)
            if mesh.boundary_face[fid]:
                v = bc[fid]
                if np.any(v):
                    bt = bt - At[:, cols_lf] @ v
                gd.append(None)
            else:
                gd.append(n_int_total + face_free_pos[fid] * fb + np.arange(fb))
        loc_idx = [np.arange(n_int)] + [np.arange(n_int + lf * fb,
                                                  n_int + (lf + 1) * fb)
                                        for lf in range(4)]
        for li, gi in zip(loc_idx, gd):
            if gi is None:
                continue
            b[gi] += bt[li]
            for lj, gj in zip(loc_idx, gd):
                if gj is None:
                    continue
                A[np.ix_(gi, gj)] += At[np.ix_(li, lj)]
    return A, b, face_free_pos


def _norm_gram(spaces: HDGSpaces):
    """Dense Gram matrix of the Sigma_h norm over the free dofs."""
    mesh = spaces.mesh
    lay = spaces.layout
    fb = lay.face_block
    n_int = lay.n_interior
    free_faces = np.flatnonzero(~mesh.boundary_face)
    face_free_pos = np.full(mesh.nfaces, -1, dtype=np.int64)
    face_free_pos[free_faces] = np.arange(len(free_faces))
    n_int_total = mesh.ntets * n_int
    n = n_int_total + len(free_faces) * fb
    N = np.zeros((n, n))

    def gslice(t, sl):
        return np.arange(t * n_int + sl.start, t * n_int + sl.stop)

    sr = slice(0, lay.nr)
    su = slice(lay.nr, lay.nr + lay.nu)
    sp_ = slice(lay.nr + lay.nu, n_int)

    for t in range(mesh.ntets):
        pts, w = spaces.vol_rule.map_to(mesh.tet_verts(t))
        Rv = spaces.r_basis[t].eval(pts)
        N[np.ix_(gslice(t, sr), gslice(t, sr))] += _ip(w, Rv, Rv)
        cc = spaces.u_basis[t].curlcurl(pts)
        dv = spaces.u_basis[t].div(pts)
        gu = gslice(t, su)
        N[np.ix_(gu, gu)] += _ip(w, cc, cc) + mesh.tet_h[t] ** 2 * _ips(w, dv, dv)
        _, gp = spaces.p_basis[t].eval_grad(pts)
        gp = gp.transpose(0, 2, 1)  # (q, 3, Np)
        gpp = gslice(t, sp_)
        N[np.ix_(gpp, gpp)] += mesh.tet_h[t] ** 2 * _ip(w, gp, gp)

        for lf in range(4):
            ev = _FaceEval(spaces, t, lf)
            fid = ev.fid
            w3 = ev.hu ** -3
            w1 = ev.hu ** -1
            wp = ev.hp ** -1
            free = face_free_pos[fid]
            N[np.ix_(gu, gu)] += w3 * _ip(ev.w, ev.nxU, ev.nxU) \
                + w1 * _ip(ev.w, ev.nxcU, ev.nxcU)
            N[np.ix_(gpp, gpp)] += wp * _ips(ev.w, ev.Pv, ev.Pv)
            if free < 0:
                continue
            o = n_int_total + free * fb
            gfu = np.arange(o, o + lay.nuh)
            gfc = np.arange(o + lay.nuh, o + lay.nuh + lay.nch)
            gfp = np.arange(o + lay.nuh + lay.nch, o + fb)
            B = -w3 * _ip(ev.w, ev.nxU, ev.nxFu)
            N[np.ix_(gu, gfu)] += B
            N[np.ix_(gfu, gu)] += B.T
            N[np.ix_(gfu, gfu)] += w3 * _ip(ev.w, ev.nxFu, ev.nxFu)
            B = -w1 * _ip(ev.w, ev.nxcU, ev.nxFc)
            N[np.ix_(gu, gfc)] += B
            N[np.ix_(gfc, gu)] += B.T
            N[np.ix_(gfc, gfc)] += w1 * _ip(ev.w, ev.nxFc, ev.nxFc)
            B = -wp * _ips(ev.w, ev.Pv, ev.Fp)
            N[np.ix_(gpp, gfp)] += B
            N[np.ix_(gfp, gpp)] += B.T
            N[np.ix_(gfp, gfp)] += wp * _ips(ev.w, ev.Fp, ev.Fp)

    # normal-jump coupling over interior faces
    for fid in free_faces:
        pts, w = spaces.face_rule.map_to(mesh.face_verts(fid))
        nf = mesh.face_normal[fid]
        t0, t1 = mesh.face_tets[fid]
        n0 = np.einsum("qcj,c->qj", spaces.u_basis[t0].eval(pts), nf)
        n1 = np.einsum("qcj,c->qj", spaces.u_basis[t1].eval(pts), nf)
        both = np.concatenate([n0, -n1], axis=1)
        gidx = np.concatenate([gslice(t0, su), gslice(t1, su)])
        N[np.ix_(gidx, gidx)] += stab_length(mesh, fid) * _ips(w, both, both)
    return N


def infsup_estimate(spaces: HDGSpaces) -> float:
    """Smallest generalized singular value of B_h in the Sigma_h norm.

    Dense diagnostic: whitens B_h by the Cholesky factor of the norm
    Gram matrix and returns the smallest absolute eigenvalue.
    """
    B, _, _ = full_dense_system(spaces, case=None)
    N = _norm_gram(spaces)
    L = np.linalg.cholesky(N)
    Bw = sla.solve_triangular(L, sla.solve_triangular(L, B, lower=True).T,
                              lower=True)
    eig = np.linalg.eigvalsh(0.5 * (Bw + Bw.T))
    return float(np.abs(eig).min())
