"""Polynomial bases on tetrahedra, triangles and segments.

Bases are built directly in physical coordinates as shifted/scaled
monomials, optionally orthonormalized against the element L2 inner
product (Cholesky of the Gram matrix, i.e. Gram-Schmidt).  The fully
discontinuous HDG spaces need no Piola transforms this way.

Construction and evaluation are pure per-element operations and safe to
run concurrently across elements.
"""

import numpy as np

from .errors import AssemblyError
from .quadrature import quad_tet, quad_tri

__all__ = [
    "monomial_exponents", "dim_poly", "dim_dspace",
    "ScalarBasis", "VectorBasis", "DMomentBasis",
]


def dim_poly(degree, dim):
    """Dimension of total-degree-``degree`` polynomials in ``dim`` variables."""
    if degree < 0:
        return 0
    d = 1
    for i in range(dim):
        d = d * (degree + 1 + i) // (i + 1)
    return d


def dim_dspace(degree, dim):
    """Dimension of D_j = [P_{j-1}]^d + homogeneous(j-1) * x."""
    j = degree
    if dim == 3:
        return j * (j + 1) * (j + 3) // 2
    return j * (j + 2)


def monomial_exponents(degree, dim):
    """Exponent table in graded-lexicographic order, shape (M, dim)."""
    out = []
    if dim == 1:
        out = [(d,) for d in range(degree + 1)]
    elif dim == 2:
        for d in range(degree + 1):
            out += [(a, d - a) for a in range(d, -1, -1)]
    else:
        for d in range(degree + 1):
            for a in range(d, -1, -1):
                out += [(a, b, d - a - b) for b in range(d - a, -1, -1)]
    return np.array(out, dtype=np.int64)


def _power_tables(X, max_exp):
    # X (..., dim) -> list over dims of (..., max_exp+1) power tables
    tabs = []
    for d in range(X.shape[-1]):
        t = np.ones(X.shape[:-1] + (max_exp + 1,))
        for e in range(1, max_exp + 1):
            t[..., e] = t[..., e - 1] * X[..., d]
        tabs.append(t)
    return tabs


def eval_monomials(X, exps, order=0):
    """Evaluate monomials (and derivatives) at local points ``X``.

    Returns ``vals (..., M)`` for ``order=0``; additionally
    ``grad (..., M, dim)`` for ``order>=1`` and ``hess (..., M, dim, dim)``
    for ``order=2``.  Derivatives are with respect to the local coords.
    """
    X = np.asarray(X, dtype=float)
    dim = X.shape[-1]
    max_exp = int(exps.max()) if len(exps) else 0
    tabs = _power_tables(X, max_exp)

    def mono(shift):
        # product over dims of X_d^(e_d - shift_d), zero handled by caller
        out = np.ones(X.shape[:-1] + (len(exps),))
        for d in range(dim):
            out = out * tabs[d][..., np.maximum(exps[:, d] - shift[d], 0)]
        return out

    vals = mono(np.zeros(dim, dtype=int))
    if order == 0:
        return vals

    grad = np.zeros(vals.shape + (dim,))
    for d in range(dim):
        shift = np.zeros(dim, dtype=int)
        shift[d] = 1
        grad[..., d] = exps[:, d] * mono(shift)
    if order == 1:
        return vals, grad

    hess = np.zeros(vals.shape + (dim, dim))
    for d1 in range(dim):
        for d2 in range(d1, dim):
            shift = np.zeros(dim, dtype=int)
            shift[d1] += 1
            shift[d2] += 1
            coef = exps[:, d1] * (exps[:, d2] - (1 if d1 == d2 else 0))
            hess[..., d1, d2] = coef * mono(shift)
            hess[..., d2, d1] = hess[..., d1, d2]
    return vals, grad, hess


class ScalarBasis:
    """Orthonormal scalar polynomial basis on one tet or triangle.

    Monomials in centered coordinates ``(x - center)/scale`` are
    orthonormalized against the element L2 product, so the mass matrix
    under exact quadrature is the identity.
    """

    def __init__(self, degree, verts, frame=None, orthonormalize=True):
        verts = np.asarray(verts, dtype=float)
        self.degree = degree
        self.verts = verts
        self.center = verts.mean(axis=0)
        diffs = verts[:, None, :] - verts[None, :, :]
        self.scale = float(np.linalg.norm(diffs, axis=-1).max())
        if self.scale == 0.0:
            raise AssemblyError("degenerate element with zero diameter")
        if frame is not None:
            self.frame = np.asarray(frame, dtype=float)  # (2, 3) tangents
            self.local_dim = 2
        else:
            self.frame = None
            self.local_dim = 3
        self.exps = monomial_exponents(degree, self.local_dim)
        self.dim = len(self.exps)

        if orthonormalize:
            rule = quad_tri(2 * degree) if frame is not None else quad_tet(2 * degree)
            pts, w = rule.map_to(verts)
            V = eval_monomials(self.local_coords(pts), self.exps)
            G = (V * w[:, None]).T @ V
            try:
                L = np.linalg.cholesky(G)
            except np.linalg.LinAlgError as exc:
                raise AssemblyError(f"Gram matrix not SPD: {exc}") from exc
            self.coeff = np.linalg.solve(L, np.eye(self.dim))
        else:
            self.coeff = np.eye(self.dim)

    def local_coords(self, points):
        rel = (np.asarray(points, dtype=float) - self.center) / self.scale
        if self.frame is not None:
            return rel @ self.frame.T
        return rel

    def eval(self, points):
        V = eval_monomials(self.local_coords(points), self.exps)
        return V @ self.coeff.T

    def eval_grad(self, points):
        """Values (n, M) and physical gradients (n, M, 3)."""
        V, G = eval_monomials(self.local_coords(points), self.exps, order=1)
        vals = V @ self.coeff.T
        G = np.einsum("nmd,km->nkd", G, self.coeff) / self.scale
        if self.frame is not None:
            G = np.einsum("nkd,dx->nkx", G, self.frame)
        return vals, G

    def eval_hess(self, points):
        """Values, gradients and physical Hessians (n, M, 3, 3); tet only."""
        V, G, H = eval_monomials(self.local_coords(points), self.exps, order=2)
        vals = V @ self.coeff.T
        grads = np.einsum("nmd,km->nkd", G, self.coeff) / self.scale
        hess = np.einsum("nmde,km->nkde", H, self.coeff) / self.scale ** 2
        return vals, grads, hess


class VectorBasis:
    """Scalar basis replicated over Cartesian axes (tet) or face tangents.

    Component-major ordering: function ``c*M + m`` is ``phi_m * axes[c]``.
    """

    def __init__(self, scalar: ScalarBasis, axes=None):
        self.scalar = scalar
        if axes is None:
            axes = np.eye(3) if scalar.frame is None else scalar.frame
        self.axes = np.asarray(axes, dtype=float)
        self.ncomp = len(self.axes)
        self.dim = self.ncomp * scalar.dim

    def _expand(self, vals):
        # (n, M) scalars -> (n, 3, ncomp*M) vectors
        n, M = vals.shape
        out = np.zeros((n, 3, self.dim))
        for c in range(self.ncomp):
            out[:, :, c * M:(c + 1) * M] = vals[:, None, :] * self.axes[c][None, :, None]
        return out

    def eval(self, points):
        return self._expand(self.scalar.eval(points))

    def curl(self, points):
        """curl(phi e) = grad(phi) x e, shape (n, 3, N)."""
        _, G = self.scalar.eval_grad(points)
        n, M = G.shape[:2]
        out = np.zeros((n, 3, self.dim))
        for c in range(self.ncomp):
            cr = np.cross(G, self.axes[c][None, None, :])
            out[:, :, c * M:(c + 1) * M] = cr.transpose(0, 2, 1)
        return out

    def div(self, points):
        """div(phi e) = grad(phi) . e, shape (n, N)."""
        _, G = self.scalar.eval_grad(points)
        n, M = G.shape[:2]
        out = np.zeros((n, self.dim))
        for c in range(self.ncomp):
            out[:, c * M:(c + 1) * M] = G @ self.axes[c]
        return out

    def curlcurl(self, points):
        """curlcurl(phi e) = grad(grad(phi).e) - lap(phi) e, shape (n, 3, N)."""
        _, _, H = self.scalar.eval_hess(points)
        n, M = H.shape[:2]
        lap = np.trace(H, axis1=2, axis2=3)
        out = np.zeros((n, 3, self.dim))
        for c in range(self.ncomp):
            grad_dir = np.einsum("nmde,e->nmd", H, self.axes[c])
            block = grad_dir - lap[:, :, None] * self.axes[c][None, None, :]
            out[:, :, c * M:(c + 1) * M] = block.transpose(0, 2, 1)
        return out


class DMomentBasis:
    """Basis of D_j = [P_{j-1}]^d + homogeneous(j-1) * x on a tet or face.

    Used as a moment test space only, so it is not orthonormalized.  On a
    face the space lives in the tangent plane and evaluates to in-plane
    3D vectors.
    """

    def __init__(self, degree, verts, frame=None):
        if degree < 1:
            raise AssemblyError("D moment space needs degree >= 1")
        self.degree = degree
        self.scalar = ScalarBasis(degree - 1, verts, frame=frame,
                                  orthonormalize=False)
        ldim = self.scalar.local_dim
        self.vector = VectorBasis(self.scalar)
        exps = monomial_exponents(degree - 1, ldim)
        self.hom_exps = exps[exps.sum(axis=1) == degree - 1]
        self.dim = self.vector.dim + len(self.hom_exps)
        assert self.dim == dim_dspace(degree, ldim)

    def eval(self, points):
        base = self.vector.eval(points)
        loc = self.scalar.local_coords(points)
        mono = eval_monomials(loc, self.hom_exps)
        # position vector in the same local coordinates as the monomials
        if self.scalar.frame is not None:
            pos = np.einsum("nd,dx->nx", loc, self.scalar.frame)
        else:
            pos = loc
        extra = mono[:, None, :] * pos[:, :, None]
        return np.concatenate([base, extra], axis=2)
