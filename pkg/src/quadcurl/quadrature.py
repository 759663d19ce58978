"""Gauss quadrature on segments, triangles and tetrahedra.

Rules are conical products of Gauss-Legendre/Gauss-Jacobi lines on the
collapsed cube, so any polynomial exactness degree up to ``MAX_DEGREE``
is available.  Points are stored in barycentric coordinates; mapping a
rule onto a physical simplex is ``rule.points @ vertices`` with weights
scaled by the measure ratio.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from .errors import UnsupportedDegreeError

MAX_DEGREE = 40

# reference measures: segment [0,1], unit triangle, unit tetrahedron
REF_MEASURE = {2: 1.0, 3: 0.5, 4: 1.0 / 6.0}


@dataclass(frozen=True)
class QuadRule:
    """Quadrature rule on a reference simplex.

    points : (n, nverts) barycentric coordinates
    weights : (n,) weights summing to the reference measure
    degree : total polynomial degree integrated exactly
    """

    points: np.ndarray
    weights: np.ndarray
    degree: int

    @property
    def npoints(self):
        return len(self.weights)

    def map_to(self, verts):
        """Physical points/weights on the simplex with rows ``verts``.

        Returns ``(points (n, d), weights (n,))``; works for any spatial
        dimension of the vertex coordinates.
        """
        verts = np.asarray(verts, dtype=float)
        pts = self.points @ verts
        w = self.weights * (_measure(verts) / REF_MEASURE[len(verts)])
        return pts, w


def _measure(verts):
    v = np.asarray(verts, dtype=float)
    e = v[1:] - v[0]
    if len(v) == 2:
        return float(np.linalg.norm(e[0]))
    if len(v) == 3:
        return 0.5 * float(np.linalg.norm(np.cross(e[0], e[1])))
    return abs(float(np.linalg.det(e))) / 6.0


def _npts_for(degree):
    if degree < 0:
        raise UnsupportedDegreeError(f"negative quadrature degree {degree}")
    if degree > MAX_DEGREE:
        raise UnsupportedDegreeError(
            f"quadrature degree {degree} exceeds supported maximum {MAX_DEGREE}"
        )
    return degree // 2 + 1


def _gauss01(m):
    # Gauss-Legendre shifted to [0,1]
    x, w = roots_legendre(m)
    return 0.5 * (x + 1.0), 0.5 * w


def _jacobi01(m, alpha):
    # Gauss-Jacobi with weight (1-t)^alpha on [0,1]
    x, w = roots_jacobi(m, alpha, 0.0)
    return 0.5 * (x + 1.0), w / 2.0 ** (alpha + 1)


@lru_cache(maxsize=None)
def quad_seg(degree: int) -> QuadRule:
    """Gauss rule on the unit segment, exact to ``degree``."""
    m = _npts_for(degree)
    t, w = _gauss01(m)
    bary = np.column_stack([1.0 - t, t])
    return QuadRule(bary, w, 2 * m - 1)


@lru_cache(maxsize=None)
def quad_tri(degree: int) -> QuadRule:
    """Conical product rule on the reference triangle."""
    m = _npts_for(degree)
    a, wa = _gauss01(m)
    b, wb = _jacobi01(m, 1)
    A, B = np.meshgrid(a, b, indexing="ij")
    x = (A * (1.0 - B)).ravel()
    y = np.broadcast_to(B, A.shape).ravel().copy()
    w = np.outer(wa, wb).ravel()
    bary = np.column_stack([1.0 - x - y, x, y])
    return QuadRule(bary, w, 2 * m - 1)


@lru_cache(maxsize=None)
def quad_tet(degree: int) -> QuadRule:
    """Conical product rule on the reference tetrahedron."""
    m = _npts_for(degree)
    a, wa = _gauss01(m)
    b, wb = _jacobi01(m, 1)
    c, wc = _jacobi01(m, 2)
    A, B, C = np.meshgrid(a, b, c, indexing="ij")
    z = np.broadcast_to(C, A.shape).ravel().copy()
    y = (B * (1.0 - C)).ravel()
    x = (A * (1.0 - B) * (1.0 - C)).ravel()
    w = (wa[:, None, None] * wb[None, :, None] * wc[None, None, :]).ravel()
    bary = np.column_stack([1.0 - x - y - z, x, y, z])
    return QuadRule(bary, w, 2 * m - 1)
