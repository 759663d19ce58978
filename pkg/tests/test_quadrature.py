import math

import numpy as np
import pytest

from quadcurl.errors import UnsupportedDegreeError
from quadcurl.quadrature import quad_seg, quad_tet, quad_tri

REF_TET = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1.0]])
REF_TRI = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0.0]])


def tet_monomial_exact(a, b, c):
    # int over reference tet of x^a y^b z^c
    return math.factorial(a) * math.factorial(b) * math.factorial(c) \
        / math.factorial(a + b + c + 3)


def tri_monomial_exact(a, b):
    return math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)


def test_reference_measures():
    assert quad_tet(1).weights.sum() == pytest.approx(1 / 6, rel=1e-14)
    assert quad_tri(1).weights.sum() == pytest.approx(1 / 2, rel=1e-14)
    assert quad_seg(1).weights.sum() == pytest.approx(1.0, rel=1e-14)


def test_spec_values():
    r = quad_tet(3)
    pts = r.points @ REF_TET
    assert (r.weights * pts[:, 0] ** 2 * pts[:, 1]).sum() == pytest.approx(1 / 360, rel=1e-13)
    r = quad_tri(1)
    pts = r.points @ REF_TRI
    assert (r.weights * pts[:, 0]).sum() == pytest.approx(1 / 6, rel=1e-13)


@pytest.mark.parametrize("deg", [0, 1, 2, 3, 5, 8, 12])
def test_tet_exactness(deg):
    r = quad_tet(deg)
    pts = r.points @ REF_TET
    for a in range(deg + 1):
        for b in range(deg + 1 - a):
            for c in range(deg + 1 - a - b):
                got = (r.weights * pts[:, 0] ** a * pts[:, 1] ** b * pts[:, 2] ** c).sum()
                assert got == pytest.approx(tet_monomial_exact(a, b, c), rel=1e-13)


@pytest.mark.parametrize("deg", [0, 1, 3, 7, 11])
def test_tri_exactness(deg):
    r = quad_tri(deg)
    pts = r.points @ REF_TRI
    for a in range(deg + 1):
        for b in range(deg + 1 - a):
            got = (r.weights * pts[:, 0] ** a * pts[:, 1] ** b).sum()
            assert got == pytest.approx(tri_monomial_exact(a, b), rel=1e-13)


@pytest.mark.parametrize("deg", [0, 1, 4, 9])
def test_seg_exactness(deg):
    r = quad_seg(deg)
    t = r.points[:, 1]
    for a in range(deg + 1):
        assert (r.weights * t ** a).sum() == pytest.approx(1 / (a + 1), rel=1e-13)


def test_mapping_scales_weights():
    verts = np.array([[1, 1, 1], [3, 1, 1], [1, 4, 1], [1, 1, 2.0]])
    pts, w = quad_tet(2).map_to(verts)
    vol = abs(np.linalg.det(verts[1:] - verts[0])) / 6
    assert w.sum() == pytest.approx(vol, rel=1e-14)
    assert pts.shape == (len(w), 3)


def test_unsupported_degree():
    with pytest.raises(UnsupportedDegreeError):
        quad_tet(99)
    with pytest.raises(UnsupportedDegreeError):
        quad_seg(-1)
