import numpy as np
import pytest

from quadcurl.errors import InvalidParameterError
from quadcurl.mesh import (
    TET_FACES, generate_box_mesh, generate_lshape_mesh, mesh_report, write_vtk,
)


def test_box_counts():
    m = generate_box_mesh(2)
    assert m.ntets == 48
    assert m.nfaces == 120
    assert int(m.boundary_face.sum()) == 48
    m1 = generate_box_mesh(1)
    assert m1.ntets == 6
    assert m1.nfaces == 18


def test_face_count_formula():
    for m in (generate_box_mesh(1), generate_box_mesh(3), generate_lshape_mesh(2)):
        B = int(m.boundary_face.sum())
        assert m.nfaces == (4 * m.ntets + B) // 2


def test_lshape_counts():
    m = generate_lshape_mesh(2)
    assert (m.ntets, m.nfaces) == (36, 94)
    assert int(m.boundary_face.sum()) == 44
    m4 = generate_lshape_mesh(4)
    assert (m4.ntets, m4.nfaces) == (288, 664)


def test_volumes():
    m = generate_box_mesh(3)
    assert m.tet_volume.sum() == pytest.approx(1.0, rel=1e-12)
    assert np.all(m.tet_volume > 0)
    L = generate_lshape_mesh(4)
    assert L.tet_volume.sum() == pytest.approx(6.0, rel=1e-12)


def test_invalid_parameters():
    with pytest.raises(InvalidParameterError):
        generate_box_mesh(0)
    with pytest.raises(InvalidParameterError):
        generate_box_mesh(2, bounds=((0, 0, 0), (1, 0, 1)))
    with pytest.raises(InvalidParameterError):
        generate_lshape_mesh(3)
    with pytest.raises(InvalidParameterError):
        generate_lshape_mesh(0)


def test_h_values():
    m = generate_box_mesh(2)
    assert m.h == pytest.approx(np.sqrt(3) / 2, rel=1e-14)
    # refinement halves h exactly on dyadic grids
    assert generate_box_mesh(2).h == generate_box_mesh(1).h / 2
    assert generate_box_mesh(4).h == generate_box_mesh(2).h / 2


def test_conformity():
    # both owners of an interior face see the same vertex set
    m = generate_lshape_mesh(2)
    for f in range(m.nfaces):
        t0, t1 = m.face_tets[f]
        assert set(m.faces[f]) <= set(m.tets[t0])
        if t1 >= 0:
            assert set(m.faces[f]) <= set(m.tets[t1])
        else:
            assert m.boundary_face[f]


def test_normal_orientation():
    m = generate_box_mesh(2)
    cent = m.vertices[m.tets].mean(axis=1)
    fcent = m.vertices[m.faces].mean(axis=1)
    for f in range(m.nfaces):
        t0, t1 = m.face_tets[f]
        if t1 >= 0:
            assert t0 < t1
            assert np.dot(m.face_normal[f], cent[t1] - cent[t0]) > 0
        else:
            assert np.dot(m.face_normal[f], fcent[f] - cent[t0]) > 0


def test_face_frame():
    m = generate_lshape_mesh(2)
    for f in range(0, m.nfaces, 7):
        t1, t2, n = m.face_t1[f], m.face_t2[f], m.face_normal[f]
        for a, b in ((t1, t2), (t1, n), (t2, n)):
            assert abs(np.dot(a, b)) < 1e-14
        assert np.linalg.norm(t1) == pytest.approx(1.0, abs=1e-14)
        assert np.linalg.norm(t2) == pytest.approx(1.0, abs=1e-14)
        v = m.vertices[m.faces[f]]
        d = (v[1] - v[0]) / np.linalg.norm(v[1] - v[0])
        assert np.allclose(t1, d)


def test_face_edges_closed():
    m = generate_box_mesh(2)
    for f in range(m.nfaces):
        vs = m.faces[f]
        for e in m.face_edges[f]:
            assert set(m.edges[e]) <= set(vs)


def test_tet_face_sign():
    m = generate_box_mesh(1)
    cent = m.vertices[m.tets].mean(axis=1)
    for t in range(m.ntets):
        for lf in range(4):
            fid = m.tet_faces[t, lf]
            fcent = m.vertices[m.faces[fid]].mean(axis=0)
            geo = np.sign(np.dot(m.face_normal[fid], fcent - cent[t]))
            assert geo == m.tet_face_sign(t, lf)
            # local face lf is opposite local vertex lf
            assert set(m.faces[fid]) == set(m.tets[t][TET_FACES[lf]])


def test_report():
    rep = mesh_report(generate_box_mesh(2))
    assert rep.ntets == 48
    assert rep.h == pytest.approx(np.sqrt(3) / 2)
    assert 0 < rep.min_quality <= rep.max_quality < 1
    rep1 = mesh_report(generate_box_mesh(1))
    assert rep1.ntets == 6
    repL = mesh_report(generate_lshape_mesh(2))
    assert repL.nboundary_faces == 44


def test_vtk_roundtrip(tmp_path):
    m = generate_box_mesh(1)
    path = tmp_path / "mesh.vtk"
    write_vtk(path, m, point_data={"p_h": np.arange(m.nvertices, dtype=float),
                                   "u_h": m.vertices})
    text = path.read_text().splitlines()
    assert text[0].startswith("# vtk DataFile")
    assert "DATASET UNSTRUCTURED_GRID" in text
    assert f"POINTS {m.nvertices} double" in text
    assert f"CELL_TYPES {m.ntets}" in text
    ct_start = text.index(f"CELL_TYPES {m.ntets}") + 1
    assert all(text[ct_start + i] == "10" for i in range(m.ntets))
    assert "VECTORS u_h double" in text
    assert "SCALARS p_h double 1" in text
