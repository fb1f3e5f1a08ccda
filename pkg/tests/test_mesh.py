import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lorfem.mesh import (FaceClass, build_cart_mesh, face_perpendicular_lengths, lor_refine, mesh_from_config,
                         perpendicular_lengths)
from lorfem.quadrature import gauss_lobatto_rule


def _n_faces(counts):
    d = len(counts)
    return sum((counts[a] + 1) * int(np.prod([counts[b] for b in range(d) if b != a])) for a in range(d))


@pytest.mark.parametrize("counts", [(3,), (2, 3), (2, 1, 3)])
def test_counts_and_faces(counts):
    mesh = build_cart_mesh(len(counts), counts)
    assert mesh.n_elements == np.prod(counts)
    faces = mesh.faces
    assert len(faces) == _n_faces(counts)
    d = len(counts)
    n_bnd = sum(2 * int(np.prod([counts[b] for b in range(d) if b != a])) for a in range(d))
    assert faces.is_boundary.sum() == n_bnd
    interior = ~faces.is_boundary
    assert np.all(faces.minus[interior] < faces.plus[interior])


def test_volumes_and_boundary_area_sheared(sheared_mesh_3d):
    mesh = sheared_mesh_3d
    det = abs(np.linalg.det(mesh.transform))
    assert mesh.volumes.sum() == pytest.approx(det, rel=1e-13)
    # area of each boundary face equals the image of the matching unit-square face
    f = mesh.faces
    bnd = f.is_boundary
    area_by_axis = [f.area[bnd & (f.axis == a)].sum() for a in range(3)]
    for a in range(3):
        e = [b for b in range(3) if b != a]
        cross = np.cross(mesh.transform[:, e[0]], mesh.transform[:, e[1]])
        assert area_by_axis[a] == pytest.approx(2 * np.linalg.norm(cross), rel=1e-13)


def test_graded_widths():
    mesh = build_cart_mesh(1, [4], [(0.0, 3.0)], [2.0])
    w = mesh.widths[:, 0]
    np.testing.assert_allclose(w[1:] / w[:-1], 2.0, rtol=1e-13)
    assert w.sum() == pytest.approx(3.0)


def test_element_index_roundtrip():
    mesh = build_cart_mesh(3, [2, 3, 4])
    e = np.arange(mesh.n_elements)
    np.testing.assert_array_equal(mesh.element_index(mesh.element_multi_index(e)), e)
    np.testing.assert_array_equal(mesh.element_multi_index(1), [1, 0, 0])  # axis 0 fastest


def test_jacobian_maps_reference_corners():
    mesh = build_cart_mesh(2, [2, 2], [(0, 2), (0, 1)], None, [[1.0, 0.5], [0.0, 1.0]])
    for e in range(mesh.n_elements):
        origin = mesh.element_origin(e)
        far = origin + mesh.jacobians[e] @ np.array([2.0, 2.0])
        mi = mesh.element_multi_index(e)
        corner = np.array([mesh.axis_nodes[0][mi[0] + 1], mesh.axis_nodes[1][mi[1] + 1]])
        np.testing.assert_allclose(far, mesh.transform @ corner, atol=1e-14)


def test_rejects_bad_input():
    with pytest.raises(ValueError):
        build_cart_mesh(4, [1, 1, 1, 1])
    with pytest.raises(ValueError):
        build_cart_mesh(2, [0, 1])
    with pytest.raises(ValueError):
        build_cart_mesh(2, [1, 1], None, None, [[0, 1], [1, 0]])  # orientation reversing


def test_fingerprint_is_stable_and_sensitive():
    a = build_cart_mesh(3, [2, 2, 2])
    assert a.fingerprint() == build_cart_mesh(3, [2, 2, 2]).fingerprint()
    assert a.fingerprint() != build_cart_mesh(3, [2, 2, 3]).fingerprint()
    assert a.fingerprint() != build_cart_mesh(3, [2, 2, 2], None, [1.1, 1, 1]).fingerprint()


def test_mesh_from_config():
    mesh = mesh_from_config({"dim": 2, "counts": [2, 3], "extents": [2.0, [1.0, 2.0]], "grading": [1.0, 1.5]})
    assert mesh.counts == (2, 3)
    assert mesh.axis_nodes[0][-1] == pytest.approx(2.0)
    assert mesh.axis_nodes[1][0] == pytest.approx(1.0)


@pytest.mark.parametrize("mode,extra", [("standard", 0), ("dg", 1)])
@pytest.mark.parametrize("p", [1, 2, 4])
def test_lor_refinement_counts_and_nodes(p, mode, extra):
    mesh = build_cart_mesh(2, [2, 3])
    lor = lor_refine(mesh, p, mode)
    m = p + extra
    assert lor.m == m
    assert lor.n_cells == mesh.n_elements * m**2
    assert lor.fine_counts == (2 * m, 3 * m)
    ref = (gauss_lobatto_rule(m).points + 1) / 2
    np.testing.assert_allclose(lor.axis_nodes[0][: m + 1], ref * mesh.widths[0, 0], atol=1e-15)
    assert lor.volumes.sum() == pytest.approx(mesh.volumes.sum(), rel=1e-13)


def test_lor_cell_numbering_is_element_major():
    mesh = build_cart_mesh(2, [2, 2])
    lor = lor_refine(mesh, 3)
    cells = np.arange(lor.n_cells)
    np.testing.assert_array_equal(lor.cell_index(lor.cell_fine_multi(cells)), cells)
    fm = lor.cell_fine_multi(cells)
    parent = mesh.element_index(fm // 3)
    np.testing.assert_array_equal(parent, cells // 9)


def test_lor_face_classes():
    mesh = build_cart_mesh(3, [2, 2, 2])
    lor = lor_refine(mesh, 2, "dg")
    f = lor.faces
    coarse = lor.face_class == FaceClass.COARSE
    assert coarse.sum() == len(mesh.faces) * lor.m**2
    assert np.all(coarse[f.is_boundary])
    pf = lor.parent_face
    assert np.all(pf[coarse] >= 0) and np.all(pf[~coarse] == -1)
    assert np.all(f.axis[coarse] == mesh.faces.axis[pf[coarse]])


def test_perpendicular_lengths_uniform():
    mesh = build_cart_mesh(2, [2, 2])
    lor = lor_refine(mesh, 1, "dg")  # uniform 4x4 grid of width 1/4
    h = perpendicular_lengths(lor)
    np.testing.assert_allclose(h, 0.25, rtol=1e-13)
    hp, hm, havg = face_perpendicular_lengths(lor, 0)
    assert hp == pytest.approx(0.25) and hm == pytest.approx(0.25) and havg == pytest.approx(0.25)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.integers(1, 4), min_size=1, max_size=3), st.floats(0.5, 2.0))
def test_volume_partition_property(counts, grading):
    d = len(counts)
    mesh = build_cart_mesh(d, counts, [2.0] * d, [grading] * d)
    assert mesh.volumes.sum() == pytest.approx(2.0**d, rel=1e-12)
    assert len(mesh.faces) == _n_faces(counts)
