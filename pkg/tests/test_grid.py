import numpy as np
import pytest

from lrbms.grid import build_two_level_grid, oversampling_patch


def enumerate_inner_coarse_faces(Nx, Ny):
    # independent count: vertical separating lines + horizontal ones
    return (Nx - 1) * Ny + (Ny - 1) * Nx


def test_counts_academic_single_coarse():
    g = build_two_level_grid((-1, -1, 1, 1), (1, 1), (8, 8))
    assert g.n_triangles == 128
    assert g.n_coarse == 1


def test_counts_minimal_mesh():
    g = build_two_level_grid((0, 0, 1, 1), (1, 1), (1, 1))
    assert g.n_triangles == 2
    assert g.n_faces == 5
    assert int(g.face_boundary.sum()) == 4
    assert int((~g.face_boundary).sum()) == 1


def test_counts_two_by_two_coarse():
    g = build_two_level_grid((-1, -1, 1, 1), (2, 2), (4, 4))
    assert g.n_triangles == 128
    assert g.n_coarse == 4
    inner = sum(1 for Tm, Tp in g.coarse_face_elems if Tm >= 0 and Tp >= 0)
    assert inner == enumerate_inner_coarse_faces(2, 2) == 4


@pytest.mark.parametrize("counts", [((0, 1), (1, 1)), ((1, 1), (0, 2)), ((1, -1), (1, 1))])
def test_invalid_counts_raise(counts):
    with pytest.raises(ValueError):
        build_two_level_grid((0, 0, 1, 1), *counts)


def test_area_sums_to_domain():
    g = build_two_level_grid((-1, -1, 1, 1), (2, 3), (3, 2))
    assert abs(g.tri_area.sum() - 4.0) <= 1e-12 * 4.0


def test_nesting_every_triangle_in_one_coarse_element():
    g = build_two_level_grid((0, 0, 2, 1), (4, 2), (3, 3))
    cen = g.centroids()
    assert np.array_equal(g.coarse_cell_of_point(cen), g.tri_coarse)
    for T, tris in enumerate(g.coarse_tris):
        assert np.all(g.tri_coarse[tris] == T)
    assert sum(len(t) for t in g.coarse_tris) == g.n_triangles


def test_face_partition_and_conformity():
    g = build_two_level_grid((0, 0, 1, 1), (2, 2), (2, 2))
    inner = ~g.face_boundary
    assert np.all(g.face_tris[inner] >= 0)
    assert np.all(g.face_tris[g.face_boundary, 1] == -1)
    # no hanging nodes: each face's vertex pair is an edge of both neighbors
    for f in range(g.n_faces):
        vs = set(g.face_vertices[f])
        for t in g.face_tris[f]:
            if t >= 0:
                assert vs <= set(g.triangles[t])


def test_normal_orientation():
    g = build_two_level_grid((-1, -1, 1, 1), (2, 2), (2, 2))
    cen = g.centroids()
    inner = ~g.face_boundary
    d = cen[g.face_tris[inner, 1]] - cen[g.face_tris[inner, 0]]
    assert np.all(np.einsum("fd,fd->f", d, g.face_normal[inner]) > 0)
    # boundary normals point out of the domain
    mid = 0.5 * (g.vertices[g.face_vertices[:, 0]] + g.vertices[g.face_vertices[:, 1]])
    for f in np.flatnonzero(g.face_boundary):
        out = mid[f] + 1e-6 * g.face_normal[f]
        assert not (-1 <= out[0] <= 1 and -1 <= out[1] <= 1)


def test_outward_signs_close_each_triangle():
    # sum of sign * normal * length over a triangle's faces is zero (closed polygon)
    g = build_two_level_grid((0, 0, 3, 1), (3, 1), (2, 4))
    n = g.face_normal[g.tri_faces] * g.face_length[g.tri_faces][..., None]
    total = np.einsum("tf,tfd->td", g.tri_face_signs, n)
    assert np.max(np.abs(total)) < 1e-12


def test_coarse_face_lengths():
    g = build_two_level_grid((0, 0, 2, 1), (2, 2), (4, 4))
    x0, y0, x1, y1 = g.domain
    Hx = (x1 - x0) / g.coarse_dims[0]
    Hy = (y1 - y0) / g.coarse_dims[1]
    n_vert = (g.coarse_dims[0] + 1) * g.coarse_dims[1]
    for cf, fine in enumerate(g.coarse_face_fine):
        expected = Hy if cf < n_vert else Hx
        assert abs(g.face_length[fine].sum() - expected) < 1e-12


def test_determinism():
    a = build_two_level_grid((-1, -1, 1, 1), (2, 2), (4, 4))
    b = build_two_level_grid((-1, -1, 1, 1), (2, 2), (4, 4))
    assert np.array_equal(a.vertices, b.vertices)
    assert np.array_equal(a.triangles, b.triangles)
    assert np.array_equal(a.face_normal, b.face_normal)
    assert np.array_equal(a.tri_faces, b.tri_faces)


def test_locate_triangle():
    g = build_two_level_grid((-1, -1, 1, 1), (2, 2), (4, 4))
    cen = g.centroids()
    assert np.array_equal(g.locate_triangle(cen), np.arange(g.n_triangles))


def test_oversampling_interior():
    g = build_two_level_grid((0, 0, 1, 1), (8, 8), (1, 1))
    T = 3 * 8 + 4
    patch = oversampling_patch(g, T)
    assert len(patch) == 9
    assert T in patch


def test_oversampling_corner_and_single():
    g = build_two_level_grid((0, 0, 1, 1), (2, 2), (1, 1))
    assert oversampling_patch(g, 0) == {0, 1, 2, 3}
    g1 = build_two_level_grid((0, 0, 1, 1), (1, 1), (2, 2))
    assert oversampling_patch(g1, 0) == {0}
    with pytest.raises(ValueError):
        oversampling_patch(g1, 1)
