"""Nested two-level triangulation of an axis-aligned rectangle.

The coarse level is a Nx x Ny partition into rectangles, the fine level a
structured criss triangulation (every fine square is cut along its SW-NE
diagonal) that resolves each coarse element by nx x ny squares.  All entity
ids are assigned from structured indices, so two builds from the same inputs
are bit-identical.
"""

from dataclasses import dataclass, field

import numpy as np

__all__ = ["TwoLevelGrid", "build_two_level_grid", "oversampling_patch"]


@dataclass(frozen=True)
class TwoLevelGrid:
    """Conforming fine triangulation nested in a rectangular coarse partition.

    Triangles are numbered coarse element by coarse element (row-major over
    the coarse grid, row-major over the fine squares inside each coarse
    element, lower triangle before upper), so the triangles of one coarse
    element occupy a contiguous id range.
    """

    domain: tuple  # (x0, y0, x1, y1)
    coarse_dims: tuple  # (Nx, Ny)
    fine_per_coarse: tuple  # (nx, ny) squares per coarse element

    vertices: np.ndarray  # (n_vertices, 2)
    triangles: np.ndarray  # (n_tri, 3) vertex ids, CCW
    tri_coarse: np.ndarray  # (n_tri,) owning coarse element
    tri_area: np.ndarray  # (n_tri,)
    tri_diameter: np.ndarray  # (n_tri,)

    face_vertices: np.ndarray  # (n_face, 2)
    face_normal: np.ndarray  # (n_face, 2) unit, t- -> t+ (outward on boundary)
    face_length: np.ndarray  # (n_face,)
    face_boundary: np.ndarray  # (n_face,) bool
    face_tris: np.ndarray  # (n_face, 2) (t-, t+); t+ = -1 on boundary
    face_coarse_face: np.ndarray  # (n_face,) enclosing coarse face, -1 if interior to a T

    tri_faces: np.ndarray  # (n_tri, 3) face ids
    tri_face_signs: np.ndarray  # (n_tri, 3) +1 where face normal points out of the triangle

    coarse_face_elems: np.ndarray  # (n_cface, 2) (T-, T+); T+ = -1 on the domain boundary
    coarse_face_fine: tuple  # per coarse face: array of constituent fine-face ids
    coarse_neighbors: tuple  # per coarse element: sorted array of face-sharing neighbors
    coarse_tris: tuple = field(repr=False, default=())  # per coarse element: triangle id range

    @property
    def n_triangles(self):
        return self.triangles.shape[0]

    @property
    def n_faces(self):
        return self.face_vertices.shape[0]

    @property
    def n_coarse(self):
        return self.coarse_dims[0] * self.coarse_dims[1]

    @property
    def coarse_diameter(self):
        x0, y0, x1, y1 = self.domain
        Nx, Ny = self.coarse_dims
        return np.hypot((x1 - x0) / Nx, (y1 - y0) / Ny)

    def tri_vertices(self, t):
        return self.vertices[self.triangles[t]]

    def centroids(self):
        return self.vertices[self.triangles].mean(axis=1)

    def coarse_cell_of_point(self, points):
        """Coarse element ids of an array of points inside the domain."""
        x0, y0, x1, y1 = self.domain
        Nx, Ny = self.coarse_dims
        pts = np.atleast_2d(points)
        ii = np.clip(((pts[:, 0] - x0) / (x1 - x0) * Nx).astype(int), 0, Nx - 1)
        jj = np.clip(((pts[:, 1] - y0) / (y1 - y0) * Ny).astype(int), 0, Ny - 1)
        return jj * Nx + ii

    def locate_triangle(self, points):
        """Triangle ids containing the given points (vectorized, structured lookup)."""
        x0, y0, x1, y1 = self.domain
        Nx, Ny = self.coarse_dims
        nx, ny = self.fine_per_coarse
        Mx, My = Nx * nx, Ny * ny
        hx, hy = (x1 - x0) / Mx, (y1 - y0) / My
        pts = np.atleast_2d(points)
        ii = np.clip(((pts[:, 0] - x0) / hx).astype(int), 0, Mx - 1)
        jj = np.clip(((pts[:, 1] - y0) / hy).astype(int), 0, My - 1)
        # local coordinates in the square decide the side of the SW-NE diagonal
        xi = (pts[:, 0] - x0) / hx - ii
        yi = (pts[:, 1] - y0) / hy - jj
        upper = yi > xi
        return _square_tri_ids(ii, jj, Nx, Ny, nx, ny) + upper.astype(int)


def _square_tri_ids(ii, jj, Nx, Ny, nx, ny):
    """Id of the lower triangle of square (ii, jj) in global square indices."""
    I, J = ii // nx, jj // ny
    T = J * Nx + I
    local = (jj % ny) * nx + (ii % nx)
    return 2 * (T * (nx * ny) + local)


def build_two_level_grid(domain, coarse_dims, fine_per_coarse):
    """Build the nested coarse/fine grid with full face topology.

    Parameters
    ----------
    domain : tuple
        Axis-aligned rectangle (x0, y0, x1, y1).
    coarse_dims : tuple of int
        Number of rectangular coarse elements per direction (Nx, Ny).
    fine_per_coarse : tuple of int
        Number of fine squares per coarse element and direction (nx, ny);
        each square is split into two triangles along its SW-NE diagonal.

    Returns
    -------
    TwoLevelGrid
    """
    x0, y0, x1, y1 = (float(v) for v in domain)
    Nx, Ny = (int(v) for v in coarse_dims)
    nx, ny = (int(v) for v in fine_per_coarse)
    if Nx < 1 or Ny < 1 or nx < 1 or ny < 1:
        raise ValueError(f"element counts must be positive, got coarse {coarse_dims}, fine {fine_per_coarse}")
    if not (x1 > x0 and y1 > y0):
        raise ValueError(f"degenerate domain {domain}")

    Mx, My = Nx * nx, Ny * ny
    hx, hy = (x1 - x0) / Mx, (y1 - y0) / My

    xs = x0 + hx * np.arange(Mx + 1)
    ys = y0 + hy * np.arange(My + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i, j):
        return j * (Mx + 1) + i

    # squares in triangle-id order: coarse element major, then row-major inside it
    sq_i = np.empty(Mx * My, dtype=int)
    sq_j = np.empty(Mx * My, dtype=int)
    pos = 0
    for J in range(Ny):
        for I in range(Nx):
            for j in range(J * ny, (J + 1) * ny):
                for i in range(I * nx, (I + 1) * nx):
                    sq_i[pos], sq_j[pos] = i, j
                    pos += 1
    v00 = vid(sq_i, sq_j)
    v10 = vid(sq_i + 1, sq_j)
    v11 = vid(sq_i + 1, sq_j + 1)
    v01 = vid(sq_i, sq_j + 1)

    n_tri = 2 * Mx * My
    triangles = np.empty((n_tri, 3), dtype=int)
    triangles[0::2] = np.column_stack([v00, v10, v11])  # below the diagonal
    triangles[1::2] = np.column_stack([v00, v11, v01])  # above the diagonal
    tri_coarse = np.repeat((sq_j // ny) * Nx + (sq_i // nx), 2)
    tri_area = np.full(n_tri, 0.5 * hx * hy)
    diag = np.hypot(hx, hy)
    tri_diameter = np.full(n_tri, diag)

    # faces: horizontal (normal +y / outward), vertical (+x / outward), diagonal
    lower = _square_tri_ids(sq_i, sq_j, Nx, Ny, nx, ny)
    low_of = np.full((Mx, My), -1, dtype=int)
    low_of[sq_i, sq_j] = lower

    fv, fn, fl, fb, ft, fcf = [], [], [], [], [], []

    def coarse_face_id_v(I_line, J):
        # vertical coarse lines I_line = 0..Nx, each with Ny segments, enumerated first
        return I_line * Ny + J

    def coarse_face_id_h(J_line, I):
        return (Nx + 1) * Ny + J_line * Nx + I

    for j in range(My + 1):  # horizontal edges
        for i in range(Mx):
            below = low_of[i, j - 1] + 1 if j > 0 else -1  # upper triangle of square below
            above = low_of[i, j] if j < My else -1  # lower triangle of square above
            if j == 0:
                normal, tminus, tplus = (0.0, -1.0), above, -1
            elif j == My:
                normal, tminus, tplus = (0.0, 1.0), below, -1
            else:
                normal, tminus, tplus = (0.0, 1.0), below, above
            fv.append((vid(i, j), vid(i + 1, j)))
            fn.append(normal)
            fl.append(hx)
            fb.append(tplus == -1)
            ft.append((tminus, tplus))
            fcf.append(coarse_face_id_h(j // ny, i // nx) if j % ny == 0 else -1)

    for i in range(Mx + 1):  # vertical edges
        for j in range(My):
            left = low_of[i - 1, j] if i > 0 else -1  # lower triangle of left square
            right = low_of[i, j] + 1 if i < Mx else -1  # upper triangle of right square
            if i == 0:
                normal, tminus, tplus = (-1.0, 0.0), right, -1
            elif i == Mx:
                normal, tminus, tplus = (1.0, 0.0), left, -1
            else:
                normal, tminus, tplus = (1.0, 0.0), left, right
            fv.append((vid(i, j), vid(i, j + 1)))
            fn.append(normal)
            fl.append(hy)
            fb.append(tplus == -1)
            ft.append((tminus, tplus))
            fcf.append(coarse_face_id_v(i // nx, j // ny) if i % nx == 0 else -1)

    dn = np.array([-hy, hx]) / diag
    for s in range(Mx * My):  # diagonal edges, t- = lower, t+ = upper
        fv.append((v00[s], v11[s]))
        fn.append((dn[0], dn[1]))
        fl.append(diag)
        fb.append(False)
        ft.append((lower[s], lower[s] + 1))
        fcf.append(-1)

    face_vertices = np.array(fv, dtype=int)
    face_normal = np.array(fn)
    face_length = np.array(fl)
    face_boundary = np.array(fb, dtype=bool)
    face_tris = np.array(ft, dtype=int)
    face_coarse_face = np.array(fcf, dtype=int)

    # horizontal/vertical face mapped back from the enumeration above
    n_hor = (My + 1) * Mx

    def hface(i, j):
        return j * Mx + i

    def vface(i, j):
        return n_hor + i * My + j

    def dface(s):
        return n_hor + (Mx + 1) * My + s

    sq_pos = np.full((Mx, My), -1, dtype=int)
    sq_pos[sq_i, sq_j] = np.arange(Mx * My)

    tri_faces = np.empty((n_tri, 3), dtype=int)
    tri_face_signs = np.empty((n_tri, 3), dtype=int)
    for s in range(Mx * My):
        i, j = sq_i[s], sq_j[s]
        t = lower[s]
        tri_faces[t] = (hface(i, j), vface(i + 1, j), dface(s))
        tri_face_signs[t] = (
            1 if j == 0 else -1,  # bottom edge: outward is -y unless boundary normal already flipped
            1,  # right edge: outward +x (or boundary outward)
            1,  # diagonal normal points lower -> upper, outward for the lower triangle
        )
        tri_faces[t + 1] = (dface(s), hface(i, j + 1), vface(i, j))
        tri_face_signs[t + 1] = (
            -1,
            1,
            1 if i == 0 else -1,  # left edge: outward -x unless boundary face
        )

    # coarse faces: vertical lines first, then horizontal, each with boundary segments
    n_cface = (Nx + 1) * Ny + (Ny + 1) * Nx
    cf_elems = np.full((n_cface, 2), -1, dtype=int)
    cf_fine = [[] for _ in range(n_cface)]
    for I_line in range(Nx + 1):
        for J in range(Ny):
            cf = coarse_face_id_v(I_line, J)
            Tl = J * Nx + (I_line - 1) if I_line > 0 else -1
            Tr = J * Nx + I_line if I_line < Nx else -1
            cf_elems[cf] = (Tl, Tr) if Tl >= 0 else (Tr, -1)
    for J_line in range(Ny + 1):
        for I in range(Nx):
            cf = coarse_face_id_h(J_line, I)
            Tb = (J_line - 1) * Nx + I if J_line > 0 else -1
            Tt = J_line * Nx + I if J_line < Ny else -1
            cf_elems[cf] = (Tb, Tt) if Tb >= 0 else (Tt, -1)
    for f in np.flatnonzero(face_coarse_face >= 0):
        cf_fine[face_coarse_face[f]].append(f)
    coarse_face_fine = tuple(np.array(ids, dtype=int) for ids in cf_fine)

    neighbors = [set() for _ in range(Nx * Ny)]
    for Tm, Tp in cf_elems:
        if Tm >= 0 and Tp >= 0:
            neighbors[Tm].add(Tp)
            neighbors[Tp].add(Tm)
    coarse_neighbors = tuple(np.array(sorted(s), dtype=int) for s in neighbors)

    per_coarse = 2 * nx * ny
    coarse_tris = tuple(np.arange(T * per_coarse, (T + 1) * per_coarse) for T in range(Nx * Ny))

    return TwoLevelGrid(
        domain=(x0, y0, x1, y1),
        coarse_dims=(Nx, Ny),
        fine_per_coarse=(nx, ny),
        vertices=vertices,
        triangles=triangles,
        tri_coarse=tri_coarse,
        tri_area=tri_area,
        tri_diameter=tri_diameter,
        face_vertices=face_vertices,
        face_normal=face_normal,
        face_length=face_length,
        face_boundary=face_boundary,
        face_tris=face_tris,
        face_coarse_face=face_coarse_face,
        tri_faces=tri_faces,
        tri_face_signs=tri_face_signs,
        coarse_face_elems=cf_elems,
        coarse_face_fine=coarse_face_fine,
        coarse_neighbors=coarse_neighbors,
        coarse_tris=coarse_tris,
    )


def oversampling_patch(grid, T):
    """Coarse ids of T and every coarse element touching it, corners included."""
    Nx, Ny = grid.coarse_dims
    T = int(T)
    if not 0 <= T < Nx * Ny:
        raise ValueError(f"coarse element id {T} out of range [0, {Nx * Ny})")
    I, J = T % Nx, T // Nx
    ids = [
        JJ * Nx + II
        for JJ in range(max(J - 1, 0), min(J + 2, Ny))
        for II in range(max(I - 1, 0), min(I + 2, Nx))
    ]
    return set(ids)
