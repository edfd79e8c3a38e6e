"""Triangulated surfaces in H^2 x R: graph lifts, pi-rotations, assembly and ends.

A vertex is a disk coordinate ``z`` together with a height ``t``.  Where the
boundary data of a graph jumps at a polygon corner the lift inserts a
vertical wall: the corner node is replaced by a column of nodes at the
heights its fan neighbours take, so the limiting vertical segment is part of
the surface rather than a single point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .domains import LabeledPolygon, triangle_domain, twisted_union
from .hyperbolic import Geodesic, Isometry, as_point, dist_array, point_rotation_pi, reflect_across
from .mesher import MeshError

SEAM_TOL = 1e-10


@dataclass
class SurfaceMesh:
    z: np.ndarray  # complex (N,)
    t: np.ndarray  # float (N,)
    triangles: np.ndarray  # int (M, 3)
    copy: np.ndarray  # int (N,), symmetry image that produced the vertex
    seams: dict = field(default_factory=dict)  # name -> vertex indices
    walls: dict = field(default_factory=dict)  # name -> column vertex indices
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.z = np.asarray(self.z, dtype=complex)
        self.t = np.asarray(self.t, dtype=float)
        self.triangles = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        self.copy = np.asarray(self.copy, dtype=np.int64)
        if not (len(self.z) == len(self.t) == len(self.copy)):
            raise ValueError("vertex arrays must have equal length")
        if np.any(np.abs(self.z) >= 1.0):
            raise ValueError("surface vertices must lie inside the unit disk")

    @property
    def n_vertices(self) -> int:
        return len(self.z)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def n_copies(self) -> int:
        return int(self.copy.max()) + 1 if len(self.copy) else 0

    def edges(self) -> tuple:
        """Unique undirected edges and their triangle counts."""
        t = self.triangles
        e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        e.sort(axis=1)
        uniq, counts = np.unique(e, axis=0, return_counts=True)
        return uniq, counts

    def boundary_edges(self) -> np.ndarray:
        e, c = self.edges()
        return e[c == 1]

    def boundary_vertices(self) -> np.ndarray:
        return np.unique(self.boundary_edges())

    def interior_mask(self) -> np.ndarray:
        mask = np.ones(self.n_vertices, dtype=bool)
        mask[self.boundary_vertices()] = False
        return mask

    def edge_lengths(self) -> np.ndarray:
        """Product-metric lengths (M, 3); column j is the edge opposite corner j."""
        t = self.triangles
        out = np.empty(t.shape)
        for j in range(3):
            a, b = t[:, (j + 1) % 3], t[:, (j + 2) % 3]
            dh = dist_array(self.z[a], self.z[b])
            out[:, j] = np.hypot(dh, self.t[a] - self.t[b])
        return out

    def euler_characteristic(self) -> int:
        e, _ = self.edges()
        used = np.unique(self.triangles)
        return int(len(used) - len(e) + self.n_triangles)

    def conformity_errors(self) -> list:
        e, c = self.edges()
        errs = []
        if np.any(c > 2):
            errs.append(f"{int(np.sum(c > 2))} edges shared by more than two triangles")
        # consistent orientation: each interior edge traversed once each way
        t = self.triangles
        d = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        _, dc = np.unique(d, axis=0, return_counts=True)
        if np.any(dc > 1):
            errs.append("inconsistent triangle orientation")
        if len(np.unique(self.triangles)) != self.n_vertices:
            errs.append("unreferenced vertices")
        return errs

    def transformed(self, phi: Isometry) -> "SurfaceMesh":
        """Apply a horizontal isometry to every vertex."""
        return SurfaceMesh(phi.apply_complex(self.z), self.t.copy(), self.triangles.copy(), self.copy.copy(),
                           dict(self.seams), dict(self.walls), dict(self.meta))

    def xyz(self) -> np.ndarray:
        return np.column_stack([self.z.real, self.z.imag, self.t])


# ---------------------------------------------------------------- lift


def _corner_fan(tris: np.ndarray, c: int, start: int, end: int) -> list:
    """Neighbours of corner c in counter-clockwise order from start to end."""
    nxt = {}
    for tri in tris:
        k = int(np.where(tri == c)[0][0])
        nxt[int(tri[(k + 1) % 3])] = int(tri[(k + 2) % 3])
    fan = [start]
    while fan[-1] != end:
        if fan[-1] not in nxt or len(fan) > len(tris) + 1:
            raise MeshError(f"corner {c}: fan is not a simple chain")
        fan.append(nxt[fan[-1]])
    return fan


def lift(sol) -> SurfaceMesh:
    """Graph surface of a GraphSolution, with wall columns at jump corners."""
    mesh, u, cap = sol.mesh, np.asarray(sol.u, dtype=float), sol.cap
    labels = sol.labels
    n_poly = len(labels)
    tri = mesh.triangles.copy()
    z = list(mesh.nodes)
    t = list(u)
    jump_tol = 1e-12 * max(1.0, cap)
    # incident boundary neighbours of each corner
    out_nb, in_nb = {}, {}
    for (a, b) in mesh.boundary_edges:
        out_nb[int(a)] = int(b)
        in_nb[int(b)] = int(a)
    drop = set()
    new_tris = []
    remove = np.zeros(len(tri), dtype=bool)
    walls = {}
    for i, c in enumerate(mesh.corners):
        c = int(c)
        lo = labels[i].boundary_value(cap)
        hi = labels[i - 1].boundary_value(cap)
        if abs(lo - hi) <= jump_tol:
            continue
        fan_idx = np.where(np.any(tri == c, axis=1))[0]
        if np.any(np.isin(tri[fan_idx], mesh.corners[mesh.corners != c])):
            raise MeshError("two polygon corners share a triangle; refine the mesh")
        fan = _corner_fan(tri[fan_idx], c, out_nb[c], in_nb[c])
        heights = [lo] + [u[w] for w in fan[1:-1]] + [hi]
        col = []
        for hgt in heights:
            if col and abs(t[col[-1]] - hgt) <= jump_tol:
                col.append(col[-1])
                continue
            z.append(mesh.nodes[c])
            t.append(hgt)
            col.append(len(z) - 1)
        for j in range(len(fan) - 1):
            new_tris.append((col[j], fan[j], fan[j + 1]))
            if col[j] != col[j + 1]:
                new_tris.append((col[j], fan[j + 1], col[j + 1]))
        remove[fan_idx] = True
        drop.add(c)
        walls[f"corner{i}"] = list(dict.fromkeys(col))
    tris = np.vstack([tri[~remove], np.array(new_tris, dtype=np.int64).reshape(-1, 3)])
    z = np.array(z, dtype=complex)
    t = np.array(t, dtype=float)
    # compact away the replaced corner nodes
    keep = np.ones(len(z), dtype=bool)
    keep[list(drop)] = False
    remap = -np.ones(len(z), dtype=np.int64)
    remap[keep] = np.arange(int(keep.sum()))
    S = SurfaceMesh(z[keep], t[keep], remap[tris], np.zeros(int(keep.sum()), dtype=np.int64),
                    walls={k: remap[v].tolist() for k, v in walls.items()},
                    meta={"cap": float(cap), "r": mesh.meta.get("r"), "h": mesh.meta.get("h_target"),
                          "n_polygon": n_poly})
    return S


def lift_heights(mesh, heights) -> SurfaceMesh:
    """Plain vertex-wise lift of arbitrary nodal heights, no walls."""
    h = np.asarray(heights, dtype=float)
    return SurfaceMesh(mesh.nodes.copy(), h.copy(), mesh.triangles.copy(),
                       np.zeros(mesh.n_nodes, dtype=np.int64), meta={"h": mesh.meta.get("h_target")})


# ---------------------------------------------------------------- rotations


def horizontal_rotation_map(g: Geodesic) -> Callable:
    """Rotation by pi about g x {0}: (z, t) -> (sigma_g(z), -t)."""
    sigma = reflect_across(g)

    def f(z, t):
        return sigma.apply_complex(np.asarray(z, dtype=complex)), -np.asarray(t, dtype=float)
    return f


def vertical_rotation_map(c) -> Callable:
    """Rotation by pi about {c} x R: (z, t) -> (rho_c(z), t)."""
    rho = point_rotation_pi(c)

    def f(z, t):
        return rho.apply_complex(np.asarray(z, dtype=complex)), np.asarray(t, dtype=float).copy()
    return f


def _glue_image(S: SurfaceMesh, fmap: Callable, seam: np.ndarray, name: str) -> SurfaceMesh:
    if len(seam) == 0:
        raise ValueError("seam is empty: surface boundary does not meet the rotation axis")
    zi, ti = fmap(S.z, S.t)
    off = S.n_vertices
    index = np.arange(off, 2 * off)
    index[seam] = seam
    new = np.setdiff1d(np.arange(off), seam)
    # compact the image so seam vertices appear once
    remap = -np.ones(off, dtype=np.int64)
    remap[seam] = seam
    remap[new] = off + np.arange(len(new))
    z = np.concatenate([S.z, zi[new]])
    t = np.concatenate([S.t, ti[new]])
    copy = np.concatenate([S.copy, S.copy[new] + S.n_copies])
    tris_img = remap[S.triangles][:, ::-1]
    tris = np.vstack([S.triangles, tris_img])
    seams = dict(S.seams)
    seams[name] = np.asarray(seam).tolist()
    walls = dict(S.walls)
    walls.update({f"{k}'": remap[np.asarray(v)].tolist() for k, v in S.walls.items()})
    return SurfaceMesh(z, t, tris, copy, seams, walls, dict(S.meta))


def _check_seam(S: SurfaceMesh, seam: np.ndarray, fmap: Callable, what: str) -> None:
    zi, ti = fmap(S.z[seam], S.t[seam])
    err = max(np.max(np.abs(zi - S.z[seam]), initial=0.0), np.max(np.abs(ti - S.t[seam]), initial=0.0))
    if err > SEAM_TOL:
        raise ValueError(f"seam not on {what} (deviation {err:.2e})")


def rotate_pi_horizontal(S: SurfaceMesh, g: Geodesic, seam: Optional[Sequence[int]] = None) -> SurfaceMesh:
    """S together with its pi-rotation about g x {0}, glued along the seam."""
    fmap = horizontal_rotation_map(g)
    if seam is None:
        b = S.boundary_vertices()
        on = g.distance_to(S.z[b]) <= SEAM_TOL
        seam = b[on & (np.abs(S.t[b]) <= SEAM_TOL)]
    seam = np.asarray(seam, dtype=np.int64)
    if len(seam) == 0:
        raise ValueError("seam not on g x {0}: no boundary vertex lies on the axis")
    _check_seam(S, seam, fmap, "g x {0}")
    return _glue_image(S, fmap, seam, f"horizontal{len(S.seams)}")


def rotate_pi_vertical(S: SurfaceMesh, c=0j, seam: Optional[Sequence[int]] = None) -> SurfaceMesh:
    """S together with its pi-rotation about {c} x R, glued along the seam."""
    cz = complex(as_point(c).z)
    fmap = vertical_rotation_map(cz)
    if seam is None:
        b = S.boundary_vertices()
        seam = b[np.abs(S.z[b] - cz) <= SEAM_TOL]
    seam = np.asarray(seam, dtype=np.int64)
    if len(seam) == 0:
        raise ValueError("seam off-axis: no boundary vertex lies on the vertical axis")
    _check_seam(S, seam, fmap, "the vertical axis")
    return _glue_image(S, fmap, seam, f"vertical{len(S.seams)}")


@dataclass
class Assembly:
    k: int
    polygon: LabeledPolygon
    run: object
    piece: SurfaceMesh
    surface: SurfaceMesh


def assemble_twisted(k: int, theta: float, beta: float = 0.0, schedule=None, grading: float = 8.0,
                     run=None) -> Assembly:
    """Assemble Sigma_k from the exhaustion solution of its fundamental piece."""
    from .solver import exhaustion_solve, paper_schedule

    if k < 1:
        raise ValueError("k must be at least 1")
    P = triangle_domain(theta) if k == 1 else twisted_union(k, theta, beta)
    if run is None:
        run = exhaustion_solve(P, schedule or paper_schedule(4), grading=grading, keep_solutions=False)
    piece = lift(run.final)
    if k == 1:
        half = rotate_pi_horizontal(piece, P.edge(P.n - 1))
        surface = rotate_pi_vertical(half, 0j)
    else:
        surface = rotate_pi_vertical(piece, 0j)
    surface.meta.update({"k": k, "theta": theta, "beta": beta})
    return Assembly(k, P, run, piece, surface)


# ---------------------------------------------------------------- ends


@dataclass(frozen=True)
class EndData:
    g: int
    n: int
    m: tuple

    def __post_init__(self):
        if self.g < 0:
            raise ValueError("genus must be nonnegative")
        if self.n < 1:
            raise ValueError("at least one end is required")
        if len(self.m) != self.n:
            raise ValueError("one degree per end")
        if any(int(mi) != mi or mi < 0 for mi in self.m):
            raise ValueError("end degrees are integers >= 0")
        object.__setattr__(self, "m", tuple(int(mi) for mi in self.m))

    def to_dict(self) -> dict:
        return {"g": self.g, "n": self.n, "m": list(self.m)}


def euler_total_curvature(e: EndData) -> float:
    """2 pi (2 - 2g - 2n - sum m_i); the integer factor is exact."""
    return 2.0 * math.pi * euler_factor(e)


def euler_factor(e: EndData) -> int:
    return 2 - 2 * e.g - 2 * e.n - sum(e.m)


def level_curves(S: SurfaceMesh, T: float) -> dict:
    """Connected components of S cut by t = T.

    Vertices with t >= T count as above, so the cut never passes through a
    vertex.  Returns counts of open curves with both ends on the boundary
    ("divergent"), closed loops and the raw segment count.
    """
    above = S.t >= T
    tri = S.triangles
    na = above[tri].sum(axis=1)
    cut = (na == 1) | (na == 2)
    ct = tri[cut]
    # the two crossing edges of each cut triangle
    pairs = []
    for j in range(3):
        a, b = ct[:, j], ct[:, (j + 1) % 3]
        pairs.append(np.where(above[a] != above[b], 1, 0))
    pairs = np.stack(pairs, axis=1).astype(bool)
    e_ab = []
    for j in range(3):
        a, b = ct[:, j], ct[:, (j + 1) % 3]
        e_ab.append(np.sort(np.stack([a, b], axis=1), axis=1))
    e_ab = np.stack(e_ab, axis=1)  # (K, 3, 2)
    crossing = e_ab[pairs].reshape(-1, 2, 2)
    if len(crossing) == 0:
        return {"divergent": 0, "closed": 0, "segments": 0, "dangling": 0}
    flat = crossing.reshape(-1, 2)
    keys, inv = np.unique(flat, axis=0, return_inverse=True)
    inv = inv.reshape(-1, 2)
    nk = len(keys)
    A = coo_matrix((np.ones(len(inv)), (inv[:, 0], inv[:, 1])), shape=(nk, nk))
    ncomp, lab = connected_components(A, directed=False)
    deg = np.bincount(inv.ravel(), minlength=nk)
    bset = {tuple(e) for e in S.boundary_edges().tolist()}
    on_b = np.array([tuple(k) in bset for k in keys.tolist()])
    ends = np.bincount(lab[deg == 1], minlength=ncomp)
    bends = np.bincount(lab[(deg == 1) & on_b], minlength=ncomp)
    divergent = int(np.sum((ends == 2) & (bends == 2)))
    closed = int(np.sum(ends == 0))
    dangling = int(np.sum((ends > 0) & (bends < ends)))
    return {"divergent": divergent, "closed": closed, "segments": len(inv), "dangling": dangling}


def count_ends(S: SurfaceMesh, T: float) -> Optional[EndData]:
    """End data of a single-end simply-connected surface from level curves at +-T.

    Returns None when no divergent curve crosses the probe (no end seen).
    """
    if T <= 0:
        raise ValueError("probe height must be positive")
    up = level_curves(S, T)["divergent"]
    down = level_curves(S, -T)["divergent"]
    if up != down:
        raise ValueError(f"probe height too low / insufficient resolution ({up} curves at +T, {down} at -T)")
    if up == 0:
        return None
    return EndData(0, 1, (up - 1,))


# ---------------------------------------------------------------- audits and export


def _seg_tri_hits(p0, p1, a, b, c, eps):
    """Vectorised strict segment/triangle crossing (Moller-Trumbore)."""
    d = p1 - p0
    e1, e2 = b - a, c - a
    pv = np.cross(d, e2)
    det = np.einsum("ij,ij->i", e1, pv)
    ok = np.abs(det) > 1e-18
    inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
    tv = p0 - a
    u = np.einsum("ij,ij->i", tv, pv) * inv
    qv = np.cross(tv, e1)
    v = np.einsum("ij,ij->i", d, qv) * inv
    s = np.einsum("ij,ij->i", e2, qv) * inv
    return ok & (u > eps) & (v > eps) & (u + v < 1 - eps) & (s > eps) & (s < 1 - eps)


def self_intersections(S: SurfaceMesh, eps: float = 1e-9, max_cells: int = 16) -> int:
    """Count pairs of vertex-disjoint triangles whose interiors cross in (x, y, t)."""
    P = S.xyz()
    cap = float(np.max(np.abs(S.t))) or 1.0
    P[:, 2] /= cap  # a linear rescale of t preserves intersections
    tri = S.triangles
    lo = P[tri].min(axis=1)
    hi = P[tri].max(axis=1)
    size = float(np.median(np.max(hi - lo, axis=1))) or 1e-3
    cl = np.floor(lo / size).astype(np.int64)
    ch = np.floor(hi / size).astype(np.int64)
    span = ch - cl + 1
    span = np.minimum(span, max_cells)
    counts = span.prod(axis=1)
    owner = np.repeat(np.arange(len(tri)), counts)
    local = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
    sx, sy = span[owner, 0], span[owner, 1]
    ix = local % sx
    iy = (local // sx) % sy
    iz = local // (sx * sy)
    cells = cl[owner] + np.stack([ix, iy, iz], axis=1)
    key = (cells[:, 0] * 73856093) ^ (cells[:, 1] * 19349663) ^ (cells[:, 2] * 83492791)
    order = np.lexsort((owner, key))
    key, owner = key[order], owner[order]
    start = np.r_[0, np.flatnonzero(np.diff(key)) + 1]
    size = np.diff(np.r_[start, len(key)])
    # every ordered pair (p, q > p) inside each cell group
    pos_end = np.repeat(start + size, size)
    reps = pos_end - np.arange(len(key)) - 1
    first = np.repeat(np.arange(len(key)), reps)
    second = first + 1 + (np.arange(reps.sum()) - np.repeat(np.cumsum(reps) - reps, reps))
    a, b = owner[first], owner[second]
    a, b = np.minimum(a, b), np.maximum(a, b)
    keep = a != b
    code = np.unique(a[keep] * len(tri) + b[keep])
    if len(code) == 0:
        return 0
    pairs = np.stack([code // len(tri), code % len(tri)], axis=1)
    A, B = tri[pairs[:, 0]], tri[pairs[:, 1]]
    share = (A[:, :, None] == B[:, None, :]).any(axis=(1, 2))
    pairs, A, B = pairs[~share], A[~share], B[~share]
    overlap = np.all((lo[pairs[:, 0]] <= hi[pairs[:, 1]]) & (lo[pairs[:, 1]] <= hi[pairs[:, 0]]), axis=1)
    A, B = A[overlap], B[overlap]
    hit = np.zeros(len(A), dtype=bool)
    for X, Y in ((A, B), (B, A)):
        for j in range(3):
            hit |= _seg_tri_hits(P[X[:, j]], P[X[:, (j + 1) % 3]], P[Y[:, 0]], P[Y[:, 1]], P[Y[:, 2]], eps)
    return int(hit.sum())


def surface_audit(S: SurfaceMesh, check_embedding: bool = True) -> dict:
    out = {
        "vertices": S.n_vertices,
        "triangles": S.n_triangles,
        "euler_characteristic": S.euler_characteristic(),
        "components": _components(S),
        "conformity_errors": S.conformity_errors(),
    }
    if check_embedding:
        out["self_intersections"] = self_intersections(S)
    out["disk"] = out["euler_characteristic"] == 1 and out["components"] == 1 and not out["conformity_errors"]
    return out


def _components(S: SurfaceMesh) -> int:
    t = S.triangles
    r = np.concatenate([t[:, 0], t[:, 1]])
    c = np.concatenate([t[:, 1], t[:, 2]])
    A = coo_matrix((np.ones(len(r)), (r, c)), shape=(S.n_vertices, S.n_vertices))
    return int(connected_components(A, directed=False)[0])


def write_obj(S: SurfaceMesh, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# {S.n_vertices} vertices, {S.n_triangles} faces; coordinates (x, y, t)\n")
        for x, y, t in S.xyz():
            fh.write(f"v {x:.12g} {y:.12g} {t:.12g}\n")
        for a, b, c in S.triangles + 1:
            fh.write(f"f {a} {b} {c}\n")


def read_obj(path) -> tuple:
    verts, faces = [], []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if parts[0] == "v":
                verts.append([float(p) for p in parts[1:4]])
            elif parts[0] == "f":
                faces.append([int(p.split("/")[0]) - 1 for p in parts[1:4]])
    return np.array(verts), np.array(faces, dtype=np.int64)


def write_ply(S: SurfaceMesh, path, n3: Optional[np.ndarray] = None) -> None:
    if n3 is None:
        from .diagnostics import n3_profile
        n3 = n3_profile(S).per_vertex
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("ply\nformat ascii 1.0\n")
        fh.write(f"element vertex {S.n_vertices}\n")
        fh.write("property double x\nproperty double y\nproperty double t\n")
        fh.write("property int copy_id\nproperty double n3\n")
        fh.write(f"element face {S.n_triangles}\nproperty list uchar int vertex_indices\nend_header\n")
        for (x, y, t), cid, v in zip(S.xyz(), S.copy, n3):
            fh.write(f"{x:.12g} {y:.12g} {t:.12g} {int(cid)} {v:.9g}\n")
        for a, b, c in S.triangles:
            fh.write(f"3 {a} {b} {c}\n")
