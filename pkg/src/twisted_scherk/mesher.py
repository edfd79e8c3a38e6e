"""Radius truncation of labeled polygons and graded triangulation.

Meshes live in Euclidean disk coordinates.  Geodesic edges are sampled as
polylines; element size shrinks by a grading factor towards edges carrying
infinite boundary data, where the minimal graph becomes vertical.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import triangle as tr
from scipy.spatial import cKDTree

from .domains import LabeledPolygon
from .hyperbolic import DiskPoint, Geodesic, IdealPoint, to_klein

MIN_ANGLE_DEG = 20.0


class MeshError(RuntimeError):
    pass


@dataclass(frozen=True)
class TruncatedPolygon:
    source: LabeledPolygon
    r: float
    vertices: tuple
    labels: tuple

    @property
    def n(self) -> int:
        return len(self.vertices)

    def edge(self, i: int) -> Geodesic:
        return Geodesic(self.vertices[i], self.vertices[(i + 1) % self.n])

    @property
    def coords(self) -> np.ndarray:
        return np.array([v.z for v in self.vertices])

    def interior_angles(self) -> np.ndarray:
        """Euclidean (= hyperbolic, by conformality) interior angles at each vertex."""
        angles = []
        n = self.n
        for i in range(n):
            out_dir = _edge_tangent(self.edge(i), at_start=True)
            in_dir = _edge_tangent(self.edge(i - 1), at_start=False)
            ang = np.angle(-in_dir / out_dir)
            # counter-clockwise polygon: interior angle measured from out to -in
            angles.append(ang % (2 * math.pi))
        return np.array(angles)


def _edge_tangent(g: Geodesic, at_start: bool) -> complex:
    ts = np.array([0.0, 1e-7]) if at_start else np.array([1.0 - 1e-7, 1.0])
    p = g.sample(ts)
    d = p[1] - p[0]
    return d / abs(d)


def truncate(P: LabeledPolygon, r: float) -> TruncatedPolygon:
    if not 0.0 < r < 1.0:
        raise ValueError(f"truncation radius must lie in (0, 1), got {r!r}")
    verts = []
    for v in P.vertices:
        if isinstance(v, IdealPoint):
            verts.append(DiskPoint(r * v.coords))
        else:
            verts.append(v)
    k = to_klein(np.array([v.z for v in verts]))
    n = len(k)
    from .domains import _segments_cross

    for i in range(n):
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue
            if _segments_cross(k[i], k[(i + 1) % n], k[j], k[(j + 1) % n]):
                raise MeshError(f"truncation at r = {r} makes edges {i} and {j} cross")
    return TruncatedPolygon(P, float(r), tuple(verts), tuple(P.labels))


@dataclass
class TriMesh2D:
    nodes: np.ndarray  # complex (N,)
    triangles: np.ndarray  # int (M, 3), counter-clockwise
    boundary_edges: np.ndarray  # int (B, 2), oriented along the boundary
    boundary_tags: np.ndarray  # int (B,), source polygon edge index
    corners: np.ndarray  # int (n,), node index of polygon vertex i
    meta: dict = field(default_factory=dict)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def boundary_nodes(self) -> np.ndarray:
        return np.unique(self.boundary_edges)

    def edge_lengths(self) -> np.ndarray:
        t = self.triangles
        z = self.nodes
        return np.abs(np.stack([z[t[:, 1]] - z[t[:, 0]], z[t[:, 2]] - z[t[:, 1]], z[t[:, 0]] - z[t[:, 2]]], axis=1))

    def h_max(self) -> float:
        return float(self.edge_lengths().max())

    def signed_areas(self) -> np.ndarray:
        z = self.nodes[self.triangles]
        a = z[:, 1] - z[:, 0]
        b = z[:, 2] - z[:, 0]
        return 0.5 * (a.real * b.imag - a.imag * b.real)

    def min_angles(self) -> np.ndarray:
        z = self.nodes[self.triangles]
        out = np.empty(len(z))
        angs = []
        for k in range(3):
            u = z[:, (k + 1) % 3] - z[:, k]
            v = z[:, (k + 2) % 3] - z[:, k]
            angs.append(np.abs(np.angle(v / u)))
        out = np.min(np.stack(angs, axis=1), axis=1)
        return np.degrees(out)

    def to_dict(self) -> dict:
        return {
            "nodes": [[float(z.real), float(z.imag)] for z in self.nodes],
            "triangles": self.triangles.tolist(),
            "boundary_edges": [[int(a), int(b), int(t)] for (a, b), t in zip(self.boundary_edges, self.boundary_tags)],
            "corners": self.corners.tolist(),
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "TriMesh2D":
        nodes = np.array([complex(x, y) for x, y in obj["nodes"]])
        be = np.array(obj["boundary_edges"], dtype=int).reshape(-1, 3)
        return cls(
            nodes,
            np.array(obj["triangles"], dtype=int).reshape(-1, 3),
            be[:, :2].copy(),
            be[:, 2].copy(),
            np.array(obj["corners"], dtype=int),
            dict(obj.get("meta", {})),
        )

    def dump(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")

    @classmethod
    def load(cls, path) -> "TriMesh2D":
        return cls.from_dict(json.loads(Path(path).read_text()))


class SizeField:
    """Target Euclidean edge length: h near infinite-data edges is h/grading."""

    def __init__(self, T: TruncatedPolygon, h_target: float, grading: float, slope: float = 0.25):
        self.h = float(h_target)
        self.h_min = self.h / float(grading)
        self.slope = slope
        pts = []
        for i, lab in enumerate(T.labels):
            if lab.infinite and grading > 1.0:
                g = T.edge(i)
                m = max(8, int(math.ceil(g.euclidean_length() / (0.25 * self.h_min))))
                pts.append(g.sample(np.linspace(0.0, 1.0, m + 1)))
        self.tree = None
        if pts:
            p = np.concatenate(pts)
            self.tree = cKDTree(np.column_stack([p.real, p.imag]))

    def distance(self, z: np.ndarray) -> np.ndarray:
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        if self.tree is None:
            return np.full(z.shape, np.inf)
        d, _ = self.tree.query(np.column_stack([z.real, z.imag]))
        return d

    def __call__(self, z) -> np.ndarray:
        return np.minimum(self.h, self.h_min + self.slope * self.distance(z))


def _sample_edge(g: Geodesic, size: SizeField, h_target: float) -> np.ndarray:
    """Polyline points (excluding the end point) with chord <= local size and sagitta <= h^2/2."""
    length = g.euclidean_length()
    if g.kind == "arc":
        sag_cap = 2.0 * h_target * math.sqrt(g.radius)
    else:
        sag_cap = math.inf
    fine = max(64, int(math.ceil(length / (0.25 * size.h_min))))
    ts = np.linspace(0.0, 1.0, fine + 1)
    pts = g.sample(ts)
    hloc = np.minimum(size(pts), sag_cap)
    # integrate 1 / h along the edge and place points at integer counts
    seg = np.abs(np.diff(pts))
    dens = 0.5 * (1.0 / hloc[:-1] + 1.0 / hloc[1:]) * seg
    cum = np.concatenate([[0.0], np.cumsum(dens)])
    count = max(1, int(math.ceil(cum[-1])))
    targets = np.linspace(0.0, cum[-1], count + 1)[:-1]
    t_new = np.interp(targets, cum, ts)
    return g.sample(t_new)


def triangulate(T: TruncatedPolygon, h_target: float, grading: float = 8.0,
                min_angle: float = 30.0, max_refine: int = 12) -> TriMesh2D:
    """Graded conforming triangulation of a truncated polygon."""
    if not h_target > 0:
        raise ValueError("h_target must be positive")
    if not grading >= 1.0:
        raise ValueError("grading must be >= 1")
    size = SizeField(T, h_target, grading)
    pts, segs, markers, corner_ids = [], [], [], []
    for i in range(T.n):
        p = _sample_edge(T.edge(i), size, h_target)
        corner_ids.append(len(pts))
        base = len(pts)
        pts.extend(p.tolist())
        for j in range(len(p)):
            segs.append((base + j, base + j + 1))
            markers.append(i + 2)
    nb = len(pts)
    segs = [(a, b % nb) for a, b in segs]
    xy = np.array([[z.real, z.imag] for z in pts])
    pslg = {
        "vertices": xy,
        "segments": np.array(segs, dtype=np.int32),
        "segment_markers": np.array(markers, dtype=np.int32).reshape(-1, 1),
    }
    area_of = lambda hh: 0.5 * hh * hh  # noqa: E731
    opts = f"pq{min_angle:g}Y"
    mesh = tr.triangulate(pslg, opts + f"a{area_of(h_target):.12g}")
    for _ in range(max_refine):
        v = mesh["vertices"]
        t = mesh["triangles"]
        c = (v[t[:, 0]] + v[t[:, 1]] + v[t[:, 2]]) / 3.0
        want = area_of(size(c[:, 0] + 1j * c[:, 1]))
        p0, p1, p2 = v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]
        area = 0.5 * np.abs((p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1]) - (p1[:, 1] - p0[:, 1]) * (p2[:, 0] - p0[:, 0]))
        if np.all(area <= 1.05 * want):
            break
        mesh = dict(mesh)
        mesh["triangle_max_area"] = want.reshape(-1, 1)
        mesh = tr.triangulate(mesh, "rpq%gY" % min_angle + "a")
    return _to_trimesh(mesh, nb, corner_ids, T, h_target, grading)


def _to_trimesh(mesh, nb, corner_ids, T, h_target, grading) -> TriMesh2D:
    v = mesh["vertices"]
    nodes = v[:, 0] + 1j * v[:, 1]
    # input corners keep their exact coordinates
    for i, cid in enumerate(corner_ids):
        nodes[cid] = T.vertices[i].z
    tris = np.array(mesh["triangles"], dtype=int)
    z = nodes[tris]
    a = z[:, 1] - z[:, 0]
    b = z[:, 2] - z[:, 0]
    neg = (a.real * b.imag - a.imag * b.real) < 0
    tris[neg] = tris[neg][:, [0, 2, 1]]
    # boundary edges from the triangulation, tagged from segment markers
    segs = np.array(mesh["segments"], dtype=int)
    smark = np.array(mesh["segment_markers"], dtype=int).ravel()
    tagmap = {}
    for (p, q), m in zip(segs, smark):
        if m >= 2:
            tagmap[(min(p, q), max(p, q))] = m - 2
    edges = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
    key = np.sort(edges, axis=1)
    uniq, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    once = counts[inv.ravel()] == 1
    bedges = edges[once]
    btags = []
    for p, q in bedges:
        k = (min(p, q), max(p, q))
        if k not in tagmap:
            raise MeshError(f"untagged boundary edge {k}")
        btags.append(tagmap[k])
    # order boundary edges along the loop starting at corner 0
    nxt = {int(p): (int(q), t) for (p, q), t in zip(bedges, btags)}
    start = int(corner_ids[0])
    order_e, order_t = [], []
    cur = start
    for _ in range(len(nxt)):
        q, t = nxt[cur]
        order_e.append((cur, q))
        order_t.append(t)
        cur = q
        if cur == start:
            break
    if len(order_e) != len(nxt):
        raise MeshError("boundary is not a single closed loop")
    meta = {"r": T.r, "h_target": h_target, "grading": grading}
    return TriMesh2D(nodes, tris, np.array(order_e, dtype=int), np.array(order_t, dtype=int),
                     np.array(corner_ids, dtype=int), meta)


def audit_mesh(mesh: TriMesh2D, corner_angles_deg=None, min_angle: float = MIN_ANGLE_DEG) -> list:
    """Independent validity audit. Returns a list of problems (empty when valid)."""
    problems = []
    t = mesh.triangles
    if np.any(mesh.signed_areas() <= 0):
        problems.append("non-positively oriented triangle")
    edges = np.sort(np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]]), axis=1)
    _, counts = np.unique(edges, axis=0, return_counts=True)
    if np.any(counts > 2):
        problems.append("edge shared by more than two triangles")
    n_boundary = int(np.sum(counts == 1))
    if n_boundary != len(mesh.boundary_edges):
        problems.append("boundary edge count mismatch (hanging node or untagged edge)")
    used = np.zeros(mesh.n_nodes, dtype=bool)
    used[t.ravel()] = True
    if not used.all():
        problems.append("unused nodes")
    V, E, F = mesh.n_nodes, len(counts), len(t)
    if V - E + F != 1:
        problems.append(f"Euler characteristic {V - E + F} != 1")
    ang = mesh.min_angles()
    exempt = np.zeros(len(t), dtype=bool)
    if corner_angles_deg is not None:
        # quality guarantees degrade near input angles below 60 degrees; spare those fans
        z = mesh.nodes[t]
        cen = z.mean(axis=1)
        hmax = np.max(np.abs(z - np.roll(z, 1, axis=1)), axis=1)
        for cid, a in zip(mesh.corners, corner_angles_deg):
            if a < 60.0:
                exempt |= np.abs(cen - mesh.nodes[cid]) <= 6.0 * hmax
    bad = (ang < min_angle) & ~exempt
    if np.any(bad):
        problems.append(f"{int(bad.sum())} triangles below {min_angle} degrees")
    return problems


def mesh_polygon(P: LabeledPolygon, r: float, h_target: float, grading: float = 8.0) -> TriMesh2D:
    return triangulate(truncate(P, r), h_target, grading)
