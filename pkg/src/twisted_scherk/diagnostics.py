"""Curvature, flux, harmonicity and end asymptotics of surfaces in H^2 x R.

All quantities are intrinsic: a triangle is the flat triangle with the exact
product-metric distances of its vertices as side lengths.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .domains import default_horocycle_sizes, ideal_scherk_polygon
from .hyperbolic import Geodesic, Horocycle, IdealPoint, conformal_factor, dist_array, truncated_length
from .surface import SurfaceMesh

K_SLACK = 0.05


def _angles(L: np.ndarray) -> np.ndarray:
    """Corner angles from side lengths; L[:, j] is opposite corner j."""
    a, b, c = L[:, 0], L[:, 1], L[:, 2]
    out = np.empty_like(L)
    out[:, 0] = np.arccos(np.clip((b * b + c * c - a * a) / (2 * b * c), -1.0, 1.0))
    out[:, 1] = np.arccos(np.clip((a * a + c * c - b * b) / (2 * a * c), -1.0, 1.0))
    out[:, 2] = np.pi - out[:, 0] - out[:, 1]
    return out


def _areas(L: np.ndarray) -> np.ndarray:
    # Kahan's stable Heron
    s = np.sort(L, axis=1)[:, ::-1]
    a, b, c = s[:, 0], s[:, 1], s[:, 2]
    q = (a + (b + c)) * (c - (a - b)) * (c + (a - b)) * (a + (b - c))
    return 0.25 * np.sqrt(np.maximum(q, 0.0))


def _log_vectors(S: SurfaceMesh, v: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Initial vectors of product-metric geodesics from v to q, orthonormal frame at v."""
    zv, zq = S.z[v], S.z[q]
    w = (zq - zv) / (1.0 - np.conj(zv) * zq)
    d = dist_array(zv, zq)
    aw = np.abs(w)
    unit = np.where(aw > 0, w / np.where(aw > 0, aw, 1.0), 0.0)
    return np.column_stack([d * unit.real, d * unit.imag, S.t[q] - S.t[v]])


def oriented_boundary(S: SurfaceMesh) -> tuple:
    """(next, prev) maps along boundary loops, interior on the left."""
    t = S.triangles
    d = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    fwd = {tuple(e) for e in d.tolist()}
    nxt, prv = {}, {}
    for a, b in d.tolist():
        if (b, a) not in fwd:
            if a in nxt:
                raise ValueError(f"boundary is not a manifold at vertex {a}")
            nxt[a] = b
            prv[b] = a
    return nxt, prv


def ambient_boundary_turning(S: SurfaceMesh) -> tuple:
    """Turning at each boundary vertex from ambient geodesic directions.

    The interior angle is the counter-clockwise angle, about the vertex normal,
    from the geodesic towards the next boundary vertex to the one towards the
    previous.  Returns (vertex ids, turning angles).
    """
    nxt, prv = oriented_boundary(S)
    bv = np.array(sorted(nxt), dtype=np.int64)
    if len(bv) == 0:
        return bv, np.zeros(0)
    N = np.zeros((S.n_vertices, 3))
    t = S.triangles
    for j in range(3):
        v, a, b = t[:, j], t[:, (j + 1) % 3], t[:, (j + 2) % 3]
        sel = np.isin(v, bv)
        la = _log_vectors(S, v[sel], a[sel])
        lb = _log_vectors(S, v[sel], b[sel])
        np.add.at(N, v[sel], np.cross(la, lb))
    n = N[bv]
    n /= np.linalg.norm(n, axis=1)[:, None]
    ln = _log_vectors(S, bv, np.array([nxt[i] for i in bv]))
    lp = _log_vectors(S, bv, np.array([prv[i] for i in bv]))
    ln -= np.einsum("ij,ij->i", ln, n)[:, None] * n
    lp -= np.einsum("ij,ij->i", lp, n)[:, None] * n
    ang = np.arctan2(np.einsum("ij,ij->i", n, np.cross(ln, lp)), np.einsum("ij,ij->i", ln, lp))
    ang = np.mod(ang, 2 * np.pi)
    return bv, np.pi - ang


@dataclass
class CurvatureReport:
    K: np.ndarray  # per vertex, NaN on the boundary
    defect: np.ndarray  # per vertex angle defect (interior) or intrinsic turning (boundary)
    total: float
    boundary_turning: float
    gauss_bonnet_residual: float
    euler_characteristic: int
    h: Optional[float] = None

    @property
    def max_interior_K(self) -> float:
        return float(np.nanmax(self.K)) if np.any(~np.isnan(self.K)) else float("nan")

    def summary(self) -> dict:
        return {
            "total_curvature": self.total,
            "boundary_turning": self.boundary_turning,
            "gauss_bonnet_residual": self.gauss_bonnet_residual,
            "euler_characteristic": self.euler_characteristic,
            "max_interior_K": self.max_interior_K,
            "K_slack": K_SLACK,
            "h": self.h,
        }


def gauss_curvature(S: SurfaceMesh) -> CurvatureReport:
    """Angle defects on product-metric edge lengths; int K sums interior defects."""
    L = S.edge_lengths()
    ang = _angles(L)
    area = _areas(L)
    nv = S.n_vertices
    tri = S.triangles.ravel()
    angle_sum = np.bincount(tri, weights=ang.ravel(), minlength=nv)
    bary = np.bincount(tri, weights=np.repeat(area / 3.0, 3), minlength=nv)
    interior = S.interior_mask()
    defect = np.where(interior, 2 * np.pi - angle_sum, np.pi - angle_sum)
    with np.errstate(divide="ignore", invalid="ignore"):
        K = np.where(interior, defect / bary, np.nan)
    total = float(np.sum(defect[interior]))
    _, turning = ambient_boundary_turning(S)
    chi = S.euler_characteristic()
    turn = float(np.sum(turning))
    return CurvatureReport(K, defect, total, turn, total + turn - 2 * np.pi * chi, chi, S.meta.get("h"))


def gauss_bonnet_residual(S: SurfaceMesh) -> float:
    """int K + boundary turning - 2 pi chi, the turning measured along ambient geodesics."""
    return gauss_curvature(S).gauss_bonnet_residual


# ---------------------------------------------------------------- flux


@dataclass
class FluxReport:
    r: float
    T: float
    value: float
    perimeter: float
    segments: int
    h: Optional[float] = None

    @property
    def relative(self) -> float:
        return abs(self.value) / self.perimeter if self.perimeter > 0 else 0.0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["relative"] = self.relative
        return d


def _layout(L: np.ndarray) -> np.ndarray:
    """Planar positions (M, 3, 2) of triangles with the given side lengths."""
    M = len(L)
    P = np.zeros((M, 3, 2))
    c = L[:, 2]  # |P0 P1|
    b = L[:, 1]  # |P0 P2|
    a = L[:, 0]  # |P1 P2|
    P[:, 1, 0] = c
    x = (c * c + b * b - a * a) / (2 * c)
    P[:, 2, 0] = x
    P[:, 2, 1] = np.sqrt(np.maximum(b * b - x * x, 0.0))
    return P


def _clip(poly: list, f: np.ndarray, tag: int) -> list:
    """Clip a polygon of (barycentric, edge-tag) vertices to f <= 0."""
    out = []
    n = len(poly)
    for i in range(n):
        (p, ptag), (q, _) = poly[i], poly[(i + 1) % n]
        fp, fq = float(f @ p), float(f @ q)
        if fp <= 0:
            out.append(poly[i])
        if (fp <= 0) != (fq <= 0):
            s = fp / (fp - fq)
            x = p + s * (q - p)
            # leaving: the edge from x runs along the cut; entering: it continues p -> q
            out.append((x, tag if fp <= 0 else ptag))
    return out


def flux_vertical(S: SurfaceMesh, r: float, T: float) -> FluxReport:
    """Flux of the Killing field d/dt through the boundary of S inside |z| <= r, |t| <= T."""
    fr = np.abs(S.z) - r
    fu = S.t - T
    fd = -S.t - T
    tri = S.triangles
    F = np.stack([fr[tri], fu[tri], fd[tri]], axis=1)  # (M, 3 funcs, 3 verts)
    inside = np.all(F <= 0, axis=2).all(axis=1)
    outside = np.any(np.all(F > 0, axis=2), axis=1)
    cut = ~inside & ~outside
    idx = np.flatnonzero(cut)
    L = S.edge_lengths()[idx]
    P = _layout(L)
    value = 0.0
    perim = 0.0
    nseg = 0
    eye = np.eye(3)
    for m, ti in enumerate(idx):
        tt = S.t[tri[ti]]
        E = np.array([P[m, 1] - P[m, 0], P[m, 2] - P[m, 0]])
        g = np.linalg.solve(E, [tt[1] - tt[0], tt[2] - tt[0]])
        poly = [(eye[j], -1) for j in range(3)]
        for k in range(3):
            poly = _clip(poly, F[ti, k], k)
            if not poly:
                break
        for i in range(len(poly)):
            (p, tag), (q, _) = poly[i], poly[(i + 1) % len(poly)]
            if tag < 0:
                continue
            a, b = p @ P[m], q @ P[m]
            d = b - a
            ln = math.hypot(d[0], d[1])
            if ln == 0.0:
                continue
            value += g[0] * d[1] - g[1] * d[0]
            perim += ln
            nseg += 1
    return FluxReport(float(r), float(T), value, perim, nseg, S.meta.get("h"))


# ---------------------------------------------------------------- other checks


def scherk_condition(points: Sequence, sizes: Optional[dict] = None) -> float:
    """(|A1| + |A2|) - (|B1| + |B2|) for the quadrilateral's truncated sides."""
    pts = [p if isinstance(p, IdealPoint) else IdealPoint(float(p)) for p in points]
    if len(pts) != 4:
        raise ValueError("a Scherk quadrilateral has four ideal vertices")
    if sizes is None:
        sizes = default_horocycle_sizes(ideal_scherk_polygon([p.angle for p in pts]))
    H = [Horocycle(p, sizes[p]) for p in pts]
    for i in range(4):
        for j in range(i + 1, 4):
            if abs(H[i].center - H[j].center) < H[i].radius + H[j].radius:
                raise ValueError("horodisks must be disjoint")
    side = [truncated_length(Geodesic(pts[i], pts[(i + 1) % 4]), H[i], H[(i + 1) % 4]) for i in range(4)]
    return (side[0] + side[2]) - (side[1] + side[3])


def cotan_laplacian(S: SurfaceMesh, f: np.ndarray) -> np.ndarray:
    """sum_j (cot a_ij + cot b_ij)/2 (f_j - f_i) per vertex."""
    L = S.edge_lengths()
    ang = _angles(L)
    cot = 1.0 / np.tan(ang)
    tri = S.triangles
    out = np.zeros(S.n_vertices)
    for j in range(3):
        a, b = tri[:, (j + 1) % 3], tri[:, (j + 2) % 3]
        w = 0.5 * cot[:, j] * (f[b] - f[a])
        np.add.at(out, a, w)
        np.add.at(out, b, -w)
    return out


def harmonicity_residual(S: SurfaceMesh) -> float:
    """Mean |Laplace-Beltrami(t)| over interior vertices (weak, cotangent form)."""
    interior = S.interior_mask()
    if not np.any(interior):
        return 0.0
    Lt = cotan_laplacian(S, S.t)
    return float(np.mean(np.abs(Lt[interior])))


@dataclass
class N3Profile:
    per_vertex: np.ndarray
    per_triangle: np.ndarray
    collar_max: float
    collar_radius: float
    collar_vertices: int


def triangle_normals(S: SurfaceMesh) -> np.ndarray:
    """Unit normals in an orthonormal frame of the centroid metric."""
    tri = S.triangles
    zc = S.z[tri].mean(axis=1)
    lam = conformal_factor(zc)
    X = S.xyz()[tri]
    e1 = X[:, 1] - X[:, 0]
    e2 = X[:, 2] - X[:, 0]
    e1[:, :2] *= lam[:, None]
    e2[:, :2] *= lam[:, None]
    n = np.cross(e1, e2)
    return n / np.linalg.norm(n, axis=1)[:, None]


def n3_profile(S: SurfaceMesh, collar: float = 0.1) -> N3Profile:
    """|N3| per vertex and its maximum over the outer collar of the surface."""
    nt = np.abs(triangle_normals(S)[:, 2])
    area = _areas(S.edge_lengths())
    tri = S.triangles.ravel()
    w = np.bincount(tri, weights=np.repeat(area, 3), minlength=S.n_vertices)
    s = np.bincount(tri, weights=np.repeat(area * nt, 3), minlength=S.n_vertices)
    with np.errstate(invalid="ignore", divide="ignore"):
        per_v = np.where(w > 0, s / w, 0.0)
    d0 = dist_array(np.zeros(S.n_vertices, dtype=complex), S.z)
    rad = (1.0 - collar) * float(d0.max())
    sel = d0 >= rad
    return N3Profile(per_v, nt, float(per_v[sel].max()), rad, int(sel.sum()))


def report_text(record: dict) -> str:
    """Structured-text rendering (sorted JSON) with NaN mapped to null."""
    def clean(x):
        if isinstance(x, dict):
            return {k: clean(v) for k, v in x.items()}
        if isinstance(x, (list, tuple)):
            return [clean(v) for v in x]
        if isinstance(x, (np.floating, float)):
            x = float(x)
            return None if math.isnan(x) else x
        if isinstance(x, np.integer):
            return int(x)
        return x
    return json.dumps(clean(record), indent=2, sort_keys=True) + "\n"
