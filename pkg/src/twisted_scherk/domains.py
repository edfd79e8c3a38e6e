"""Labeled polygonal domains and the Jenkins-Serrin solvability check.

A domain is a geodesic polygon whose vertices are finite disk points or
ideal points; every edge carries a boundary label (+inf, -inf or a finite
height).  ``js_check`` evaluates the Jenkins-Serrin inequalities on all
inscribed polygons using horocycle-truncated lengths.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .hyperbolic import (
    DiskPoint,
    Geodesic,
    IdealPoint,
    Isometry,
    Point,
    canonical_angle,
    ideal_gap,
    reflect_across,
    to_klein,
    truncated_distance,
)

EQUALITY_TOL = 1e-9


@dataclass(frozen=True)
class EdgeLabel:
    kind: str  # "+inf", "-inf" or "finite"
    value: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("+inf", "-inf", "finite"):
            raise ValueError(f"unknown edge label kind {self.kind!r}")
        if self.kind == "finite" and not math.isfinite(self.value):
            raise ValueError("finite label needs a finite height")

    @classmethod
    def finite(cls, c: float) -> "EdgeLabel":
        return cls("finite", float(c))

    @property
    def infinite(self) -> bool:
        return self.kind != "finite"

    @property
    def sign(self) -> int:
        return {"+inf": 1, "-inf": -1, "finite": 0}[self.kind]

    def negated(self) -> "EdgeLabel":
        if self.kind == "+inf":
            return MINUS_INF
        if self.kind == "-inf":
            return PLUS_INF
        return EdgeLabel.finite(-self.value)

    def boundary_value(self, cap: float) -> float:
        """Finite stand-in for this label with +-inf replaced by +-cap."""
        if self.kind == "+inf":
            return cap
        if self.kind == "-inf":
            return -cap
        return self.value

    def to_json(self):
        return self.value if self.kind == "finite" else self.kind

    @classmethod
    def from_json(cls, obj) -> "EdgeLabel":
        if isinstance(obj, str):
            key = obj.strip().lower()
            if key in ("+inf", "inf", "+infinity"):
                return PLUS_INF
            if key in ("-inf", "-infinity"):
                return MINUS_INF
            raise ValueError(f"bad edge label {obj!r}")
        if isinstance(obj, bool) or not isinstance(obj, (int, float)):
            raise ValueError(f"bad edge label {obj!r}")
        return cls.finite(float(obj))

    def __str__(self) -> str:
        return self.kind if self.infinite else f"{self.value:g}"


PLUS_INF = EdgeLabel("+inf")
MINUS_INF = EdgeLabel("-inf")
ZERO = EdgeLabel("finite", 0.0)


def _coords(v: Point) -> complex:
    return v.coords


def _segments_cross(p1, p2, q1, q2, eps=1e-14) -> bool:
    """Proper crossing of two straight segments (shared endpoints excluded)."""

    def orient(a, b, c):
        return (b - a).real * (c - a).imag - (b - a).imag * (c - a).real

    d1 = orient(q1, q2, p1)
    d2 = orient(q1, q2, p2)
    d3 = orient(p1, p2, q1)
    d4 = orient(p1, p2, q2)
    return ((d1 > eps and d2 < -eps) or (d1 < -eps and d2 > eps)) and (
        (d3 > eps and d4 < -eps) or (d3 < -eps and d4 > eps)
    )


def _point_in_polygon(pt: complex, poly: np.ndarray) -> bool:
    inside = False
    n = len(poly)
    for i in range(n):
        a, b = poly[i], poly[(i + 1) % n]
        if (a.imag > pt.imag) != (b.imag > pt.imag):
            x = a.real + (pt.imag - a.imag) * (b.real - a.real) / (b.imag - a.imag)
            if pt.real < x:
                inside = not inside
    return inside


@dataclass(frozen=True)
class LabeledPolygon:
    """Geodesic polygon with one boundary label per edge (edge i: v_i -> v_{i+1})."""

    vertices: tuple
    labels: tuple
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        verts = tuple(self.vertices)
        labels = tuple(self.labels)
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "labels", labels)
        n = len(verts)
        if n < 3:
            raise ValueError("a polygon needs at least 3 vertices")
        if len(labels) != n:
            raise ValueError(f"expected {n} labels, got {len(labels)}")
        for v in verts:
            if not isinstance(v, (DiskPoint, IdealPoint)):
                raise TypeError(f"vertex {v!r} is not a DiskPoint or IdealPoint")
        for lab in labels:
            if not isinstance(lab, EdgeLabel):
                raise TypeError(f"label {lab!r} is not an EdgeLabel")
        for i in range(n):
            if verts[i] == verts[(i + 1) % n]:
                raise ValueError(f"consecutive vertices {i} and {(i + 1) % n} coincide")
        for i, v in enumerate(verts):
            if isinstance(v, IdealPoint):
                before, after = labels[i - 1], labels[i]
                if before.infinite and before.kind == after.kind:
                    raise ValueError(
                        f"edges {(i - 1) % n} and {i} at ideal vertex {i} both carry {after.kind}"
                    )
        if not self._is_simple():
            raise ValueError("polygon is not simple")

    # geometry in the Klein model, where geodesic edges are straight
    @property
    def klein(self) -> np.ndarray:
        return to_klein(np.array([_coords(v) for v in self.vertices]))

    def _is_simple(self) -> bool:
        k = self.klein
        n = len(k)
        for i in range(n):
            for j in range(i + 1, n):
                if j == i + 1 or (i == 0 and j == n - 1):
                    continue
                if _segments_cross(k[i], k[(i + 1) % n], k[j], k[(j + 1) % n]):
                    return False
        # distinct vertices
        for i in range(n):
            for j in range(i + 1, n):
                if abs(k[i] - k[j]) < 1e-15:
                    return False
        return True

    @property
    def n(self) -> int:
        return len(self.vertices)

    def edge(self, i: int) -> Geodesic:
        return Geodesic(self.vertices[i], self.vertices[(i + 1) % self.n])

    def edges(self) -> list:
        return [self.edge(i) for i in range(self.n)]

    @property
    def ideal_indices(self) -> list:
        return [i for i, v in enumerate(self.vertices) if isinstance(v, IdealPoint)]

    @property
    def all_infinite(self) -> bool:
        return all(lab.infinite for lab in self.labels)

    def signed_klein_area(self) -> float:
        k = self.klein
        return 0.5 * float(np.sum(k.real * np.roll(k.imag, -1) - np.roll(k.real, -1) * k.imag))

    def chord_inside(self, i: int, j: int) -> bool:
        """Whether the geodesic joining vertices i and j lies in the closed polygon."""
        n = self.n
        if (j - i) % n in (1, n - 1):
            return True
        k = self.klein
        a, b = k[i], k[j]
        for e in range(n):
            if e in (i, j) or (e + 1) % n in (i, j):
                continue
            if _segments_cross(a, b, k[e], k[(e + 1) % n]):
                return False
        return _point_in_polygon(0.5 * (a + b), k)

    def transformed(self, phi: Isometry) -> "LabeledPolygon":
        verts = [phi(v) for v in self.vertices]
        labels = list(self.labels)
        if phi.reflect:
            # orientation reversal: keep counter-clockwise order
            verts = verts[::-1]
            verts = verts[-1:] + verts[:-1]
            labels = labels[::-1]
        return LabeledPolygon(tuple(verts), tuple(labels), dict(self.meta))

    # ---------------------------------------------------------- file format

    def to_dict(self, sizes: Optional[dict] = None) -> dict:
        verts = []
        for v in self.vertices:
            if isinstance(v, IdealPoint):
                verts.append({"ideal": v.angle})
            else:
                verts.append({"disk": [v.z.real, v.z.imag]})
        out = {"vertices": verts, "labels": [lab.to_json() for lab in self.labels]}
        if sizes is not None:
            out["horocycle_sizes"] = [
                sizes[v] if isinstance(v, IdealPoint) else None for v in self.vertices
            ]
        if self.meta:
            out["meta"] = self.meta
        return out

    def to_json(self, sizes: Optional[dict] = None) -> str:
        return json.dumps(self.to_dict(sizes), indent=2) + "\n"


DOMAIN_KEYS = {"vertices", "labels", "horocycle_sizes", "meta"}


def polygon_from_dict(obj: dict) -> tuple:
    """Parse a domain description. Returns (polygon, sizes or None)."""
    if not isinstance(obj, dict):
        raise ValueError("domain description must be a JSON object")
    unknown = set(obj) - DOMAIN_KEYS
    if unknown:
        raise ValueError(f"unknown domain keys: {sorted(unknown)}")
    if "vertices" not in obj or "labels" not in obj:
        raise ValueError("domain description needs 'vertices' and 'labels'")
    verts = []
    for k, v in enumerate(obj["vertices"]):
        if not isinstance(v, dict) or len(v) != 1:
            raise ValueError(f"vertices[{k}] must be {{'ideal': angle}} or {{'disk': [x, y]}}")
        if "ideal" in v:
            verts.append(IdealPoint(float(v["ideal"])))
        elif "disk" in v:
            x, y = v["disk"]
            verts.append(DiskPoint(complex(float(x), float(y))))
        else:
            raise ValueError(f"vertices[{k}]: unknown vertex kind {list(v)}")
    labels = [EdgeLabel.from_json(lab) for lab in obj["labels"]]
    poly = LabeledPolygon(tuple(verts), tuple(labels), dict(obj.get("meta", {})))
    sizes = None
    if obj.get("horocycle_sizes") is not None:
        raw = obj["horocycle_sizes"]
        if len(raw) != len(verts):
            raise ValueError("horocycle_sizes must align with vertices")
        sizes = {}
        for v, s in zip(verts, raw):
            if isinstance(v, IdealPoint):
                if s is None:
                    raise ValueError("every ideal vertex needs a horocycle size")
                sizes[v] = float(s)
    return poly, sizes


def read_domain(path) -> tuple:
    return polygon_from_dict(json.loads(Path(path).read_text()))


def write_domain(path, poly: LabeledPolygon, sizes: Optional[dict] = None) -> None:
    Path(path).write_text(poly.to_json(sizes))


# ---------------------------------------------------------------- constructors


def ideal_scherk_polygon(angles: Sequence[float]) -> LabeledPolygon:
    """Ideal 2k-gon with +inf on edges (p1,p2), (p3,p4), ... and -inf on the rest."""
    angles = [float(a) for a in angles]
    m = len(angles)
    if m % 2 or m < 4:
        raise ValueError(f"need an even number >= 4 of ideal angles, got {m}")
    diffs = [canonical_angle(angles[(i + 1) % m] - angles[i]) for i in range(m)]
    if any(d <= 0.0 for d in diffs) or abs(sum(diffs) - 2 * math.pi) > 1e-9:
        raise ValueError("angles must be strictly cyclically increasing (one turn)")
    verts = tuple(IdealPoint(a) for a in angles)
    labels = tuple(PLUS_INF if i % 2 == 0 else MINUS_INF for i in range(m))
    return LabeledPolygon(verts, labels, {"construction": "scherk", "angles": angles})


def triangle_domain(theta: float) -> LabeledPolygon:
    """Triangle 0, 1, e^{i theta}: +inf on 0->1, -inf on 1->e^{i theta}, 0 on the last edge."""
    if not 0.0 < theta <= math.pi / 2:
        raise ValueError(f"theta must lie in (0, pi/2], got {theta!r}")
    verts = (DiskPoint(0j), IdealPoint(0.0), IdealPoint(theta))
    return LabeledPolygon(
        verts, (PLUS_INF, MINUS_INF, ZERO), {"construction": "triangle", "theta": theta}
    )


def _fan_polygon(first_angle: float, k: int, theta: float, meta: dict) -> LabeledPolygon:
    verts = [DiskPoint(0j), IdealPoint(first_angle)]
    verts += [IdealPoint((n - 1) * theta) for n in range(2, k + 2)]
    labels = [PLUS_INF]
    # edge p_j p_{j+1}: -inf for odd j, +inf for even j
    labels += [MINUS_INF if j % 2 == 1 else PLUS_INF for j in range(1, k + 1)]
    labels.append(ZERO)
    return LabeledPolygon(tuple(verts), tuple(labels), meta)


def omega_theta(k: int, theta: float) -> LabeledPolygon:
    """Domain with vertices 0, 1, e^{i theta}, ..., e^{i k theta} (fails Jenkins-Serrin)."""
    if int(k) != k or k < 2:
        raise ValueError(f"k must be an integer >= 2, got {k!r}")
    if not 0.0 < theta < math.pi / (2 * k):
        raise ValueError(f"theta must lie in (0, pi/(2k)), got {theta!r}")
    return _fan_polygon(0.0, int(k), theta, {"construction": "omega_theta", "k": int(k), "theta": theta})


def omega_theta_beta(k: int, theta: float, beta: float) -> LabeledPolygon:
    """Omega_theta with the first ideal vertex moved to e^{-i beta}."""
    if int(k) != k or k < 2:
        raise ValueError(f"k must be an integer >= 2, got {k!r}")
    if not 0.0 < theta < math.pi / (2 * k):
        raise ValueError(f"theta must lie in (0, pi/(2k)), got {theta!r}")
    if not 0.0 < beta <= math.pi / 2 - k * theta:
        raise ValueError(f"beta must lie in (0, pi/2 - k theta], got {beta!r}")
    return _fan_polygon(
        -beta,
        int(k),
        theta,
        {"construction": "omega_theta_beta", "k": int(k), "theta": theta, "beta": beta},
    )


def _reflect_vertex(v: Point, g: Geodesic, R: Isometry) -> Point:
    if isinstance(v, IdealPoint) and g.kind == "diameter":
        # exact angle arithmetic about the diameter direction
        ends = [e for e in (g.a, g.b) if isinstance(e, IdealPoint)]
        if ends:
            psi = ends[0].angle
        else:
            psi = math.atan2(g.direction.imag, g.direction.real)
        return IdealPoint(2.0 * psi - v.angle)
    if isinstance(v, DiskPoint) and v.z == 0 and g.kind == "diameter":
        return v
    return R(v)


def reflect_union(P: LabeledPolygon, g: Geodesic) -> LabeledPolygon:
    """P together with its mirror image across the geodesic carrying P's finite edge.

    The finite edge becomes interior.  Mirrored edges carry negated labels,
    which is the boundary data of the graph extended by the half-turn about
    the horizontal geodesic over g.
    """
    finite = [i for i, lab in enumerate(P.labels) if not lab.infinite]
    if len(finite) != 1:
        raise ValueError("reflect_union needs exactly one finite-labeled edge")
    e = finite[0]
    n = P.n
    a, b = P.vertices[e], P.vertices[(e + 1) % n]
    for v in (a, b):
        if g.distance_to(v.coords) > 1e-12:
            raise ValueError("geodesic does not contain the finite-labeled edge")
    # rotate so that the finite edge is the closing edge w_{m-1} -> w_0
    order = [(e + 1 + j) % n for j in range(n)]
    w = [P.vertices[i] for i in order]
    lab = [P.labels[i] for i in order]
    R = reflect_across(g)
    # all other vertices strictly on one side of g
    kg = to_klein(np.array([g.a.coords, g.b.coords]))
    side = []
    for v in w[1:-1]:
        kv = complex(to_klein(np.array([v.coords]))[0])
        d = kg[1] - kg[0]
        s = d.real * (kv - kg[0]).imag - d.imag * (kv - kg[0]).real
        side.append(s)
    if not (all(s > 1e-14 for s in side) or all(s < -1e-14 for s in side)):
        raise ValueError("polygon does not lie on one side of the geodesic (overlap)")
    mirrored = [_reflect_vertex(v, g, R) for v in w[1:-1]]
    verts = w + mirrored[::-1]
    labels = lab[:-1]
    labels += [lab[i].negated() for i in range(len(w) - 2, -1, -1)]
    meta = dict(P.meta)
    meta["reflected"] = True
    return LabeledPolygon(tuple(verts), tuple(labels), meta)


def twisted_union(k: int, theta: float, beta: float) -> LabeledPolygon:
    """Omega_{theta,beta} joined with its mirror image across 0 p_{k+1}."""
    P = omega_theta_beta(k, theta, beta)
    g = Geodesic(P.vertices[0], P.vertices[-1])
    return reflect_union(P, g)


# ---------------------------------------------------------------- verifier


@dataclass
class JSReport:
    verdict: str  # Satisfied, FailsEquality, FailsStrict
    witness: Optional[tuple]
    margins: list
    sizes: dict
    global_difference: Optional[float] = None
    tolerance: float = EQUALITY_TOL
    skipped: int = 0

    @property
    def min_margin(self) -> float:
        return min((m["slack"] for m in self.margins), default=math.inf)

    @property
    def witness_residual(self) -> Optional[float]:
        if self.witness is None:
            return None
        vals = [m["slack"] for m in self.margins if tuple(m["vertices"]) == tuple(self.witness)]
        if not vals:
            return self.global_difference
        return min(vals, key=abs)

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "witness": list(self.witness) if self.witness is not None else None,
            "witness_residual": self.witness_residual,
            "min_margin": self.min_margin if self.margins else None,
            "global_difference": self.global_difference,
            "tolerance": self.tolerance,
            "units": "hyperbolic length",
            "horocycle_sizes": [[v.angle, s] for v, s in sorted(self.sizes.items(), key=lambda t: t[0].angle)],
            "margins": self.margins,
            "trivially_satisfied": self.skipped,
        }


def default_horocycle_sizes(P: LabeledPolygon) -> dict:
    """Equal sizes: half the largest common Euclidean diameter keeping horodisks disjoint."""
    ideal = [P.vertices[i] for i in P.ideal_indices]
    s_min = 0.0
    for u, v in itertools.combinations(ideal, 2):
        # disjoint iff ideal_gap + 2 s > 0
        s_min = max(s_min, -0.5 * ideal_gap(u, v))
    d_max = 2.0 / (1.0 + math.exp(s_min))
    d = 0.5 * min(d_max, 1.0)
    s = math.log(2.0 / d - 1.0)
    return {v: s for v in ideal}


def _validate_sizes(P: LabeledPolygon, sizes: dict) -> None:
    ideal = [P.vertices[i] for i in P.ideal_indices]
    for v in ideal:
        if v not in sizes:
            raise ValueError(f"missing horocycle size for ideal vertex at angle {v.angle}")
        if not sizes[v] > 0:
            raise ValueError("horocycle sizes must be positive")
    for u, v in itertools.combinations(ideal, 2):
        if ideal_gap(u, v) + sizes[u] + sizes[v] <= 0.0:
            raise ValueError("horodisks overlap")
    for v in P.vertices:
        if isinstance(v, DiskPoint):
            for u in ideal:
                if truncated_distance(v, u, sizes) <= 0.0:
                    raise ValueError("a finite vertex lies inside a horodisk")


def js_check(P: LabeledPolygon, sizes: Optional[dict] = None, tol: float = EQUALITY_TOL) -> JSReport:
    """Jenkins-Serrin check over all inscribed polygons.

    For every inscribed polygon P' (vertex subset of size >= 3, chords inside
    P) and each sign, the slack |dP'| - 2 alpha(P') is recorded when it is
    independent of horocycle sizes, i.e. when each ideal vertex of P' meets
    exactly one edge of that sign.  Otherwise the slack grows without bound
    as horocycles shrink and the inequality holds for small horocycles.
    P itself is included when it has a finite-data edge; when all labels are
    infinite the global equality alpha(P) = beta(P) is required instead.
    """
    if P.n < 3:
        raise ValueError("degenerate polygon")
    if sizes is None:
        sizes = default_horocycle_sizes(P)
    _validate_sizes(P, sizes)
    n = P.n
    verts = P.vertices
    length_cache: dict = {}

    def seg(i, j):
        key = (i, j) if i < j else (j, i)
        if key not in length_cache:
            length_cache[key] = truncated_distance(verts[i], verts[j], sizes)
        return length_cache[key]

    margins = []
    skipped = 0
    for size in range(3, n + 1):
        for sub in itertools.combinations(range(n), size):
            if size == n and P.all_infinite:
                continue
            m = len(sub)
            if any(not P.chord_inside(sub[a], sub[(a + 1) % m]) for a in range(m)):
                continue
            perim = 0.0
            signed = {1: 0.0, -1: 0.0}
            edge_sign = []
            for a in range(m):
                i, j = sub[a], sub[(a + 1) % m]
                ell = seg(i, j)
                perim += ell
                sgn = P.labels[i].sign if (j - i) % n == 1 else 0
                edge_sign.append(sgn)
                if sgn:
                    signed[sgn] += ell
            for sgn in (1, -1):
                balanced = True
                for a in range(m):
                    if isinstance(verts[sub[a]], IdealPoint):
                        count = (edge_sign[a - 1] == sgn) + (edge_sign[a] == sgn)
                        if count != 1:
                            balanced = False
                            break
                if not balanced:
                    skipped += 1
                    continue
                margins.append(
                    {
                        "vertices": list(sub),
                        "sign": "+" if sgn > 0 else "-",
                        "slack": perim - 2.0 * signed[sgn],
                    }
                )

    global_diff = None
    if P.all_infinite:
        alpha = sum(seg(i, (i + 1) % n) for i in range(n) if P.labels[i].sign > 0)
        beta = sum(seg(i, (i + 1) % n) for i in range(n) if P.labels[i].sign < 0)
        global_diff = alpha - beta

    verdict, witness = "Satisfied", None
    strict = [m for m in margins if m["slack"] < -tol]
    equal = [m for m in margins if abs(m["slack"]) <= tol]
    if strict:
        worst = min(strict, key=lambda m: m["slack"])
        verdict, witness = "FailsStrict", tuple(worst["vertices"])
    elif equal:
        first = min(equal, key=lambda m: (len(m["vertices"]), m["vertices"]))
        verdict, witness = "FailsEquality", tuple(first["vertices"])
    elif global_diff is not None and abs(global_diff) > tol:
        verdict, witness = "FailsEquality", tuple(range(n))
    return JSReport(verdict, witness, margins, dict(sizes), global_diff, tol, skipped)
