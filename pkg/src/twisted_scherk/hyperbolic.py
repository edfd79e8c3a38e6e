"""Poincare-disk primitives: points, geodesics, horocycles and isometries.

The hyperbolic plane is the open unit disk with metric 4|dz|^2 / (1 - |z|^2)^2.
Ideal points are stored by angle.  Horocycles use a Busemann size parameter
``s`` normalised so that the horocycle through the origin has ``s = 0``;
larger ``s`` means a smaller horocycle.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Union

import numpy as np

TWO_PI = 2.0 * math.pi

# endpoints closer than this to a line through the origin give a diameter
COLLINEAR_TOL = 1e-12


def canonical_angle(angle: float) -> float:
    a = math.fmod(float(angle), TWO_PI)
    if a < 0.0:
        a += TWO_PI
    if a >= TWO_PI:
        a = 0.0
    return a


@dataclass(frozen=True)
class DiskPoint:
    z: complex

    def __post_init__(self) -> None:
        z = complex(self.z)
        if not abs(z) < 1.0:
            raise ValueError(f"DiskPoint requires |z| < 1, got |z| = {abs(z)!r}")
        object.__setattr__(self, "z", z)

    @property
    def coords(self) -> complex:
        return self.z


@dataclass(frozen=True)
class IdealPoint:
    angle: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "angle", canonical_angle(self.angle))

    @property
    def coords(self) -> complex:
        return complex(math.cos(self.angle), math.sin(self.angle))


Point = Union[DiskPoint, IdealPoint]


def as_point(p) -> Point:
    """Coerce a complex number (|z| < 1) or an existing point."""
    if isinstance(p, (DiskPoint, IdealPoint)):
        return p
    return DiskPoint(complex(p))


# ---------------------------------------------------------------- distances


def dist(p, q) -> float:
    """Hyperbolic distance between two points strictly inside the disk."""
    if isinstance(p, IdealPoint) or isinstance(q, IdealPoint):
        raise ValueError("distance to an ideal point is infinite")
    zp = as_point(p).z
    zq = as_point(q).z
    return float(dist_array(np.asarray(zp), np.asarray(zq)))


def dist_array(zp: np.ndarray, zq: np.ndarray) -> np.ndarray:
    """Vectorised hyperbolic distance for complex arrays of disk points.

    Uses ``2 atanh(x)`` for short distances and a log form otherwise, which
    keeps full relative accuracy for tiny edges and points near the rim.
    """
    zp = np.asarray(zp, dtype=complex)
    zq = np.asarray(zq, dtype=complex)
    num = np.abs(zp - zq)
    den = np.abs(1.0 - np.conj(zp) * zq)
    x = num / den
    short = 2.0 * np.arctanh(np.minimum(x, 0.5))
    wp = (1.0 - np.abs(zp)) * (1.0 + np.abs(zp))
    wq = (1.0 - np.abs(zq)) * (1.0 + np.abs(zq))
    long_ = 2.0 * np.log(num + den) - np.log(wp) - np.log(wq)
    return np.where(x < 0.5, short, long_)


def conformal_factor(z) -> np.ndarray:
    """lambda(z) = 2 / (1 - |z|^2)."""
    a = np.abs(z)
    return 2.0 / ((1.0 - a) * (1.0 + a))


# ---------------------------------------------------------------- horocycles


@dataclass(frozen=True)
class Horocycle:
    """Horocycle {B_base = -s} at ``base``.

    s > 0 gives the horocycles that leave the origin outside (Euclidean
    diameter below 1); isometric images may have any real s.
    """

    base: IdealPoint
    s: float

    def __post_init__(self) -> None:
        if not isinstance(self.base, IdealPoint):
            object.__setattr__(self, "base", IdealPoint(float(self.base)))
        s = float(self.s)
        if not math.isfinite(s):
            raise ValueError(f"horocycle size must be finite, got s = {s!r}")
        object.__setattr__(self, "s", s)

    @classmethod
    def from_diameter(cls, base, d: float) -> "Horocycle":
        if not 0.0 < d < 2.0:
            raise ValueError(f"Euclidean diameter must lie in (0, 2), got {d!r}")
        return cls(base, math.log(2.0 / d - 1.0))

    @property
    def diameter(self) -> float:
        return 2.0 / (1.0 + math.exp(self.s))

    @property
    def center(self) -> complex:
        return (1.0 - self.diameter / 2.0) * self.base.coords

    @property
    def radius(self) -> float:
        return self.diameter / 2.0

    def busemann(self, z):
        return busemann(self.base, z)

    def contains(self, z) -> bool:
        """True when z lies in the open horodisk."""
        return bool(self.busemann(z) < -self.s)

    def point_at(self, phi: float) -> complex:
        """Point of the horocycle circle at Euclidean angle phi about its center."""
        return self.center + self.radius * cmath.exp(1j * phi)

    def resized(self, delta: float) -> "Horocycle":
        return Horocycle(self.base, self.s + delta)


def busemann(xi: IdealPoint, z):
    """Busemann function of ``xi`` normalised to vanish at the origin."""
    w = xi.coords
    z = np.asarray(z, dtype=complex)
    a = np.abs(z)
    return np.log(np.abs(w - z) ** 2 / ((1.0 - a) * (1.0 + a)))


def dist_point_horocycle(p, H: Horocycle) -> float:
    """Distance from a point outside the closed horodisk to the horocycle."""
    z = as_point(p).z
    b = float(H.busemann(z))
    if b < -H.s:
        raise ValueError("point lies inside horodisk")
    return b + H.s


def ideal_gap(a: IdealPoint, b: IdealPoint) -> float:
    """2 log(|xi_a - xi_b| / 2): truncated length between the s = 0 horocycles."""
    half = 0.5 * (a.angle - b.angle)
    return 2.0 * math.log(abs(math.sin(half)))


# ---------------------------------------------------------------- geodesics


class Geodesic:
    """Geodesic through two distinct points of the closed disk.

    Stored either as a diameter (line through the origin) or as the circle
    orthogonal to the unit circle, chosen automatically from the endpoints.
    """

    __slots__ = ("a", "b", "kind", "center", "radius", "direction")

    def __init__(self, a: Point, b: Point):
        a = as_point(a)
        b = as_point(b)
        if a == b:
            raise ValueError("geodesic endpoints must be distinct")
        za, zb = a.coords, b.coords
        if abs(za - zb) == 0.0:
            raise ValueError("geodesic endpoints must be distinct")
        self.a, self.b = a, b
        cross = za.real * zb.imag - za.imag * zb.real
        scale = max(abs(za), abs(zb))
        if abs(cross) <= COLLINEAR_TOL * scale * scale or abs(za) == 0.0 or abs(zb) == 0.0:
            self.kind = "diameter"
            far = za if abs(za) >= abs(zb) else zb
            if abs(far) == 0.0:
                raise ValueError("geodesic endpoints must be distinct")
            # canonical direction independent of endpoint order
            d = far / abs(far)
            if d.real < 0.0 or (d.real == 0.0 and d.imag < 0.0):
                d = -d
            self.direction = d
            self.center = None
            self.radius = math.inf
        else:
            self.kind = "arc"
            ka = 0.5 * (1.0 + abs(za) ** 2)
            kb = 0.5 * (1.0 + abs(zb) ** 2)
            det = za.real * zb.imag - za.imag * zb.real
            cx = (ka * zb.imag - kb * za.imag) / det
            cy = (za.real * kb - zb.real * ka) / det
            c = complex(cx, cy)
            self.center = c
            self.radius = math.sqrt(abs(c) ** 2 - 1.0)
            self.direction = None

    def __repr__(self) -> str:
        return f"Geodesic({self.a!r}, {self.b!r}, kind={self.kind!r})"

    @property
    def endpoints(self) -> tuple[Point, Point]:
        return self.a, self.b

    def distance_to(self, z) -> np.ndarray:
        """Euclidean distance of z from the supporting line/circle."""
        z = np.asarray(z, dtype=complex)
        if self.kind == "diameter":
            return np.abs((z * np.conj(self.direction)).imag)
        return np.abs(np.abs(z - self.center) - self.radius)

    def contains(self, z, tol: float = 1e-12) -> bool:
        return bool(np.all(self.distance_to(z) <= tol))

    def sample(self, ts) -> np.ndarray:
        """Points at Euclidean-parameter fractions ``ts`` in [0, 1] from a to b."""
        ts = np.asarray(ts, dtype=float)
        za, zb = self.a.coords, self.b.coords
        if self.kind == "diameter":
            return za + (zb - za) * ts
        c = self.center
        ta = cmath.phase(za - c)
        tb = cmath.phase(zb - c)
        dt = tb - ta
        # the arc inside the disk is the short one (< pi)
        if dt > math.pi:
            dt -= TWO_PI
        elif dt < -math.pi:
            dt += TWO_PI
        return c + self.radius * np.exp(1j * (ta + dt * ts))

    def euclidean_length(self) -> float:
        za, zb = self.a.coords, self.b.coords
        if self.kind == "diameter":
            return abs(zb - za)
        chord = abs(zb - za)
        return 2.0 * self.radius * math.asin(min(1.0, chord / (2.0 * self.radius)))

    def hyperbolic_length(self) -> float:
        if isinstance(self.a, IdealPoint) or isinstance(self.b, IdealPoint):
            return math.inf
        return dist(self.a, self.b)


def geodesic_between(p, q) -> Geodesic:
    return Geodesic(as_point(p), as_point(q))


# ---------------------------------------------------------------- isometries


@dataclass(frozen=True)
class Isometry:
    """z -> (a w + b) / (c w + d) with w = conj(z) when ``reflect`` is set."""

    a: complex
    b: complex
    c: complex
    d: complex
    reflect: bool = False

    @classmethod
    def identity(cls) -> "Isometry":
        return cls(1.0 + 0j, 0j, 0j, 1.0 + 0j, False)

    @classmethod
    def rotation(cls, angle: float) -> "Isometry":
        return cls(cmath.exp(1j * angle), 0j, 0j, 1.0 + 0j, False)

    @classmethod
    def translation(cls, p) -> "Isometry":
        """Direct isometry sending the origin to p."""
        p = complex(as_point(p).z)
        return cls(1.0 + 0j, p, p.conjugate(), 1.0 + 0j, False)

    @property
    def orientation(self) -> str:
        return "reflection" if self.reflect else "direct"

    def _mobius(self, w):
        return (self.a * w + self.b) / (self.c * w + self.d)

    def apply_complex(self, z):
        w = np.conj(z) if self.reflect else z
        return self._mobius(w)

    def __call__(self, p):
        if isinstance(p, DiskPoint):
            return DiskPoint(complex(self.apply_complex(p.z)))
        if isinstance(p, IdealPoint):
            w = complex(self.apply_complex(p.coords))
            return IdealPoint(math.atan2(w.imag, w.real))
        if isinstance(p, Horocycle):
            return self.apply_horocycle(p)
        if isinstance(p, Geodesic):
            return Geodesic(self(p.a), self(p.b))
        if isinstance(p, np.ndarray):
            return self.apply_complex(p.astype(complex))
        return complex(self.apply_complex(complex(p)))

    def apply_horocycle(self, H: Horocycle) -> Horocycle:
        # Busemann cocycle: s' = s + B_xi(phi^{-1}(0))
        pre0 = complex(self.inverse().apply_complex(0j))
        return Horocycle(self(H.base), H.s + float(H.busemann(pre0)))

    def compose(self, other: "Isometry") -> "Isometry":
        """self o other."""
        a2, b2, c2, d2 = other.a, other.b, other.c, other.d
        if self.reflect:
            a2, b2, c2, d2 = (a2.conjugate(), b2.conjugate(), c2.conjugate(), d2.conjugate())
        a = self.a * a2 + self.b * c2
        b = self.a * b2 + self.b * d2
        c = self.c * a2 + self.d * c2
        d = self.c * b2 + self.d * d2
        return Isometry(a, b, c, d, self.reflect != other.reflect)

    def __matmul__(self, other: "Isometry") -> "Isometry":
        return self.compose(other)

    def inverse(self) -> "Isometry":
        a, b, c, d = self.d, -self.b, -self.c, self.a
        if self.reflect:
            # (M o conj)^{-1} = conj o M^{-1} = conj(M^{-1}) o conj
            a, b, c, d = a.conjugate(), b.conjugate(), c.conjugate(), d.conjugate()
        return Isometry(a, b, c, d, self.reflect)


def reflect_across(g: Geodesic) -> Isometry:
    """Orientation-reversing involution fixing g pointwise."""
    if g.kind == "diameter":
        u = g.direction
        return Isometry(u * u, 0j, 0j, 1.0 + 0j, True)
    c = g.center
    return Isometry(c, -1.0 + 0j, 1.0 + 0j, -c.conjugate(), True)


def point_rotation_pi(c) -> Isometry:
    """Rotation by pi about the point c."""
    c = complex(as_point(c).z)
    if c == 0:
        return Isometry(-1.0 + 0j, 0j, 0j, 1.0 + 0j, False)
    t = Isometry.translation(c)
    return t @ Isometry(-1.0 + 0j, 0j, 0j, 1.0 + 0j, False) @ t.inverse()


def truncated_length(g: Geodesic, Ha: Horocycle, Hb: Horocycle) -> float:
    """Length of the ideal geodesic g outside the horodisks of Ha and Hb."""
    if not (isinstance(g.a, IdealPoint) and isinstance(g.b, IdealPoint)):
        raise ValueError("truncated_length needs a geodesic with two ideal endpoints")
    ends = {g.a, g.b}
    if Ha.base not in ends or Hb.base not in ends or Ha.base == Hb.base:
        raise ValueError("horocycles must be based at the two endpoints of the geodesic")
    length = ideal_gap(Ha.base, Hb.base) + Ha.s + Hb.s
    if length <= 0.0:
        raise ValueError("horodisks overlap")
    return length


def truncated_distance(p: Point, q: Point, sizes: dict) -> float:
    """Signed length of the geodesic pq outside the horocycles at its ideal ends.

    ``sizes`` maps IdealPoint -> Busemann size.  Finite endpoints are used
    as is.  The result may be negative when horodisks overlap.
    """
    if isinstance(p, IdealPoint) and isinstance(q, IdealPoint):
        return ideal_gap(p, q) + sizes[p] + sizes[q]
    if isinstance(p, IdealPoint):
        p, q = q, p
    if isinstance(q, IdealPoint):
        return float(busemann(q, p.z)) + sizes[q]
    return dist(p, q)


def to_klein(z):
    """Klein-model coordinates, in which geodesics are straight chords."""
    z = np.asarray(z, dtype=complex)
    return 2.0 * z / (1.0 + np.abs(z) ** 2)


def from_klein(k):
    k = np.asarray(k, dtype=complex)
    a2 = np.abs(k) ** 2
    return k / (1.0 + np.sqrt(np.maximum(0.0, 1.0 - a2)))
