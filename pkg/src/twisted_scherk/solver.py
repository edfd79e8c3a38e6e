"""Minimal graphs in H^2 x R by minimising the discrete area functional.

For a graph t = u(z) over a disk-coordinate mesh the area is

    A(u) = int lambda^2 sqrt(1 + |grad u|^2 / lambda^2) dx dy,  lambda = 2 / (1 - |z|^2),

with piecewise-linear u.  The functional is strictly convex in the free
nodal values and is minimised by damped Newton with Armijo backtracking.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from matplotlib.tri import LinearTriInterpolator, Triangulation
from scipy.spatial import cKDTree

from .domains import EdgeLabel, LabeledPolygon, js_check
from .hyperbolic import conformal_factor
from .mesher import TriMesh2D, triangulate, truncate

log = logging.getLogger(__name__)

NEWTON_TOL = 1e-10
ARMIJO = 1e-4
BACKTRACK = 0.5


class SolverError(RuntimeError):
    """Newton failed to reach the requested residual."""

    def __init__(self, message: str, residual: float, step: Optional[int] = None):
        super().__init__(message)
        self.residual = residual
        self.step = step


class AreaFunctional:
    """Precomputed element data for the graph-area functional on one mesh."""

    def __init__(self, mesh: TriMesh2D):
        self.mesh = mesh
        t = mesh.triangles
        z = mesh.nodes[t]
        x, y = z.real, z.imag
        det = (x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0])
        self.area = 0.5 * det
        # basis gradients (M, 3, 2)
        G = np.empty((len(t), 3, 2))
        G[:, 0, 0] = y[:, 1] - y[:, 2]
        G[:, 1, 0] = y[:, 2] - y[:, 0]
        G[:, 2, 0] = y[:, 0] - y[:, 1]
        G[:, 0, 1] = x[:, 2] - x[:, 1]
        G[:, 1, 1] = x[:, 0] - x[:, 2]
        G[:, 2, 1] = x[:, 1] - x[:, 0]
        self.G = G / det[:, None, None]
        # edge-midpoint quadrature of the conformal weight
        mids = 0.5 * (z + np.roll(z, -1, axis=1))
        lam2 = conformal_factor(mids) ** 2
        self.lam2 = lam2  # (M, 3)
        self.w = 1.0 / lam2
        rows = np.repeat(t, 3, axis=1)
        cols = np.tile(t, (1, 3))
        self._rows = rows.ravel()
        self._cols = cols.ravel()
        # gradient size of a unit-slope function: floor for the residual scale
        self.unit_scale = np.bincount(t.ravel(), weights=(self.area[:, None] * np.linalg.norm(self.G, axis=2)).ravel(),
                                      minlength=mesh.n_nodes)

    def grad_u(self, u: np.ndarray) -> np.ndarray:
        return np.einsum("mi,mik->mk", u[self.mesh.triangles], self.G)

    def value(self, u: np.ndarray) -> float:
        g2 = np.sum(self.grad_u(u) ** 2, axis=1)
        W = np.sqrt(1.0 + self.w * g2[:, None])
        return float(np.sum(self.area * np.mean(self.lam2 * W, axis=1)))

    def _coefficients(self, u):
        g = self.grad_u(u)
        g2 = np.sum(g * g, axis=1)
        W = np.sqrt(1.0 + self.w * g2[:, None])
        c = np.mean(1.0 / W, axis=1)
        d = np.mean(self.w / W**3, axis=1)
        return g, c, d

    def gradient(self, u: np.ndarray, with_scale: bool = False):
        g, c, _ = self._coefficients(u)
        Gg = np.einsum("mik,mk->mi", self.G, g)  # grad(phi_i) . g
        contrib = (self.area * c)[:, None] * Gg
        n = self.mesh.n_nodes
        t = self.mesh.triangles.ravel()
        grad = np.bincount(t, weights=contrib.ravel(), minlength=n)
        if not with_scale:
            return grad
        scale = np.bincount(t, weights=np.abs(contrib).ravel(), minlength=n) + self.unit_scale
        return grad, scale

    def hessian(self, u: np.ndarray) -> sp.csr_matrix:
        g, c, d = self._coefficients(u)
        Gg = np.einsum("mik,mk->mi", self.G, g)
        K = c[:, None, None] * np.einsum("mik,mjk->mij", self.G, self.G)
        K -= d[:, None, None] * Gg[:, :, None] * Gg[:, None, :]
        K *= self.area[:, None, None]
        n = self.mesh.n_nodes
        return sp.csr_matrix((K.ravel(), (self._rows, self._cols)), shape=(n, n))


def area(mesh: TriMesh2D, u) -> float:
    """Hyperbolic area of the graph of the piecewise-linear u."""
    return AreaFunctional(mesh).value(np.asarray(u, dtype=float))


def boundary_values(mesh: TriMesh2D, labels: Sequence[EdgeLabel], cap: float) -> dict:
    """Dirichlet value per boundary node; corners take the mean of their two edges."""
    vals: dict = {}
    for (a, b), tag in zip(mesh.boundary_edges, mesh.boundary_tags):
        v = labels[tag].boundary_value(cap)
        vals[int(a)] = v
        vals[int(b)] = v
    n = len(labels)
    for i, cid in enumerate(mesh.corners):
        vals[int(cid)] = 0.5 * (labels[i - 1].boundary_value(cap) + labels[i].boundary_value(cap))
    return vals


def harmonic_extension(mesh: TriMesh2D, bnodes: np.ndarray, bvals: np.ndarray) -> np.ndarray:
    """Discrete Euclidean-harmonic interpolation of boundary data."""
    n = mesh.n_nodes
    f = AreaFunctional(mesh)
    K = np.einsum("mik,mjk->mij", f.G, f.G) * f.area[:, None, None]
    L = sp.csr_matrix((K.ravel(), (f._rows, f._cols)), shape=(n, n))
    u = np.zeros(n)
    u[bnodes] = bvals
    free = np.setdiff1d(np.arange(n), bnodes)
    if len(free):
        rhs = -L[free][:, bnodes] @ bvals
        u[free] = spla.spsolve(L[free][:, free].tocsc(), rhs)
    return u


@dataclass
class GraphSolution:
    mesh: TriMesh2D
    u: np.ndarray
    cap: float
    labels: tuple
    residual: float
    iterations: int
    area: float
    energies: list = field(default_factory=list)
    converged: bool = True
    tol: float = NEWTON_TOL

    @property
    def boundary_min(self) -> float:
        return float(self.u[self.mesh.boundary_nodes()].min())

    @property
    def boundary_max(self) -> float:
        return float(self.u[self.mesh.boundary_nodes()].max())

    def max_principle_violation(self) -> float:
        lo, hi = self.boundary_min, self.boundary_max
        return float(max(0.0, lo - self.u.min(), self.u.max() - hi))

    def energy_monotone(self) -> bool:
        e = np.asarray(self.energies)
        return bool(np.all(np.diff(e) <= 1e-12 * max(1.0, abs(e[0]))))


def newton_minimize(f: AreaFunctional, u0: np.ndarray, free: np.ndarray, tol: float = NEWTON_TOL,
                    max_iter: int = 200):
    """Damped Newton on the free nodes. Returns (u, residual, iterations, energies)."""
    u = u0.copy()
    E = f.value(u)
    energies = [E]
    res = math.inf
    for it in range(max_iter + 1):
        grad, scale = f.gradient(u, with_scale=True)
        gf = grad[free]
        ref = np.linalg.norm(scale[free])
        res = float(np.linalg.norm(gf) / ref) if ref > 0 else 0.0
        if res <= tol:
            return u, res, it, energies
        if it == max_iter:
            break
        H = f.hessian(u)[free][:, free].tocsc()
        p = spla.spsolve(H, -gf)
        slope = float(gf @ p)
        if not slope < 0:
            p = -gf
            slope = float(gf @ p)
        alpha = 1.0
        while True:
            trial = u.copy()
            trial[free] += alpha * p
            Et = f.value(trial)
            if Et <= E + ARMIJO * alpha * slope:
                break
            alpha *= BACKTRACK
            if alpha < 1e-14:
                # round-off floor: no decrease available along p
                if res <= 1e3 * tol:
                    return u, res, it, energies
                raise SolverError(f"line search failed at residual {res:.3e}", res)
        u = trial
        E = Et
        energies.append(E)
    raise SolverError(f"Newton did not converge in {max_iter} iterations (residual {res:.3e})", res)


def solve_dirichlet(mesh: TriMesh2D, labels: Sequence[EdgeLabel], cap: float, u0: Optional[np.ndarray] = None,
                    tol: float = NEWTON_TOL, max_iter: int = 200) -> GraphSolution:
    """Discrete minimal graph with boundary data from ``labels`` (+-inf replaced by +-cap)."""
    labels = tuple(labels)
    for lab in labels:
        if not lab.infinite and abs(lab.value) > cap:
            raise ValueError("finite boundary data must be bounded by the cap")
    bv = boundary_values(mesh, labels, cap)
    bnodes = np.array(sorted(bv), dtype=int)
    bvals = np.array([bv[i] for i in bnodes])
    free = np.setdiff1d(np.arange(mesh.n_nodes), bnodes)
    if u0 is None:
        u0 = harmonic_extension(mesh, bnodes, bvals)
    else:
        u0 = np.array(u0, dtype=float)
        u0[bnodes] = bvals
    f = AreaFunctional(mesh)
    u, res, its, energies = newton_minimize(f, u0, free, tol, max_iter)
    return GraphSolution(mesh, u, float(cap), labels, res, its, f.value(u), energies, True, tol)


def interpolate(mesh: TriMesh2D, u: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Piecewise-linear evaluation; points outside the mesh take the nearest nodal value."""
    points = np.asarray(points, dtype=complex)
    tri = Triangulation(mesh.nodes.real, mesh.nodes.imag, mesh.triangles)
    vals = LinearTriInterpolator(tri, u)(points.real, points.imag)
    out = np.ma.filled(vals.astype(float), np.nan)
    miss = np.isnan(out)
    if np.any(miss):
        tree = cKDTree(np.column_stack([mesh.nodes.real, mesh.nodes.imag]))
        _, idx = tree.query(np.column_stack([points[miss].real, points[miss].imag]))
        out[miss] = u[idx]
    return out


# ---------------------------------------------------------------- exhaustion


@dataclass(frozen=True)
class Step:
    r: float
    n: float
    h: float


def paper_schedule(steps: int, h0: float = 0.1) -> list:
    """n_j = 2^j, r_j = 1 - 1/(n_j + 1), h halved each step."""
    if steps < 1:
        raise ValueError("schedule needs at least one step")
    out = []
    for j in range(1, steps + 1):
        n = float(2**j)
        out.append(Step(1.0 - 1.0 / (n + 1.0), n, h0 / 2 ** (j - 1)))
    return out


def validate_schedule(schedule: Sequence[Step]) -> None:
    for a, b in zip(schedule, schedule[1:]):
        if not (b.r > a.r and b.n > a.n and b.h < a.h):
            raise ValueError("schedule must be strictly monotone: r up, n up, h down")
    for s in schedule:
        if not (0.0 < s.r < 1.0 and s.n > 0 and s.h > 0):
            raise ValueError(f"invalid schedule step {s}")


@dataclass
class ExhaustionRun:
    polygon: LabeledPolygon
    schedule: list
    solutions: list = field(default_factory=list)
    records: list = field(default_factory=list)
    probe_points: Optional[np.ndarray] = None
    probe_diffs: list = field(default_factory=list)
    grading: float = 8.0

    @property
    def curvature_trace(self) -> list:
        return [rec["total_curvature"] for rec in self.records]

    @property
    def final(self) -> GraphSolution:
        return self.solutions[-1]


def _probe_points(mesh: TriMesh2D, count: int = 64) -> np.ndarray:
    """Interior nodes of the first mesh, well away from its boundary."""
    bz = mesh.nodes[mesh.boundary_nodes()]
    inner = np.setdiff1d(np.arange(mesh.n_nodes), mesh.boundary_nodes())
    z = mesh.nodes[inner]
    tree = cKDTree(np.column_stack([bz.real, bz.imag]))
    d, _ = tree.query(np.column_stack([z.real, z.imag]))
    keep = z[d >= 0.25 * d.max()]
    if len(keep) > count:
        keep = keep[np.linspace(0, len(keep) - 1, count).astype(int)]
    return keep


def exhaustion_solve(P: LabeledPolygon, schedule: Sequence[Step], grading: float = 8.0, tol: float = NEWTON_TOL,
                     keep_solutions: bool = True, max_iter: int = 200) -> ExhaustionRun:
    """Solve on the schedule's truncations, warm-starting each step from the last."""
    from .diagnostics import gauss_curvature, harmonicity_residual
    from .surface import lift

    schedule = list(schedule)
    validate_schedule(schedule)
    if js_check(P).verdict != "Satisfied":
        warnings.warn("domain does not satisfy the Jenkins-Serrin condition; no convergence is expected")
    run = ExhaustionRun(P, schedule, grading=grading)
    prev: Optional[GraphSolution] = None
    prev_probe = None
    for j, step in enumerate(schedule):
        mesh = triangulate(truncate(P, step.r), step.h, grading)
        u0 = None
        if prev is not None:
            u0 = interpolate(prev.mesh, prev.u, mesh.nodes) * (step.n / prev.cap)
        try:
            sol = solve_dirichlet(mesh, P.labels, step.n, u0=u0, tol=tol, max_iter=max_iter)
        except SolverError as exc:
            exc.step = j
            raise
        S = lift(sol)
        curv = gauss_curvature(S)
        if run.probe_points is None:
            run.probe_points = _probe_points(mesh)
        probe = interpolate(mesh, sol.u, run.probe_points)
        if prev_probe is not None:
            d = probe - prev_probe
            if P.all_infinite:
                # the limit is only determined up to an additive constant
                d = d - np.median(d)
            run.probe_diffs.append(float(np.max(np.abs(d))))
        prev_probe = probe
        rec = {
            "step": j,
            "r": step.r,
            "n": step.n,
            "h": step.h,
            "grading": grading,
            "nodes": mesh.n_nodes,
            "triangles": mesh.n_triangles,
            "newton_residual": sol.residual,
            "newton_tol": tol,
            "newton_iterations": sol.iterations,
            "area": sol.area,
            "total_curvature": curv.total,
            "harmonicity_residual": harmonicity_residual(S),
            "max_principle_violation": sol.max_principle_violation(),
        }
        run.records.append(rec)
        log.info("step %d r=%.4f n=%g h=%.4g: %d triangles, %d Newton its, int K = %.6f",
                 j, step.r, step.n, step.h, mesh.n_triangles, sol.iterations, curv.total)
        if keep_solutions or j == len(schedule) - 1:
            run.solutions.append(sol)
        prev = sol
    return run
