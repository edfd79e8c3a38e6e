"""Minimal graphs and twisted Scherk surfaces in H^2 x R."""

from .domains import (
    EdgeLabel,
    JSReport,
    LabeledPolygon,
    ideal_scherk_polygon,
    js_check,
    omega_theta,
    omega_theta_beta,
    reflect_union,
    triangle_domain,
    twisted_union,
)
from .hyperbolic import DiskPoint, Geodesic, Horocycle, IdealPoint, Isometry, dist, geodesic_between
from .solver import exhaustion_solve, paper_schedule, solve_dirichlet
from .surface import EndData, assemble_twisted, count_ends, euler_total_curvature, lift

__version__ = "0.1.0"
