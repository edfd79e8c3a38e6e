import math

import numpy as np
import pytest

from twisted_scherk.domains import ZERO, EdgeLabel, LabeledPolygon, ideal_scherk_polygon, triangle_domain
from twisted_scherk.hyperbolic import DiskPoint, Geodesic, IdealPoint, dist_array
from twisted_scherk.mesher import mesh_polygon
from twisted_scherk.solver import solve_dirichlet
from twisted_scherk.surface import (
    EndData,
    SurfaceMesh,
    count_ends,
    euler_factor,
    euler_total_curvature,
    horizontal_rotation_map,
    level_curves,
    lift,
    lift_heights,
    read_obj,
    rotate_pi_horizontal,
    rotate_pi_vertical,
    self_intersections,
    surface_audit,
    vertical_rotation_map,
    write_obj,
    write_ply,
)

SQUARE = ideal_scherk_polygon((0.0, math.pi / 2, math.pi, 3 * math.pi / 2))


@pytest.fixture(scope="module")
def delta_piece():
    P = triangle_domain(math.pi / 2)
    m = mesh_polygon(P, 0.8, 0.08, 4.0)
    return P, lift(solve_dirichlet(m, P.labels, cap=3.0))


def test_lift_finite_data_has_no_walls():
    P = LabeledPolygon((DiskPoint(0j), DiskPoint(0.6 + 0j), DiskPoint(0.6j)),
                       (ZERO, EdgeLabel.finite(1.0), ZERO))
    m = mesh_polygon(P, 0.9, 0.1, 1.0)
    sol = solve_dirichlet(m, P.labels, cap=2.0)
    S = lift(sol)
    # corners at the ends of the unit edge jump, so they become columns
    assert set(S.walls) == {"corner1", "corner2"}
    assert S.euler_characteristic() == 1
    assert S.conformity_errors() == []


def test_lift_walls_span_the_jump(delta_piece):
    _, S = delta_piece
    # corner 1 joins +cap to -cap
    col = S.walls["corner1"]
    assert S.t[col].max() == pytest.approx(3.0) and S.t[col].min() == pytest.approx(-3.0)
    assert np.ptp(S.z[col]) == 0
    assert S.euler_characteristic() == 1
    assert S.conformity_errors() == []


def test_lift_heights_plain():
    m = mesh_polygon(SQUARE, 0.7, 0.2, 1.0)
    S = lift_heights(m, np.full(m.n_nodes, 2.0))
    assert S.n_vertices == m.n_nodes and np.all(S.t == 2.0)
    assert S.walls == {}


@pytest.mark.parametrize("which", ["horizontal", "vertical"])
def test_rotations_are_isometric_involutions(which):
    rng = np.random.default_rng(0)
    z = 0.9 * np.sqrt(rng.random(50)) * np.exp(2j * np.pi * rng.random(50))
    t = rng.normal(size=50)
    f = horizontal_rotation_map(Geodesic(IdealPoint(0.3), IdealPoint(2.5))) if which == "horizontal" \
        else vertical_rotation_map(0.3 + 0.2j)
    z1, t1 = f(z, t)
    z2, t2 = f(z1, t1)
    assert np.allclose(z2, z) and np.allclose(t2, t)
    d0 = np.hypot(dist_array(z[:-1], z[1:]), np.diff(t))
    d1 = np.hypot(dist_array(z1[:-1], z1[1:]), np.diff(t1))
    assert np.allclose(d0, d1, atol=1e-9)


def test_rotation_glues_along_seam(delta_piece):
    P, S = delta_piece
    g = P.edge(P.n - 1)
    D = rotate_pi_horizontal(S, g)
    seam = D.seams["horizontal0"]
    assert D.n_vertices == 2 * S.n_vertices - len(seam)
    assert D.n_copies == 2
    assert D.euler_characteristic() == 1
    assert D.conformity_errors() == []
    Q = rotate_pi_vertical(D, 0j)
    assert Q.n_copies == 4
    assert Q.n_vertices == 2 * D.n_vertices - len(Q.seams["vertical1"])
    audit = surface_audit(Q, check_embedding=False)
    assert audit["disk"] and audit["components"] == 1


def test_seam_errors(delta_piece):
    P, S = delta_piece
    with pytest.raises(ValueError, match="seam"):
        rotate_pi_vertical(S, 0.3 + 0.3j)
    with pytest.raises(ValueError, match="seam"):
        rotate_pi_horizontal(S, Geodesic(IdealPoint(2.0), IdealPoint(4.0)))
    with pytest.raises(ValueError, match="seam"):
        rotate_pi_vertical(S, 0j, seam=[int(np.argmax(np.abs(S.z)))])


def test_sigma1_structure(sigma1):
    asm, _ = sigma1
    S = asm.surface
    piece = asm.piece
    s1, s2 = (len(v) for v in S.seams.values())
    assert S.n_vertices == 2 * (2 * piece.n_vertices - s1) - s2
    assert S.n_copies == 4
    audit = surface_audit(S)
    assert audit["disk"]
    assert audit["self_intersections"] == 0


def test_end_data_formula():
    assert euler_total_curvature(EndData(0, 1, (2,))) == -4 * math.pi
    assert euler_factor(EndData(0, 1, (4,))) == -4
    assert EndData(1, 2, (0, 1)).to_dict() == {"g": 1, "n": 2, "m": [0, 1]}
    for k in range(1, 6):
        assert euler_total_curvature(EndData(0, 1, (2 * k,))) == -4 * k * math.pi
    for bad in ((-1, 1, (0,)), (0, 0, ()), (0, 1, (0, 1)), (0, 1, (-1,)), (0, 1, (1.5,))):
        with pytest.raises(ValueError):
            EndData(*bad)


def test_flat_slice_has_no_level_curves():
    m = mesh_polygon(SQUARE, 0.8, 0.1, 1.0)
    S = lift_heights(m, np.zeros(m.n_nodes))
    assert level_curves(S, 1.0)["segments"] == 0
    assert count_ends(S, 1.0) is None
    with pytest.raises(ValueError):
        count_ends(S, 0.0)


def test_level_curves_on_tilted_plane():
    m = mesh_polygon(SQUARE, 0.8, 0.1, 1.0)
    S = lift_heights(m, m.nodes.real)
    lc = level_curves(S, 0.1)
    assert lc["divergent"] == 1 and lc["closed"] == 0 and lc["dangling"] == 0


def test_count_ends_mismatch():
    m = mesh_polygon(SQUARE, 0.8, 0.1, 1.0)
    S = lift_heights(m, np.abs(m.nodes.real))
    with pytest.raises(ValueError, match="probe height"):
        count_ends(S, 0.2)


def test_sigma_ends(sigma1, sigma2):
    for (asm, _), k in ((sigma1, 1), (sigma2, 2)):
        cap = asm.run.final.cap
        for frac in (0.25, 0.5):
            assert count_ends(asm.surface, frac * cap) == EndData(0, 1, (2 * k,))


def test_self_intersection_detected():
    z = np.array([-0.3, 0.3, 0.3j, -0.1 - 0.1j, 0.1 - 0.1j, 0.2j])
    t = np.array([0.0, 0.0, 0.0, -1.0, -1.0, 1.0])
    S = SurfaceMesh(z, t, np.array([[0, 1, 2], [3, 4, 5]]), np.zeros(6, dtype=int))
    assert self_intersections(S) > 0
    T = SurfaceMesh(z, t + np.array([0, 0, 0, 5, 5, 5]), np.array([[0, 1, 2], [3, 4, 5]]), np.zeros(6, dtype=int))
    assert self_intersections(T) == 0


def test_surface_validation():
    with pytest.raises(ValueError):
        SurfaceMesh(np.array([0.0, 1.0]), np.zeros(2), np.zeros((0, 3)), np.zeros(2, dtype=int))
    with pytest.raises(ValueError):
        SurfaceMesh(np.array([0.0]), np.zeros(2), np.zeros((0, 3)), np.zeros(1, dtype=int))


def test_obj_ply_roundtrip(tmp_path, delta_piece):
    _, S = delta_piece
    write_obj(S, tmp_path / "s.obj")
    v, f = read_obj(tmp_path / "s.obj")
    assert np.allclose(v, S.xyz(), atol=1e-11)
    assert np.array_equal(f, S.triangles)
    write_ply(S, tmp_path / "s.ply")
    text = (tmp_path / "s.ply").read_text().splitlines()
    assert f"element vertex {S.n_vertices}" in text
    assert f"element face {S.n_triangles}" in text
    n3 = [float(line.split()[4]) for line in text[text.index("end_header") + 1:][:S.n_vertices]]
    assert all(-1 - 1e-12 <= x <= 1 + 1e-12 for x in n3)


def test_scherk_graph_has_one_end_of_degree_one(scherk_run):
    run, _ = scherk_run
    S = lift(run.final)
    assert count_ends(S, 0.5 * run.final.cap) == EndData(0, 1, (1,))
    assert euler_total_curvature(count_ends(S, 0.5 * run.final.cap)) == -2 * math.pi
