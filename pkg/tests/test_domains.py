import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from twisted_scherk.domains import (
    MINUS_INF,
    PLUS_INF,
    ZERO,
    EdgeLabel,
    LabeledPolygon,
    default_horocycle_sizes,
    ideal_scherk_polygon,
    js_check,
    omega_theta,
    omega_theta_beta,
    polygon_from_dict,
    read_domain,
    reflect_union,
    triangle_domain,
    twisted_union,
    write_domain,
)
from twisted_scherk.hyperbolic import DiskPoint, Geodesic, Horocycle, IdealPoint, Isometry, reflect_across

SQUARE = (0.0, math.pi / 2, math.pi, 3 * math.pi / 2)


def _arcs_cross(P):
    """Dense sampling check for non-adjacent edges touching."""
    samples = [P.edge(i).sample(np.linspace(0.0, 1.0, 400)) for i in range(P.n)]
    for i, j in itertools.combinations(range(P.n), 2):
        if (j - i) % P.n in (1, P.n - 1):
            continue
        a, b = samples[i], samples[j]
        d = np.abs(a[:, None] - b[None, :])
        if d.min() < 1e-6:
            return True
    return False


def random_resize(rng, sizes):
    return {v: s + rng.uniform(0.0, 2.0) for v, s in sizes.items()}


def test_labels():
    assert EdgeLabel.finite(2.5).boundary_value(10) == 2.5
    assert PLUS_INF.boundary_value(7) == 7 and MINUS_INF.boundary_value(7) == -7
    assert PLUS_INF.negated() == MINUS_INF and ZERO.negated() == ZERO
    for lab in (PLUS_INF, MINUS_INF, EdgeLabel.finite(-1.25)):
        assert EdgeLabel.from_json(lab.to_json()) == lab
    with pytest.raises(ValueError):
        EdgeLabel.finite(math.nan)


def test_scherk_square():
    P = ideal_scherk_polygon(SQUARE)
    assert P.labels == (PLUS_INF, MINUS_INF, PLUS_INF, MINUS_INF)
    rep = js_check(P)
    assert rep.verdict == "Satisfied"
    assert rep.global_difference == pytest.approx(0.0, abs=1e-12)


def test_scherk_hexagon_and_skew():
    H = ideal_scherk_polygon([2 * math.pi * i / 6 for i in range(6)])
    assert [lab.sign for lab in H.labels] == [1, -1, 1, -1, 1, -1]
    Q = ideal_scherk_polygon([0.0, 0.1, math.pi, math.pi + 0.1])
    assert not _arcs_cross(Q)


@pytest.mark.parametrize("angles", [(0.0, 1.0, 2.0), (0.0, 2.0, 1.0, 3.0), (0.0, 1.0, 1.0, 3.0)])
def test_scherk_rejects_bad_angles(angles):
    with pytest.raises(ValueError):
        ideal_scherk_polygon(angles)


def test_polygon_invariants():
    with pytest.raises(ValueError):
        LabeledPolygon((IdealPoint(0.0), IdealPoint(1.0)), (PLUS_INF, MINUS_INF))
    with pytest.raises(ValueError):
        # equal infinite labels meeting at an ideal vertex
        LabeledPolygon((IdealPoint(0.0), IdealPoint(1.0), IdealPoint(3.0)), (PLUS_INF, PLUS_INF, MINUS_INF))
    with pytest.raises(ValueError):
        # bow-tie
        LabeledPolygon(tuple(IdealPoint(a) for a in (0.0, math.pi, math.pi / 2, 3 * math.pi / 2)),
                       (PLUS_INF, MINUS_INF, PLUS_INF, MINUS_INF))


def test_triangle_domain():
    for theta in np.linspace(0.05, math.pi / 2, 7):
        T = triangle_domain(theta)
        assert T.vertices[0] == DiskPoint(0j)
        assert T.labels == (PLUS_INF, MINUS_INF, ZERO)
        assert js_check(T).verdict == "Satisfied"
    for bad in (0.0, -0.1, math.pi / 2 + 1e-9):
        with pytest.raises(ValueError):
            triangle_domain(bad)


def test_omega_theta_fails_with_witness():
    P = omega_theta(2, math.pi / 6)
    rep = js_check(P)
    assert rep.verdict == "FailsEquality"
    assert tuple(rep.witness) == (0, 1, 2, 3)
    assert abs(rep.witness_residual) <= 1e-9
    rng = np.random.default_rng(0)
    for _ in range(10):
        r2 = js_check(P, random_resize(rng, rep.sizes))
        assert r2.verdict == "FailsEquality"
        assert abs(r2.witness_residual - rep.witness_residual) <= 1e-10


def test_omega_theta_ranges():
    with pytest.raises(ValueError):
        omega_theta(1, 0.1)
    with pytest.raises(ValueError):
        omega_theta(2, math.pi / 4)
    with pytest.raises(ValueError):
        omega_theta_beta(2, math.pi / 6, math.pi / 2 - math.pi / 3 + 1e-6)


def test_omega_theta_beta_satisfied():
    P = omega_theta_beta(2, math.pi / 6, math.pi / 36)
    assert all(isinstance(v, IdealPoint) for v in P.vertices[1:])
    rep = js_check(P)
    assert rep.verdict == "Satisfied"
    assert rep.min_margin > 1e-9


def test_margin_vanishes_as_beta_shrinks():
    margins = [js_check(omega_theta_beta(2, math.pi / 6, b)).min_margin for b in (0.3, 0.1, 0.03, 0.003, 3e-4)]
    assert all(m > 0 for m in margins)
    assert all(a > b for a, b in zip(margins, margins[1:]))
    assert margins[-1] < 1e-2


def test_reflect_union():
    P = omega_theta_beta(2, math.pi / 6, math.pi / 36)
    U = reflect_union(P, Geodesic(P.vertices[0], P.vertices[-1]))
    assert U.n == 2 * P.n - 2
    assert sum(isinstance(v, IdealPoint) for v in U.vertices) == 5
    assert not _arcs_cross(U)
    assert U.all_infinite
    # mirrored edges carry negated labels, so signs alternate all the way round
    signs = [lab.sign for lab in U.labels]
    assert all(a == -b for a, b in zip(signs, signs[1:]))
    assert js_check(U).verdict == "Satisfied"
    assert U == twisted_union(2, math.pi / 6, math.pi / 36)


def test_reflect_union_errors():
    P = omega_theta_beta(2, math.pi / 6, math.pi / 36)
    with pytest.raises(ValueError):
        reflect_union(P, Geodesic(IdealPoint(0.2), IdealPoint(3.0)))
    with pytest.raises(ValueError):
        reflect_union(ideal_scherk_polygon(SQUARE), Geodesic(IdealPoint(0.0), IdealPoint(math.pi)))


def test_domain_file_roundtrip(tmp_path):
    P = omega_theta_beta(3, 0.3, 0.2)
    sizes = default_horocycle_sizes(P)
    path = tmp_path / "d.json"
    write_domain(path, P, sizes)
    Q, sizes2 = read_domain(path)
    assert Q == P and Q.meta == P.meta
    assert sizes2 == sizes
    write_domain(tmp_path / "e.json", Q, sizes2)
    assert (tmp_path / "e.json").read_bytes() == path.read_bytes()
    obj = json.loads(path.read_text())
    obj["colour"] = 1
    with pytest.raises(ValueError, match="colour"):
        polygon_from_dict(obj)


def _random_isometry(rng):
    p = 0.7 * rng.random() * np.exp(2j * np.pi * rng.random())
    phi = Isometry.translation(p) @ Isometry.rotation(2 * np.pi * rng.random())
    if rng.random() < 0.5:
        phi = phi @ reflect_across(Geodesic(IdealPoint(0.0), IdealPoint(np.pi)))
    return phi


@pytest.mark.parametrize("make", [
    lambda: ideal_scherk_polygon(SQUARE),
    lambda: triangle_domain(1.0),
    lambda: omega_theta(2, math.pi / 6),
    lambda: omega_theta_beta(2, math.pi / 6, math.pi / 36),
])
def test_verdict_isometry_invariant(make):
    P = make()
    rep = js_check(P)
    rng = np.random.default_rng(1)
    for _ in range(5):
        phi = _random_isometry(rng)
        Q = P.transformed(phi)
        sizes = {phi(v): phi(Horocycle(v, s)).s for v, s in rep.sizes.items()}
        if any(s <= 0 for s in sizes.values()):
            continue
        r2 = js_check(Q, sizes)
        assert r2.verdict == rep.verdict
        assert sorted(m["slack"] for m in r2.margins) == pytest.approx(sorted(m["slack"] for m in rep.margins),
                                                                         abs=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(0.0, 2.0), min_size=4, max_size=4))
def test_margins_invariant_under_resizing(shifts):
    P = omega_theta_beta(3, 0.3, 0.15)
    rep = js_check(P)
    sizes = {v: s + d for (v, s), d in zip(rep.sizes.items(), shifts)}
    r2 = js_check(P, sizes)
    assert r2.verdict == rep.verdict
    a = {tuple(m["vertices"]) + (m["sign"],): m["slack"] for m in rep.margins}
    b = {tuple(m["vertices"]) + (m["sign"],): m["slack"] for m in r2.margins}
    assert a.keys() == b.keys()
    for key in a:
        assert b[key] == pytest.approx(a[key], abs=1e-10)


def test_fails_strict():
    # a long +inf side against two short -inf sides violates 2 alpha < perimeter
    P = LabeledPolygon((DiskPoint(0j), IdealPoint(0.0), IdealPoint(3.0)), (ZERO, PLUS_INF, ZERO))
    rep = js_check(P)
    assert rep.verdict == "Satisfied" or rep.min_margin < 0
    Q = LabeledPolygon((IdealPoint(0.0), IdealPoint(0.2), IdealPoint(3.0), IdealPoint(3.2)),
                       (PLUS_INF, MINUS_INF, PLUS_INF, MINUS_INF))
    rq = js_check(Q)
    assert rq.verdict in ("FailsStrict", "FailsEquality")
