import math
import time

import pytest

from twisted_scherk.domains import ideal_scherk_polygon, triangle_domain
from twisted_scherk.solver import exhaustion_solve, paper_schedule
from twisted_scherk.surface import assemble_twisted

SQUARE_ANGLES = (0.0, math.pi / 2, math.pi, 3 * math.pi / 2)


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


@pytest.fixture(scope="session")
def scherk_run():
    """Square ideal quadrilateral, four exhaustion steps."""
    return _timed(lambda: exhaustion_solve(ideal_scherk_polygon(SQUARE_ANGLES), paper_schedule(4)))


@pytest.fixture(scope="session")
def delta_run():
    """Fundamental triangle at theta = pi/2, four exhaustion steps."""
    return _timed(lambda: exhaustion_solve(triangle_domain(math.pi / 2), paper_schedule(4)))


@pytest.fixture(scope="session")
def sigma1(delta_run):
    run, elapsed = delta_run
    asm, extra = _timed(lambda: assemble_twisted(1, math.pi / 2, run=run))
    return asm, elapsed + extra


@pytest.fixture(scope="session")
def sigma2():
    return _timed(lambda: assemble_twisted(2, math.pi / 6, math.pi / 36, paper_schedule(4)))
