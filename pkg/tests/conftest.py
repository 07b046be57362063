import numpy as np
import pytest

from dispersive_meshless.config import bundled_config, with_overrides
from dispersive_meshless.kernel import KernelParams
from dispersive_meshless.nodes import Region, SupportTable, build_cavity_cloud
from dispersive_meshless.shapes import build_stencils

H = 0.5e-3
_criteria = {}


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        ok, detail = _criteria[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def criterion():
    def record(n, ok, detail=""):
        prev = _criteria.get(n, (True, ""))
        _criteria[n] = (prev[0] and bool(ok), "; ".join(x for x in (prev[1], detail) if x))
        return ok

    return record


@pytest.fixture(scope="session")
def table1():
    return bundled_config()


@pytest.fixture(scope="session")
def vacuum_cfg(table1):
    return with_overrides(table1, plasma_omega_ep=0.0)


@pytest.fixture(scope="session")
def cloud():
    return build_cavity_cloud(5e-3, 5e-3, H, Region(0.0, 2.5e-3, 0.0, 5e-3))


@pytest.fixture(scope="session")
def kernel():
    return KernelParams(3.0, H)


@pytest.fixture(scope="session")
def stencils(cloud, kernel):
    return {m: build_stencils(cloud, kernel, 2.6 * H, m) for m in ("vector", "scalar")}


def local_patch(radius, spacing=1.0):
    """Grid nodes within ``radius`` of the origin."""
    g = np.array([(x, y) for x in range(-4, 5) for y in range(-4, 5)], float) * spacing
    return g[np.hypot(*g.T) <= radius * spacing * (1 + 1e-12)]


def fixed_support(nodes, points):
    """Support table in which every query point sees exactly ``nodes``."""
    pts = np.atleast_2d(np.asarray(points, float))
    k = len(nodes)
    return SupportTable(
        float("inf"), "points", pts, [np.arange(k)] * len(pts), [nodes] * len(pts), [np.ones((k, 2))] * len(pts)
    )
