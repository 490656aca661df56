import pathlib

import numpy as np
import pytest

from wavehum.discretization import assemble
from wavehum.geometry import build_control_regions, build_domain, partition_boundary
from wavehum.material import identity_scaled, validate_material
from wavehum.pipelines import build_setup
from wavehum.scenario import load_scenario

ROOT = pathlib.Path(__file__).resolve().parents[1]
SCENARIOS = ROOT / "scenarios"

UNIT1 = [0.0, 1.0]
INNER1 = [0.25, 0.75]
UNIT2 = [[0.0, 1.0], [0.0, 1.0]]
INNER2 = [[0.25, 0.75], [0.25, 0.75]]


def make_ops(dim=1, resolution=40, A=None, h=1.0):
    outer, inner = (UNIT1, INNER1) if dim == 1 else (UNIT2, INNER2)
    dom = build_domain(dim, outer, inner, resolution)
    mat = validate_material(dom, A if A is not None else identity_scaled(1.0), h)
    return assemble(dom, mat)


def make_regions(ops, x0=None, t1=0.125, t2=0.125):
    dom = ops.domain
    x0 = np.full(dom.dim, 0.5) if x0 is None else np.asarray(x0, float)
    return build_control_regions(dom, partition_boundary(dom, x0), t1, t2)


def smooth_pair(ops, seed=0, modes=3):
    """Smooth random initial data built from a few sines per component, Dirichlet-compatible."""
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((2, modes))
    b = rng.standard_normal((2, modes))

    def field(coef):
        def f(p):
            out = 0.0
            for k, c in enumerate(coef, start=1):
                out = out + c * np.prod(np.sin(k * np.pi * p), axis=1)
            return out

        return f

    z0 = ops.sample(field(a[0]))
    z1 = ops.sample(field(b[0]))
    return z0, z1


@pytest.fixture(scope="session")
def ref1d():
    return build_setup(load_scenario(SCENARIOS / "reference_1d.yaml"))


@pytest.fixture(scope="session")
def ref1d_coarse():
    return build_setup(load_scenario(SCENARIOS / "reference_1d.yaml"), resolution=80)


@pytest.fixture(scope="session")
def ref2d_coarse():
    return build_setup(load_scenario(SCENARIOS / "reference_2d.yaml"), resolution=16)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.report_lines():
        terminalreporter.write_line(line)
