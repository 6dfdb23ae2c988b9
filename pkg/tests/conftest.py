import numpy as np
import pytest

from diffusym.cli import load_spec
from diffusym.invariants import WorkingDomain, profile


def spec_profile(name, **dom_overrides):
    """Coefficients, profile and spec of a shipped PDE spec."""
    spec = load_spec(name)
    d = spec.domain
    kw = dict(x_min=d.x_min, x_max=d.x_max, t_min=d.t_min, t_max=d.t_max, x0=d.x0, nx=d.nx, nt=d.nt)
    kw.update(dom_overrides)
    return spec.coeffs, profile(spec.coeffs, WorkingDomain(**kw)), spec


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(test_acceptance.RESULTS):
            terminalreporter.write_line(test_acceptance.RESULTS[k])
