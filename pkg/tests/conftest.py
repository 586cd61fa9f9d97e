import os

import numpy as np
import pytest
from hypothesis import settings

from stl_resilience import case_path, load_config

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def random_hurwitz(rng, n, spread=3.0):
    """Random diagonalisable Hurwitz matrix with a mix of real and complex modes."""
    lam = []
    while len(lam) < n:
        if n - len(lam) >= 2 and rng.random() < 0.4:
            a, b = -rng.uniform(0.1, spread), rng.uniform(0.2, spread)
            lam += [complex(a, b), complex(a, -b)]
        else:
            lam.append(complex(-rng.uniform(0.1, spread), 0))
    D = np.zeros((n, n))
    i = 0
    while i < n:
        if lam[i].imag != 0:
            a, b = lam[i].real, lam[i].imag
            D[i:i + 2, i:i + 2] = [[a, b], [-b, a]]
            i += 2
        else:
            D[i, i] = lam[i].real
            i += 1
    while True:
        S = rng.normal(size=(n, n))
        if np.linalg.cond(S) < 50:
            break
    return S @ D @ np.linalg.inv(S)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def cases():
    names = ("dcmotor_psi1", "dcmotor_psi2", "temperature", "nonlinear_example", "scalar_decay")
    return {n: load_config(case_path(n)) for n in names}


def pytest_terminal_summary(terminalreporter):
    lines = []
    for reports in terminalreporter.stats.values():
        for rep in reports:
            if getattr(rep, "when", None) != "call":
                continue
            lines += [v for k, v in getattr(rep, "user_properties", ()) if k == "acceptance"]
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: s.split()[1]):
            terminalreporter.write_line(line)
