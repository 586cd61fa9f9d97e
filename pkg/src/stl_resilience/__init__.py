"""Certified lower bounds on how much disturbance a system tolerates while meeting an STL formula."""
from importlib import resources

from .config import AnalysisConfig, load_config
from .dynamics import (DisturbanceSignal, LinearSystem, NonlinearSystem, ViolationReport,
                       integrate, monte_carlo_validate, parse_dynamics)
from .envelope import EnvelopeFamily, lipschitz_omega, nominal_trajectory
from .errors import *  # noqa: F401,F403
from .linalg import (GainCurve, SpectralDecomposition, absolute_gain, decompose, gain_curve,
                     gronwall_gain, jordan_gain)
from .resilience import (ResilienceCertificate, ScenarioConfig, certify, cover_samples,
                         delta_bar, linearize, nonlinear_lower_bound, resilience_lower_bound,
                         scenario_eta)
from .signals import Signal, make_grid
from .stl import lipschitz, parse, robustness, robustness_trace, to_text

CASES = ("dcmotor_psi1", "dcmotor_psi2", "temperature", "nonlinear_example", "scalar_decay")


def case_path(name: str):
    """Path of a bundled case-study config."""
    if name not in CASES:
        raise KeyError(f"unknown case {name!r}; choose from {CASES}")
    return resources.files(__package__) / "cases" / f"{name}.json"


__version__ = "0.1.0"
