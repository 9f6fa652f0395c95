"""Shared fixtures."""

import numpy as np
import pytest

from octrans.bench import problem_source
from octrans.dsl import OcpProblem, parse_ocp
from octrans.models.schemas import Scheme
from octrans.transcription import StructuredNlp, transcribe

VARIABLE_ONLY = """\
p in R, variable
t in [0, 1], time
x in R, state
x(0) == 0
derivative(x)(t) == 0
p >= 1
p^2 => min
"""

INTERIOR_MINIMUM = """\
p in R, variable
t in [0, 1], time
x in R, state
x(0) == 0
derivative(x)(t) == 0
-10 <= p <= 10
0.5 * (p - 2)^2 => min
"""

EULER_SCALAR = """\
t in [0, 1], time
x in R, state
u in R, control
x(0) == 1
derivative(x)(t) == u(t)
integral(0.5u(t)^2) => min
"""


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240612)


@pytest.fixture(scope="session")
def double_integrator() -> OcpProblem:
    return parse_ocp(problem_source("double_integrator"), name="double_integrator")


@pytest.fixture(scope="session")
def goddard() -> OcpProblem:
    return parse_ocp(problem_source("goddard"), name="goddard")


@pytest.fixture(scope="session")
def quadrotor() -> OcpProblem:
    return parse_ocp(problem_source("quadrotor"), name="quadrotor")


@pytest.fixture
def di_small(double_integrator: OcpProblem) -> StructuredNlp:
    """Double integrator, trapezoid, N = 2 (h = 0.5)."""
    return transcribe(double_integrator, scheme=Scheme.TRAPEZOID, grid_size=2)


def interior_point(nlp: StructuredNlp, rng: np.random.Generator, boxes=None):
    """Random point strictly inside the finite bounds.

    ``boxes`` maps a slot label prefix to a sampling interval used for slots
    whose bounds are infinite.
    """
    x = rng.uniform(0.2, 0.8, nlp.nvar)
    labels = [nlp.layout.slot_label(i) for i in range(nlp.nvar)]
    for i, label in enumerate(labels):
        lo, hi = 0.2, 0.8
        for prefix, (a, b) in (boxes or {}).items():
            if label.split("@")[0] == prefix:
                lo, hi = a, b
        if np.isfinite(nlp.lvar[i]):
            lo = max(lo, nlp.lvar[i])
        if np.isfinite(nlp.uvar[i]):
            hi = min(hi, nlp.uvar[i])
        if lo > hi:
            lo = hi = 0.5 * (nlp.lvar[i] + nlp.uvar[i])
        x[i] = rng.uniform(lo, hi)
    return x
