"""Tests for the canonical printer."""

import pytest

from octrans.bench import available_problems, problem_source
from octrans.dsl import parse_ocp, pretty_print


@pytest.mark.parametrize("name", ["double_integrator", "goddard", "quadrotor"])
def test_round_trip_bundled(name):
    problem = parse_ocp(problem_source(name), name=name)
    text = pretty_print(problem)
    assert parse_ocp(text, name=name) == problem


def test_printing_is_a_fixed_point(goddard):
    once = pretty_print(goddard)
    assert pretty_print(parse_ocp(once)) == once


def test_bundled_problem_names():
    assert available_problems() == ["double_integrator", "goddard", "quadrotor"]


class TestCanonicalText:
    """Shape of the printed text."""

    def test_max_sign_restored(self, goddard):
        text = pretty_print(goddard)
        assert text.rstrip().endswith("r(tf) => max")
        assert "-r(tf)" not in text

    def test_variable_declared_before_time(self, goddard):
        lines = pretty_print(goddard).splitlines()
        assert lines.index("tf in R, variable") < lines.index("t in [0.0, tf], time")

    def test_aliases_kept(self, goddard):
        assert "x = (r, v, m) in R^3, state" in pretty_print(goddard)

    def test_whole_vector_constraint(self, double_integrator):
        text = pretty_print(double_integrator)
        assert "x(0.0) == [-1.0, 0.0]" in text
        assert "derivative(x1)(t) == x2(t)" in text

    def test_integral_cost(self, double_integrator):
        assert pretty_print(double_integrator).rstrip().endswith(
            "integral(0.5 * u(t) ^ 2.0) => min"
        )

    def test_precedence_parentheses(self):
        source = (
            "t in [0, 1], time\nx in R, state\nu in R, control\n"
            "derivative(x)(t) == (x(t) - u(t)) * 2 - (1 - u(t))\n"
            "x(1) => min\n"
        )
        text = pretty_print(parse_ocp(source))
        assert "derivative(x)(t) == (x(t) - u(t)) * 2.0 - (1.0 - u(t))" in text
