"""Tests for direct transcription."""

import json

import numpy as np
import pytest

from octrans.bench import check_dimensions
from octrans.core.exceptions import ValidationException
from octrans.dsl import parse_ocp
from octrans.models.schemas import InitPolicy, Scheme
from octrans.transcription import GroupKind, initial_point, transcribe

from .conftest import EULER_SCALAR


class TestLayout:
    """Decision-vector layout and dimensions."""

    def test_double_integrator_sizes(self, di_small):
        assert di_small.nvar == 9
        assert di_small.m_con == 8
        assert di_small.layout.slabs() == {
            "variable": (0, 0),
            "state": (0, 6),
            "control": (6, 9),
        }

    def test_slot_labels(self, goddard):
        nlp = transcribe(goddard, grid_size=4)
        layout = nlp.layout
        assert layout.slot_label(0) == "tf"
        assert layout.slot_label(1) == "r@0"
        assert layout.slot_label(layout.state_slot(2, 3)) == "m@3"
        assert layout.slot_label(layout.control_offset) == "u@0"
        assert layout.slot_label(nlp.nvar - 1) == "u@4"

    def test_views_are_writable(self, di_small):
        x = di_small.x_start.copy()
        di_small.layout.states(x)[:, 1] = 7.0
        assert x[1] == 7.0 and x[3] == 7.0 and x[5] == 7.0

    def test_group_order(self, di_small):
        kinds = [g.kind for g in di_small.constraint_groups]
        assert kinds == [GroupKind.DYNAMICS, GroupKind.BOUNDARY, GroupKind.BOUNDARY]
        offsets = [g.row_offset for g in di_small.constraint_groups]
        assert offsets == [0, 4, 6]

    @pytest.mark.parametrize("n", [1, 10, 100])
    def test_goddard_size(self, goddard, n):
        nlp = transcribe(goddard, grid_size=n)
        summary = nlp.size_summary()
        assert summary["nvar"] == 4 * n + 5
        assert summary["m_con"] == 3 * n + 4
        assert summary["box_rows"] == 3 * n + 3
        assert summary["checked_size"] == 10 * n + 12
        assert check_dimensions("goddard", nlp)["checked_size"] == 10 * n + 12

    @pytest.mark.parametrize("n", [10, 100])
    def test_quadrotor_size(self, quadrotor, n):
        nlp = transcribe(quadrotor, grid_size=n)
        assert nlp.size_summary()["checked_size"] == 22 * n + 22
        check_dimensions("quadrotor", nlp)

    def test_grid_size_must_be_positive(self, double_integrator):
        with pytest.raises(ValidationException, match="at least 1"):
            transcribe(double_integrator, grid_size=0)


class TestResiduals:
    """Constraint values at hand-built points."""

    def test_trapezoid_defects(self, di_small):
        x = np.zeros(di_small.nvar)
        states = di_small.layout.states(x)
        states[:, 0] = [-1.0, -0.75, 0.0]
        states[:, 1] = [0.0, 1.0, 0.0]
        di_small.layout.controls(x)[:] = 2.0
        c = di_small.evaluate_constraints(x)
        np.testing.assert_allclose(c[:4], [0.0, 0.0, 0.5, -2.0], atol=1e-15)
        np.testing.assert_array_equal(c[4:], [-1.0, 0.0, 0.0, 0.0])

    def test_boundary_rows_are_equalities(self, di_small):
        np.testing.assert_array_equal(di_small.lcon, di_small.ucon)
        np.testing.assert_array_equal(di_small.lcon[4:], [-1.0, 0.0, 0.0, 0.0])

    def test_trapezoid_objective(self, di_small):
        x = di_small.x_start.copy()
        di_small.layout.controls(x)[:] = 2.0
        assert di_small.objective(x) == pytest.approx(2.0)

    def test_euler_step(self):
        nlp = transcribe(parse_ocp(EULER_SCALAR), scheme=Scheme.EULER, grid_size=10)
        x = nlp.x_start.copy()
        nlp.layout.states(x)[:2, 0] = [1.0, 1.2]
        nlp.layout.controls(x)[0, 0] = 2.0
        c = nlp.evaluate_constraints(x)
        assert c[0] == pytest.approx(0.0, abs=1e-14)

    def test_euler_objective_ignores_last_control(self):
        nlp = transcribe(parse_ocp(EULER_SCALAR), scheme=Scheme.EULER, grid_size=10)
        x = nlp.x_start.copy()
        controls = nlp.layout.controls(x)
        controls[:] = 2.0
        controls[-1] = 100.0
        assert nlp.objective(x) == pytest.approx(2.0)

    def test_free_horizon_scales_every_defect(self, goddard):
        nlp = transcribe(goddard, grid_size=8)
        x = nlp.x_start.copy()
        shifted = x.copy()
        shifted[0] += 1e-3
        dynamics = nlp.constraint_groups[0]
        rows = slice(dynamics.row_offset, dynamics.row_offset + dynamics.rows)
        base = nlp.evaluate_constraints(x)[rows]
        delta = nlp.evaluate_constraints(shifted)[rows] - base
        assert np.all(delta != 0.0)
        jac_rows, jac_cols = nlp.jac_structure
        tf_rows = set(jac_rows[jac_cols == 0].tolist())
        assert set(range(dynamics.rows)) <= tf_rows

    def test_time_grid(self, double_integrator, goddard):
        nlp = transcribe(double_integrator, grid_size=4)
        np.testing.assert_allclose(nlp.time_grid(), [0.0, 0.25, 0.5, 0.75, 1.0])
        free = transcribe(goddard, grid_size=4)
        x = free.x_start.copy()
        x[0] = 0.2
        np.testing.assert_allclose(free.time_grid(x), np.linspace(0.0, 0.2, 5))


class TestBoundsAndStart:
    """Variable bounds, pinned slots and start points."""

    def test_default_start(self, di_small):
        np.testing.assert_array_equal(di_small.x_start, np.full(9, 0.1))

    def test_start_clipped_into_bounds(self, goddard):
        nlp = transcribe(goddard, grid_size=5)
        states = nlp.layout.states(nlp.x_start)
        np.testing.assert_array_equal(states[:, 0], 1.0)
        np.testing.assert_array_equal(states[:, 1], 0.1)
        np.testing.assert_array_equal(nlp.layout.controls(nlp.x_start), 0.1)
        assert nlp.x_start[0] == 0.1

    def test_box_bounds(self, goddard):
        nlp = transcribe(goddard, grid_size=5)
        u = nlp.layout.controls(np.arange(nlp.nvar))[:, 0]
        np.testing.assert_array_equal(nlp.lvar[u], 0.0)
        np.testing.assert_array_equal(nlp.uvar[u], 1.0)
        r = nlp.layout.states(np.arange(nlp.nvar))[:, 0]
        np.testing.assert_array_equal(nlp.lvar[r], 1.0)
        assert np.all(np.isinf(nlp.uvar[r]))

    def test_policy_values(self, di_small):
        x = initial_point(di_small, InitPolicy(state=[1.0, 2.0], control=0.0))
        np.testing.assert_array_equal(
            di_small.layout.states(x), [[1.0, 2.0], [1.0, 2.0], [1.0, 2.0]]
        )
        np.testing.assert_array_equal(di_small.layout.controls(x), 0.0)

    def test_triple_policy(self, goddard):
        nlp = transcribe(goddard, grid_size=3, init=(0.15, 1.005, 0.5))
        assert nlp.x_start[0] == 0.15
        np.testing.assert_array_equal(nlp.layout.controls(nlp.x_start), 0.5)

    def test_wrong_length_rejected(self, di_small):
        with pytest.raises(ValidationException, match="length 3"):
            initial_point(di_small, InitPolicy(state=[1.0, 2.0, 3.0]))

    def test_euler_pins_last_control(self):
        nlp = transcribe(
            parse_ocp(EULER_SCALAR), scheme=Scheme.EULER, grid_size=10, init=(0, 0, 3)
        )
        last = nlp.layout.control_slot(0, 10)
        assert np.flatnonzero(nlp.pinned).tolist() == [last]
        assert nlp.lvar[last] == nlp.uvar[last] == 3.0

    def test_trapezoid_pins_nothing(self, di_small):
        assert not di_small.pinned.any()


class TestReporting:
    """Unpacking and dumps."""

    def test_unpack_shapes(self, goddard):
        nlp = transcribe(goddard, grid_size=6)
        parts = nlp.unpack(nlp.x_start)
        assert parts["tf"].shape == (1,)
        assert parts["x"].shape == (7, 3)
        assert parts["u"].shape == (7,)

    def test_dump_is_json(self, goddard):
        nlp = transcribe(goddard, grid_size=3)
        dump = json.loads(json.dumps(nlp.dump()))
        assert dump["nvar"] == nlp.nvar
        assert dump["objective_sign"] == -1.0
        assert dump["layout"]["states"] == ["r", "v", "m"]
        assert [g["name"] for g in dump["constraint_groups"]] == [
            "dynamics",
            "boundary_1",
            "boundary_2",
        ]
        assert dump["bounds"]["uvar"][1] == "Inf"

    def test_dump_weights(self, di_small):
        (lagrange,) = di_small.dump()["objective_groups"]
        assert lagrange["name"] == "lagrange"
        assert lagrange["weights"] == {"first": 0.5, "interior": 1.0, "last": 0.5}
