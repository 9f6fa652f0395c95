"""Tests for bench sweeps, configuration files and renderers."""

import math

import pytest

from octrans.bench import (
    COLUMNS,
    REFERENCE_OBJECTIVES,
    SIZE_CLAIMS,
    check_dimensions,
    check_grid_drift,
    default_bench_config,
    linear_fit,
    load_bench_config,
    load_problem,
    objective_drift,
    render_csv,
    render_gnuplot,
    render_markdown,
    rich_table,
    run_bench,
    run_case,
)
from octrans.core.exceptions import (
    ConfigurationException,
    InvariantViolation,
    ValidationException,
)
from octrans.ipm import BarrierProblem, KktSystem
from octrans.linalg import analyze
from octrans.models.schemas import (
    BackendKind,
    BenchCase,
    BenchConfig,
    BenchReport,
    BenchRow,
    SolveStatus,
)
from octrans.transcription import transcribe

from .conftest import EULER_SCALAR


def _row(case="goddard", n=100, backend=BackendKind.SERIAL, **overrides):
    values = dict(
        case=case,
        grid_size=n,
        backend=backend,
        status=SolveStatus.OPTIMAL,
        objective=1.0128,
        iterations=30,
        wall_time=0.5,
        derivative_time=0.1,
        factorization_time=0.2,
        solve_time=0.05,
        nvar=4 * n + 5,
        m_con=3 * n + 4,
        nnz_kkt=100,
        nnz_l=200,
    )
    values.update(overrides)
    return BenchRow(**values)


class TestDimensions:
    """Size claims."""

    def test_goddard_claim_holds(self, goddard):
        sizes = check_dimensions("goddard", transcribe(goddard, grid_size=50))
        assert sizes == {"nvar": 205, "m_con": 154, "checked_size": 512}

    def test_quadrotor_claim_uses_relative_slack(self, quadrotor):
        sizes = check_dimensions("quadrotor", transcribe(quadrotor, grid_size=100))
        assert sizes["checked_size"] == 22 * 100 + 22
        assert SIZE_CLAIMS["quadrotor"].bound(100) == pytest.approx(225.0)

    def test_violated_claim(self, quadrotor):
        with pytest.raises(InvariantViolation, match="expected about 100"):
            check_dimensions("goddard", transcribe(quadrotor, grid_size=10))

    def test_unclaimed_case_passes(self, di_small):
        assert check_dimensions("double_integrator", di_small)["nvar"] == 9


class TestConfigFiles:
    """TOML sweep descriptions."""

    def test_load(self, tmp_path):
        path = tmp_path / "bench.toml"
        path.write_text(
            'threads = 2\n\n[[cases]]\nname = "goddard"\n'
            'grid_sizes = [100, 1000]\nbackends = ["serial"]\n'
        )
        config = load_bench_config(path)
        assert config.threads == 2
        assert config.cases[0].grid_sizes == [100, 1000]
        assert config.cases[0].backends == [BackendKind.SERIAL]
        assert config.max_grid_size == 20000

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationException, match="not found"):
            load_bench_config(tmp_path / "absent.toml")

    def test_invalid_toml(self, tmp_path):
        path = tmp_path / "bench.toml"
        path.write_text("[[cases]\n")
        with pytest.raises(ConfigurationException, match="not valid TOML"):
            load_bench_config(path)

    def test_decreasing_grid_sizes(self, tmp_path):
        path = tmp_path / "bench.toml"
        path.write_text('[[cases]]\nname = "goddard"\ngrid_sizes = [1000, 100]\n')
        with pytest.raises(ValidationException, match="invalid bench config"):
            load_bench_config(path)

    def test_default_sweep(self):
        config = default_bench_config()
        assert [c.name for c in config.cases] == [
            "double_integrator",
            "goddard",
            "quadrotor",
        ]
        assert config.cases[0].expected_objective == 6.0
        assert config.cases[1].expected_objective == REFERENCE_OBJECTIVES["goddard"]
        assert config.cases[2].expected_objective is None
        assert all(c.drift_tolerance == 1e-3 for c in config.cases)

    def test_relative_source(self, tmp_path):
        (tmp_path / "scalar.ocp").write_text(EULER_SCALAR)
        problem = load_problem("scalar", "scalar.ocp", base_dir=tmp_path)
        assert problem.name == "scalar"
        assert problem.state_dim == 1

    def test_unreadable_source(self, tmp_path):
        with pytest.raises(ValidationException, match="cannot read"):
            load_problem("scalar", "absent.ocp", base_dir=tmp_path)


class TestRenderers:
    """Report formats."""

    @pytest.fixture
    def report(self):
        return BenchReport(
            rows=[
                _row(n=100),
                _row(n=100, backend=BackendKind.PARALLEL),
                _row(n=400),
                _row(
                    case="quadrotor",
                    n=100,
                    status=SolveStatus.MAX_ITER,
                    objective=math.nan,
                    objective_ok=False,
                ),
            ]
        )

    def test_csv(self, report):
        lines = render_csv(report).splitlines()
        assert lines[0] == ",".join(COLUMNS)
        assert len(lines) == 5
        assert lines[1].startswith("goddard,100,serial,optimal,1.0128,30,0.5000,")
        assert lines[4].endswith(",no")
        assert ",nan," in lines[4]

    def test_csv_without_timings(self, report):
        header = render_csv(report, include_timings=False).splitlines()[0]
        assert "wall_time" not in header
        assert header.startswith("case,grid_size,backend,status,objective,iterations")

    def test_markdown(self, report):
        lines = render_markdown(report).splitlines()
        assert lines[0].startswith("| case ")
        assert set(lines[1]) <= {"|", "-"}
        assert len({len(line) for line in lines}) == 1

    def test_gnuplot_blocks(self, report):
        blocks = render_gnuplot(report).split("\n\n\n")
        assert len(blocks) == 3
        first = blocks[0].splitlines()
        assert first[0] == "# goddard serial"
        assert first[2:] == ["100 0.500000 30 100", "400 0.500000 30 100"]

    def test_rich_table(self, report):
        table = rich_table(report)
        assert len(table.columns) == len(COLUMNS)
        assert table.row_count == 4

    def test_success(self, report):
        assert not report.success
        assert BenchReport(rows=report.rows[:3]).success
        assert not BenchReport().success


class TestFits:
    """Scaling summaries."""

    def test_linear_fit(self):
        fit = linear_fit([100, 200, 400], [1.0, 2.0, 4.0])
        assert fit["slope"] == pytest.approx(0.01)
        assert fit["intercept"] == pytest.approx(0.0, abs=1e-12)
        assert fit["max_relative_residual"] == pytest.approx(0.0, abs=1e-12)

    def test_linear_fit_needs_two_points(self):
        with pytest.raises(ValidationException):
            linear_fit([1.0], [1.0])

    def test_objective_drift(self):
        report = BenchReport(
            rows=[_row(n=100, objective=1.02), _row(n=400, objective=1.0)]
        )
        drift = objective_drift(report, "goddard", BackendKind.SERIAL)
        assert drift == pytest.approx(0.01)
        with pytest.raises(ValidationException):
            objective_drift(report, "quadrotor", BackendKind.SERIAL)

    def test_grid_drift_marks_the_coarse_row(self):
        rows = [
            _row(n=100, objective=1.0128),
            _row(n=100, backend=BackendKind.PARALLEL, objective=1.02),
            _row(n=400, objective=1.0125),
            _row(n=400, backend=BackendKind.PARALLEL, objective=1.0125),
            _row(n=1000, objective=1.0124),
        ]
        checked = check_grid_drift(rows, 1e-3)
        assert [r.drift_ok for r in checked] == [True, False, None, None, None]
        assert rows[0].drift_ok is None
        assert not BenchReport(rows=checked).success
        assert BenchReport(rows=[checked[0], checked[2]]).success

    def test_grid_drift_skips_failed_refinements(self):
        rows = [
            _row(n=100, objective=1.0),
            _row(n=400, objective=2.0, status=SolveStatus.MAX_ITER),
        ]
        assert [r.drift_ok for r in check_grid_drift(rows, 1e-3)] == [None, None]


KKT_SWEEP = [500, 1000, 2000, 4000, 8000]


def _kkt_sizes(problem, sizes):
    kkt_nnz, l_nnz = [], []
    for n in sizes:
        kkt = KktSystem.for_problem(BarrierProblem(transcribe(problem, grid_size=n)))
        symbolic = analyze(kkt.pattern())
        kkt_nnz.append(int(symbolic.lower_indptr[-1]))
        l_nnz.append(symbolic.l_nnz)
    return kkt_nnz, l_nnz


class TestKktGrowth:
    """Factor and KKT nonzeros stay affine in the grid size."""

    @pytest.mark.parametrize("fixture", ["double_integrator", "goddard", "quadrotor"])
    def test_small_sweep(self, request, fixture):
        sizes = KKT_SWEEP[:3]
        for counts in _kkt_sizes(request.getfixturevalue(fixture), sizes):
            assert linear_fit(sizes, counts)["max_relative_residual"] <= 0.01

    @pytest.mark.slow
    @pytest.mark.parametrize("fixture", ["double_integrator", "goddard", "quadrotor"])
    def test_full_sweep(self, request, fixture):
        kkt_nnz, l_nnz = _kkt_sizes(request.getfixturevalue(fixture), KKT_SWEEP)
        assert linear_fit(KKT_SWEEP, kkt_nnz)["max_relative_residual"] <= 0.01
        assert linear_fit(KKT_SWEEP, l_nnz)["max_relative_residual"] <= 0.01


class TestSweeps:
    """End-to-end sweeps on the double integrator."""

    def test_run_bench(self):
        config = BenchConfig(
            cases=[
                BenchCase(
                    name="double_integrator",
                    grid_sizes=[10, 20],
                    backends=[BackendKind.SERIAL, BackendKind.PARALLEL],
                )
            ],
            threads=2,
        )
        seen = []
        report = run_bench(config, on_row=seen.append)
        assert len(report.rows) == len(seen) == 4
        assert [(r.grid_size, r.backend) for r in report.rows] == [
            (10, BackendKind.SERIAL),
            (10, BackendKind.PARALLEL),
            (20, BackendKind.SERIAL),
            (20, BackendKind.PARALLEL),
        ]
        assert report.success
        assert report.rows[0].nvar == 33
        assert report.rows[0].m_con == 24
        assert report.rows[0].objective == report.rows[1].objective
        assert report.rows[0].nnz_kkt > 0

    def test_objective_check(self):
        case = BenchCase(
            name="double_integrator",
            grid_sizes=[20],
            backends=[BackendKind.SERIAL],
            expected_objective=100.0,
        )
        (row,) = run_case(case, BenchConfig(cases=[case]))
        assert row.status == SolveStatus.OPTIMAL
        assert row.objective_ok is False

    def test_drift_check_runs_with_the_sweep(self):
        case = BenchCase(
            name="double_integrator", grid_sizes=[10, 40], backends=[BackendKind.SERIAL]
        )
        coarse, fine = run_case(case, BenchConfig(cases=[case]))
        assert coarse.status == fine.status == SolveStatus.OPTIMAL
        # J_10 is about 6.23 and J_40 about 6.01
        assert coarse.drift_ok is False
        assert fine.drift_ok is None
        assert not BenchReport(rows=[coarse, fine]).success

        loose = case.model_copy(update={"drift_tolerance": 0.05})
        coarse, _ = run_case(loose, BenchConfig(cases=[loose]))
        assert coarse.drift_ok is True

        unchecked = case.model_copy(update={"drift_tolerance": None})
        coarse, _ = run_case(unchecked, BenchConfig(cases=[unchecked]))
        assert coarse.drift_ok is None

    def test_iteration_cap_recorded(self):
        case = BenchCase(
            name="double_integrator", grid_sizes=[20], backends=[BackendKind.SERIAL]
        )
        report = run_bench(BenchConfig(cases=[case], max_iter=1))
        assert report.rows[0].status == SolveStatus.MAX_ITER
        assert report.rows[0].iterations == 1
        assert not report.success

    def test_grid_cap(self):
        case = BenchCase(name="double_integrator", grid_sizes=[10])
        config = BenchConfig(cases=[case], max_grid_size=5)
        with pytest.raises(ValidationException, match="exceeds the cap 5"):
            run_case(case, config)
        assert len(run_case(case, config, allow_large=True)) == 2
