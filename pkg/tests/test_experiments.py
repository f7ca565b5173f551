"""Tests for bdf3.experiments — table builders, acceptance checks and CSV output."""

import math

import numpy as np
import pytest

from bdf3.errors import Bdf3Error, MeshError
from bdf3.experiments import (
    MESH_KINDS,
    DEFAULT_LEVELS,
    ConvergenceRow,
    build_mesh,
    converge_table,
    convergence_problems,
    doc_stats,
    doc_stats_csv,
    eigscan_csv,
    emit,
    energy_csv,
    energy_study,
    lemmas_csv,
    order_of,
    parse_csv,
    regression_slope,
    trunc_csv,
    trunc_study,
)
from bdf3.kernels import r_e
from bdf3.positivity import scan_lemma_positivity
from bdf3.quad_forms import eigscan
from bdf3.time_mesh import uniform_mesh


def _synthetic_rows(order: float, levels=(80, 160, 320)) -> list[ConvergenceRow]:
    rows = []
    for N in levels:
        tau = 1.0 / N
        err = 5.0 * tau**order
        prev = rows[-1] if rows else None
        o = None if prev is None else order_of(prev.e_N, err, prev.tau_N, tau)
        rows.append(ConvergenceRow(N, tau, err, o, 1.0, 0))
    return rows


# ════════════════════════════════════════════════════════════════════════════════
# meshes and orders
# ════════════════════════════════════════════════════════════════════════════════


class TestBuildMesh:
    @pytest.mark.parametrize("kind", MESH_KINDS)
    def test_every_kind(self, kind):
        mesh = build_mesh(kind, 1.0, 20, mu=2.0, seed=3)
        assert mesh.N == 20
        assert mesh.horizon == pytest.approx(1.0)

    def test_admissible_ratios(self):
        Re = r_e()
        r = build_mesh("admissible", 1.0, 200, seed=4).ratios[2:]
        assert np.all((r > 1 / Re) & (r < Re))

    def test_periodic_needs_mu(self):
        with pytest.raises(MeshError):
            build_mesh("periodic", 1.0, 20)

    def test_unknown_kind(self):
        with pytest.raises(MeshError):
            build_mesh("chebyshev", 1.0, 20)


class TestOrderOf:
    def test_table_values(self):
        assert order_of(1.12e-6, 1.42e-7, 1.87e-2, 9.36e-3) == pytest.approx(2.98, abs=0.01)

    def test_exact_cubic(self):
        assert order_of(8.0, 1.0, 2.0, 1.0) == pytest.approx(3.0)

    @pytest.mark.parametrize("args", [(0.0, 1.0, 2.0, 1.0), (1.0, 1.0, 1.0, 1.0), (1.0, 1.0, 1.0, 2.0)])
    def test_rejects_bad_input(self, args):
        with pytest.raises(Bdf3Error):
            order_of(*args)


# ════════════════════════════════════════════════════════════════════════════════
# convergence tables
# ════════════════════════════════════════════════════════════════════════════════


class TestConvergeTable:
    @pytest.fixture(scope="class")
    def rows(self):
        return converge_table("periodic", "sdirk3", levels=[40, 80], mu=2 * r_e(), grid=16)

    def test_shape(self, rows):
        assert [r.N for r in rows] == [40, 80]
        assert rows[0].order is None
        assert rows[1].order is not None

    def test_half_of_steps_are_large_ratios(self, rows):
        assert [r.N1 for r in rows] == [20, 40]
        assert all(r.r_max == pytest.approx(2 * r_e()) for r in rows)

    def test_deterministic(self, rows):
        again = converge_table("periodic", "sdirk3", levels=[40, 80], mu=2 * r_e(), grid=16)
        assert again == rows

    def test_workers_do_not_change_results(self):
        serial = converge_table("admissible", "bdf2", levels=[20, 40], seed=5, grid=8)
        threaded = converge_table("admissible", "bdf2", levels=[20, 40], seed=5, grid=8, workers=2)
        assert serial == threaded

    @pytest.mark.parametrize("levels", [[80, 40], [40, 40], [4, 40]])
    def test_bad_levels(self, levels):
        with pytest.raises(Bdf3Error):
            converge_table("uniform", "sdirk3", levels=levels, grid=8)


class TestAcceptance:
    def test_slope_of_synthetic_rows(self):
        assert regression_slope(_synthetic_rows(3.0)) == pytest.approx(3.0, abs=1e-12)

    def test_slope_needs_two_rows(self):
        with pytest.raises(Bdf3Error):
            regression_slope(_synthetic_rows(3.0, levels=(80,)))

    def test_third_order_passes(self):
        assert convergence_problems(_synthetic_rows(3.0), "periodic") == []
        assert convergence_problems(_synthetic_rows(3.0), "random") == []

    def test_second_order_fails(self):
        problems = convergence_problems(_synthetic_rows(2.0), "periodic")
        assert len(problems) == 2
        assert "N=160" in problems[0]

    def test_coarse_levels_are_not_judged(self):
        assert convergence_problems(_synthetic_rows(2.0, levels=(40, 80)), "uniform") == []

    def test_random_kinds_use_the_slope(self):
        problems = convergence_problems(_synthetic_rows(2.0), "admissible")
        assert len(problems) == 1
        assert "regression slope" in problems[0]


class TestEmit:
    def test_csv_keeps_full_precision(self):
        rows = _synthetic_rows(3.0)
        assert parse_csv(emit(rows, "csv")) == rows

    def test_csv_header_and_blank_order(self):
        lines = emit(_synthetic_rows(3.0), "csv").splitlines()
        assert lines[0] == "N,tau,eN,order,rmax,N1"
        assert lines[1].split(",")[3] == ""

    def test_markdown(self):
        text = emit(_synthetic_rows(3.0), "md")
        lines = text.splitlines()
        assert lines[0].startswith("| N |")
        assert "| 80 | 1.25e-02 |" in lines[2]
        assert "–" in lines[2]
        assert "3.00" in lines[3]

    def test_unknown_format(self):
        with pytest.raises(Bdf3Error):
            emit(_synthetic_rows(3.0), "json")

    def test_empty(self):
        with pytest.raises(Bdf3Error):
            emit([], "csv")

    def test_parse_rejects_other_headers(self):
        with pytest.raises(Bdf3Error):
            parse_csv("N,tau\n1,2\n")


# ════════════════════════════════════════════════════════════════════════════════
# scan reports
# ════════════════════════════════════════════════════════════════════════════════


class TestReports:
    def test_eigscan_csv(self):
        result = eigscan(1.2, 10, 3, seed=0)
        lines = eigscan_csv(result).splitlines()
        assert lines[0] == "run,min_eig"
        assert len(lines) == 5
        assert lines[-1].startswith("# min over 3 runs")
        assert float(lines[1].split(",")[1]) == result.per_run[0]

    def test_lemmas_csv(self):
        lines = lemmas_csv(scan_lemma_positivity(16)).splitlines()
        assert lines[0] == "check,grid,min_value,argmin_x,argmin_y,argmin_z,violations"
        assert len(lines) == 7
        assert lines[1].startswith("q_positive,16,")


class TestEnergyStudy:
    def test_dissipative_trace(self):
        study = energy_study(uniform_mesh(1.0, 20), 0.1, -1.0, 8, seed=1)
        assert study.trace.violations() == 0
        lines = energy_csv(study).splitlines()
        assert lines[0] == "n,E,grad_term,reaction_term,G_term,delta_E"
        assert len(lines) == 1 + 18
        assert lines[1].startswith("2,")
        assert lines[1].endswith(",")
        assert float(lines[2].split(",")[-1]) <= 0.0


class TestDocStats:
    def test_uniform_mesh(self):
        stats = doc_stats(uniform_mesh(1.0, 50))
        assert np.allclose(stats.theta_0, 6 / 11, rtol=0, atol=1e-15)
        assert stats.row_abs_sum[0] == pytest.approx(6 / 11)
        assert stats.max_residual < 1e-11
        assert stats.k3_hat >= stats.row_abs_sum.max()

    def test_csv(self):
        lines = doc_stats_csv(doc_stats(uniform_mesh(1.0, 10))).splitlines()
        assert lines[0] == "n,row_abs_sum,theta_0"
        assert len(lines) == 1 + 8
        assert lines[1].startswith("3,")


class TestTruncStudy:
    def test_cubic_is_exact(self):
        rows = trunc_study("cubic", [32, 64, 128])
        assert all(abs(r.zeta) < 1e-12 for r in rows)
        assert all(r.slope is None for r in rows)

    def test_sin_slope(self):
        rows = trunc_study("sin", [32, 64, 128, 256])
        assert rows[0].slope is None
        assert abs(rows[-1].slope - 3.0) < 0.05

    def test_csv(self):
        lines = trunc_csv(trunc_study("quartic", [16, 32])).splitlines()
        assert lines[0] == "tau,zeta,slope"
        assert float(lines[1].split(",")[0]) == 1 / 16
        assert math.isclose(float(lines[2].split(",")[2]), 3.0, abs_tol=0.2)

    def test_unknown_function(self):
        with pytest.raises(Bdf3Error):
            trunc_study("exp", [16])


# ════════════════════════════════════════════════════════════════════════════════
# full-size runs
# ════════════════════════════════════════════════════════════════════════════════


@pytest.mark.slow
class TestFullTables:
    def test_periodic_2re_sdirk3(self):
        rows = converge_table("periodic", "sdirk3", mu=2 * r_e())
        assert convergence_problems(rows, "periodic") == []
        assert 2.80e-10 / 5 < rows[-1].e_N < 2.80e-10 * 5

    def test_periodic_4re_bdf2(self):
        rows = converge_table("periodic", "bdf2", mu=4 * r_e())
        assert convergence_problems(rows, "periodic") == []

    @pytest.mark.parametrize("starter", ["sdirk3", "bdf2"])
    def test_random_mesh_slope(self, starter):
        rows = converge_table("random", starter, levels=DEFAULT_LEVELS, seed=7)
        assert abs(regression_slope(rows) - 3.0) <= 0.2
