"""Tests for bdf3.main — argument parsing, subcommand output and exit codes."""

import argparse

import pytest

from bdf3 import config, experiments, main
from bdf3.config import Settings
from bdf3.experiments import ConvergenceRow
from bdf3.kernels import r_e


@pytest.fixture(autouse=True)
def settings(monkeypatch: pytest.MonkeyPatch) -> Settings:
    """Run every command against the built-in defaults."""
    s = Settings()
    monkeypatch.setattr(config, "_settings", s)
    return s


# ════════════════════════════════════════════════════════════════════════════════
# argument types
# ════════════════════════════════════════════════════════════════════════════════


class TestParseRatio:
    @pytest.mark.parametrize("token, factor", [("Re", 1.0), ("2Re", 2.0), ("4Re", 4.0), ("0.5 Re", 0.5)])
    def test_re_tokens(self, token, factor):
        assert main.parse_ratio(token) == pytest.approx(factor * r_e())

    def test_plain_number(self):
        assert main.parse_ratio("1.5") == 1.5

    @pytest.mark.parametrize("token", ["abc", "-1", "0", "Rex"])
    def test_rejected(self, token):
        with pytest.raises(argparse.ArgumentTypeError):
            main.parse_ratio(token)


class TestParseLevels:
    def test_list(self):
        assert main.parse_levels("80,160, 320") == [80, 160, 320]

    @pytest.mark.parametrize("text", ["", "80,x", ","])
    def test_rejected(self, text):
        with pytest.raises(argparse.ArgumentTypeError):
            main.parse_levels(text)


# ════════════════════════════════════════════════════════════════════════════════
# subcommands
# ════════════════════════════════════════════════════════════════════════════════


class TestCommands:
    def test_mesh_dump(self, capsys: pytest.CaptureFixture):
        assert main.main(["mesh", "--n", "4"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "k,t_k,tau_k,r_k"
        assert lines[1:4] == ["0,0.0,,", "1,0.25,0.25,", "2,0.5,0.25,1.0"]

    def test_re_root(self, capsys: pytest.CaptureFixture):
        assert main.main(["re-root", "--check"]) == 0
        out = capsys.readouterr().out
        assert out.startswith("quantity,value\nRe,1.4877")
        assert "gamma_bar,0.692" in out

    def test_trunc_cubic_check(self, capsys: pytest.CaptureFixture):
        assert main.main(["trunc", "--fn", "cubic", "--levels", "16,32", "--check"]) == 0
        assert capsys.readouterr().out.splitlines()[0] == "tau,zeta,slope"

    def test_eigscan_check(self, capsys: pytest.CaptureFixture):
        assert main.main(["eigscan", "--re", "1.2", "--n", "10", "--runs", "5", "--check"]) == 0
        assert "# min over 5 runs" in capsys.readouterr().out

    def test_doc_stats(self, capsys: pytest.CaptureFixture):
        assert main.main(["doc-stats", "--n", "20", "--check"]) == 0
        assert len(capsys.readouterr().out.splitlines()) == 1 + 18

    def test_energy_check(self, capsys: pytest.CaptureFixture):
        assert main.main(["energy", "--n", "20", "--grid", "8", "--check"]) == 0
        assert capsys.readouterr().out.startswith("n,E,")


# ════════════════════════════════════════════════════════════════════════════════
# exit codes
# ════════════════════════════════════════════════════════════════════════════════


class TestExitCodes:
    @pytest.fixture()
    def fake_table(self, monkeypatch: pytest.MonkeyPatch) -> None:
        rows = [ConvergenceRow(80, 0.0125, 1e-6, None, 1.0, 0), ConvergenceRow(160, 0.00625, 1.25e-7, 3.0, 1.0, 0)]
        monkeypatch.setattr(experiments, "converge_table", lambda *a, **kw: rows)
        monkeypatch.setattr(experiments, "convergence_problems", lambda rows, kind: ["N=160: order off"])

    def test_failed_check(self, fake_table, caplog: pytest.LogCaptureFixture):
        assert main.main(["converge", "--mu", "2Re", "--check"]) == 1
        assert "check failed: N=160: order off" in caplog.text

    def test_problems_ignored_without_check(self, fake_table, capsys: pytest.CaptureFixture):
        assert main.main(["converge", "--mu", "2Re", "--format", "md"]) == 0
        assert capsys.readouterr().out.startswith("| N |")

    def test_odd_periodic_mesh(self):
        assert main.main(["mesh", "--mesh", "periodic", "--mu", "2Re", "--n", "5"]) == 2

    def test_periodic_without_mu(self):
        assert main.main(["mesh", "--mesh", "periodic"]) == 2

    @pytest.mark.parametrize(
        "argv",
        [
            ["converge", "--mu", "2Re", "--levels", "20,40", "--grid", "12"],
            ["energy", "--n", "10", "--grid", "4"],
        ],
    )
    def test_bad_fourier_grid_is_a_usage_error(self, argv, caplog: pytest.LogCaptureFixture):
        assert main.main(argv) == 2
        assert "GridError" in caplog.text

    def test_coarse_lemma_grid(self):
        assert main.main(["lemmas", "--grid", "4"]) == 2

    def test_solver_breakdown(self):
        assert main.main(["energy", "--mesh", "uniform", "--n", "10", "--kappa", "100", "--grid", "8"]) == 1

    def test_unknown_command(self):
        with pytest.raises(SystemExit) as exc:
            main.main(["bogus"])
        assert exc.value.code == 2

    def test_bad_ratio_flag(self):
        with pytest.raises(SystemExit) as exc:
            main.main(["mesh", "--mu", "abc"])
        assert exc.value.code == 2
