import csv

import pytest

from tibo.cli import EXIT_CRASH, EXIT_INVALID, EXIT_OK, eval_number, load_solve_config, main
from tibo.errors import ConfigError


def write(path, text):
    path.write_text(text)
    return path


class TestBench:
    def test_neumann_batch(self, tmp_path, capsys):
        out = tmp_path / "r.csv"
        code = main(["bench", "--case", "neumann", "--theta", "pi2", "--out", str(out), "--curves", str(tmp_path / "c")])
        assert code == EXIT_OK
        rows = list(csv.DictReader(out.open()))
        assert len(rows) == 25 and {r["status"] for r in rows} == {"to_yb"}
        assert len(list((tmp_path / "c").glob("*.csv"))) == 25
        assert "to_yb" in capsys.readouterr().out

    def test_bad_theta(self):
        assert main(["bench", "--case", "mix", "--theta", "pi"]) == EXIT_INVALID

    def test_bad_constraint(self, capsys):
        assert main(["bench", "--case", "mix", "--theta", "pi2", "--constraint", "box:3"]) == EXIT_INVALID
        assert "box:3" in capsys.readouterr().err

    def test_bad_grid(self):
        assert main(["bench", "--case", "mix", "--theta", "pi2", "--q", "2"]) == EXIT_INVALID

    def test_crash_exit_code(self, monkeypatch):
        import tibo.cli as cli
        from tibo.harness import RunReport, ScenarioOutcome, Status

        def broken(*args, **kwargs):
            rep = RunReport(1, "mix", 1.0, Status.DIVERGE, float("inf"), float("inf"), error="RuntimeError: boom")
            return [ScenarioOutcome(rep, None, None, None, None)]

        monkeypatch.setattr(cli, "run_batch", broken)
        assert main(["bench", "--case", "mix", "--theta", "pi2"]) == EXIT_CRASH


class TestSolve:
    def test_example_config(self, tmp_path, capsys):
        cfg = write(
            tmp_path / "p.cfg",
            "# mixed rows\ns = 1\ne = 3\nq = 7\nd11 = 1\nd12 = 1\nd23 = 1\nd24 = 1\nrhs = example\ntheta = pi/2\n",
        )
        assert main(["solve", "--config", str(cfg), "--out", str(tmp_path / "y.csv")]) == EXIT_OK
        out = capsys.readouterr().out
        dev = float(out.split("max|y-y_base|:")[1].split()[0])
        assert dev <= 1e-8
        assert (tmp_path / "y.csv").exists()

    def test_manufactured_config(self, tmp_path, capsys):
        cfg = write(tmp_path / "p.cfg", "s = 0\ne = 2\nd11 = 1\nd23 = 1\nrhs = manufactured:poly\n")
        assert main(["solve", "--config", str(cfg)]) == EXIT_OK
        assert "converged" in capsys.readouterr().out

    def test_explicit_alpha_beta(self, tmp_path, capsys):
        cfg = write(tmp_path / "p.cfg", "s = 1\ne = 3\nd11 = 1\nd22 = 1\nalpha = 0\nbeta = -1.5707963267948966\n")
        assert main(["solve", "--config", str(cfg)]) == EXIT_OK
        out = capsys.readouterr().out
        assert float(out.split("max|y-y_base|:")[1].split()[0]) <= 1e-8

    @pytest.mark.parametrize(
        "text",
        [
            "e = 3\n",
            "s = 0\ne = 1\ndelta = 1\nd11 = 1\nd23 = 1\n",
            "s = 1\ne = 3\nd11 = 1\nd21 = 2\n",
            "s = 1\ne = 3\nd11 = 1\nd23 = 1\nrhs = table\n",
            "s = 1\ne = 3\nd11 = 1\nd23 = 1\nC = 1,2\n",
            "s = one\ne = 3\n",
        ],
    )
    def test_invalid_configs(self, tmp_path, text):
        assert main(["solve", "--config", str(write(tmp_path / "p.cfg", text))]) == EXIT_INVALID

    def test_missing_file(self, tmp_path):
        assert main(["solve", "--config", str(tmp_path / "none.cfg")]) == EXIT_INVALID

    def test_loader(self, tmp_path):
        cfg = load_solve_config(write(tmp_path / "p.cfg", "s = 1  # start\ne = 3\n"))
        assert cfg == {"s": "1", "e": "3"}
        with pytest.raises(ConfigError):
            load_solve_config(write(tmp_path / "q.cfg", "s = 1\n"))

    @pytest.mark.parametrize("text, value", [("2.5", 2.5), ("pi/2", 1.5707963267948966), ("3pi/2", 4.71238898038469), ("0.5*pi", 1.5707963267948966), ("-pi", -3.141592653589793)])
    def test_eval_number(self, text, value):
        assert eval_number(text) == pytest.approx(value)


class TestChecks:
    def test_gradcheck(self, capsys):
        assert main(["gradcheck", "--m", "8", "--trials", "3"]) == EXIT_OK
        assert capsys.readouterr().out.count("PASS") == 3

    def test_gradcheck_rejects_m(self):
        assert main(["gradcheck", "--m", "12"]) == EXIT_INVALID

    def test_interp_order(self, capsys):
        assert main(["interp-order"]) == EXIT_OK
        assert "sin^3" in capsys.readouterr().out

    def test_help_is_success(self):
        assert main(["--help"]) == EXIT_OK
