import csv
import os

import pytest

from riemctl.cli import main

CONFIG_DIR = os.path.join(os.path.dirname(__file__), "..", "configs")


def run_cli(args):
    return main(args)


class TestSimulate:
    def test_landing_defaults_exit_zero(self, tmp_path, capsys):
        code = run_cli(["simulate", "Landing", "--out", str(tmp_path), "--horizon", "20"])
        out = capsys.readouterr().out
        assert code == 0
        assert "status=horizon" in out
        csv_path = tmp_path / "landing_run.csv"
        assert csv_path.exists()
        assert (tmp_path / "landing_run.png").exists()
        assert (tmp_path / "plot_landing_run.py").exists()
        rows = list(csv.DictReader(open(csv_path)))
        assert all(float(r["q2"]) > 0 for r in rows)

    def test_header_format(self, tmp_path):
        run_cli(["simulate", "Landing", "--out", str(tmp_path), "--horizon", "5"])
        header = open(tmp_path / "landing_run.csv").readline().rstrip("\n")
        assert header == "t,q1,q2,qd1,qd2,u1,E,E_Lf,phi"

    def test_unknown_scenario_usage_error(self, tmp_path, capsys):
        code = run_cli(["simulate", "Atlantis", "--out", str(tmp_path)])
        assert code == 64

    def test_unknown_config_key_rejected(self, tmp_path, capsys):
        cfg = tmp_path / "bad.yaml"
        cfg.write_text("scenario: Landing\nbogus_key: 1\n")
        code = run_cli(["simulate", "--config", str(cfg), "--out", str(tmp_path)])
        assert code == 64

    def test_guard_event_exit_two(self, tmp_path, capsys):
        # a tight position bound trips the escape guard
        cfg = tmp_path / "guard.yaml"
        cfg.write_text(
            "scenario: PoincareBounce\nhorizon: 50.0\n"
            "guards: {position_bound: 3.0}\nlabel: guarded\n")
        code = run_cli(["simulate", "--config", str(cfg), "--out", str(tmp_path)])
        out = capsys.readouterr().out
        assert code == 2
        assert "status=event" in out

    def test_cart_up_kb_zero_flags_bound(self, tmp_path, capsys):
        code = run_cli(["simulate", "PendulumCartUp", "--out", str(tmp_path),
                        "--set", "k_b=0", "--horizon", "20"])
        out = capsys.readouterr().out
        assert code == 0
        assert "z_bound_enforced=False" in out

    def test_cart_up_constrained_reports_bound(self, tmp_path, capsys):
        code = run_cli(["simulate", "--config",
                        os.path.join(CONFIG_DIR, "cart_up_constrained_fig10.yaml"),
                        "--out", str(tmp_path), "--horizon", "20"])
        out = capsys.readouterr().out
        assert code == 0
        assert "z_bound_enforced=True" in out
        zmax = float([l for l in out.splitlines() if l.startswith("z_abs_max=")][0].split("=")[1])
        assert zmax < 1.0

    def test_determinism_byte_identical(self, tmp_path):
        for sub in ("a", "b"):
            os.makedirs(tmp_path / sub)
            run_cli(["simulate", "DiskAvoid", "--out", str(tmp_path / sub),
                     "--horizon", "10", "--seed", "7"])
        b1 = open(tmp_path / "a" / "diskavoid_run.csv", "rb").read()
        b2 = open(tmp_path / "b" / "diskavoid_run.csv", "rb").read()
        assert b1 == b2

    def test_csv_roundtrip_bit_exact(self, tmp_path):
        run_cli(["simulate", "DiskAvoid", "--out", str(tmp_path), "--horizon", "5"])
        path = tmp_path / "diskavoid_run.csv"
        rows = list(csv.DictReader(open(path)))
        # re-render the parsed floats with the same format and compare
        from riemctl.cli import format_float
        with open(path) as fh:
            header = fh.readline()
            for line, row in zip(fh, rows):
                rendered = ",".join(format_float(float(v)) for v in line.rstrip("\n").split(","))
                assert rendered == line.rstrip("\n")


class TestVerify:
    def test_landing_battery_passes(self, capsys):
        code = run_cli(["verify", "Landing"])
        out = capsys.readouterr().out
        assert code == 0
        assert out.count("status=PASS") == 4
        assert "failed=0" in out

    def test_unknown_target(self, capsys):
        assert run_cli(["verify", "Nowhere"]) == 64

    def test_fault_injection_fails(self, capsys):
        code = run_cli(["verify", "Landing", "--fault-gain", "1.01"])
        out = capsys.readouterr().out
        assert code == 1
        assert "thm-equivalence status=FAIL" in out


class TestStability:
    def test_cart_down_conservative(self, capsys):
        code = run_cli(["stability", "PendulumCartDown"])
        out = capsys.readouterr().out
        assert code == 0
        assert "classification=CenterCandidate" in out

    def test_cart_down_damped(self, capsys):
        code = run_cli(["stability", "PendulumCartDown", "--k-d", "0.3"])
        out = capsys.readouterr().out
        assert code == 0
        assert "routh_stable=True" in out

    def test_scenario_without_equilibrium(self, capsys):
        assert run_cli(["stability", "Square"]) == 64


class TestSweep:
    def test_empty_grid_usage_error(self, tmp_path, capsys):
        cfg = tmp_path / "s.yaml"
        cfg.write_text("scenario: Landing\nsweep: {parameter: G, values: []}\n")
        assert run_cli(["sweep", "--config", str(cfg), "--out", str(tmp_path)]) == 64

    def test_escape_sweep_monotone(self, tmp_path, capsys):
        code = run_cli(["sweep", "--config", os.path.join(CONFIG_DIR, "escape_sweep.yaml"),
                        "--out", str(tmp_path)])
        out = capsys.readouterr().out
        assert code == 0
        rows = list(csv.DictReader(open(tmp_path / "escape_sweep.csv")))
        times = [float(r["escape_time"]) for r in rows]
        oracles = [float(r["oracle_time"]) for r in rows]
        assert times[0] > times[1] > times[2]
        for t, o in zip(times, oracles):
            assert abs(t - o) / o < 0.02

    def test_bounce_kappa_sweep(self, tmp_path, capsys):
        code = run_cli(["sweep", "--config", os.path.join(CONFIG_DIR, "bounce_kappa_sweep.yaml"),
                        "--out", str(tmp_path), "--horizon", "20"])
        assert code == 0
        rows = list(csv.DictReader(open(tmp_path / "bounce_kappa_sweep.csv")))
        assert len(rows) == 3
        assert all(r["status"] == "horizon" for r in rows)
        # min altitude shrinks as the bounce metric stiffens (recorded, not a
        # quantitative claim)
        y_min = [float(r["q2_min"]) for r in rows]
        assert y_min[0] > y_min[2]


class TestConfigs:
    @pytest.mark.parametrize("name", [
        "landing_fig1.yaml", "poincare_bounce_fig2.yaml", "poincare_strip_fig3.yaml",
        "square_fig4.yaml", "disk_avoid_fig5.yaml", "disk_bounce_fig6.yaml",
        "cart_down_damped_fig7.yaml", "cart_up_unconstrained_fig9.yaml",
        "cart_up_constrained_fig10.yaml", "cart_up_storage.yaml",
    ])
    def test_checked_in_configs_run(self, name, tmp_path):
        # short-horizon smoke run of every checked-in figure recipe
        code = run_cli(["simulate", "--config", os.path.join(CONFIG_DIR, name),
                        "--out", str(tmp_path), "--horizon", "3"])
        assert code == 0
