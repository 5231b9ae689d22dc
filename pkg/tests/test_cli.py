"""Command-line front end tests: config handling, artifacts, determinism."""

import json
from pathlib import Path

import numpy as np
import pytest

from switchopt import cli
from switchopt.exceptions import ConfigError


def fast_overrides(out, problem="three-tank", method="meocp", nodes=30):
    return {
        "problem": problem,
        "method": method,
        "nodes": nodes,
        "tf": 4.0,
        "dt": 0.05,
        "grid": 30,
        "max_insertions": 6,
        "inner_iters": 150,
        "outer_iters": 8,
        "out": str(out),
        "seed": 0,
    }


def read_csv(path):
    lines = Path(path).read_text().strip().splitlines()
    return lines[0].split(","), [ln.split(",") for ln in lines[1:]]


class TestConfig:
    def test_unknown_key_named_in_error(self, tmp_path):
        cfg_file = tmp_path / "cfg.json"
        cfg_file.write_text(json.dumps({"alhpa": 0.5}))
        with pytest.raises(ConfigError, match="alhpa"):
            cli.load_config(str(cfg_file), {})

    def test_unknown_key_exits_nonzero(self, tmp_path, capsys):
        cfg_file = tmp_path / "cfg.json"
        cfg_file.write_text(json.dumps({"alhpa": 0.5}))
        code = cli.main(["run", "--config", str(cfg_file)])
        assert code == 2
        assert "alhpa" in capsys.readouterr().err

    def test_flags_override_file(self, tmp_path):
        cfg_file = tmp_path / "cfg.json"
        cfg_file.write_text(json.dumps({"nodes": 77, "method": "mig"}))
        cfg = cli.load_config(str(cfg_file), {"nodes": 55})
        assert cfg.nodes == 55
        assert cfg.method == "mig"

    def test_unknown_method_rejected(self):
        with pytest.raises(ConfigError):
            cli.load_config(None, {"method": "magic"})

    def test_worker_env(self, monkeypatch):
        monkeypatch.setenv("SWITCHOPT_WORKERS", "3")
        cfg = cli.load_config(None, {})
        assert cfg.workers == 3

    def test_unknown_problem_named(self):
        cfg = cli.load_config(None, {"problem": "no-such-problem"})
        with pytest.raises(ConfigError, match="no-such-problem"):
            cli.run(cfg)


@pytest.fixture(scope="module")
def both_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("both")
    cfg = cli.load_config(None, fast_overrides(out, method="both"))
    paths = cli.run(cfg)
    return cfg, paths


class TestRunArtifacts:
    def test_files_exist(self, both_run):
        _, paths = both_run
        for name in ("trajectory.csv", "schedule.csv", "summary.json", "comparison.json"):
            assert name in paths and Path(paths[name]).exists()

    def test_trajectory_csv_shape(self, both_run):
        cfg, paths = both_run
        header, rows = read_csv(paths["trajectory.csv"])
        assert header == ["t", "x0", "x1", "x2", "v0", "v1", "q", "running_cost"]
        assert len(rows) == cfg.nodes + 1
        assert all(len(r) == len(header) for r in rows)

    def test_precision_at_least_12_digits(self, both_run):
        _, paths = both_run
        _, rows = read_csv(paths["trajectory.csv"])
        # a third-tank level away from its target carries a long mantissa
        candidates = [r[3] for r in rows if len(r[3].split(".")[-1]) >= 12]
        assert candidates, "expected full-precision decimal output"

    def test_schedule_csv(self, both_run):
        _, paths = both_run
        header, rows = read_csv(paths["schedule.csv"])
        assert header == ["tau_start", "tau_end", "q"]
        taus = [float(r[0]) for r in rows] + [float(rows[-1][1])]
        assert all(b > a for a, b in zip(taus, taus[1:]))
        assert all(int(r[2]) in range(4) for r in rows)

    def test_summary_content(self, both_run):
        cfg, paths = both_run
        summary = json.loads(Path(paths["summary.json"]).read_text())
        assert summary["method"] == "meocp"
        assert set(summary["q_values"]) <= {0, 1, 2, 3}
        assert summary["config"]["nodes"] == cfg.nodes
        assert "wall_time_s" in summary["timing"]
        assert summary["penalty_residual"] >= 0.0
        assert 0.0 <= summary["bang_bang_fraction"] <= 1.0

    def test_comparison_content(self, both_run):
        _, paths = both_run
        comparison = json.loads(Path(paths["comparison.json"]).read_text())
        assert "meocp" in comparison and "mig" in comparison
        assert comparison["meocp"]["cost"] > 0
        assert comparison["mig"]["cost"] > 0


class TestRendezvousRun:
    def test_q_values_within_valid_set(self, tmp_path):
        overrides = fast_overrides(tmp_path, problem="rendezvous", nodes=40)
        overrides["tf"] = 1.5
        cfg = cli.load_config(None, overrides)
        paths = cli.run(cfg)
        summary = json.loads(Path(paths["summary.json"]).read_text())
        assert set(summary["q_values"]) <= {0, 1, 2, 3, 4}


class TestDeterminism:
    def test_summary_bytes_reproducible(self, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        for out in (out1, out2):
            over = fast_overrides(out)
            cfg = cli.load_config(None, over)
            cli.run(cfg)

        def canonical(path):
            data = json.loads((path / "summary.json").read_text())
            data.pop("timing")
            data["config"].pop("out")
            return json.dumps(data, sort_keys=True)

        assert canonical(out1) == canonical(out2)


class TestFailureCleanup:
    def test_partial_outputs_removed(self, tmp_path, monkeypatch):
        cfg = cli.load_config(None, fast_overrides(tmp_path / "fail"))

        def boom(path, payload):
            raise RuntimeError("disk is full of regret")

        monkeypatch.setattr(cli, "_write_json", boom)
        with pytest.raises(RuntimeError):
            cli.run(cfg)
        out = tmp_path / "fail"
        assert not list(out.glob("*.csv")) and not list(out.glob("*.json"))


class TestCustomProblemFile:
    def test_python_problem_module(self, tmp_path):
        module = tmp_path / "my_problem.py"
        module.write_text(
            "import numpy as np\n"
            "import switchopt as so\n"
            "\n"
            "def make_problem():\n"
            "    def f0(t, x, u):\n"
            "        return -np.asarray(x, dtype=float)\n"
            "    def f1(t, x, u):\n"
            "        return -2.0 * np.asarray(x, dtype=float) + 1.0\n"
            "    def cost(t, x, u):\n"
            "        return np.sum(np.asarray(x) ** 2, axis=-1)\n"
            "    problem = so.SwitchedProblem(\n"
            "        mode_count=2, state_dim=1, control_dim=0,\n"
            "        dynamics=[f0, f1], running_costs=[cost, cost],\n"
            "        t0=0.0, tf=1.0, x0=np.array([1.0]), batched=True)\n"
            "    return problem, so.EmbeddingConfig.for_modes(2, alpha=0.05)\n"
        )
        overrides = {
            "problem": str(module),
            "nodes": 20,
            "out": str(tmp_path / "custom"),
            "inner_iters": 100,
            "outer_iters": 5,
        }
        cfg = cli.load_config(None, overrides)
        paths = cli.run(cfg)
        summary = json.loads(Path(paths["summary.json"]).read_text())
        assert set(summary["q_values"]) <= {0, 1}


class TestVerify:
    def test_run_checks_reports_failure_by_name(self, capsys):
        def corrupted(seed):
            return False, "gradient check corrupted by the test fixture"

        results = cli.run_checks(
            [("partition-of-unity", cli.check_partition_of_unity),
             ("corrupted-gradient-check", corrupted)]
        )
        out = capsys.readouterr().out
        assert "FAIL" in out and "corrupted-gradient-check" in out
        assert not all(r.passed for r in results)

    def test_crashing_check_is_reported_failed(self, capsys):
        def crashes(seed):
            raise RuntimeError("synthetic breakage")

        results = cli.run_checks([("explosive", crashes)])
        assert results[0].passed is False
        assert "explosive" in capsys.readouterr().out

    def test_fast_suite_passes(self, capsys):
        assert cli.verify("fast") is True
        out = capsys.readouterr().out
        assert "partition-of-unity" in out
        assert "FAIL" not in out

    def test_verify_exit_codes(self, capsys):
        assert cli.main(["verify", "fast"]) == 0

    def test_full_suite_passes_within_budget(self, capsys):
        import time

        start = time.perf_counter()
        assert cli.verify("full") is True
        elapsed = time.perf_counter() - start
        assert elapsed < 300.0
        assert "brute-force-oracle" in capsys.readouterr().out
