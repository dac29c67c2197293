import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from spectempo import cli, linalg


def run_cli(args, cwd):
    return subprocess.run([sys.executable, "-m", "spectempo.cli", *args],
                          cwd=cwd, capture_output=True, text=True)


class TestGenerate:
    def test_deterministic_bytes(self, tmp_path):
        for name in ("a.json", "b.json"):
            r = run_cli(["generate", "--model", "er", "--n", "20", "--p", "0.2",
                         "--seed", "7", "-o", name], tmp_path)
            assert r.returncode == 0, r.stderr
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()

    def test_ba_csv_output(self, tmp_path):
        r = run_cli(["generate", "--model", "ba", "--n", "10", "--m0", "4",
                     "--m", "3", "--seed", "1", "-o", "g.csv"], tmp_path)
        assert r.returncode == 0
        text = (tmp_path / "g.csv").read_text()
        assert text.startswith("# n=10")


class TestInfer:
    def test_k2_edge_csv(self, tmp_path):
        (tmp_path / "k2.json").write_text('{"n": 2, "edges": [[0, 1, 1.0]]}')
        r = run_cli(["infer", "--templates", "exact", "--graph", "k2.json",
                     "--set", "adjacency", "--formulation", "noiseless",
                     "-o", "est"], tmp_path)
        assert r.returncode == 0, r.stderr
        lines = (tmp_path / "est.edges.csv").read_text().strip().splitlines()
        assert lines[0] == "# n=2"
        assert lines[1] == "0,1,1.0"
        d = json.loads((tmp_path / "est.json").read_text())
        assert d["S"]["rows"] == 2

    def test_dump_and_replay(self, tmp_path):
        (tmp_path / "k2.json").write_text('{"n": 2, "edges": [[0, 1, 1.0]]}')
        r = run_cli(["infer", "--templates", "exact", "--graph", "k2.json",
                     "--formulation", "noiseless", "--dump-problem", "prob.json",
                     "-o", "est"], tmp_path)
        assert r.returncode == 0, r.stderr
        r2 = run_cli(["infer", "--replay", "prob.json"], tmp_path)
        assert r2.returncode == 0, r2.stderr
        sol = json.loads(r2.stdout)
        S = np.array(sol["s"]).reshape(2, 2)
        assert abs(S[0, 1] - 1.0) < 1e-6


class TestPipeline:
    def test_diffuse_baseline_certify(self, tmp_path):
        r = run_cli(["generate", "--model", "er", "--n", "8", "--p", "0.5",
                     "--seed", "3", "-o", "g.json"], tmp_path)
        assert r.returncode == 0
        r = run_cli(["diffuse", "--graph", "g.json", "--filter", "poly",
                     "--coeffs", "1,0.5", "--samples", "200", "--seed", "2",
                     "-o", "sig.csv"], tmp_path)
        assert r.returncode == 0, r.stderr
        sig = (tmp_path / "sig.csv").read_text().strip().splitlines()
        assert len(sig) == 200
        r = run_cli(["baseline", "--signals", "sig.csv", "--threshold", "0.3",
                     "-o", "corr.csv"], tmp_path)
        assert r.returncode == 0, r.stderr
        R = linalg.matrix_from_csv((tmp_path / "corr.csv").read_text())
        assert R.shape == (8, 8)
        r = run_cli(["certify", "--templates", "exact", "--graph", "g.json",
                     "--set", "adjacency", "-o", "cert.json"], tmp_path)
        assert r.returncode == 0, r.stderr
        cert = json.loads((tmp_path / "cert.json").read_text())
        assert set(cert) >= {"formulation", "rank_ok", "value", "delta", "guaranteed"}

    def test_sigma_perturbation(self, tmp_path):
        run_cli(["generate", "--model", "er", "--n", "5", "--p", "0.8",
                 "--seed", "1", "-o", "g.json"], tmp_path)
        r = run_cli(["diffuse", "--graph", "g.json", "--filter", "poly",
                     "--coeffs", "1", "--samples", "50", "--sigma", "0.1",
                     "--seed", "4", "-o", "s.csv"], tmp_path)
        assert r.returncode == 0


class TestDeconvolve:
    def test_synthetic_fraction_csv(self, tmp_path):
        rng = np.random.default_rng(0)
        from spectempo.graphs import generate_er, adjacency
        g = generate_er(12, 0.3, 5)
        S = adjacency(g).matrix
        S = S * (0.5 / max(np.linalg.svd(S, compute_uv=False)[0], 1e-9))
        T = S @ np.linalg.inv(np.eye(12) - S)
        (tmp_path / "dense.csv").write_text(linalg.matrix_to_csv(T))
        (tmp_path / "truth.csv").write_text(linalg.matrix_to_csv(S))
        r = run_cli(["deconvolve", "--in", "dense.csv", "--truth", "truth.csv",
                     "--eps", "1.0", "--top-k", "10,20", "-o", "out.csv"], tmp_path)
        assert r.returncode == 0, r.stderr
        lines = (tmp_path / "out.csv").read_text().strip().splitlines()
        assert len(lines) == 3  # header + 2 rows
        assert "frac_deconvolution" in lines[0]
        assert "frac_spectemp" in lines[0]


class TestBenchmark:
    def test_feasibility_experiment_and_replay(self, tmp_path):
        cfg = {"experiment": "fig1-feasibility", "n_list": [6], "p_list": [0.4],
               "seeds": list(range(5)), "output": "bench.csv"}
        (tmp_path / "cfg.json").write_text(json.dumps(cfg))
        r = run_cli(["benchmark", "--config", "cfg.json"], tmp_path)
        assert r.returncode == 0, r.stderr
        first = (tmp_path / "bench.csv").read_bytes()
        assert (tmp_path / "bench.summary.csv").exists()
        r = run_cli(["benchmark", "--config", "cfg.json"], tmp_path)
        assert r.returncode == 0
        assert (tmp_path / "bench.csv").read_bytes() == first

    def test_rows_carry_seed_and_hash(self, tmp_path):
        cfg = {"experiment": "fig1-feasibility", "n_list": [5], "p_list": [0.5],
               "seeds": [0, 1], "output": "b.csv"}
        (tmp_path / "cfg.json").write_text(json.dumps(cfg))
        run_cli(["benchmark", "--config", "cfg.json"], tmp_path)
        header = (tmp_path / "b.csv").read_text().splitlines()[0]
        assert "seed" in header and "config_hash" in header

    def test_print_config(self, tmp_path):
        r = run_cli(["benchmark", "--experiment", "fig1-feasibility",
                     "--print-config"], tmp_path)
        assert r.returncode == 0
        assert "config_hash" in json.loads(r.stdout)


class TestErrors:
    def test_missing_file_exit_1(self, tmp_path):
        r = run_cli(["infer", "--templates", "exact", "--graph", "missing.json"],
                    tmp_path)
        assert r.returncode == 1

    def test_bad_config_exit_3(self, tmp_path):
        (tmp_path / "cfg.json").write_text('{"experiment": "nope"}')
        r = run_cli(["benchmark", "--config", "cfg.json"], tmp_path)
        assert r.returncode == 3

    def test_json_error_format(self, tmp_path):
        r = run_cli(["--json", "infer", "--templates", "exact",
                     "--graph", "missing.json"], tmp_path)
        assert r.returncode == 1
        err = json.loads(r.stderr.strip().splitlines()[-1])
        assert err["exit_code"] == 1

    def test_infeasible_exit_2(self, tmp_path):
        # templates of one graph with pinned known entries of another scale
        (tmp_path / "k2.json").write_text('{"n": 2, "edges": [[0, 1, 1.0]]}')
        # normalized laplacian of a 2-node graph with an isolated node is a
        # config error surfaced before solving
        (tmp_path / "iso.json").write_text('{"n": 3, "edges": [[0, 1, 1.0]]}')
        r = run_cli(["infer", "--templates", "exact", "--graph", "iso.json",
                     "--set", "normalized-laplacian"], tmp_path)
        assert r.returncode == 3
