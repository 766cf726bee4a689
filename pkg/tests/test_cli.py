"""CLI and pipeline-stage tests on a fast profile of the synthetic corpus."""

import csv
import json
import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from mdmx import pipeline
from mdmx.cli import main as cli_main
from mdmx.config import PipelineConfig
from mdmx.errors import InvalidInput


def fast_config(seed=7):
    cfg = PipelineConfig()
    cfg.seed = seed
    cfg.synth.n_countries = 6
    cfg.synth.n_years = 70
    cfg.data.n_ages = 60
    cfg.data.flat_age_pair = (55, 59)
    cfg.cluster.k_min = 2
    cfg.cluster.k_max = 4
    cfg.trajectory.nn_epochs = 30
    cfg.disruption.core_epochs = 400
    cfg.disruption.sg_window = 9
    cfg.svdcomp.epochs = 40
    cfg.forecast.n_origins = 1
    cfg.forecast.horizon = 8
    cfg.forecast.mle_max_iter = 15
    return cfg


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    cfg = fast_config()
    workdir = tmp_path_factory.mktemp("cli-work")
    pipeline.run_synth(cfg, workdir)
    pipeline.run_ingest(cfg, workdir)
    pipeline.run_pool(cfg, workdir)
    pipeline.run_tensor(cfg, workdir)
    pipeline.run_decompose(cfg, workdir)
    pipeline.run_cluster(cfg, workdir)
    pipeline.run_trajectory(cfg, workdir)
    pipeline.run_disruption(cfg, workdir)
    pipeline.run_train_indicators(cfg, workdir)
    return cfg, workdir


class TestConfig:
    def test_round_trip(self, tmp_path):
        cfg = fast_config()
        cfg.save(tmp_path / "c.json")
        back = PipelineConfig.load(tmp_path / "c.json")
        assert back.to_dict() == cfg.to_dict()
        assert back.config_hash() == cfg.config_hash()

    def test_unknown_keys_rejected(self, tmp_path):
        payload = PipelineConfig().to_dict()
        payload["bogus_key"] = 1
        (tmp_path / "c.json").write_text(json.dumps(payload))
        with pytest.raises(InvalidInput):
            PipelineConfig.load(tmp_path / "c.json")

    def test_unknown_nested_key_rejected(self, tmp_path):
        payload = PipelineConfig().to_dict()
        payload["tucker"]["bogus"] = 1
        (tmp_path / "c.json").write_text(json.dumps(payload))
        with pytest.raises(InvalidInput):
            PipelineConfig.load(tmp_path / "c.json")

    def test_partial_config_fills_defaults(self, tmp_path):
        (tmp_path / "c.json").write_text(json.dumps({"seed": 42}))
        cfg = PipelineConfig.load(tmp_path / "c.json")
        assert cfg.seed == 42
        assert cfg.tucker.tau == 0.9999


class TestStages:
    def test_stores_exist(self, workspace):
        _, workdir = workspace
        for store in ["data/lifetables.csv", "data/curated.csv", "data/pooled.csv",
                      "tensor", "tucker", "clusters", "grids", "neural_trajectory",
                      "disruption", "indicators_one", "indicators_two"]:
            assert (Path(workdir) / store).exists(), store

    def test_run_logs_have_hashes(self, workspace):
        _, workdir = workspace
        log = json.loads((Path(workdir) / "logs" / "decompose.json").read_text())
        assert "config_hash" in log
        assert "tensor" in log["inputs"]
        assert log["elapsed_seconds"] >= 0

    def test_missing_store_raises(self, tmp_path):
        cfg = fast_config()
        with pytest.raises(pipeline.MissingStore):
            pipeline.run_decompose(cfg, tmp_path)

    def test_fit_batch_csv_round_trip(self, workspace, tmp_path):
        cfg, workdir = workspace
        problem = pipeline.load_fit_problem(cfg, workdir)
        from mdmx.trajectory import reconstruct_at

        rng = np.random.default_rng(0)
        grid = problem.grids[0]
        lo, hi = grid.e0_range
        rows = []
        for i in range(4):
            e0 = float(rng.uniform(lo + 2, hi - 2))
            rows.append(reconstruct_at(grid, e0, refine=True))
        in_csv = tmp_path / "schedules.csv"
        with open(in_csv, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["id"] + [f"z{i}" for i in range(len(rows[0]))])
            for i, row in enumerate(rows):
                writer.writerow([f"s{i}"] + [f"{v:.12g}" for v in row])
        out_csv = tmp_path / "fits.csv"
        pipeline.run_fit(cfg, workdir, in_csv, out_csv)
        with open(out_csv) as fh:
            fits = list(csv.DictReader(fh))
        assert len(fits) == len(rows)
        assert {f["id"] for f in fits} == {f"s{i}" for i in range(4)}

    def test_predict_writes_lifetable(self, workspace, tmp_path):
        cfg, workdir = workspace
        out = tmp_path / "lt.csv"
        qx, variant = pipeline.run_predict(cfg, workdir, 0.05, 0.06, out_csv=out)
        assert variant == "one"
        assert np.all((qx > 0) & (qx < 1))
        with open(out) as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 2 * cfg.data.n_ages
        assert {r["sex"] for r in rows} == {"f", "m"}


class TestCliInterface:
    def test_exit_code_2_missing_store(self, tmp_path):
        code = cli_main(["--workdir", str(tmp_path / "empty"), "decompose"])
        assert code == 2

    def test_exit_code_3_bad_config(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text('{"bogus": 1}')
        code = cli_main(["--config", str(bad), "--workdir", str(tmp_path), "synth"])
        assert code == 3

    def test_synth_via_cli(self, tmp_path):
        cfg = fast_config()
        cfg_path = tmp_path / "cfg.json"
        cfg.save(cfg_path)
        code = cli_main(
            ["--config", str(cfg_path), "--workdir", str(tmp_path / "w"), "synth"]
        )
        assert code == 0
        assert (tmp_path / "w" / "data" / "lifetables.csv").exists()

    def test_console_entry_point(self):
        result = subprocess.run(
            [sys.executable, "-m", "mdmx.cli", "--help"],
            capture_output=True,
            text=True,
        )
        assert result.returncode == 0
        assert "synth" in result.stdout


class TestDeterminism:
    def test_stage_rerun_bit_identical(self, workspace, tmp_path):
        # rerunning synth..tensor with the same seed reproduces store bytes
        cfg, workdir = workspace
        other = tmp_path / "rerun"
        pipeline.run_synth(cfg, other)
        pipeline.run_ingest(cfg, other)
        pipeline.run_pool(cfg, other)
        pipeline.run_tensor(cfg, other)
        for rel in ["data/lifetables.csv", "data/pooled.csv"]:
            assert (Path(workdir) / rel).read_bytes() == (other / rel).read_bytes()
        for rel in ["tensor/values.npy", "tensor/observed.npy", "tensor/manifest.json"]:
            assert (Path(workdir) / rel).read_bytes() == (other / rel).read_bytes()
