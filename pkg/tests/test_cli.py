"""End-to-end tests for the command line pipeline and its exit codes."""

import json
import math

import pytest

from symilp import data_io
from symilp.cli import main

MICRO = {
    "bpp": {"num_instances": 6, "num_items": 4, "num_bins": 4,
            "capacity": 9, "seed": 3},
    "train": {"epochs": 3, "hidden": 16, "lr": 7e-3, "batch_size": 4},
    "schemes": ["noaug", "orbit"],
    "seeds": [0],
    "train_draws": 2,
}


@pytest.fixture()
def micro_cfg(tmp_path):
    path = tmp_path / "micro.json"
    path.write_text(json.dumps(MICRO))
    return str(path)


def run_pipeline(out, cfg):
    for cmd in ("gen", "detect", "train", "eval"):
        code = main([cmd, "--out", str(out), "--config", cfg])
        assert code == 0, f"{cmd} exited {code}"


class TestPipeline:
    def test_full_pipeline_artifacts(self, tmp_path, micro_cfg):
        out = tmp_path / "run"
        run_pipeline(out, micro_cfg)

        manifest = data_io.read_json(out / "manifest.json")
        assert manifest["count"] == 6
        assert len(manifest["files"]) == 6
        assert (out / "instances" / "inst_0005.json").exists()
        assert (out / "symmetry" / "symm_0005.json").exists()

        timing = (out / "symmetry" / "timing.csv").read_text().splitlines()
        assert timing[0] == "instance,n,log10_order,seconds"
        assert len(timing) == 7
        # bin swaps alone give a group of at least num_bins! on every instance
        floor = math.log10(math.factorial(MICRO["bpp"]["num_bins"]))
        for line in timing[1:]:
            assert float(line.split(",")[2]) >= floor - 1e-9

        losses = (out / "losses.csv").read_text().splitlines()
        assert losses[0] == "scheme,seed,epoch,train_loss,val_loss"
        assert len(losses) == 1 + 2 * MICRO["train"]["epochs"]

        metrics = (out / "metrics.csv").read_text().splitlines()
        assert metrics[0].startswith("instance,scheme,seed,top30,top50,top70,top90")
        report = (out / "report.md").read_text()
        assert "| noaug |" in report and "| orbit |" in report

        assert (out / "checkpoints" / "noaug_s0.ckpt").exists()
        assert (out / "checkpoints" / "orbit_s0.ckpt").exists()

    def test_verify_passes_on_intact_dataset(self, tmp_path, micro_cfg, capsys):
        out = tmp_path / "run"
        run_pipeline(out, micro_cfg)
        assert main(["verify", "--out", str(out), "--config", micro_cfg]) == 0
        seen = capsys.readouterr().out
        assert "all checks passed" in seen
        assert "FAIL" not in seen

    def test_repeat_runs_byte_identical(self, tmp_path, micro_cfg):
        a, b = tmp_path / "a", tmp_path / "b"
        run_pipeline(a, micro_cfg)
        run_pipeline(b, micro_cfg)
        for name in ("metrics.csv", "losses.csv", "report.md", "manifest.json",
                     "instances/inst_0003.json"):
            assert (a / name).read_bytes() == (b / name).read_bytes(), name

    def test_eval_rerun_deterministic(self, tmp_path, micro_cfg):
        out = tmp_path / "run"
        run_pipeline(out, micro_cfg)
        first = (out / "metrics.csv").read_bytes()
        assert main(["eval", "--out", str(out), "--config", micro_cfg]) == 0
        assert (out / "metrics.csv").read_bytes() == first


class TestGen:
    def test_count_zero_writes_empty_manifest(self, tmp_path):
        out = tmp_path / "empty"
        assert main(["gen", "--out", str(out), "--count", "0"]) == 0
        manifest = data_io.read_json(out / "manifest.json")
        assert manifest["count"] == 0
        assert manifest["files"] == []

    def test_negative_count_is_usage_error(self, tmp_path):
        assert main(["gen", "--out", str(tmp_path / "x"), "--count", "-1"]) == 1

    def test_seed_flag_beats_config_file(self, tmp_path, micro_cfg):
        out = tmp_path / "run"
        assert main(["gen", "--out", str(out), "--config", micro_cfg,
                     "--seed", "9", "--count", "2"]) == 0
        cfg = data_io.read_json(out / "config.json")
        assert cfg["bpp"]["seed"] == 9
        assert cfg["bpp"]["num_instances"] == 2

    def test_unknown_config_key_rejected(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"bppp": {}}))
        assert main(["gen", "--out", str(tmp_path / "x"), "--config", str(bad)]) == 1

    def test_unknown_scheme_rejected(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"schemes": ["orbitish"]}))
        assert main(["gen", "--out", str(tmp_path / "x"), "--config", str(bad)]) == 1

    def test_exhausted_solve_budget_exits_3(self, tmp_path):
        bad = tmp_path / "tiny_budget.json"
        doc = dict(MICRO)
        doc["bpp"] = dict(MICRO["bpp"], node_budget=1, num_instances=2)
        bad.write_text(json.dumps(doc))
        assert main(["gen", "--out", str(tmp_path / "x"), "--config", str(bad)]) == 3


class TestDetect:
    def test_missing_manifest_is_error(self, tmp_path):
        assert main(["detect", "--out", str(tmp_path / "nowhere")]) == 1

    def test_idempotent_skip(self, tmp_path, micro_cfg, capsys):
        out = tmp_path / "run"
        assert main(["gen", "--out", str(out), "--config", micro_cfg]) == 0
        assert main(["detect", "--out", str(out), "--config", micro_cfg]) == 0
        capsys.readouterr()
        sidecar = out / "symmetry" / "symm_0000.json"
        before = sidecar.read_bytes()
        assert main(["detect", "--out", str(out), "--config", micro_cfg]) == 0
        assert "skipped 6" in capsys.readouterr().out
        assert sidecar.read_bytes() == before

    def test_missing_instance_file_is_error(self, tmp_path, micro_cfg):
        out = tmp_path / "run"
        assert main(["gen", "--out", str(out), "--config", micro_cfg]) == 0
        (out / "instances" / "inst_0002.json").unlink()
        assert main(["detect", "--out", str(out), "--config", micro_cfg]) == 1


class TestTrainEval:
    def test_train_without_detect_is_error(self, tmp_path, micro_cfg):
        out = tmp_path / "run"
        assert main(["gen", "--out", str(out), "--config", micro_cfg]) == 0
        assert main(["train", "--out", str(out), "--config", micro_cfg]) == 1

    def test_eval_without_checkpoints_is_error(self, tmp_path, micro_cfg):
        out = tmp_path / "run"
        assert main(["gen", "--out", str(out), "--config", micro_cfg]) == 0
        assert main(["detect", "--out", str(out), "--config", micro_cfg]) == 0
        assert main(["eval", "--out", str(out), "--config", micro_cfg]) == 1

    def test_eval_empty_scheme_list_is_error(self, tmp_path, micro_cfg):
        out = tmp_path / "run"
        run_pipeline(out, micro_cfg)
        empty = out / "empty.json"
        empty.write_text(json.dumps({"schemes": []}))
        assert main(["eval", "--out", str(out), "--config", str(empty)]) == 1

    def test_scheme_flag_narrows_run(self, tmp_path, micro_cfg):
        out = tmp_path / "run"
        assert main(["gen", "--out", str(out), "--config", micro_cfg]) == 0
        assert main(["detect", "--out", str(out), "--config", micro_cfg]) == 0
        assert main(["train", "--out", str(out), "--config", micro_cfg,
                     "--scheme", "orbit"]) == 0
        assert (out / "checkpoints" / "orbit_s0.ckpt").exists()
        assert not (out / "checkpoints" / "noaug_s0.ckpt").exists()
        assert main(["eval", "--out", str(out), "--config", micro_cfg,
                     "--scheme", "orbit"]) == 0
        lines = (out / "metrics.csv").read_text().splitlines()[1:]
        assert lines and all(",orbit," in line for line in lines)


class TestVerify:
    def test_corrupted_label_exits_2(self, tmp_path, micro_cfg):
        out = tmp_path / "run"
        run_pipeline(out, micro_cfg)
        path = out / "instances" / "inst_0000.json"
        doc = data_io.read_json(path)
        doc["solution"]["values"][0] += 1.0
        path.write_text(json.dumps(doc))
        assert main(["verify", "--out", str(out), "--config", micro_cfg]) == 2

    def test_corrupted_generator_exits_2(self, tmp_path, micro_cfg):
        out = tmp_path / "run"
        run_pipeline(out, micro_cfg)
        path = out / "symmetry" / "symm_0000.json"
        doc = data_io.read_json(path)
        gens = doc["generators"]
        assert gens, "expected at least one symmetry generator"
        pi = gens[0]["pi"]
        # swap the images of the first two variables to break the symmetry
        pi[0], pi[1] = pi[1], pi[0]
        path.write_text(json.dumps(doc))
        assert main(["verify", "--out", str(out), "--config", micro_cfg]) == 2
