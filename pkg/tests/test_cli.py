import json

import numpy as np
import pytest
import yaml
from PIL import Image

from src.jiif.checkpoint import Checkpoint, model_state_of, save_checkpoint
from src.jiif.cli import RESOLVED_CONFIG, RUN_LOG, build_parser, check_noise_domain, main, resolve_config_path
from src.jiif.exceptions import EXIT_CONFIG_ERROR, EXIT_DATA_ERROR, EXIT_OK, ConfigError
from src.jiif.model import build_model


@pytest.fixture
def common(tiny_config_path, tmp_path):
    """Flags pointing a command at the tiny config and the test's temporary directory."""
    return [
        "--config", str(tiny_config_path),
        "--output-dir", str(tmp_path / "runs"),
        "--data-root", str(tmp_path / "data"),
    ]


@pytest.fixture
def trained_run(common, tmp_path):
    assert main(["train", *common, "--run-name", "trained"]) == EXIT_OK
    return tmp_path / "runs" / "trained"


class TestParser:
    def test_help_lists_flags(self, capsys):
        with pytest.raises(SystemExit) as exc:
            build_parser().parse_args(["train", "--help"])
        assert exc.value.code == 0
        out = capsys.readouterr().out
        for flag in ("--scale", "--noise-sigma", "--epochs", "--lr", "--strategy", "--no-residual", "--seed"):
            assert flag in out

    def test_flags_map_to_dotted_keys(self):
        args = build_parser().parse_args(["eval", "--scales", "4,8", "--dataset", "lu,middlebury", "--baseline", "bicubic"])
        assert vars(args)["eval.scales"] == [4, 8]
        assert vars(args)["eval.datasets"] == ["lu", "middlebury"]

    def test_bad_flag_value_exits_two(self):
        with pytest.raises(SystemExit) as exc:
            main(["eval", "--scales", "four"])
        assert exc.value.code == 2

    def test_bundled_config_names_resolve(self):
        assert resolve_config_path("synthetic_desk").name == "synthetic_desk.yaml"
        with pytest.raises(ConfigError):
            resolve_config_path("no_such_config")


class TestPrepareData:
    def test_synth_writes_splits(self, tmp_path, capsys):
        code = main(["prepare-data", "synth", "--data-root", str(tmp_path / "data"), "--count", "2", "--size", "16"])
        assert code == EXIT_OK
        assert sorted(p.name for p in (tmp_path / "data" / "synthetic").iterdir()) == ["test", "train"]
        assert "train:" in capsys.readouterr().out

    def test_convert_missing_source_is_data_error(self, tmp_path):
        code = main(["prepare-data", "convert", "--source", str(tmp_path / "none"), "--dataset", "lu",
                     "--data-root", str(tmp_path / "data")])
        assert code == EXIT_DATA_ERROR


class TestTrain:
    def test_one_epoch_writes_run_artifacts(self, trained_run):
        assert (trained_run / "ckpt_1").is_file()
        assert (trained_run / "latest").read_text().strip() == "ckpt_1"
        assert (trained_run / RUN_LOG).is_file()
        resolved = yaml.safe_load((trained_run / RESOLVED_CONFIG).read_text())
        assert resolved["run_name"] == "trained" and resolved["train"]["epochs"] == 1

    def test_flags_override_config(self, common, tmp_path):
        assert main(["train", *common, "--run-name", "flags", "--epochs", "2", "--checkpoint-every", "2"]) == EXIT_OK
        run_dir = tmp_path / "runs" / "flags"
        assert (run_dir / "ckpt_2").is_file()
        assert yaml.safe_load((run_dir / RESOLVED_CONFIG).read_text())["train"]["epochs"] == 2

    def test_invalid_config_exits_two(self, config_file, tmp_path):
        path = config_file("train:\n  epochs: 0\n")
        assert main(["train", "--config", str(path), "--output-dir", str(tmp_path / "runs")]) == EXIT_CONFIG_ERROR

    def test_missing_config_exits_two(self, tmp_path):
        assert main(["train", "--config", str(tmp_path / "absent.yaml")]) == EXIT_CONFIG_ERROR


class TestEval:
    def test_bicubic_baseline(self, common, tmp_path, capsys):
        assert main(["eval", *common, "--baseline", "bicubic", "--scales", "2,4"]) == EXIT_OK
        out_dir = tmp_path / "runs" / "jiif" / "eval_bicubic"
        report = json.loads((out_dir / "report.json").read_text())
        assert [entry["scale"] for entry in report["entries"]] == [2, 4]
        assert "synthetic x4" in capsys.readouterr().out

    def test_checkpoint_with_maps(self, common, trained_run, tmp_path):
        code = main(["eval", *common, "--checkpoint", str(trained_run), "--save-maps", "--limit", "1"])
        assert code == EXIT_OK
        out_dir = tmp_path / "runs" / "jiif" / "eval_jiif"
        assert (out_dir / "table.txt").is_file()
        assert list((out_dir / "maps" / "synthetic" / "x4").glob("*_error.png"))

    def test_missing_checkpoint_exits_three(self, common, tmp_path):
        assert main(["eval", *common, "--checkpoint", str(tmp_path / "missing")]) == EXIT_DATA_ERROR

    def test_needs_checkpoint_or_baseline(self, common):
        assert main(["eval", *common]) == EXIT_CONFIG_ERROR

    def test_missing_dataset_exits_three(self, common):
        assert main(["eval", *common, "--baseline", "bicubic", "--dataset", "lu"]) == EXIT_DATA_ERROR

    def test_depth_noise_on_disparity_is_flagged(self, make_run_config):
        noisy_middlebury = {"datasets": ["middlebury_noisy"]}
        depth_domain = make_run_config(degradation={"noise_sigma": 651.0}, eval=noisy_middlebury)
        inverse_domain = make_run_config(
            degradation={"noise_sigma": 651.0, "noise_domain": "inverse"}, eval=noisy_middlebury
        )
        assert check_noise_domain(depth_domain)
        assert not check_noise_domain(inverse_domain)
        assert not check_noise_domain(make_run_config(degradation={"noise_sigma": 0.04}))
        assert not check_noise_domain(make_run_config(eval=noisy_middlebury))


class TestInfer:
    def test_dataset_pair_with_weight_dump(self, common, trained_run, tmp_path):
        out = tmp_path / "infer"
        code = main(["infer", *common, "--checkpoint", str(trained_run), "--dataset", "synthetic",
                     "--dump-weights", "3,4", "--out", str(out)])
        assert code == EXIT_OK
        assert len(list(out.glob("*_error.png"))) == 2
        dump = yaml.safe_load(next(out.glob("*_weights_3_4.yaml")).read_text())
        assert len(dump["corners"]) == 4
        assert sum(corner["weight"] for corner in dump["corners"]) == pytest.approx(1.0, abs=1e-5)
        assert next(out.glob("*_weights_3_4.png")).is_file()

    def test_files_on_disk(self, common, trained_run, tmp_path):
        rng = np.random.default_rng(0)
        Image.fromarray(rng.integers(0, 256, size=(32, 32, 3), dtype=np.uint8)).save(tmp_path / "scene_rgb.png")
        np.save(tmp_path / "scene_depth.npy", rng.uniform(50.0, 300.0, size=(32, 32)))
        out = tmp_path / "infer"
        code = main(["infer", *common, "--checkpoint", str(trained_run), "--rgb", str(tmp_path / "scene_rgb.png"),
                     "--depth", str(tmp_path / "scene_depth.npy"), "--out", str(out)])
        assert code == EXIT_OK
        assert (out / "scene_depth_pred.png").is_file()
        assert (out / "scene_depth_bicubic_error.png").is_file()

    def test_needs_an_input(self, common, trained_run):
        assert main(["infer", *common, "--checkpoint", str(trained_run)]) == EXIT_CONFIG_ERROR


class TestDemoAndAblate:
    def test_demo(self, common, tmp_path, capsys):
        assert main(["demo", *common, "--steps", "2"]) == EXIT_OK
        run_dir = tmp_path / "runs" / "jiif"
        assert (run_dir / "eval_bicubic" / "report.json").is_file()
        assert (run_dir / "eval_jiif" / "report.json").is_file()
        assert list((run_dir / "maps" / "jiif").rglob("*_error.png"))
        out = capsys.readouterr().out
        assert "Bicubic" in out and "JIIF" in out

    def test_ablate(self, common, tmp_path):
        code = main(["ablate", *common, "--max-steps", "1", "--synthetic-count", "1"])
        assert code == EXIT_OK
        run_dir = tmp_path / "runs" / "jiif"
        rows = json.loads((run_dir / "ablation.json").read_text())["rows"]
        assert len(rows) == 7
        assert "*" in (run_dir / "ablation.txt").read_text()


class TestCommandConfigurations:
    def test_ablation_row_flags(self, common, tmp_path):
        assert main(["train", *common, "--run-name", "baseline_row", "--no-residual", "--mode", "separate",
                     "--max-steps", "1"]) == EXIT_OK
        model = yaml.safe_load((tmp_path / "runs" / "baseline_row" / RESOLVED_CONFIG).read_text())["model"]
        assert (model["mode"], model["weight_strategy"], model["use_residual"]) == ("separate", "graph_attention", False)

        assert main(["train", *common, "--run-name", "bilinear_row", "--strategy", "bilinear",
                     "--max-steps", "1"]) == EXIT_OK
        model = yaml.safe_load((tmp_path / "runs" / "bilinear_row" / RESOLVED_CONFIG).read_text())["model"]
        assert (model["mode"], model["weight_strategy"]) == ("value_only", "bilinear")

    def test_zero_decoder_checkpoint_scores_as_bicubic(self, common, make_run_config, tmp_path):
        config = make_run_config()
        model = build_model(config.model, config.seed).zero_decoder_()
        checkpoint = Checkpoint(
            model_state=model_state_of(model), epoch=0, step=0, seed=config.seed, config=config.model_dump(mode="json")
        )
        path = save_checkpoint(checkpoint, tmp_path / "zero_decoder")
        assert main(["eval", *common, "--checkpoint", str(path)]) == EXIT_OK
        assert main(["eval", *common, "--baseline", "bicubic"]) == EXIT_OK
        run_dir = tmp_path / "runs" / "jiif"
        jiif = json.loads((run_dir / "eval_jiif" / "report.json").read_text())["entries"]
        bicubic = json.loads((run_dir / "eval_bicubic" / "report.json").read_text())["entries"]
        assert [e["average_rmse"] for e in jiif] == [e["average_rmse"] for e in bicubic]
