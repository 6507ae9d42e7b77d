"""Command-line surface: behaviors, exit codes, deterministic outputs."""

import numpy as np
import pytest

from scopenet.cli import main
from scopenet.data import load_image, save_image
from scopenet.tensor import Tensor


def write_flat_gray(path, size=32, value=0.5):
    img = Tensor(np.full((1, 3, size, size), value, dtype=np.float32))
    save_image(path, img)


def write_step_edge(path, size=32):
    img = np.full((1, 3, size, size), 0.25, dtype=np.float32)
    img[:, :, :, size // 2:] = 0.75
    save_image(path, Tensor(img))


MICRO_CONFIG = """
# micro run used by the CLI tests
variant = full
stage_channels = 4,6,8,10
c_prime = 8
k_h = 3
k_l = 3,3,3
num_classes = 2
epochs = 2
warmup_epochs = 1
base_lr = 0.02
batch_size = 8
seed = 0
train_per_class = 4
val_per_class = 2
image_size = 32
noise_sigma = 0.0
texture_amplitude = 0.3
"""


class TestDemoSde:
    def test_flat_image_detail_is_mid_gray_interior(self, tmp_path):
        src = tmp_path / "flat.ppm"
        write_flat_gray(src)
        prefix = tmp_path / "out"
        assert main(["demo-sde", "--image", str(src), "--out-prefix",
                     str(prefix), "--seed", "0"]) == 0
        detail = load_image(f"{prefix}_detail.ppm").data
        interior = detail[:, :, 4:-4, 4:-4]
        np.testing.assert_allclose(interior, 0.5, atol=0.02)
        assert load_image(f"{prefix}_smooth.ppm").shape == (1, 3, 32, 32)
        assert load_image(f"{prefix}_enhanced.ppm").shape == (1, 3, 32, 32)

    def test_step_edge_detail_band_has_higher_variance(self, tmp_path):
        src = tmp_path / "edge.ppm"
        write_step_edge(src)
        prefix = tmp_path / "edge_out"
        assert main(["demo-sde", "--image", str(src), "--out-prefix",
                     str(prefix), "--seed", "1"]) == 0
        detail = load_image(f"{prefix}_detail.ppm").data
        band = detail[:, :, 2:-2, 14:18]
        flat = detail[:, :, 2:-2, 2:12]
        assert band.var() > flat.var()

    def test_missing_file_exits_2(self, tmp_path, capsys):
        code = main(["demo-sde", "--image", str(tmp_path / "nope.ppm"),
                     "--out-prefix", str(tmp_path / "x")])
        assert code == 2
        assert "error" in capsys.readouterr().err

    def test_deterministic_outputs(self, tmp_path):
        src = tmp_path / "edge.ppm"
        write_step_edge(src)
        for run in ("a", "b"):
            main(["demo-sde", "--image", str(src), "--out-prefix",
                  str(tmp_path / run), "--seed", "7", "--deterministic"])
        for suffix in ("_smooth.ppm", "_detail.ppm", "_enhanced.ppm"):
            assert (tmp_path / f"a{suffix}").read_bytes() == \
                (tmp_path / f"b{suffix}").read_bytes()

    def test_weights_checkpoint_drives_encoder(self, tmp_path):
        """A one-hot center-tap encoder loaded from SCPT makes the stage an
        identity: the detail map renders mid-gray everywhere."""
        from scopenet.scpt import save_tensors

        src = tmp_path / "edge.ppm"
        write_step_edge(src)
        weight = np.zeros((9, 3, 3, 3), dtype=np.float32)
        bias = np.zeros(9, dtype=np.float32)
        bias[4] = 200.0
        ckpt = tmp_path / "enc.scpt"
        save_tensors(ckpt, {"sde1.encoder.weight": weight,
                            "sde1.encoder.bias": bias})
        prefix = tmp_path / "w"
        assert main(["demo-sde", "--image", str(src), "--out-prefix",
                     str(prefix), "--weights", str(ckpt)]) == 0
        detail = load_image(f"{prefix}_detail.ppm").data
        np.testing.assert_allclose(detail, 0.5, atol=1 / 255)

    def test_weights_channel_mismatch_exits_2(self, tmp_path, capsys):
        from scopenet.scpt import save_tensors

        src = tmp_path / "edge.ppm"
        write_step_edge(src)
        ckpt = tmp_path / "enc.scpt"
        save_tensors(ckpt, {"sde1.encoder.weight":
                            np.zeros((9, 16, 3, 3), np.float32),
                            "sde1.encoder.bias": np.zeros(9, np.float32)})
        assert main(["demo-sde", "--image", str(src), "--out-prefix",
                     str(tmp_path / "x"), "--weights", str(ckpt)]) == 2
        assert "channels" in capsys.readouterr().err


class TestGenData:
    def test_writes_manifests_and_images(self, tmp_path):
        out = tmp_path / "data"
        assert main(["gen-data", "--out", str(out), "--classes", "2",
                     "--train-per-class", "3", "--val-per-class", "2",
                     "--size", "32", "--seed", "0"]) == 0
        train_lines = (out / "train.tsv").read_text().splitlines()
        assert len(train_lines) == 6
        rel, label = train_lines[0].split("\t")
        assert (out / rel).exists() and label == "0"

    def test_same_seed_byte_identical(self, tmp_path):
        dirs = [tmp_path / "a", tmp_path / "b"]
        for d in dirs:
            main(["gen-data", "--out", str(d), "--classes", "2",
                  "--train-per-class", "2", "--val-per-class", "1",
                  "--size", "32", "--seed", "5", "--deterministic"])
        for rel in ["train.tsv", "val.tsv", "train/class00_0000.ppm"]:
            assert (dirs[0] / rel).read_bytes() == (dirs[1] / rel).read_bytes()


class TestTrainEval:
    def test_train_then_eval_reprints_best_exactly(self, tmp_path, capsys):
        """gen-data -> train on the manifests -> eval on the same val
        manifest reproduces the recorded best accuracy verbatim."""
        data_dir = tmp_path / "ds"
        assert main(["gen-data", "--out", str(data_dir), "--classes", "2",
                     "--train-per-class", "4", "--val-per-class", "2",
                     "--size", "32", "--amplitude", "0.3", "--noise", "0.0",
                     "--seed", "0"]) == 0
        config = tmp_path / "run.config"
        config.write_text(MICRO_CONFIG + f"out_dir = {tmp_path / 'run'}\n"
                          + f"data_dir = {data_dir}\n")
        capsys.readouterr()
        assert main(["train", "--config", str(config)]) == 0
        out = capsys.readouterr().out
        best_line = [l for l in out.splitlines() if l.startswith("best")][0]
        recorded = best_line.split("val_acc = ")[1].strip()

        assert main(["eval", "--checkpoint",
                     str(tmp_path / "run" / "best.scpt"), "--data",
                     str(data_dir / "val.tsv")]) == 0
        eval_out = capsys.readouterr().out
        assert f"val_acc = {recorded}" in eval_out

    def test_metrics_deterministic_across_runs(self, tmp_path):
        metrics = []
        for name in ("r1", "r2"):
            config = tmp_path / f"{name}.config"
            config.write_text(MICRO_CONFIG +
                              f"out_dir = {tmp_path / name}\n")
            assert main(["train", "--config", str(config), "--seed", "4",
                         "--deterministic"]) == 0
            metrics.append((tmp_path / name / "metrics.tsv").read_bytes())
            ckpt = (tmp_path / name / "best.scpt").read_bytes()
            metrics.append(ckpt)
        assert metrics[0] == metrics[2]
        assert metrics[1] == metrics[3]

    def test_unknown_config_key_exits_2_naming_key(self, tmp_path, capsys):
        config = tmp_path / "bad.config"
        config.write_text("variant = full\nlearning_rate = 0.1\n")
        assert main(["train", "--config", str(config)]) == 2
        assert "learning_rate" in capsys.readouterr().err

    def test_eval_missing_checkpoint_exits_2(self, tmp_path):
        assert main(["eval", "--checkpoint", str(tmp_path / "no.scpt"),
                     "--data", str(tmp_path / "no.tsv")]) == 2


class TestGradcheckCommand:
    def test_sde_module_passes(self, capsys):
        assert main(["gradcheck", "--module", "sde"]) == 0
        out = capsys.readouterr().out
        assert "sde_forward" in out and "ok" in out

    def test_corrupted_rule_detected(self, capsys):
        assert main(["gradcheck", "--module", "network",
                     "--corrupt-op", "sigmoid"]) == 1
        assert "FAIL" in capsys.readouterr().out

    def test_unknown_module_rejected(self):
        with pytest.raises(SystemExit) as exc:
            main(["gradcheck", "--module", "everything"])
        assert exc.value.code == 2

    def test_unknown_corrupt_hook_exits_2(self, capsys):
        assert main(["gradcheck", "--module", "sde",
                     "--corrupt-op", "conv9d"]) == 2
        assert "corruption" in capsys.readouterr().err


class TestBenchCommand:
    def test_smoke_iters_one(self, capsys):
        assert main(["bench", "--shape", "1,8,16,16", "--k", "3",
                     "--iters", "1"]) == 0
        out = capsys.readouterr().out
        assert "speedup" in out and "agreement" in out

    def test_bad_shape_exits_2(self, capsys):
        assert main(["bench", "--shape", "1,8,16", "--iters", "1"]) == 2
        assert "n,c,h,w" in capsys.readouterr().err


class TestUsage:
    def test_unknown_flag_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            main(["bench", "--speed", "9"])
        assert exc.value.code == 2

    def test_no_command_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 2
