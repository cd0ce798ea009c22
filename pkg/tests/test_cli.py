import numpy as np
import pytest

from camforge import pgm
from camforge.cli import run


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """A tiny but complete dataset -> model -> captures flow."""
    root = tmp_path_factory.mktemp("cliflow")
    data = root / "data"
    model = root / "model.camnet"
    caps = root / "caps"
    assert run(["synth", "--out", str(data), "--count", "18", "--seed", "5"]) == 0
    assert run(
        ["train", "--dataset", str(data), "--out", str(model),
         "--epochs", "2", "--seed", "5"]
    ) == 0
    assert run(
        ["capture", "--model", str(model), "--dataset", str(data), "--out", str(caps)]
    ) == 0
    return root


class TestSynth:
    def test_writes_images_and_masks(self, tmp_path):
        out = tmp_path / "ds"
        assert run(["synth", "--out", str(out), "--count", "6", "--seed", "1"]) == 0
        images = sorted((out / "images").glob("*.pgm"))
        masks = sorted((out / "masks").glob("*.pgm"))
        assert len(images) == 6 and len(masks) == 6
        pixels = pgm.read_pgm(images[0])
        assert pixels.shape == (32, 32)

    def test_reproducible_bytes(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            assert run(["synth", "--out", str(out), "--count", "4", "--seed", "9"]) == 0
        for pa in sorted((a / "images").glob("*.pgm")):
            pb = b / "images" / pa.name
            assert pa.read_bytes() == pb.read_bytes()


class TestCaptureFlow:
    def test_captures_exist_with_masks(self, workspace):
        caps = workspace / "caps"
        assert len(list(caps.glob("*.camcap"))) == 18
        assert len(list((caps / "masks").glob("*.pgm"))) == 18

    def test_single_capture_and_cam(self, workspace, tmp_path):
        caps = sorted((workspace / "caps").glob("*.camcap"))
        heat = tmp_path / "h.pgm"
        code = run(
            ["cam", "--capture", str(caps[0]), "--method", "lt_grad_cam",
             "--layers", "s1,s2,s3", "--delta", "20", "--out", str(heat)]
        )
        assert code == 0
        pixels = pgm.read_pgm(heat)
        assert pixels.shape == (32, 32)
        assert pixels.dtype == np.uint8

    def test_cam_with_explicit_size(self, workspace, tmp_path):
        caps = sorted((workspace / "caps").glob("*.camcap"))
        heat = tmp_path / "h64.pgm"
        assert run(
            ["cam", "--capture", str(caps[0]), "--method", "grad_cam",
             "--layers", "s3", "--size", "64x64", "--out", str(heat)]
        ) == 0
        assert pgm.read_pgm(heat).shape == (64, 64)


class TestSegmentEval:
    def test_segment_then_eval_on_identical_masks_is_perfect(self, workspace, tmp_path):
        masks = tmp_path / "masks"
        metrics = tmp_path / "metrics.csv"
        assert run(
            ["segment", "--dataset", str(workspace / "caps"), "--method", "lt_grad_cam",
             "--layers", "s1,s2,s3", "--delta", "0", "--out", str(masks)]
        ) == 0
        assert len(list(masks.glob("*.pgm"))) == 18
        assert run(
            ["eval", "--pred", str(masks), "--gt", str(masks), "--out", str(metrics)]
        ) == 0
        lines = metrics.read_text().strip().split("\n")
        assert lines[0].startswith("method,layers,delta,miou,")
        fields = lines[1].split(",")
        assert float(fields[3]) == 1.0  # mIoU of masks against themselves

    def test_eval_against_ground_truth(self, workspace, tmp_path):
        masks = tmp_path / "masks"
        metrics = tmp_path / "m.csv"
        assert run(
            ["segment", "--dataset", str(workspace / "caps"), "--method", "grad_cam",
             "--layers", "s3", "--out", str(masks)]
        ) == 0
        assert run(
            ["eval", "--pred", str(masks), "--gt", str(workspace / "caps"),
             "--out", str(metrics)]
        ) == 0
        fields = metrics.read_text().strip().split("\n")[1].split(",")
        assert 0.0 <= float(fields[3]) <= 1.0


class TestSweep:
    def test_ten_rows(self, workspace, tmp_path):
        out = tmp_path / "sweep.csv"
        assert run(
            ["sweep", "--dataset", str(workspace / "caps"), "--method", "lt_grad_cam",
             "--layers", "s1,s2,s3", "--deltas", "0:90:10", "--out", str(out)]
        ) == 0
        lines = out.read_text().strip().split("\n")
        assert len(lines) == 11  # header + 10 rows
        deltas = [float(line.split(",")[2]) for line in lines[1:]]
        assert deltas == [0.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0, 90.0]

    def test_reproducible_csv(self, workspace, tmp_path):
        outs = [tmp_path / "a.csv", tmp_path / "b.csv"]
        for out in outs:
            assert run(
                ["sweep", "--dataset", str(workspace / "caps"), "--method", "lt_layer_cam",
                 "--layers", "s1,s2", "--deltas", "0:30:10", "--out", str(out)]
            ) == 0
        assert outs[0].read_bytes() == outs[1].read_bytes()


class TestExitCodes:
    def test_unknown_method_is_usage_error(self, tmp_path):
        code = run(
            ["cam", "--capture", "x.camcap", "--method", "foo",
             "--layers", "s1", "--out", str(tmp_path / "o.pgm")]
        )
        assert code == 1

    def test_missing_subcommand_is_usage_error(self):
        assert run([]) == 1

    def test_missing_file_is_data_error(self, tmp_path):
        code = run(
            ["cam", "--capture", str(tmp_path / "absent.camcap"), "--method", "grad_cam",
             "--layers", "s1", "--out", str(tmp_path / "o.pgm")]
        )
        assert code == 2

    def test_malformed_capture_is_data_error(self, tmp_path):
        bad = tmp_path / "bad.camcap"
        bad.write_bytes(b"CAMCAPXXjunk")
        code = run(
            ["cam", "--capture", str(bad), "--method", "grad_cam",
             "--layers", "s1", "--out", str(tmp_path / "o.pgm")]
        )
        assert code == 2

    def test_help_exits_zero(self):
        assert run(["--help"]) == 0
