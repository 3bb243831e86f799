import json
import subprocess
import sys

import pytest

from skel2box import (
    AnnotatedBox,
    BBox,
    CalibrationResult,
    MixConfig,
    cli,
    emit_coco,
    emit_detections,
    emit_mot,
    manifest_for_annotations,
    parse_coco_gt,
    parse_plan,
    plan_finetune,
    plan_mixed_batches,
)

SAMPLES_CSV = "h_s_px,z_m,h_true_px\n50,10,60\n100,5,120\n80,20,85\n40,25,44\n"


def run_cli(capsys, *args):
    code = cli.run([str(a) for a in args])
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def summary_of(capsys, *args):
    code, out, err = run_cli(capsys, *args)
    assert code == 0, err
    assert out.count("\n") == 1
    return json.loads(out)


def jta_file(tmp_path, skeletons, name="clip.json", joints=22):
    """Write a joint dump; skeletons are (frame, ped, x, y, w, h, z) tuples."""
    records = []
    for frame, ped, x, y, w, h, z in skeletons:
        for j in range(joints):
            if j == 0:
                px, py = x, y
            elif j == 1:
                px, py = x + w, y + h
            else:
                px, py = x + w / 2, y + h / 2
            records.append([frame, ped, j, px, py, 0.0, 0.0, z, 0, 0])
    path = tmp_path / name
    path.write_text(json.dumps(records))
    return path


def annotation(video, frame, ped, x, y, w, h, dist):
    box = BBox(x, y, w, h)
    return AnnotatedBox(video, frame, ped, box, dist, box)


def coco_file(tmp_path, annotations, name="gt.json", dataset_id="ds"):
    manifest = manifest_for_annotations(
        annotations, dataset_id=dataset_id, image_w=1920.0, image_h=1080.0
    )
    path = tmp_path / name
    path.write_text(emit_coco(annotations, manifest))
    return path


class TestCalibrate:
    def test_fit_and_write(self, tmp_path, capsys):
        samples = tmp_path / "samples.csv"
        samples.write_text(SAMPLES_CSV)
        out = tmp_path / "alpha.json"
        summary = summary_of(capsys, "calibrate", "--samples", samples, "--out", out)
        assert summary["command"] == "calibrate"
        assert abs(summary["alpha"] - 100.0) <= 1e-9 * 100.0
        assert summary["n_samples"] == 4
        result = CalibrationResult.from_json(out.read_text())
        assert result.alpha == summary["alpha"]

    def test_missing_file(self, tmp_path, capsys):
        code, _, err = run_cli(capsys, "calibrate", "--samples", tmp_path / "nope.csv")
        assert code == 2
        assert "nope.csv" in err

    def test_malformed_row(self, tmp_path, capsys):
        samples = tmp_path / "samples.csv"
        samples.write_text("h_s_px,z_m,h_true_px\n50,abc,60\n")
        code, _, err = run_cli(capsys, "calibrate", "--samples", samples)
        assert code == 2
        assert "line 2" in err
        assert str(samples) in err


class TestSynthesize:
    def test_single_skeleton(self, tmp_path, capsys):
        jta = jta_file(tmp_path, [(3, 7, 100.0, 200.0, 20.0, 50.0, 10.0)])
        out_coco = tmp_path / "gt.json"
        out_mot = tmp_path / "gt.txt"
        summary = summary_of(
            capsys,
            "synthesize", "--jta", jta, "--alpha", 100,
            "--out-coco", out_coco, "--out-mot", out_mot,
        )
        assert summary["n_annotations"] == 1
        assert summary["n_skipped"] == 0
        assert summary["video_id"] == "clip"
        gt = parse_coco_gt(out_coco.read_text())
        assert len(gt.images) == 3  # frames 1..3 even without annotations
        ann = gt.annotations[0]
        assert ann.box == BBox(98.0, 195.0, 24.0, 60.0)
        assert ann.distance_m == 10.0
        assert ann.pedestrian_id == 7
        assert out_mot.read_text() == "3,7,98,195,24,60,1,1,1\n"

    def test_alpha_file(self, tmp_path, capsys):
        samples = tmp_path / "samples.csv"
        samples.write_text(SAMPLES_CSV)
        alpha_out = tmp_path / "alpha.json"
        summary_of(capsys, "calibrate", "--samples", samples, "--out", alpha_out)
        jta = jta_file(tmp_path, [(1, 1, 100.0, 200.0, 20.0, 50.0, 10.0)])
        summary = summary_of(
            capsys,
            "synthesize", "--jta", jta, "--alpha-file", alpha_out,
            "--out-coco", tmp_path / "gt.json",
        )
        assert abs(summary["alpha"] - 100.0) <= 1e-9 * 100.0

    def test_alpha_required(self, tmp_path, capsys):
        jta = jta_file(tmp_path, [(1, 1, 100.0, 200.0, 20.0, 50.0, 10.0)])
        code, _, err = run_cli(
            capsys, "synthesize", "--jta", jta, "--out-coco", tmp_path / "gt.json"
        )
        assert code == 1
        assert "alpha" in err

    def test_no_clamp(self, tmp_path, capsys):
        # Near skeleton at the left border: pad pushes x below zero
        jta = jta_file(tmp_path, [(1, 1, 0.0, 100.0, 20.0, 50.0, 1.0)])
        clamped = tmp_path / "clamped.json"
        free = tmp_path / "free.json"
        summary_of(capsys, "synthesize", "--jta", jta, "--alpha", 100, "--out-coco", clamped)
        summary_of(
            capsys,
            "synthesize", "--jta", jta, "--alpha", 100, "--out-coco", free, "--no-clamp",
        )
        box_clamped = parse_coco_gt(clamped.read_text()).annotations[0].box
        box_free = parse_coco_gt(free.read_text()).annotations[0].box
        assert box_free.x < 0 <= box_clamped.x
        assert box_free != box_clamped

    def test_rerun_byte_identical(self, tmp_path, capsys):
        jta = jta_file(tmp_path, [(1, 2, 50.0, 60.0, 30.0, 90.0, 12.5)])
        out = tmp_path / "gt.json"
        summary_of(capsys, "synthesize", "--jta", jta, "--alpha", 80, "--out-coco", out)
        first = out.read_bytes()
        summary_of(capsys, "synthesize", "--jta", jta, "--alpha", 80, "--out-coco", out)
        assert out.read_bytes() == first

    def test_bad_input_leaves_no_output(self, tmp_path, capsys):
        jta = tmp_path / "broken.json"
        jta.write_text("[[1, 2, 0")
        out = tmp_path / "gt.json"
        code, _, err = run_cli(
            capsys, "synthesize", "--jta", jta, "--alpha", 100, "--out-coco", out
        )
        assert code == 2
        assert not out.exists()


class TestHistogramAndPrune:
    def test_histogram_csv(self, tmp_path, capsys):
        anns = [
            annotation("v", 1, 1, 0, 0, 10, 20, 1.0),
            annotation("v", 1, 2, 5, 5, 10, 20, 1.5),
            annotation("v", 2, 1, 0, 0, 10, 20, 2.5),
        ]
        gt = coco_file(tmp_path, anns)
        out = tmp_path / "hist.csv"
        summary = summary_of(capsys, "histogram", "--gt", gt, "--out", out)
        assert summary["n_annotations"] == 3
        assert out.read_text() == "bin_lower_m,count\n0,0\n1,2\n2,1\n"

    def test_prune_default_limit(self, tmp_path, capsys):
        anns = [
            annotation("v", 1, 1, 0, 0, 10, 20, 39.0),
            annotation("v", 1, 2, 5, 5, 10, 20, 40.0),
            annotation("v", 1, 3, 9, 9, 10, 20, 41.0),
        ]
        gt = coco_file(tmp_path, anns)
        out = tmp_path / "pruned.json"
        summary = summary_of(capsys, "prune", "--gt", gt, "--out", out)
        assert summary["kept"] == 2
        assert summary["pruned"] == 1
        assert summary["distance_limit_m"] == 40.0
        pruned = parse_coco_gt(out.read_text())
        assert [a.pedestrian_id for a in pruned.annotations] == [1, 2]
        assert pruned.manifest.distance_limit_m == 40.0

    def test_limit_flag_beats_config_file(self, tmp_path, capsys):
        anns = [
            annotation("v", 1, 1, 0, 0, 10, 20, 39.0),
            annotation("v", 1, 2, 5, 5, 10, 20, 40.0),
            annotation("v", 1, 3, 9, 9, 10, 20, 41.0),
        ]
        gt = coco_file(tmp_path, anns)
        config = tmp_path / "config.json"
        config.write_text('{"distance_limit_m": 100.0}')
        out = tmp_path / "pruned.json"
        from_file = summary_of(capsys, "prune", "--gt", gt, "--out", out, "--config", config)
        assert from_file["kept"] == 3
        from_flag = summary_of(
            capsys,
            "prune", "--gt", gt, "--out", out, "--config", config,
            "--distance-limit", 39.5,
        )
        assert from_flag["kept"] == 1

    def test_unknown_config_key(self, tmp_path, capsys):
        gt = coco_file(tmp_path, [annotation("v", 1, 1, 0, 0, 10, 20, 5.0)])
        config = tmp_path / "config.json"
        config.write_text('{"distance_limit": 10}')
        code, _, err = run_cli(
            capsys, "prune", "--gt", gt, "--out", tmp_path / "o.json", "--config", config
        )
        assert code == 2
        assert "distance_limit" in err

    def test_malformed_config_file(self, tmp_path, capsys):
        gt = coco_file(tmp_path, [annotation("v", 1, 1, 0, 0, 10, 20, 5.0)])
        config = tmp_path / "config.json"
        config.write_text("{broken")
        code, _, err = run_cli(
            capsys, "prune", "--gt", gt, "--out", tmp_path / "o.json", "--config", config
        )
        assert code == 2
        assert str(config) in err


class TestDistanceLimit:
    def test_derives_crossing_bin(self, tmp_path, capsys):
        anns = [
            annotation("v", 1, 1, 0, 0, 50, 130.0, 10.0),
            annotation("v", 1, 2, 0, 0, 30, 65.0, 20.0),
            annotation("v", 1, 3, 0, 0, 20, 40.0, 30.0),
            annotation("v", 1, 4, 0, 0, 15, 30.0, 40.0),
        ]
        gt = coco_file(tmp_path, anns)
        out = tmp_path / "limit.json"
        summary = summary_of(
            capsys,
            "distance-limit", "--gt", gt, "--h-min", 50,
            "--min-bin-count", 1, "--out", out,
        )
        assert summary["distance_limit_m"] == 30.0
        assert json.loads(out.read_text()) == {"distance_limit_m": 30.0}


class TestConvert:
    def test_coco_to_mot_to_coco(self, tmp_path, capsys):
        anns = [
            annotation("v", 1, 1, 10, 20, 30, 40, 5.0),
            annotation("v", 2, 1, 12, 22, 30, 40, 6.0),
            annotation("v", 2, 3, 50, 60, 20, 80, 7.0),
        ]
        gt = coco_file(tmp_path, anns)
        mot = tmp_path / "gt.txt"
        summary = summary_of(
            capsys, "convert", "--in", gt, "--from", "coco", "--to", "mot", "--out", mot
        )
        assert summary["n_annotations"] == 3
        assert mot.read_text() == emit_mot(anns)
        back = tmp_path / "back.json"
        summary_of(
            capsys,
            "convert", "--in", mot, "--from", "mot", "--to", "coco", "--out", back,
            "--video-id", "v", "--dataset-id", "ds",
        )
        parsed = parse_coco_gt(back.read_text())
        assert [(a.video_id, a.frame_id, a.pedestrian_id, a.box) for a in parsed.annotations] == [
            (a.video_id, a.frame_id, a.pedestrian_id, a.box) for a in anns
        ]

    def test_mot_input_requires_video_id(self, tmp_path, capsys):
        mot = tmp_path / "gt.txt"
        mot.write_text("1,1,10,20,30,40,1,1,1\n")
        code, _, err = run_cli(
            capsys,
            "convert", "--in", mot, "--from", "mot", "--to", "coco",
            "--out", tmp_path / "o.json",
        )
        assert code == 1
        assert "--video-id" in err

    def test_multi_video_mot_output_needs_selector(self, tmp_path, capsys):
        anns = [
            annotation("a", 1, 1, 10, 20, 30, 40, 5.0),
            annotation("b", 1, 1, 10, 20, 30, 40, 5.0),
        ]
        gt = coco_file(tmp_path, anns)
        code, _, err = run_cli(
            capsys,
            "convert", "--in", gt, "--from", "coco", "--to", "mot",
            "--out", tmp_path / "o.txt",
        )
        assert code == 2
        out = tmp_path / "only_a.txt"
        summary = summary_of(
            capsys,
            "convert", "--in", gt, "--from", "coco", "--to", "mot", "--out", out,
            "--video-id", "a",
        )
        assert summary["n_annotations"] == 1
        assert out.read_text() == emit_mot(anns[:1])


class TestEvaluate:
    def make_pair(self, tmp_path):
        anns = [
            annotation("v", 1, 1, 10, 20, 30, 40, 5.0),
            annotation("v", 1, 2, 100, 120, 30, 40, 6.0),
            annotation("v", 2, 1, 12, 22, 30, 40, 7.0),
        ]
        gt_path = coco_file(tmp_path, anns)
        gt = parse_coco_gt(gt_path.read_text())
        from skel2box import Detection

        dets = [Detection(a.video_id, a.frame_id, a.box, 1.0) for a in anns]
        det_path = tmp_path / "det.json"
        det_path.write_text(
            emit_detections(dets, "coco_results", image_id_of_frame=gt.image_id_by_frame())
        )
        return gt_path, det_path

    def test_perfect_detections(self, tmp_path, capsys):
        gt_path, det_path = self.make_pair(tmp_path)
        out = tmp_path / "report.json"
        summary = summary_of(
            capsys, "evaluate", "--gt", gt_path, "--det", det_path, "--out", out
        )
        assert summary["ap_allpoint"] == 1.0
        assert summary["ap_101point"] == 1.0
        assert summary["n_gt"] == 3
        assert summary["n_det"] == 3
        report = json.loads(out.read_text())
        assert set(report) == {"ap_allpoint", "ap_101point", "n_gt", "n_det", "pr"}

    def test_mot_det_requires_video_id(self, tmp_path, capsys):
        gt_path, _ = self.make_pair(tmp_path)
        det = tmp_path / "det.txt"
        det.write_text("1,-1,10,20,30,40,1.0\n")
        code, _, err = run_cli(
            capsys,
            "evaluate", "--gt", gt_path, "--det", det, "--det-format", "mot_det",
        )
        assert code == 1
        assert "--video-id" in err


class TestPlans:
    def test_plan_batches_matches_library(self, tmp_path, capsys):
        out = tmp_path / "plan.json"
        summary = summary_of(
            capsys,
            "plan-batches", "--n-synthetic", 40, "--n-real", 6, "--batch-size", 9,
            "--seed", 7, "--epochs", 2, "--out", out,
        )
        assert summary["batches_per_epoch"] == 6
        assert summary["ratio"] == [2, 1]
        expected = plan_mixed_batches(
            MixConfig(n_synthetic=40, n_real=6, batch_size=9, seed=7, epochs=2)
        )
        assert parse_plan(out.read_text()) == expected

    def test_plan_batches_deterministic_bytes(self, tmp_path, capsys):
        args = (
            "plan-batches", "--n-synthetic", 24, "--n-real", 4, "--batch-size", 6,
            "--seed", 3,
        )
        first = tmp_path / "a.json"
        second = tmp_path / "b.json"
        summary_of(capsys, *args, "--out", first)
        summary_of(capsys, *args, "--out", second)
        assert first.read_bytes() == second.read_bytes()

    def test_bad_ratio_string(self, tmp_path, capsys):
        code, _, err = run_cli(
            capsys,
            "plan-batches", "--n-synthetic", 24, "--n-real", 4, "--batch-size", 6,
            "--ratio", "2:1", "--out", tmp_path / "p.json",
        )
        assert code == 1

    def test_indivisible_batch(self, tmp_path, capsys):
        code, _, err = run_cli(
            capsys,
            "plan-batches", "--n-synthetic", 24, "--n-real", 4, "--batch-size", 10,
            "--out", tmp_path / "p.json",
        )
        assert code == 2
        assert "divisible" in err

    def test_plan_finetune(self, tmp_path, capsys):
        out = tmp_path / "plan.json"
        summary = summary_of(
            capsys, "plan-finetune", "--phase1-epochs", 3, "--phase2-epochs", 2, "--out", out
        )
        assert summary["phase1_epochs"] == 3
        assert parse_plan(out.read_text()) == plan_finetune(3, 2)


class TestInfrastructure:
    def test_no_arguments(self, capsys):
        code, _, err = run_cli(capsys)
        assert code == 1
        assert "usage" in err

    def test_unknown_subcommand(self, capsys):
        assert run_cli(capsys, "frobnicate")[0] == 1

    def test_unknown_flag(self, tmp_path, capsys):
        code, _, _ = run_cli(
            capsys, "calibrate", "--samples", tmp_path / "s.csv", "--bogus"
        )
        assert code == 1

    @pytest.mark.parametrize("value", ["0", "-2", "abc"])
    def test_thread_env_rejected(self, tmp_path, capsys, monkeypatch, value):
        monkeypatch.setenv("SKEL2BOX_THREADS", value)
        code, _, err = run_cli(
            capsys,
            "plan-finetune", "--phase1-epochs", 1, "--phase2-epochs", 1,
            "--out", tmp_path / "p.json",
        )
        assert code == 2
        assert "SKEL2BOX_THREADS" in err

    def test_thread_env_accepted(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("SKEL2BOX_THREADS", "4")
        code, _, _ = run_cli(
            capsys,
            "plan-finetune", "--phase1-epochs", 1, "--phase2-epochs", 1,
            "--out", tmp_path / "p.json",
        )
        assert code == 0

    def test_output_dir_missing(self, tmp_path, capsys):
        code, _, err = run_cli(
            capsys,
            "plan-finetune", "--phase1-epochs", 1, "--phase2-epochs", 1,
            "--out", tmp_path / "no" / "such" / "dir" / "p.json",
        )
        assert code == 2

    def test_module_entry_point(self, tmp_path):
        samples = tmp_path / "samples.csv"
        samples.write_text(SAMPLES_CSV)
        proc = subprocess.run(
            [sys.executable, "-m", "skel2box.cli", "calibrate", "--samples", str(samples)],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0
        assert abs(json.loads(proc.stdout)["alpha"] - 100.0) <= 1e-6
