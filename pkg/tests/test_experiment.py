import json
from dataclasses import replace

import numpy as np
import pytest

from palpsim import (
    PointCloud,
    config_from_flat,
    default_config,
    export_ply,
    load_config_file,
    read_ply,
    run_experiment,
    run_matrix,
)
from palpsim.experiment import config_to_flat  # noqa: F401  (echo round trip)
from palpsim.cli import main as cli_main
from palpsim.errors import EmptyCloud


def small_config(**kw):
    """Cheap config for harness tests: few trials, small budget."""
    cfg = default_config(kw.pop("shape", "hemisphere"),
                         kw.pop("strategy", "bo"),
                         kw.pop("mode", "cf"),
                         seed=kw.pop("seed", 5),
                         trials=kw.pop("trials", 2),
                         budget=kw.pop("budget", 12))
    return replace(cfg, **kw) if kw else cfg


class TestConfigFile:
    def test_parse_and_build(self, tmp_path):
        text = """
        # comment
        shape = crescent
        strategy = rs
        trials = 3
        seed = 11
        phantom.k_tumor = 30000
        tumor.radius = 0.012
        roi.min = [-0.025, -0.025]
        roi.max = [0.025, 0.025]
        gains.k_p = 1200
        probe.f_thres = 5.5
        gp.length_scale = 4.0
        gp.xi = 2.0
        """
        path = tmp_path / "exp.cfg"
        path.write_text("\n".join(l.strip() for l in text.splitlines()))
        cfg = config_from_flat(load_config_file(path))
        assert cfg.tumor.shape == "crescent"
        assert cfg.strategy == "rs"
        assert cfg.trials == 3
        assert cfg.seed == 11
        assert cfg.budget == 80  # crescent default
        assert cfg.phantom.k_tumor == 30000
        assert cfg.tumor.radius == 0.012
        assert cfg.roi.min_xy == (-0.025, -0.025)
        assert cfg.gains.k_p == 1200
        assert cfg.probe.f_thres == 5.5
        assert cfg.hyper.length_scale == 4.0
        assert cfg.xi == 2.0

    def test_unknown_key_rejected(self):
        with pytest.raises(ValueError):
            config_from_flat({"nonsense": 1})
        with pytest.raises(ValueError):
            config_from_flat({"widget.k": 1})

    def test_flag_style_overrides(self):
        cfg = config_from_flat({"shape": "hemisphere", "budget": 17, "mode": "discrete"})
        assert cfg.budget == 17
        assert cfg.mode == "discrete"


class TestRunExperiment:
    def test_outputs_and_aggregates(self, tmp_path):
        cfg = small_config()
        rep = run_experiment(cfg, tmp_path, verbose=False)
        assert len(rep.trials) == cfg.trials
        assert (tmp_path / "gt.ply").exists()
        assert (tmp_path / "trajectories.jsonl").exists()
        assert (tmp_path / "metrics.csv").exists()
        assert (tmp_path / "summary.csv").exists()
        for t in rep.trials:
            if t.status == "ok":
                assert (tmp_path / f"recon_{t.index}.ply").exists()
        # summary mean/max equal recomputation from per-trial rows
        rows = (tmp_path / "metrics.csv").read_text().strip().splitlines()[1:]
        scores = [float(r.split(",")[-1]) for r in rows if r.split(",")[7] == "ok"]
        assert rep.mean_f == pytest.approx(np.mean(scores), abs=1e-9)
        assert rep.max_f == pytest.approx(max(scores), abs=1e-9)

    def test_trajectory_log_schema(self, tmp_path):
        run_experiment(small_config(trials=1), tmp_path, verbose=False)
        lines = (tmp_path / "trajectories.jsonl").read_text().strip().splitlines()
        assert lines
        for line in lines:
            rec = json.loads(line)
            assert set(rec) == {"trial", "palpation_index", "t", "p", "f",
                                "phase", "outcome"}
            assert rec["phase"] in ("probe", "contour")
            assert len(rec["p"]) == 3 and len(rec["f"]) == 3

    def test_off_tumor_failure_row_continues(self, tmp_path):
        cfg = small_config(trials=1, budget=1, mode="discrete")
        cfg = replace(cfg, tumor=replace(cfg.tumor, center_xy=(0.05, 0.05)),
                      roi=cfg.roi)  # tumor entirely outside the ROI
        rep = run_experiment(cfg, tmp_path, verbose=False)
        assert rep.n_failed == 1
        assert rep.trials[0].status == "EmptyReconstruction"
        rows = (tmp_path / "metrics.csv").read_text().strip().splitlines()
        assert rows[1].split(",")[7] == "EmptyReconstruction"

    def test_byte_identical_reruns(self, tmp_path):
        cfg = small_config(trials=2, budget=10)
        run_experiment(cfg, tmp_path / "a", verbose=False)
        run_experiment(cfg, tmp_path / "b", verbose=False)
        for name in ("metrics.csv", "summary.csv", "gt.ply", "trajectories.jsonl",
                     "config.txt"):
            assert (tmp_path / "a" / name).read_bytes() == \
                   (tmp_path / "b" / name).read_bytes(), name

    def test_config_echo_round_trip(self, tmp_path):
        cfg = small_config(trials=1, budget=10)
        run_experiment(cfg, tmp_path, verbose=False)
        back = config_from_flat(load_config_file(tmp_path / "config.txt"))
        assert back.phantom == cfg.phantom
        assert back.tumor == cfg.tumor
        assert back.probe == cfg.probe
        assert back.gains == cfg.gains
        assert back.cal == cfg.cal
        assert back.hyper == cfg.hyper
        assert (back.strategy, back.mode, back.budget, back.seed) == \
               (cfg.strategy, cfg.mode, cfg.budget, cfg.seed)


class TestRunMatrix:
    def test_summary_rows_and_combined(self, tmp_path):
        cfgs = [small_config(strategy=s, mode=m, trials=1, budget=10)
                for s in ("bo", "rs") for m in ("cf", "discrete")]
        rep = run_matrix(cfgs, tmp_path, verbose=False)
        assert len(rep.conditions) == 4
        assert "hemisphere" in rep.combined
        lines = (tmp_path / "summary.csv").read_text().strip().splitlines()
        kinds = [l.split(",")[4] for l in lines[1:]]
        assert kinds.count("per_trial") == 4
        assert kinds.count("combined") == 1
        assert (tmp_path / "metrics.csv").exists()

    def test_empty_rejected(self):
        with pytest.raises(Exception):
            run_matrix([], None, verbose=False)

    def test_partial_failure_marked(self, tmp_path):
        good = small_config(trials=1, budget=8)
        # tumor taller than the soft stack: rejected at phantom build time
        bad = replace(good, tumor=replace(good.tumor, radius=0.05),
                      label="bad_condition")
        rep = run_matrix([bad, good], tmp_path, verbose=False)
        assert len(rep.conditions) == 1
        assert len(rep.failed) == 1
        assert rep.failed[0][0] == "bad_condition"
        lines = (tmp_path / "summary.csv").read_text().strip().splitlines()
        assert any(l.startswith("bad_condition") and ",failed," in l for l in lines)


class TestPly:
    def test_single_point_format(self, tmp_path):
        path = tmp_path / "one.ply"
        export_ply(PointCloud(np.array([[0.0, 0.0, 0.0]])), path)
        lines = path.read_text().splitlines()
        assert lines[0] == "ply"
        assert lines[1] == "format ascii 1.0"
        assert lines[2] == "element vertex 1"
        assert lines[3:6] == ["property float x", "property float y", "property float z"]
        assert lines[6] == "end_header"
        assert lines[7] == "0 0 0"

    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        pts = rng.uniform(-0.05, 0.05, (300, 3))
        path = tmp_path / "cloud.ply"
        export_ply(PointCloud(pts), path)
        back = read_ply(path)
        assert np.allclose(back.points, pts, atol=1e-6)

    def test_normals_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        pts = rng.uniform(0, 0.01, (50, 3))
        normals = rng.normal(size=(50, 3))
        normals /= np.linalg.norm(normals, axis=1, keepdims=True)
        path = tmp_path / "n.ply"
        export_ply(PointCloud(pts, normals), path)
        back = read_ply(path)
        assert back.normals is not None
        assert np.allclose(back.normals, normals, atol=1e-5)

    def test_empty_rejected(self, tmp_path):
        with pytest.raises(EmptyCloud):
            export_ply(PointCloud(np.zeros((0, 3))), tmp_path / "x.ply")


class TestCli:
    def test_run_subcommand(self, tmp_path):
        cfg_file = tmp_path / "c.cfg"
        cfg_file.write_text("trials = 1\nbudget = 10\nseed = 3\n")
        rc = cli_main(["run", "--config", str(cfg_file), "--out", str(tmp_path / "out")])
        assert rc == 0
        assert (tmp_path / "out" / "metrics.csv").exists()

    def test_export_gt_and_eval(self, tmp_path, capsys):
        gt_path = tmp_path / "gt.ply"
        rc = cli_main(["export-gt", "--shape", "hemisphere", "--samples", "400",
                       "--file", str(gt_path)])
        assert rc == 0 and gt_path.exists()
        rc = cli_main(["eval", str(gt_path), str(gt_path), "--r", "0.003"])
        assert rc == 0
        out = capsys.readouterr().out
        assert "fscore=1.0000" in out

    def test_eval_against_sim_recon(self, tmp_path):
        cfg_file = tmp_path / "c.cfg"
        cfg_file.write_text("trials = 1\nbudget = 15\nseed = 4\n")
        out_dir = tmp_path / "out"
        assert cli_main(["run", "--config", str(cfg_file), "--out", str(out_dir)]) == 0
        recons = sorted(out_dir.glob("recon_*.ply"))
        assert recons
        rc = cli_main(["eval", str(recons[0]), str(out_dir / "gt.ply")])
        assert rc == 0
