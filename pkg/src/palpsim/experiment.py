"""Configuration-driven experiment harness.

Reproduces the 2 (sampling strategy) x 2 (palpation mode) condition
matrix over the tumor shapes, with deterministic per-trial seeding and
file exports: per-trial metrics CSV, a JSON-lines trajectory log,
reconstruction/ground-truth PLY clouds, and a summary table with
per-condition mean/max F-scores plus pooled "combined" rows per shape.

Wall-clock timings are printed but deliberately kept out of the CSV
outputs so reruns with the same seed are byte-identical.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .calibration import CalibrationParams
from .errors import Empty, PalpSimError
from .evaluation import (
    FScoreReport,
    aggregate_trials,
    extract_contact_points,
    fscore,
    reconstruct_mesh,
)
from .phantom import (
    CRESCENT,
    HEMISPHERE,
    Phantom,
    PhantomConfig,
    PointCloud,
    SurfaceProfile,
    TumorGeometry,
    build_phantom,
)
from .ply import export_mesh_ply, export_ply, read_ply  # noqa: F401
from .policy import (
    BO,
    CONTOUR_FOLLOWING,
    ControllerGains,
    ProbeParams,
    run_policy,
)
from .registration import (
    RoiBox,
    crop_roi,
    interpolate_grid,
    mesh_from_cloud,
    preprocess_cloud,
)
from .search import GPHyper

_GT_STREAM = 9001  # rng stream id for ground-truth sampling
_CLOUD_STREAM = 3  # rng stream id for depth-cloud synthesis


@dataclass(frozen=True)
class CloudParams:
    density: float = 3.0e6      # points per m^2
    noise_sigma: float = 0.0005  # m
    margin: float = 0.01        # m, scan region beyond the ROI
    voxel: float = 0.002        # m
    outlier_k: int = 8
    outlier_sigma: float = 2.0


@dataclass(frozen=True)
class ExperimentConfig:
    phantom: PhantomConfig = field(default_factory=PhantomConfig)
    tumor: TumorGeometry = field(default_factory=TumorGeometry)
    roi: RoiBox = field(default_factory=lambda: RoiBox((-0.02, -0.02), (0.02, 0.02)))
    grid_dx: float = 0.002
    grid_dy: float = 0.002
    strategy: str = BO
    mode: str = CONTOUR_FOLLOWING
    budget: int = 50
    trials: int = 10
    seed: int = 7
    gains: ControllerGains = field(default_factory=ControllerGains)
    probe: ProbeParams = field(default_factory=ProbeParams)
    cal: CalibrationParams = field(default_factory=CalibrationParams)
    hyper: GPHyper = field(default_factory=GPHyper)
    xi: float = 5.0
    n_init: int = 3
    r_eval: float = 0.003
    gt_samples: int = 2000
    cloud: CloudParams = field(default_factory=CloudParams)
    label: str = ""

    def __post_init__(self):
        if self.budget < 1 or self.trials < 1:
            raise Empty("budget and trials must be >= 1")

    @property
    def condition(self) -> str:
        if self.label:
            return self.label
        return f"{self.strategy}_{self.mode}_{self.tumor.shape}"


@dataclass
class TrajectorySummary:
    outcome: str
    n_waypoints: int
    terminal_xy: tuple[float, float]
    duration: float


@dataclass
class TrialOutcome:
    index: int
    seed: int
    status: str                       # "ok" or the error class name
    report: Optional[FScoreReport]
    n_probes: int = 0
    n_classified: int = 0
    n_trajectories: int = 0
    n_waypoints: int = 0
    n_recon: int = 0
    recon_counts: dict = field(default_factory=dict)
    trajectories: list[TrajectorySummary] = field(default_factory=list)
    recon_points: Optional[np.ndarray] = None
    message: str = ""
    probes: list = field(default_factory=list, repr=False)
    trajs: list = field(default_factory=list, repr=False)


@dataclass
class ConditionReport:
    config: ExperimentConfig
    trials: list[TrialOutcome]
    mean_f: float
    max_f: float
    n_failed: int
    wall_time: float

    @property
    def ok_reports(self) -> list[FScoreReport]:
        return [t.report for t in self.trials if t.report is not None]


def default_tumor(shape: str = HEMISPHERE) -> TumorGeometry:
    return TumorGeometry(shape=shape)


def default_config(shape: str = HEMISPHERE, strategy: str = BO,
                   mode: str = CONTOUR_FOLLOWING, seed: int = 7,
                   trials: int = 10, budget: Optional[int] = None) -> ExperimentConfig:
    """Per-shape defaults mirroring the benchtop protocol: palpation
    budget 50 for the hemisphere/ellipsoid ROI, 80 for the crescent."""
    if budget is None:
        budget = 80 if shape == CRESCENT else 50
    phantom_cfg = PhantomConfig()
    probe = ProbeParams(d_thres=phantom_cfg.stack_depth - 0.002)
    return ExperimentConfig(
        phantom=phantom_cfg,
        tumor=default_tumor(shape),
        strategy=strategy,
        mode=mode,
        budget=budget,
        trials=trials,
        seed=seed,
        probe=probe,
    )


def table1_matrix(seed: int = 7, trials: int = 10,
                  shapes=(HEMISPHERE, CRESCENT)) -> list[ExperimentConfig]:
    """The full condition matrix: both strategies x both modes per shape."""
    cfgs = []
    for shape in shapes:
        for strategy in ("rs", "bo"):
            for mode in ("cf", "discrete"):
                cfgs.append(default_config(shape, strategy, mode, seed=seed, trials=trials))
    return cfgs


# -- flat-key config files ---------------------------------------------------

def load_config_file(path) -> dict:
    """Parse ``key = value`` lines; values are JSON where possible."""
    flat: dict[str, object] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        text = value.strip()
        try:
            flat[key.strip()] = json.loads(text)
        except json.JSONDecodeError:
            flat[key.strip()] = text
    return flat


def config_from_flat(flat: dict, base: Optional[ExperimentConfig] = None) -> ExperimentConfig:
    """Build an ExperimentConfig from flat ``section.key`` entries.

    Unknown keys raise; top-level shape/strategy/mode/budget pick the
    per-shape defaults first, then the remaining keys override.
    """
    flat = dict(flat)
    shape = flat.pop("shape", base.tumor.shape if base else HEMISPHERE)
    if base is None:
        base = default_config(
            shape=shape,
            strategy=flat.pop("strategy", BO),
            mode=flat.pop("mode", CONTOUR_FOLLOWING),
            seed=int(flat.pop("seed", 7)),
            trials=int(flat.pop("trials", 10)),
            budget=flat.pop("budget", None),
        )
    else:
        top = {k: flat.pop(k) for k in ("strategy", "mode", "seed", "trials", "budget", "label")
               if k in flat}
        if shape != base.tumor.shape:
            base = replace(base, tumor=default_tumor(shape))
        if top:
            base = replace(base, **{k: (int(v) if k in ("seed", "trials", "budget") else v)
                                    for k, v in top.items()})
    sections: dict[str, dict] = {}
    simple: dict[str, object] = {}
    for key, value in flat.items():
        if "." in key:
            sect, sub = key.split(".", 1)
            sections.setdefault(sect, {})[sub] = value
        else:
            simple[key] = value

    cfg = base
    for key, value in simple.items():
        if key in ("r_eval", "xi"):
            cfg = replace(cfg, **{key: float(value)})
        elif key in ("gt_samples", "n_init"):
            cfg = replace(cfg, **{key: int(value)})
        elif key == "label":
            cfg = replace(cfg, label=str(value))
        elif key in ("strategy", "mode"):
            cfg = replace(cfg, **{key: str(value)})
        elif key in ("seed", "trials", "budget"):
            cfg = replace(cfg, **{key: int(value)})
        else:
            raise ValueError(f"unknown config key {key!r}")

    if "phantom" in sections:
        sub = sections.pop("phantom")
        profile = cfg.phantom.surface_profile
        kind = sub.pop("profile", None)
        amp = sub.pop("profile_amplitude", None)
        rad = sub.pop("profile_radius", None)
        sig = sub.pop("profile_sigma", None)
        if kind is not None or amp is not None or rad is not None or sig is not None:
            profile = SurfaceProfile(
                kind if kind is not None else profile.kind,
                amplitude=float(amp) if amp is not None else profile.amplitude,
                radius=float(rad) if rad is not None else profile.radius,
                sigma=float(sig) if sig is not None else profile.sigma,
            )
        cfg = replace(cfg, phantom=replace(
            cfg.phantom, surface_profile=profile,
            **{k: float(v) for k, v in sub.items()}))
    if "tumor" in sections:
        sub = sections.pop("tumor")
        kw: dict = {}
        for k, v in sub.items():
            if k in ("center_xy", "semi_axes"):
                kw[k] = tuple(float(x) for x in v)
            elif k == "shape":
                kw[k] = str(v)
            else:
                kw[k] = float(v)
        cfg = replace(cfg, tumor=replace(cfg.tumor, **kw))
    if "roi" in sections:
        sub = sections.pop("roi")
        lo = tuple(float(x) for x in sub.get("min", cfg.roi.min_xy))
        hi = tuple(float(x) for x in sub.get("max", cfg.roi.max_xy))
        cfg = replace(cfg, roi=RoiBox(lo, hi))
    if "grid" in sections:
        sub = sections.pop("grid")
        cfg = replace(cfg,
                      grid_dx=float(sub.get("dx", cfg.grid_dx)),
                      grid_dy=float(sub.get("dy", cfg.grid_dy)))
    if "cloud" in sections:
        sub = sections.pop("cloud")
        cfg = replace(cfg, cloud=replace(
            cfg.cloud, **{k: (int(v) if k == "outlier_k" else float(v))
                          for k, v in sub.items()}))
    if "gains" in sections:
        sub = sections.pop("gains")
        cfg = replace(cfg, gains=replace(cfg.gains, **{k: float(v) for k, v in sub.items()}))
    if "probe" in sections:
        sub = sections.pop("probe")
        kw = {k: (int(v) if k == "ticks_per_stroke" else
                  tuple(float(x) for x in v) if k == "gravity_residual" else float(v))
              for k, v in sub.items()}
        cfg = replace(cfg, probe=replace(cfg.probe, **kw))
    if "cal" in sections:
        sub = sections.pop("cal")
        kw = {}
        for k, v in sub.items():
            if k == "z_offset":
                kw[k] = tuple(float(x) for x in v)
            elif k == "resultant_mode":
                kw[k] = str(v)
            else:
                kw[k] = float(v)
        cfg = replace(cfg, cal=replace(cfg.cal, **kw))
    if "gp" in sections:
        sub = sections.pop("gp")
        if "xi" in sub:
            cfg = replace(cfg, xi=float(sub.pop("xi")))
        if "n_init" in sub:
            cfg = replace(cfg, n_init=int(sub.pop("n_init")))
        cfg = replace(cfg, hyper=replace(cfg.hyper, **{k: float(v) for k, v in sub.items()}))
    if sections:
        raise ValueError(f"unknown config sections: {sorted(sections)}")
    return cfg


# -- running -------------------------------------------------------------------

def _ground_truth(cfg: ExperimentConfig, phantom: Phantom) -> PointCloud:
    return phantom.ground_truth_cloud(cfg.gt_samples, seed=[cfg.seed, _GT_STREAM])


def config_to_flat(cfg: ExperimentConfig) -> dict:
    """Flatten a config back to ``section.key`` entries (echoed into the
    output directory so every run records its exact parameters)."""
    prof = cfg.phantom.surface_profile
    flat = {
        "label": cfg.condition,
        "shape": cfg.tumor.shape,
        "strategy": cfg.strategy,
        "mode": cfg.mode,
        "budget": cfg.budget,
        "trials": cfg.trials,
        "seed": cfg.seed,
        "r_eval": cfg.r_eval,
        "gt_samples": cfg.gt_samples,
        "phantom.skin_thickness": cfg.phantom.skin_thickness,
        "phantom.fat_thickness": cfg.phantom.fat_thickness,
        "phantom.k_skin": cfg.phantom.k_skin,
        "phantom.k_fat": cfg.phantom.k_fat,
        "phantom.k_muscle": cfg.phantom.k_muscle,
        "phantom.k_tumor": cfg.phantom.k_tumor,
        "phantom.contact_damping": cfg.phantom.contact_damping,
        "phantom.muscle_plane_z": cfg.phantom.muscle_plane_z,
        "phantom.profile": prof.kind,
        "phantom.profile_amplitude": prof.amplitude,
        "phantom.profile_radius": prof.radius,
        "phantom.profile_sigma": prof.sigma,
        "tumor.radius": cfg.tumor.radius,
        "tumor.center_xy": list(cfg.tumor.center_xy),
        "tumor.semi_axes": list(cfg.tumor.semi_axes),
        "tumor.inner_offset": cfg.tumor.inner_offset,
        "tumor.width": cfg.tumor.width,
        "tumor.top_height": cfg.tumor.top_height,
        "tumor.fillet_radius": cfg.tumor.fillet_radius,
        "roi.min": list(cfg.roi.min_xy),
        "roi.max": list(cfg.roi.max_xy),
        "grid.dx": cfg.grid_dx,
        "grid.dy": cfg.grid_dy,
        "cloud.density": cfg.cloud.density,
        "cloud.noise_sigma": cfg.cloud.noise_sigma,
        "cloud.margin": cfg.cloud.margin,
        "cloud.voxel": cfg.cloud.voxel,
        "cloud.outlier_k": cfg.cloud.outlier_k,
        "cloud.outlier_sigma": cfg.cloud.outlier_sigma,
        "gains.k_p": cfg.gains.k_p,
        "gains.k_d": cfg.gains.k_d,
        "gains.e_thres": cfg.gains.e_thres,
        "gains.period": cfg.gains.period,
        "probe.f_thres": cfg.probe.f_thres,
        "probe.d_thres": cfg.probe.d_thres,
        "probe.indent_speed": cfg.probe.indent_speed,
        "probe.amplitude": cfg.probe.amplitude,
        "probe.osc_rate": cfg.probe.osc_rate,
        "probe.cf_timeout": cfg.probe.cf_timeout,
        "probe.probe_mass": cfg.probe.probe_mass,
        "probe.tip_radius": cfg.probe.tip_radius,
        "probe.press_force": cfg.probe.press_force,
        "probe.ticks_per_stroke": cfg.probe.ticks_per_stroke,
        "probe.hover": cfg.probe.hover,
        "probe.contact_loss_timeout": cfg.probe.contact_loss_timeout,
        "cal.tip_weight_n": cfg.cal.tip_weight_n,
        "cal.z_offset": list(cfg.cal.z_offset),
        "cal.resultant_mode": cfg.cal.resultant_mode,
        "cal.angle_noise": cfg.cal.angle_noise,
        "gp.length_scale": cfg.hyper.length_scale,
        "gp.signal_var": cfg.hyper.signal_var,
        "gp.noise_var": cfg.hyper.noise_var,
        "gp.xi": cfg.xi,
        "gp.n_init": cfg.n_init,
    }
    return flat


def _write_config_echo(cfg: ExperimentConfig, path: Path) -> None:
    with open(path, "w") as fh:
        for key, value in config_to_flat(cfg).items():
            fh.write(f"{key} = {json.dumps(value)}\n")


def run_trial(cfg: ExperimentConfig, phantom: Phantom, gt: PointCloud,
              trial: int) -> TrialOutcome:
    """One seeded end-to-end trial: scan, register, palpate, score."""
    trial_seed = cfg.seed + trial
    out = TrialOutcome(index=trial, seed=trial_seed, status="ok", report=None)
    try:
        m = cfg.cloud.margin
        region = ((cfg.roi.min_xy[0] - m, cfg.roi.min_xy[1] - m),
                  (cfg.roi.max_xy[0] + m, cfg.roi.max_xy[1] + m))
        raw = phantom.synth_depth_cloud(region, cfg.cloud.density,
                                        cfg.cloud.noise_sigma,
                                        seed=[trial_seed, _CLOUD_STREAM])
        cloud = preprocess_cloud(raw, cfg.cloud.voxel, cfg.cloud.outlier_k,
                                 cfg.cloud.outlier_sigma)
        mesh = crop_roi(mesh_from_cloud(cloud), cfg.roi)
        grid = interpolate_grid(mesh, cfg.grid_dx, cfg.grid_dy)
        probes, trajs = run_policy(
            phantom, grid, cfg.strategy, cfg.mode, cfg.budget, cfg.probe,
            cfg.gains, trial_seed, cal=cfg.cal, hyper=cfg.hyper, xi=cfg.xi,
            n_init=cfg.n_init)
        out.n_probes = len(probes)
        out.n_classified = sum(1 for p in probes if p.classified_tumor)
        out.n_trajectories = len(trajs)
        out.n_waypoints = sum(len(t) for t in trajs)
        out.trajectories = [
            TrajectorySummary(t.outcome, len(t),
                              (float(t.poses[-1, 0]), float(t.poses[-1, 1])),
                              float(t.times[-1] - t.times[0]))
            for t in trajs
        ]
        out.probes = probes
        out.trajs = trajs
        recon = extract_contact_points(trajs, probes, cfg.probe, cfg.probe.tip_radius)
        out.n_recon = len(recon.points)
        out.recon_counts = dict(recon.source_counts)
        out.recon_points = recon.points.points
        out.report = fscore(recon.points, gt, cfg.r_eval)
    except PalpSimError as exc:
        out.status = type(exc).__name__
        out.message = str(exc)
    return out


def _csv_num(v: float) -> str:
    return f"{v:.9g}"


def _metrics_row(cfg: ExperimentConfig, t: TrialOutcome) -> str:
    rep = t.report
    return ",".join([
        cfg.condition, cfg.tumor.shape, cfg.strategy, cfg.mode, str(cfg.budget),
        str(t.index), str(t.seed), t.status,
        str(t.n_probes), str(t.n_classified), str(t.n_trajectories),
        str(t.n_waypoints), str(t.n_recon),
        _csv_num(rep.precision) if rep else "",
        _csv_num(rep.recall) if rep else "",
        _csv_num(rep.fscore) if rep else "",
    ])


METRICS_HEADER = ("condition,shape,strategy,mode,budget,trial,seed,status,"
                  "n_probes,n_classified,n_trajectories,n_waypoints,n_recon,"
                  "precision,recall,fscore")
SUMMARY_HEADER = ("condition,shape,strategy,mode,kind,trials,failed,mean_F,max_F,"
                  "n_palpations")


def _summary_row(rep: ConditionReport) -> str:
    cfg = rep.config
    return ",".join([
        cfg.condition, cfg.tumor.shape, cfg.strategy, cfg.mode, "per_trial",
        str(len(rep.trials)), str(rep.n_failed),
        _csv_num(rep.mean_f), _csv_num(rep.max_f), str(cfg.budget),
    ])


def _write_trajectories(fh, cfg: ExperimentConfig, trial: TrialOutcome) -> None:
    probes = trial.probes
    trajs = trial.trajs
    for j, res in enumerate(probes):
        rec = {
            "trial": trial.index, "palpation_index": j, "t": 0.0,
            "p": [float(x) for x in res.contact_point],
            "f": [float(x) for x in res.f_vec],
            "phase": "probe",
            "outcome": "tumor" if res.classified_tumor else "no_tumor",
        }
        fh.write(json.dumps(rec) + "\n")
    probe_index = {res.cell: j for j, res in enumerate(probes)}
    for t in trajs:
        pi = probe_index.get(t.start_cell, -1)
        for i in range(len(t)):
            rec = {
                "trial": trial.index, "palpation_index": pi,
                "t": float(t.times[i]),
                "p": [float(x) for x in t.poses[i]],
                "f": [float(x) for x in t.forces[i]],
                "phase": "contour",
                "outcome": t.outcome,
            }
            fh.write(json.dumps(rec) + "\n")


def run_experiment(cfg: ExperimentConfig, out_dir=None,
                   verbose: bool = True) -> ConditionReport:
    """Run all trials of one condition; optionally write the output files.

    Failed trials (e.g. an empty reconstruction on a degenerate budget)
    become failure rows and are excluded from mean/max.
    """
    t0 = time.perf_counter()
    phantom = build_phantom(cfg.phantom, cfg.tumor)
    gt = _ground_truth(cfg, phantom)
    trials: list[TrialOutcome] = []
    out_path: Optional[Path] = Path(out_dir) if out_dir is not None else None
    traj_fh = None
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)
        _write_config_echo(cfg, out_path / "config.txt")
        export_ply(gt, out_path / "gt.ply")
        traj_fh = open(out_path / "trajectories.jsonl", "w")
    try:
        for i in range(cfg.trials):
            trial = run_trial(cfg, phantom, gt, i)
            trials.append(trial)
            if out_path is not None:
                if trial.recon_points is not None and trial.recon_points.shape[0] > 0:
                    export_ply(PointCloud(trial.recon_points),
                               out_path / f"recon_{i}.ply")
                    try:
                        mesh = reconstruct_mesh(PointCloud(trial.recon_points))
                        export_mesh_ply(mesh, out_path / f"recon_mesh_{i}.ply")
                    except PalpSimError:
                        pass  # too few/degenerate points for a mesh
                _write_trajectories(traj_fh, cfg, trial)
            if verbose:
                f = trial.report.fscore if trial.report else float("nan")
                print(f"[{cfg.condition}] trial {i}: status={trial.status} "
                      f"recon={trial.n_recon} F={f:.3f}")
    finally:
        if traj_fh is not None:
            traj_fh.close()
    ok = [t.report for t in trials if t.report is not None]
    mean_f, max_f = aggregate_trials(ok) if ok else (0.0, 0.0)
    rep = ConditionReport(cfg, trials, mean_f, max_f,
                          n_failed=sum(1 for t in trials if t.status != "ok"),
                          wall_time=time.perf_counter() - t0)
    if out_path is not None:
        with open(out_path / "metrics.csv", "w") as fh:
            fh.write(METRICS_HEADER + "\n")
            for t in trials:
                fh.write(_metrics_row(cfg, t) + "\n")
        with open(out_path / "summary.csv", "w") as fh:
            fh.write(SUMMARY_HEADER + "\n")
            fh.write(_summary_row(rep) + "\n")
    if verbose:
        print(f"[{cfg.condition}] mean_F={mean_f:.3f} max_F={max_f:.3f} "
              f"({rep.wall_time:.1f}s)")
    return rep


@dataclass
class MatrixReport:
    conditions: list[ConditionReport]
    combined: dict[str, FScoreReport]       # shape -> pooled-cloud score
    failed: list[tuple[str, str]] = field(default_factory=list)


def run_matrix(cfgs: list[ExperimentConfig], out_dir=None,
               verbose: bool = True) -> MatrixReport:
    """Run every condition and emit one summary table.

    Adds a pooled "combined" row per shape: all reconstruction points
    from all that shape's trials scored against the ground truth once.
    A condition that fails outright is marked and the sweep continues.
    """
    if not cfgs:
        raise Empty("no experiment configs given")
    out_path = Path(out_dir) if out_dir is not None else None
    reports: list[ConditionReport] = []
    failed: list[tuple[str, str]] = []
    for cfg in cfgs:
        sub = out_path / cfg.condition if out_path is not None else None
        try:
            reports.append(run_experiment(cfg, sub, verbose=verbose))
        except PalpSimError as exc:
            failed.append((cfg.condition, f"{type(exc).__name__}: {exc}"))
            if verbose:
                print(f"[{cfg.condition}] FAILED: {exc}")

    combined: dict[str, FScoreReport] = {}
    by_shape: dict[str, list[ConditionReport]] = {}
    for rep in reports:
        by_shape.setdefault(rep.config.tumor.shape, []).append(rep)
    for shape, shape_reports in by_shape.items():
        points = [t.recon_points for rep in shape_reports for t in rep.trials
                  if t.recon_points is not None and t.recon_points.shape[0] > 0]
        if not points:
            continue
        cfg0 = shape_reports[0].config
        phantom = build_phantom(cfg0.phantom, cfg0.tumor)
        gt = _ground_truth(cfg0, phantom)
        combined[shape] = fscore(PointCloud(np.vstack(points)), gt, cfg0.r_eval)

    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)
        with open(out_path / "metrics.csv", "w") as fh:
            fh.write(METRICS_HEADER + "\n")
            for rep in reports:
                for t in rep.trials:
                    fh.write(_metrics_row(rep.config, t) + "\n")
        with open(out_path / "summary.csv", "w") as fh:
            fh.write(SUMMARY_HEADER + "\n")
            for rep in reports:
                fh.write(_summary_row(rep) + "\n")
            for shape in sorted(combined):
                score = combined[shape]
                n_palp = sum(r.config.budget * r.config.trials
                             for r in by_shape[shape])
                fh.write(",".join([
                    "combined", shape, "", "", "combined", "", "",
                    _csv_num(score.fscore), "", str(n_palp),
                ]) + "\n")
            for condition, _ in failed:
                fh.write(",".join([
                    condition, "", "", "", "failed", "", "", "", "", "",
                ]) + "\n")
    if verbose:
        for rep in reports:
            cfg = rep.config
            print(f"{cfg.condition:28s} mean_F={rep.mean_f:.3f} max_F={rep.max_f:.3f}")
        for shape, score in sorted(combined.items()):
            print(f"combined[{shape}]: F={score.fscore:.3f}")
    return MatrixReport(reports, combined, failed)
