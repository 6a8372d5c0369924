"""Reconstruction harvesting and F-score evaluation.

Contact waypoints from contour-following palpations (plus discrete
probe terminal contacts) become the reconstructed tumor-surface cloud;
precision/recall against a ground-truth cloud at a distance threshold r
give the F-score.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import Delaunay, QhullError, cKDTree

from .errors import DegenerateCloud, Empty, EmptyCloud, EmptyReconstruction
from .phantom import PointCloud
from .policy import PalpationTrajectory, ProbeParams, ProbeResult
from .registration import SurfaceMesh, _vertex_normals

_DEDUP_RADIUS = 2e-4  # m, points closer than this collapse to one


@dataclass
class FScoreReport:
    precision: float
    recall: float
    fscore: float
    r: float
    n_recon: int
    n_gt: int


@dataclass
class ReconCloud:
    points: PointCloud
    source_counts: dict[str, int]


def _dedup_indices(points: np.ndarray) -> list[int]:
    """Indices kept by a greedy spatial dedup in input order (deterministic)."""
    cell = _DEDUP_RADIUS
    r2 = _DEDUP_RADIUS * _DEDUP_RADIUS
    buckets: dict[tuple[int, int, int], list[int]] = {}
    kept: list[int] = []
    for i, p in enumerate(points):
        key = (int(math.floor(p[0] / cell)), int(math.floor(p[1] / cell)),
               int(math.floor(p[2] / cell)))
        close = False
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                for dz in (-1, 0, 1):
                    for j in buckets.get((key[0] + dx, key[1] + dy, key[2] + dz), ()):
                        q = points[j]
                        if ((p[0] - q[0]) ** 2 + (p[1] - q[1]) ** 2
                                + (p[2] - q[2]) ** 2) < r2:
                            close = True
                            break
                    if close:
                        break
                if close:
                    break
            if close:
                break
        if not close:
            kept.append(i)
            buckets.setdefault(key, []).append(i)
    return kept


def extract_contact_points(trajectories: list[PalpationTrajectory],
                           probe_results: list[ProbeResult],
                           params: ProbeParams,
                           tip_radius: float) -> ReconCloud:
    """Harvest tumor-surface contact points.

    Tumor-classified probes contribute their terminal contact point;
    contour-following waypoints contribute wherever the axial contact
    force stays at or above f_thres (the on-tumor condition, which drops
    the low-force boundary oscillations).  Tip-center poses are offset
    by tip_radius along the indentation direction.  Near-duplicate
    points (< 0.2 mm apart) are collapsed.
    """
    chunks: list[np.ndarray] = []
    labels: list[str] = []
    n_probe = 0
    for res in probe_results:
        if res.classified_tumor:
            chunks.append(res.contact_point.reshape(1, 3))
            labels.append("probe")
            n_probe += 1
    for traj in trajectories:
        if len(traj) == 0:
            continue
        axial = traj.forces @ traj.tip_normal
        keep = axial >= params.f_thres
        if not keep.any():
            continue
        pts = traj.poses[keep] - tip_radius * traj.tip_normal[None, :]
        chunks.append(pts)
        labels.append("contour")
    if not chunks:
        raise EmptyReconstruction("no qualifying contact points")
    stacked = np.vstack(chunks)
    phase = np.concatenate([
        np.full(c.shape[0], 0 if lbl == "probe" else 1, dtype=int)
        for c, lbl in zip(chunks, labels)
    ])
    kept = _dedup_indices(stacked)
    counts = {
        "probe": int((phase[kept] == 0).sum()),
        "contour": int((phase[kept] == 1).sum()),
    }
    return ReconCloud(PointCloud(stacked[kept]), counts)


def fscore(recon: PointCloud, gt: PointCloud, r: float) -> FScoreReport:
    """Precision/recall of mutual nearest-neighbor coverage within r."""
    if len(recon) == 0 or len(gt) == 0:
        raise EmptyCloud("both clouds must be nonempty")
    d_recon, _ = cKDTree(gt.points).query(recon.points)
    d_gt, _ = cKDTree(recon.points).query(gt.points)
    precision = float(np.mean(d_recon <= r))
    recall = float(np.mean(d_gt <= r))
    f = 2.0 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return FScoreReport(precision, recall, f, r, len(recon), len(gt))


def reconstruct_mesh(cloud) -> SurfaceMesh:
    """Delaunay mesh over the contact points' XY projection.

    Triangles with any 3D edge longer than 3x the median edge are
    dropped so the mesh does not bridge concave gaps (e.g. the crescent
    bite).
    """
    points = cloud.points.points if isinstance(cloud, ReconCloud) else cloud.points
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    if points.shape[0] < 3:
        raise DegenerateCloud("need at least 3 points")
    try:
        tri = Delaunay(points[:, :2])
    except QhullError as exc:
        raise DegenerateCloud(f"triangulation failed: {exc}") from exc
    simplices = tri.simplices
    if simplices.shape[0] == 0:
        raise DegenerateCloud("no triangles produced")
    edges = np.stack([
        np.linalg.norm(points[simplices[:, 0]] - points[simplices[:, 1]], axis=1),
        np.linalg.norm(points[simplices[:, 1]] - points[simplices[:, 2]], axis=1),
        np.linalg.norm(points[simplices[:, 2]] - points[simplices[:, 0]], axis=1),
    ], axis=1)
    med = np.median(edges)
    keep = (edges <= 3.0 * med).all(axis=1)
    simplices = simplices[keep]
    if simplices.shape[0] == 0:
        raise DegenerateCloud("all triangles dropped by the edge filter")
    return SurfaceMesh(points, simplices, _vertex_normals(points, simplices))


def aggregate_trials(reports: list[FScoreReport]) -> tuple[float, float]:
    """Arithmetic mean and maximum of the per-trial F-scores."""
    if not reports:
        raise Empty("no reports to aggregate")
    scores = [rep.fscore for rep in reports]
    return float(np.mean(scores)), float(max(scores))
