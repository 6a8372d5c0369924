"""One full palpation: discrete probe, then contour following.

After a probe confirms the inclusion (force threshold reached within the
displacement bound), the impedance controller slides the pressed tip
along a min-jerk oscillation until the probe sinks past the displacement
bound with the force below threshold: the inclusion-muscle boundary.
"""

import numpy as np

from palpsim import (
    ControllerGains,
    PhantomConfig,
    ProbeParams,
    ProbePlant,
    TumorGeometry,
    admissible_force,
    build_phantom,
    contour_follow,
    crop_roi,
    interpolate_grid,
    mesh_from_cloud,
    preprocess_cloud,
    probe_cell,
    synth_depth_cloud,
    RoiBox,
)

phantom = build_phantom(PhantomConfig(), TumorGeometry("hemisphere"))
roi = RoiBox((-0.02, -0.02), (0.02, 0.02))
raw = synth_depth_cloud(phantom, ((-0.03, -0.03), (0.03, 0.03)), 3e6, 0.0005, seed=3)
grid = interpolate_grid(crop_roi(mesh_from_cloud(preprocess_cloud(raw)), roi),
                        0.002, 0.002)

params, gains = ProbeParams(), ControllerGains()
print(f"admissible interaction force bound: {admissible_force(gains):.1f} N")

plant = ProbePlant(phantom, params)
cell = (10, 10)  # over the tumor apex for this ROI
res = probe_cell(plant, phantom, grid, cell, params, gains)
print(f"\nprobe at cell {res.cell}: f_z {res.f_z:.2f} N over d_z "
      f"{res.d_z * 1e3:.2f} mm -> k = {res.k:.0f} N/m, "
      f"tumor={res.classified_tumor}")

traj = contour_follow(plant, phantom, grid, res, params, gains,
                      np.random.default_rng(11))
r_end = np.hypot(traj.poses[-1, 0], traj.poses[-1, 1])
print(f"\ncontour follow: {len(traj)} waypoints over "
      f"{traj.times[-1]:.2f} s, outcome={traj.outcome}")
print(f"stroke direction: ({traj.direction[0]:+.2f}, {traj.direction[1]:+.2f})")
print(f"terminal point radius: {r_end * 1e3:.1f} mm "
      f"(footprint radius 10 mm)")

axial = traj.forces @ traj.tip_normal
print(f"axial contact force along the trace: median {np.median(axial):.2f} N, "
      f"final {axial[-1]:.2f} N (drops below {params.f_thres:.0f} N at the edge)")
