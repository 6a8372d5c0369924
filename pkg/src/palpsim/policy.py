"""Online palpation: discrete probing with stiffness classification,
then impedance-controlled contour following driven by a min-jerk
oscillation until the inclusion's boundary with the muscle bed.

The plant is a Cartesian point-mass probe stepped by semi-implicit
Euler at the controller period; joint-space dynamics are out of scope.
The inner loop is written in plain-float arithmetic on purpose: it runs
at 1 kHz simulated rate for thousands of steps per palpation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .calibration import (
    CalibrationParams,
    EulerZYX,
    ForceReading,
    compensate_tip_weight,
    euler_from_axis,
    remove_z_offset,
    rotation_zyx,
)
from .errors import (
    AdmissibleForceExceeded,
    Exhausted,
    NoContact,
    NumericalBlowup,
    OutOfRange,
)
from .phantom import Phantom
from .registration import SurfaceGrid, cell_to_surface
from .search import Acquisition, GPHyper, StiffnessSample, gp_fit, next_cell_bo, next_cell_random

# Palpation strategies / modes.
BO = "bo"
RS = "rs"
CONTOUR_FOLLOWING = "cf"
DISCRETE = "discrete"

# Trajectory outcomes.
BOUNDARY_REACHED = "boundary_reached"
TIMEOUT = "timeout"
LOST_CONTACT = "lost_contact"

# Plant safety bound; exceeding it means the gains are misconfigured.
V_MAX = 5.0  # m/s


@dataclass(frozen=True)
class ControllerGains:
    """Impedance gains: per-axis spring k_p, damper k_d, pose-error clamp
    e_thres, controller period (seconds)."""

    k_p: float = 1500.0
    k_d: float = 20.0
    e_thres: float = 0.005
    period: float = 0.001

    def __post_init__(self):
        if self.k_p <= 0 or self.k_d < 0 or self.e_thres <= 0 or self.period <= 0:
            raise OutOfRange("k_p, e_thres, period must be > 0 and k_d >= 0")


@dataclass(frozen=True)
class ProbeParams:
    f_thres: float = 5.0          # N, tumor-confirmation force
    d_thres: float = 0.017        # m, skin-to-muscle displacement bound
    indent_speed: float = 0.02    # m/s, discrete-probe descent rate
    amplitude: float = 0.002      # m, min-jerk stroke amplitude
    osc_rate: float = 80.0        # Hz, waypoint / stroke-phase rate
    cf_timeout: float = 5.0       # s, per contour follow
    probe_mass: float = 0.1       # kg
    tip_radius: float = 0.0025    # m, spherical tip
    press_force: float = 6.0      # N, compressive bias during following
    ticks_per_stroke: int = 12    # outer ticks per min-jerk sweep
    hover: float = 0.001          # m, approach height above the surface
    contact_loss_timeout: float = 0.1  # s
    gravity_residual: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.amplitude <= 0 or self.f_thres <= 0 or self.d_thres <= 0:
            raise OutOfRange("amplitude, f_thres, d_thres must be > 0")
        if self.osc_rate <= 0 or self.ticks_per_stroke < 1 or self.probe_mass <= 0:
            raise OutOfRange("osc_rate, ticks_per_stroke, probe_mass must be positive")


@dataclass
class ProbeResult:
    cell: tuple[int, int]
    f_z: float                 # N, axial force at stop
    d_z: float                 # m, |p_zf - p_zi|
    k: float                   # N/m, f_z / d_z
    classified_tumor: bool
    p_zi: float                # m, probe z at first contact
    p_zf: float                # m, probe z at stop
    contact_point: np.ndarray  # tip contact point at stop
    normal: np.ndarray         # tip-axis alignment normal
    f_vec: np.ndarray = field(default_factory=lambda: np.zeros(3))  # inertial


@dataclass
class PalpationTrajectory:
    """Waypoints of one contour-following palpation at the stroke rate."""

    times: np.ndarray     # (n,)
    poses: np.ndarray     # (n, 3) tip-center positions
    forces: np.ndarray    # (n, 3) measured contact force, inertial frame
    outcome: str
    start_cell: tuple[int, int]
    direction: tuple[float, float]
    tip_normal: np.ndarray

    def __len__(self) -> int:
        return self.times.shape[0]


@dataclass
class PlantState:
    p: np.ndarray
    v: np.ndarray
    orientation: EulerZYX
    in_contact: bool = False


def min_jerk_offset(t: float, a: float) -> float:
    """Minimum-jerk stroke offset sweeping -a..+a as t goes 0..1."""
    if t < 0.0 or t > 1.0:
        raise OutOfRange(f"normalized time {t} outside [0, 1]")
    s = t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
    return 2.0 * a * s - a


def desired_pose(p_now, delta_xy, depth_bias: float = 0.0) -> np.ndarray:
    """Advance XY by delta and bias Z downward to keep compressive contact."""
    return np.array([
        float(p_now[0]) + float(delta_xy[0]),
        float(p_now[1]) + float(delta_xy[1]),
        float(p_now[2]) - depth_bias,
    ])


def impedance_force(p_d, p, v_d, v, gains: ControllerGains) -> np.ndarray:
    """Spring-damper command with the pose error clamped per axis."""
    e = np.clip(np.asarray(p_d, dtype=float) - np.asarray(p, dtype=float),
                -gains.e_thres, gains.e_thres)
    return gains.k_d * (np.asarray(v_d, dtype=float) - np.asarray(v, dtype=float)) + gains.k_p * e


def admissible_force(gains: ControllerGains) -> float:
    """Upper bound on the commanded interaction force under the clamp."""
    return gains.k_p * abs(gains.e_thres) + 2.0 * gains.k_d * abs(gains.e_thres) / gains.period


class ProbePlant:
    """Point-mass probe with a spherical tip and a simulated load cell.

    Holds mutable Cartesian state plus the fixed tip orientation for the
    current palpation.  The sensing model produces a local-frame load
    cell reading (true contact force plus tip weight, rotated into the
    body frame, plus static bias); measurements run through the
    calibration chain, so with ideal parameters they recover the true
    force exactly.
    """

    def __init__(self, phantom: Phantom, params: ProbeParams,
                 cal: Optional[CalibrationParams] = None):
        self.phantom = phantom
        self.params = params
        self.cal = cal if cal is not None else CalibrationParams()
        self.mass = params.probe_mass
        self.tip_radius = params.tip_radius
        self.gravity_residual = tuple(float(g) for g in params.gravity_residual)
        self.px = self.py = self.pz = 0.0
        self.vx = self.vy = self.vz = 0.0
        self.in_contact = False
        self.align((0.0, 0.0, 1.0), (0.0, 0.0, 1.0))

    # -- pose / orientation --------------------------------------------------

    def align(self, position, axis, rng: Optional[np.random.Generator] = None) -> None:
        """Place the probe and point its tip axis along ``axis`` (outward)."""
        self.px, self.py, self.pz = (float(position[0]), float(position[1]),
                                     float(position[2]))
        self.vx = self.vy = self.vz = 0.0
        self.in_contact = False
        n = math.sqrt(sum(float(a) ** 2 for a in axis))
        self.axis = (float(axis[0]) / n, float(axis[1]) / n, float(axis[2]) / n)
        self.euler = euler_from_axis(self.axis)
        self._r_true = rotation_zyx(self.euler)
        euler_est = self.euler
        if rng is not None and self.cal.angle_noise > 0.0:
            euler_est = EulerZYX(
                self.euler.psi + rng.normal(0.0, self.cal.angle_noise),
                self.euler.theta + rng.normal(0.0, self.cal.angle_noise),
                self.euler.phi + rng.normal(0.0, self.cal.angle_noise),
            )
        self.euler_est = euler_est
        self._rt = [list(row) for row in self._r_true.T]   # body <- inertial
        self._r_est = rotation_zyx(euler_est)

    def state(self) -> PlantState:
        return PlantState(
            np.array([self.px, self.py, self.pz]),
            np.array([self.vx, self.vy, self.vz]),
            self.euler,
            self.in_contact,
        )

    def tip_point(self) -> tuple[float, float, float]:
        ax, ay, az = self.axis
        r = self.tip_radius
        return self.px - r * ax, self.py - r * ay, self.pz - r * az

    # -- sensing ---------------------------------------------------------------

    def measure(self, fx: float, fy: float, fz: float) -> tuple[float, np.ndarray]:
        """Run a true inertial contact force through the load-cell chain.

        Returns (axial component along the tip axis, calibrated force
        re-expressed in the inertial frame).
        """
        rt = self._rt
        ml = self.cal.tip_weight_n
        gx, gy, gz = fx, fy, fz + ml
        raw = np.array([
            rt[0][0] * gx + rt[0][1] * gy + rt[0][2] * gz + self.cal.z_offset[0],
            rt[1][0] * gx + rt[1][1] * gy + rt[1][2] * gz + self.cal.z_offset[1],
            rt[2][0] * gx + rt[2][1] * gy + rt[2][2] * gz + self.cal.z_offset[2],
        ])
        local = remove_z_offset(ForceReading(raw), self.cal)
        comp = compensate_tip_weight(local, self.euler_est, self.cal)
        return float(comp.f[2]), self._r_est @ comp.f


def step_plant(state: PlantState, f_cmd, phantom: Phantom, dt: float,
               mass: float = 0.1, tip_radius: float = 0.0,
               gravity_residual=(0.0, 0.0, 0.0)) -> PlantState:
    """One semi-implicit Euler step: m*a = f_cmd + contact - residual.

    Contact is evaluated at the tip contact point (probe position offset
    by tip_radius along the tip axis) and acts along the local surface
    normal.  Raises NumericalBlowup past the velocity safety bound.
    """
    axis = rotation_zyx(state.orientation) @ np.array([0.0, 0.0, 1.0])
    p = np.asarray(state.p, dtype=float)
    v = np.asarray(state.v, dtype=float)
    f = np.asarray(f_cmd, dtype=float)
    out = _step(
        float(p[0]), float(p[1]), float(p[2]),
        float(v[0]), float(v[1]), float(v[2]),
        float(f[0]), float(f[1]), float(f[2]),
        phantom, dt, mass, tip_radius,
        float(axis[0]), float(axis[1]), float(axis[2]),
        float(gravity_residual[0]), float(gravity_residual[1]), float(gravity_residual[2]),
    )
    px, py, pz, vx, vy, vz, in_contact, _, _, _, _ = out
    return PlantState(np.array([px, py, pz]), np.array([vx, vy, vz]),
                      state.orientation, in_contact)


def _step(px, py, pz, vx, vy, vz, fcx, fcy, fcz, phantom, dt, mass, tip_r,
          ax, ay, az, grx, gry, grz):
    """Float-only plant step shared by step_plant and the inner loops.

    Returns the new state plus the contact force vector and magnitude:
    (px, py, pz, vx, vy, vz, in_contact, f_contact, fvx, fvy, fvz).
    """
    cx = px - tip_r * ax
    cy = py - tip_r * ay
    cz = pz - tip_r * az
    cr = phantom.contact_force(cx, cy, cz, vz)
    fn = cr.normal_force
    if fn > 0.0:
        nsx, nsy, nsz = phantom.surface_normal(cx, cy)
        fvx, fvy, fvz = fn * nsx, fn * nsy, fn * nsz
    else:
        fvx = fvy = fvz = 0.0
    inv_m = 1.0 / mass
    vx += (fcx + fvx - grx) * inv_m * dt
    vy += (fcy + fvy - gry) * inv_m * dt
    vz += (fcz + fvz - grz) * inv_m * dt
    if vx * vx + vy * vy + vz * vz > V_MAX * V_MAX:
        raise NumericalBlowup(f"plant speed exceeded {V_MAX} m/s")
    px += vx * dt
    py += vy * dt
    pz += vz * dt
    return px, py, pz, vx, vy, vz, fn > 0.0, fn, fvx, fvy, fvz


def probe_cell(plant: ProbePlant, phantom: Phantom, grid: SurfaceGrid,
               cell: tuple[int, int], params: ProbeParams,
               gains: ControllerGains,
               rng: Optional[np.random.Generator] = None) -> ProbeResult:
    """Discrete probe: align to the cell normal, indent until the force
    or displacement threshold, classify, and report k = f_z / d_z.

    Leaves the plant pressed at the stop point so contour following can
    take over in place.
    """
    point, normal = cell_to_surface(grid, cell[0], cell[1])
    nx, ny, nz = float(normal[0]), float(normal[1]), float(normal[2])
    r = params.tip_radius
    start = point + (params.hover + r) * normal
    plant.align(start, (nx, ny, nz), rng)

    dt = gains.period
    step_len = params.indent_speed * dt
    travel_limit = params.hover + params.d_thres + 0.005
    # kinematic descent along -normal; the discrete approach move is not
    # part of the contact dynamics under study
    px, py, pz = plant.px, plant.py, plant.pz
    vz_query = -params.indent_speed * nz
    traveled = 0.0
    p_zi = None
    f_axial = 0.0
    f_vec = np.zeros(3)
    while True:
        cx = px - r * nx
        cy = py - r * ny
        cz = pz - r * nz
        cr = phantom.contact_force(cx, cy, cz, vz_query)
        if cr.normal_force > 0.0:
            nsx, nsy, nsz = phantom.surface_normal(cx, cy)
            fn = cr.normal_force
            f_axial, f_vec = plant.measure(fn * nsx, fn * nsy, fn * nsz)
            if p_zi is None:
                p_zi = pz
            d_z = abs(pz - p_zi)
            if f_axial >= params.f_thres or d_z >= params.d_thres:
                break
        elif traveled > travel_limit:
            raise NoContact(
                f"no contact within {travel_limit * 1e3:.1f} mm of travel at cell {cell}"
            )
        px -= step_len * nx
        py -= step_len * ny
        pz -= step_len * nz
        traveled += step_len
    plant.px, plant.py, plant.pz = px, py, pz
    plant.vx = plant.vy = plant.vz = 0.0
    plant.in_contact = True
    d_z = abs(pz - p_zi)
    k = f_axial / d_z if d_z > 0.0 else f_axial / step_len
    classified = (f_axial > params.f_thres) and (d_z < params.d_thres)
    contact_point = np.array([px - r * nx, py - r * ny, pz - r * nz])
    return ProbeResult(
        cell=(int(cell[0]), int(cell[1])),
        f_z=f_axial,
        d_z=d_z,
        k=k,
        classified_tumor=classified,
        p_zi=p_zi,
        p_zf=pz,
        contact_point=contact_point,
        normal=np.array([nx, ny, nz]),
        f_vec=np.asarray(f_vec, dtype=float),
    )


def contour_follow(plant: ProbePlant, phantom: Phantom, grid: SurfaceGrid,
                   start: ProbeResult, params: ProbeParams,
                   gains: ControllerGains,
                   rng: np.random.Generator) -> PalpationTrajectory:
    """Trace the inclusion surface with anchored min-jerk strokes.

    Strokes advance along a fixed random XY direction; a downward pose
    bias keeps the press force near ``press_force``.  Termination:
    BOUNDARY_REACHED when the probe sinks past d_thres with the axial
    force below f_thres (checked every control tick), TIMEOUT after
    cf_timeout, LOST_CONTACT after contact_loss_timeout out of contact.
    """
    if not start.classified_tumor:
        raise OutOfRange("contour following requires a tumor-classified probe")
    theta = float(rng.uniform(0.0, 2.0 * math.pi))
    dir_x, dir_y = math.cos(theta), math.sin(theta)

    dt = gains.period
    inner_n = max(1, int(round(1.0 / (params.osc_rate * dt))))
    outer_dt = inner_n * dt
    depth_bias = params.press_force / gains.k_p
    k_p, k_d, e_lim = gains.k_p, gains.k_d, gains.e_thres
    f_adm2 = admissible_force(gains) ** 2
    f_thres, d_thres = params.f_thres, params.d_thres
    amp = params.amplitude
    ticks_per_stroke = params.ticks_per_stroke
    mass, tip_r = plant.mass, plant.tip_radius
    ax, ay, az = plant.axis
    grx, gry, grz = plant.gravity_residual
    sample_height = grid.sample_height

    px, py, pz = plant.px, plant.py, plant.pz
    vx, vy, vz = plant.vx, plant.vy, plant.vz

    cx0 = px - tip_r * ax
    cy0 = py - tip_r * ay
    cz0 = pz - tip_r * az
    cr0 = phantom.contact_force(cx0, cy0, cz0, vz)
    ns = phantom.surface_normal(cx0, cy0)
    _, f_vec0 = plant.measure(cr0.normal_force * ns[0], cr0.normal_force * ns[1],
                              cr0.normal_force * ns[2])

    times = [0.0]
    poses = [(px, py, pz)]
    forces = [tuple(f_vec0)]

    t = 0.0
    last_contact = 0.0
    outcome = None
    anchor_x = anchor_y = 0.0
    start_x, start_y = px, py
    tick = 0
    phase = 0
    # A start cell right at the inclusion edge can satisfy the boundary
    # test within a couple of ticks.  The first such event inside the
    # opening stroke redirects travel back toward the follow's start
    # point (a confirmed on-tumor coordinate) instead of ending a follow
    # that mapped nothing; later events latch and terminate once the
    # trajectory holds the minimum waypoint count a palpation is
    # expected to produce.
    reversed_once = False
    do_reverse = False
    armed = True
    latched = False
    min_waypoints = min(10, ticks_per_stroke)
    while outcome is None:
        if t + outer_dt > params.cf_timeout + 1e-12:
            outcome = TIMEOUT
            break
        if do_reverse:
            do_reverse = False
            back_x = start_x - px
            back_y = start_y - py
            norm = math.hypot(back_x, back_y)
            if norm > 1e-9:
                dir_x, dir_y = back_x / norm, back_y / norm
            else:
                dir_x, dir_y = -dir_x, -dir_y
            anchor_x, anchor_y = px, py
            phase = ticks_per_stroke // 2  # resume mid-sweep: move inward now
        elif phase == 0:
            anchor_x, anchor_y = px, py
        off = min_jerk_offset((phase + 1) / ticks_per_stroke, amp)
        pdx = anchor_x + dir_x * off
        pdy = anchor_y + dir_y * off
        pdz = pz - depth_bias
        f_vec = (0.0, 0.0, 0.0)
        for _ in range(inner_n):
            ex = pdx - px
            if ex > e_lim:
                ex = e_lim
            elif ex < -e_lim:
                ex = -e_lim
            ey = pdy - py
            if ey > e_lim:
                ey = e_lim
            elif ey < -e_lim:
                ey = -e_lim
            ez = pdz - pz
            if ez > e_lim:
                ez = e_lim
            elif ez < -e_lim:
                ez = -e_lim
            fcx = k_p * ex - k_d * vx
            fcy = k_p * ey - k_d * vy
            fcz = k_p * ez - k_d * vz
            if fcx * fcx + fcy * fcy + fcz * fcz > f_adm2:
                raise AdmissibleForceExceeded(
                    f"|f_cmd| exceeded admissible bound {math.sqrt(f_adm2):.1f} N"
                )
            (px, py, pz, vx, vy, vz, in_contact, fn, fvx, fvy, fvz) = _step(
                px, py, pz, vx, vy, vz, fcx, fcy, fcz, phantom, dt, mass,
                tip_r, ax, ay, az, grx, gry, grz)
            t += dt
            f_axial, f_vec = plant.measure(fvx, fvy, fvz)
            if in_contact:
                last_contact = t
            elif t - last_contact > params.contact_loss_timeout:
                outcome = LOST_CONTACT
                break
            ctip_z = pz - tip_r * az
            d_z = sample_height(px - tip_r * ax, py - tip_r * ay) - ctip_z
            if d_z > d_thres and f_axial < f_thres:
                if armed:
                    if not reversed_once and tick < ticks_per_stroke:
                        reversed_once = True
                        do_reverse = True
                        armed = False
                    elif len(times) >= min_waypoints:
                        outcome = BOUNDARY_REACHED
                        break
                    else:
                        latched = True
            elif not armed and not do_reverse and \
                    f_axial >= f_thres and d_z < d_thres:
                armed = True  # back on the inclusion; boundary test live again
        times.append(t)
        poses.append((px, py, pz))
        forces.append(tuple(f_vec))
        tick += 1
        phase = (phase + 1) % ticks_per_stroke
        if outcome is None and latched and len(times) >= min_waypoints:
            outcome = BOUNDARY_REACHED

    plant.px, plant.py, plant.pz = px, py, pz
    plant.vx, plant.vy, plant.vz = vx, vy, vz
    return PalpationTrajectory(
        times=np.array(times),
        poses=np.array(poses),
        forces=np.array(forces),
        outcome=outcome,
        start_cell=start.cell,
        direction=(dir_x, dir_y),
        tip_normal=np.array(plant.axis),
    )


def run_policy(phantom: Phantom, grid: SurfaceGrid, strategy: str, mode: str,
               budget: int, params: ProbeParams, gains: ControllerGains,
               seed: int, cal: Optional[CalibrationParams] = None,
               hyper: GPHyper = GPHyper(), xi: float = 5.0,
               n_init: int = 3) -> tuple[list[ProbeResult], list[PalpationTrajectory]]:
    """Full palpation loop: select cell, probe, refit GP, optionally follow.

    Each selection counts once against the budget.  Selection and stroke
    directions draw from independent seeded streams, so a discrete run
    and a contour-following run with the same seed probe identical
    cells.
    """
    if strategy not in (BO, RS):
        raise OutOfRange(f"unknown strategy {strategy!r}")
    if mode not in (CONTOUR_FOLLOWING, DISCRETE):
        raise OutOfRange(f"unknown mode {mode!r}")
    if budget < 1:
        raise OutOfRange("budget must be >= 1")
    n_valid = int(grid.valid_mask.sum())
    if budget > n_valid:
        raise Exhausted(f"budget {budget} exceeds {n_valid} valid cells")
    rng_select = np.random.default_rng([int(seed), 0])
    rng_stroke = np.random.default_rng([int(seed), 1])
    rng_sense = np.random.default_rng([int(seed), 2])
    plant = ProbePlant(phantom, params, cal)
    samples: list[StiffnessSample] = []
    visited: set[tuple[int, int]] = set()
    results: list[ProbeResult] = []
    trajectories: list[PalpationTrajectory] = []
    for _ in range(budget):
        if strategy == BO and len(samples) >= n_init:
            gp = gp_fit(samples, hyper)
            acq = Acquisition(xi=xi, best_k=max(s.k for s in samples))
            cell = next_cell_bo(gp, grid, visited, acq, rng_select)
        else:
            cell = next_cell_random(grid, visited, rng_select)
        visited.add(cell)
        res = probe_cell(plant, phantom, grid, cell, params, gains, rng_sense)
        results.append(res)
        samples.append(StiffnessSample(cell, res.k))
        if mode == CONTOUR_FOLLOWING and res.classified_tumor:
            trajectories.append(
                contour_follow(plant, phantom, grid, res, params, gains, rng_stroke)
            )
    return results, trajectories
