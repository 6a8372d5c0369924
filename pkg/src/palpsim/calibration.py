"""Load-cell force calibration: static bias removal and tip-weight
gravity compensation via local<->inertial rotation transforms."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import FrameMismatch

LOAD_CELL_LOCAL = "load_cell_local"
INERTIAL = "inertial"


@dataclass(frozen=True)
class EulerZYX:
    """Yaw (psi), pitch (theta), roll (phi) in radians, applied Z-Y-X."""

    psi: float = 0.0
    theta: float = 0.0
    phi: float = 0.0


@dataclass
class ForceReading:
    f: np.ndarray
    frame: str = LOAD_CELL_LOCAL

    def __post_init__(self):
        self.f = np.asarray(self.f, dtype=float).reshape(3)
        if self.frame not in (LOAD_CELL_LOCAL, INERTIAL):
            raise FrameMismatch(f"unknown frame {self.frame!r}")


@dataclass(frozen=True)
class CalibrationParams:
    """tip_weight_n is the tip mass expressed in Newtons (M*g)."""

    tip_weight_n: float = 0.35
    z_offset: tuple[float, float, float] = (0.0, 0.0, 0.0)
    resultant_mode: str = "norm"  # "norm" or "per_axis_rms"
    angle_noise: float = 0.0      # rad, optional orientation jitter

    def __post_init__(self):
        if self.tip_weight_n < 0:
            raise FrameMismatch("tip_weight_n must be >= 0")
        if self.resultant_mode not in ("norm", "per_axis_rms"):
            raise FrameMismatch(f"unknown resultant mode {self.resultant_mode!r}")


def rotation_zyx(e: EulerZYX) -> np.ndarray:
    """R = Rz(psi) @ Ry(theta) @ Rx(phi); maps body vectors to inertial."""
    cp, sp = math.cos(e.psi), math.sin(e.psi)
    ct, st = math.cos(e.theta), math.sin(e.theta)
    cr, sr = math.cos(e.phi), math.sin(e.phi)
    return np.array([
        [cp * ct, cp * st * sr - sp * cr, cp * st * cr + sp * sr],
        [sp * ct, sp * st * sr + cp * cr, sp * st * cr - cp * sr],
        [-st, ct * sr, ct * cr],
    ])


def euler_from_axis(axis) -> EulerZYX:
    """Zero-yaw Euler angles whose rotation maps body +z onto ``axis``."""
    ax, ay, az = (float(axis[0]), float(axis[1]), float(axis[2]))
    n = math.sqrt(ax * ax + ay * ay + az * az)
    ax, ay, az = ax / n, ay / n, az / n
    phi = math.asin(max(-1.0, min(1.0, -ay)))
    theta = math.atan2(ax, az)
    return EulerZYX(0.0, theta, phi)


def remove_z_offset(raw: ForceReading, cal: CalibrationParams) -> ForceReading:
    """Subtract the static load-cell bias (local frame only)."""
    if raw.frame != LOAD_CELL_LOCAL:
        raise FrameMismatch(f"expected {LOAD_CELL_LOCAL}, got {raw.frame}")
    return ForceReading(raw.f - np.asarray(cal.z_offset, dtype=float), LOAD_CELL_LOCAL)


def compensate_tip_weight(f_local: ForceReading, e: EulerZYX,
                          cal: CalibrationParams) -> ForceReading:
    """Remove the tip weight seen by the load cell.

    Rotate the local reading into the inertial frame, subtract
    (0, 0, tip_weight_n), rotate back.  Output stays in the local frame.
    """
    if f_local.frame != LOAD_CELL_LOCAL:
        raise FrameMismatch(f"expected {LOAD_CELL_LOCAL}, got {f_local.frame}")
    r = rotation_zyx(e)
    f_inertial = r @ f_local.f
    f_inertial[2] -= cal.tip_weight_n
    return ForceReading(r.T @ f_inertial, LOAD_CELL_LOCAL)


def resultant_force(f: ForceReading, mode: str = "norm") -> float:
    """Scalar reaction force from a 3-axis reading.

    ``norm`` is the Euclidean magnitude (default); ``per_axis_rms``
    divides by sqrt(3) for the literal per-axis RMS reading.
    """
    n = float(np.linalg.norm(f.f))
    if mode == "per_axis_rms":
        return n / math.sqrt(3.0)
    if mode != "norm":
        raise FrameMismatch(f"unknown resultant mode {mode!r}")
    return n
