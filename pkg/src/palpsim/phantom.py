"""Analytic layered tissue phantom with rigid sub-dermal inclusions.

The phantom replaces bench hardware: a curved skin surface over a
skin/fat stack sitting on a muscle bed, with an optional rigid tumor
height field sandwiched between fat and muscle.  It answers contact
queries with a piecewise Kelvin-Voigt force law and synthesizes both
depth-camera-style surface clouds and ground-truth tumor clouds.

Scalar query paths (``z_skin``, ``contact_force``) are plain-float math
so the 1 kHz control loop stays cheap; cloud generation uses vectorized
numpy paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigInvalid, EmptyRegion, NoTumor

# Contact regimes reported by contact_force.
NO_CONTACT = "no_contact"
SOFT_STACK = "soft_stack"
HARD_STOP_TUMOR = "hard_stop_tumor"
HARD_STOP_MUSCLE = "hard_stop_muscle"

# Surface profile kinds.
FLAT = "flat"
CYL_BUMP = "cyl_bump"
GAUSS_BUMP = "gauss_bump"

# Tumor shapes.
HEMISPHERE = "hemisphere"
ELLIPSOID = "ellipsoid"
CRESCENT = "crescent"


@dataclass(frozen=True)
class SurfaceProfile:
    """Skin surface height offset above the nominal (flat) skin plane.

    kind:
        ``flat``       -- zero everywhere.
        ``cyl_bump``   -- circular-arc ridge running along y:
                          amplitude * sqrt(1 - (x/radius)^2), clamped at 0.
        ``gauss_bump`` -- radial bump amplitude * exp(-(x^2+y^2)/(2 sigma^2)).
    """

    kind: str = FLAT
    amplitude: float = 0.0
    radius: float = 0.05  # cyl_bump footprint half-width
    sigma: float = 0.02   # gauss_bump spread

    def __post_init__(self):
        if self.kind not in (FLAT, CYL_BUMP, GAUSS_BUMP):
            raise ConfigInvalid(f"unknown surface profile kind {self.kind!r}")
        if self.kind != FLAT and self.amplitude < 0:
            raise ConfigInvalid("profile amplitude must be >= 0")
        if self.kind == CYL_BUMP and self.radius <= 0:
            raise ConfigInvalid("cyl_bump radius must be > 0")
        if self.kind == GAUSS_BUMP and self.sigma <= 0:
            raise ConfigInvalid("gauss_bump sigma must be > 0")

    def height(self, x: float, y: float) -> float:
        if self.kind == FLAT:
            return 0.0
        if self.kind == CYL_BUMP:
            u = x / self.radius
            s = 1.0 - u * u
            return self.amplitude * math.sqrt(s) if s > 0.0 else 0.0
        r2 = x * x + y * y
        return self.amplitude * math.exp(-r2 / (2.0 * self.sigma * self.sigma))

    def slope(self, x: float, y: float) -> tuple[float, float]:
        """(dz/dx, dz/dy) of the profile."""
        if self.kind == FLAT:
            return 0.0, 0.0
        if self.kind == CYL_BUMP:
            u = x / self.radius
            s = 1.0 - u * u
            if s <= 1e-12:
                return 0.0, 0.0
            return -self.amplitude * u / (self.radius * math.sqrt(s)), 0.0
        g = self.height(x, y) / (self.sigma * self.sigma)
        return -x * g, -y * g

    def height_np(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        if self.kind == FLAT:
            return np.zeros_like(np.asarray(xs, dtype=float))
        if self.kind == CYL_BUMP:
            u = np.asarray(xs, dtype=float) / self.radius
            return self.amplitude * np.sqrt(np.maximum(0.0, 1.0 - u * u))
        r2 = np.asarray(xs, dtype=float) ** 2 + np.asarray(ys, dtype=float) ** 2
        return self.amplitude * np.exp(-r2 / (2.0 * self.sigma**2))


def flat_profile() -> SurfaceProfile:
    return SurfaceProfile(FLAT)


def cyl_bump(amplitude: float = 0.006, radius: float = 0.05) -> SurfaceProfile:
    return SurfaceProfile(CYL_BUMP, amplitude=amplitude, radius=radius)


def gauss_bump(amplitude: float = 0.006, sigma: float = 0.02) -> SurfaceProfile:
    return SurfaceProfile(GAUSS_BUMP, amplitude=amplitude, sigma=sigma)


@dataclass(frozen=True)
class PhantomConfig:
    """Layer thicknesses, stiffnesses, and surface geometry.

    Stiffnesses must satisfy k_fat < k_skin < k_muscle < k_tumor; the
    skin and fat springs act in series, so the effective pre-stop
    stiffness is 1/(1/k_skin + 1/k_fat).
    """

    skin_thickness: float = 0.004
    fat_thickness: float = 0.015
    k_skin: float = 800.0
    k_fat: float = 400.0
    k_muscle: float = 2500.0
    k_tumor: float = 20000.0
    surface_profile: SurfaceProfile = field(default_factory=cyl_bump)
    contact_damping: float = 2.0
    muscle_plane_z: float = 0.0

    def __post_init__(self):
        if self.skin_thickness <= 0 or self.fat_thickness <= 0:
            raise ConfigInvalid("layer thicknesses must be > 0")
        if not (0 < self.k_fat < self.k_skin < self.k_muscle < self.k_tumor):
            raise ConfigInvalid(
                "stiffness ordering violated: need k_fat < k_skin < k_muscle < k_tumor, got "
                f"fat={self.k_fat} skin={self.k_skin} muscle={self.k_muscle} tumor={self.k_tumor}"
            )
        if self.contact_damping < 0:
            raise ConfigInvalid("contact_damping must be >= 0")

    @property
    def stack_depth(self) -> float:
        """Soft-stack depth from skin surface to the muscle bed."""
        return self.skin_thickness + self.fat_thickness

    @property
    def k_soft(self) -> float:
        """Series stiffness of the skin and fat springs."""
        return 1.0 / (1.0 / self.k_skin + 1.0 / self.k_fat)


@dataclass(frozen=True)
class TumorGeometry:
    """Rigid inclusion resting on the muscle bed, given as a height field.

    shape_params per shape:
        hemisphere -- none (apex height equals ``radius``)
        ellipsoid  -- semi_axes (ax, ay, az) in meters
        crescent   -- inner_offset (shift of the cut circle along +x),
                      width (crescent width at its widest point),
                      top_height (flat plateau height),
                      fillet_radius (quarter-round edge blend)
    """

    shape: str = HEMISPHERE
    radius: float = 0.01
    center_xy: tuple[float, float] = (0.0, 0.0)
    semi_axes: tuple[float, float, float] = (0.015, 0.01, 0.008)
    inner_offset: float = 0.006
    width: float = 0.008
    top_height: float = 0.008
    fillet_radius: float = 0.002

    def __post_init__(self):
        if self.shape not in (HEMISPHERE, ELLIPSOID, CRESCENT):
            raise ConfigInvalid(f"unknown tumor shape {self.shape!r}")
        if self.radius <= 0:
            raise ConfigInvalid("tumor radius must be > 0")
        if self.shape == ELLIPSOID and any(a <= 0 for a in self.semi_axes):
            raise ConfigInvalid("ellipsoid semi-axes must be > 0")
        if self.shape == CRESCENT:
            if self.width <= 0 or self.top_height <= 0 or self.fillet_radius <= 0:
                raise ConfigInvalid("crescent width/top_height/fillet_radius must be > 0")
            if self.inner_radius <= 0:
                raise ConfigInvalid("crescent inner cut radius must be > 0 (width too large)")

    @property
    def inner_radius(self) -> float:
        """Radius of the offset cut circle defining the crescent's inner arc."""
        return self.radius - self.width + self.inner_offset

    @property
    def max_height(self) -> float:
        if self.shape == HEMISPHERE:
            return self.radius
        if self.shape == ELLIPSOID:
            return self.semi_axes[2]
        return self.top_height

    def height(self, x: float, y: float) -> float:
        """Tumor height above the muscle bed; 0 outside the footprint."""
        dx = x - self.center_xy[0]
        dy = y - self.center_xy[1]
        if self.shape == HEMISPHERE:
            s = self.radius * self.radius - dx * dx - dy * dy
            return math.sqrt(s) if s > 0.0 else 0.0
        if self.shape == ELLIPSOID:
            ax, ay, az = self.semi_axes
            s = 1.0 - (dx / ax) ** 2 - (dy / ay) ** 2
            return az * math.sqrt(s) if s > 0.0 else 0.0
        # crescent: outer disk minus offset inner disk, flat top, filleted edge
        rho_out = math.hypot(dx, dy)
        rho_in = math.hypot(dx - self.inner_offset, dy)
        d_edge = min(self.radius - rho_out, rho_in - self.inner_radius)
        if d_edge <= 0.0:
            return 0.0
        if d_edge >= self.fillet_radius:
            return self.top_height
        t = 1.0 - d_edge / self.fillet_radius
        return self.top_height * math.sqrt(max(0.0, 1.0 - t * t))

    def height_np(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        dx = np.asarray(xs, dtype=float) - self.center_xy[0]
        dy = np.asarray(ys, dtype=float) - self.center_xy[1]
        if self.shape == HEMISPHERE:
            return np.sqrt(np.maximum(0.0, self.radius**2 - dx * dx - dy * dy))
        if self.shape == ELLIPSOID:
            ax, ay, az = self.semi_axes
            return az * np.sqrt(np.maximum(0.0, 1.0 - (dx / ax) ** 2 - (dy / ay) ** 2))
        rho_out = np.hypot(dx, dy)
        rho_in = np.hypot(dx - self.inner_offset, dy)
        d_edge = np.minimum(self.radius - rho_out, rho_in - self.inner_radius)
        t = 1.0 - np.clip(d_edge, 0.0, self.fillet_radius) / self.fillet_radius
        h = self.top_height * np.sqrt(np.maximum(0.0, 1.0 - t * t))
        return np.where(d_edge > 0.0, h, 0.0)

    def in_footprint(self, x: float, y: float) -> bool:
        return self.height(x, y) > 0.0


@dataclass(frozen=True)
class ContactResponse:
    """One contact-force query: scalar normal force plus bookkeeping."""

    normal_force: float
    penetration: float
    regime: str


@dataclass
class PointCloud:
    """3D points in meters with optional unit normals (same count)."""

    points: np.ndarray
    normals: Optional[np.ndarray] = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 3)
        if self.normals is not None:
            self.normals = np.asarray(self.normals, dtype=float).reshape(-1, 3)
            if self.normals.shape[0] != self.points.shape[0]:
                raise ConfigInvalid("normals count must match points count")
            norms = np.linalg.norm(self.normals, axis=1)
            if self.normals.shape[0] and np.any(np.abs(norms - 1.0) > 1e-6):
                raise ConfigInvalid("normals must be unit length within 1e-6")

    def __len__(self) -> int:
        return self.points.shape[0]


class Phantom:
    """Immutable analytic world: height fields plus the contact law.

    Height fields (z up):
        z_skin(x,y)   = muscle_plane_z + stack_depth + profile(x,y)
        z_muscle(x,y) = z_skin(x,y) - stack_depth      (conformal layers)
        z_stop(x,y)   = z_muscle(x,y) + h_tumor(x,y)   (hard-stop surface)

    Safe for concurrent reads; never mutated after construction.
    """

    def __init__(self, cfg: PhantomConfig, tumor: Optional[TumorGeometry] = None):
        if tumor is not None and tumor.max_height > cfg.stack_depth:
            raise ConfigInvalid(
                f"tumor height {tumor.max_height} exceeds soft-stack depth {cfg.stack_depth}"
            )
        self.cfg = cfg
        self.tumor = tumor
        self._profile = cfg.surface_profile
        self._skin_base = cfg.muscle_plane_z + cfg.stack_depth
        self._stack = cfg.stack_depth
        self._k_soft = cfg.k_soft
        self._k_tumor = cfg.k_tumor
        self._k_muscle = cfg.k_muscle
        self._damping = cfg.contact_damping

    # -- geometry ----------------------------------------------------------

    def z_skin(self, x: float, y: float) -> float:
        return self._skin_base + self._profile.height(x, y)

    def z_muscle(self, x: float, y: float) -> float:
        return self.z_skin(x, y) - self._stack

    def h_tumor(self, x: float, y: float) -> float:
        return self.tumor.height(x, y) if self.tumor is not None else 0.0

    def z_stop(self, x: float, y: float) -> float:
        return self.z_muscle(x, y) + self.h_tumor(x, y)

    def d_stop(self, x: float, y: float) -> float:
        """Penetration depth at which the hard stop engages."""
        return self._stack - self.h_tumor(x, y)

    def surface_normal(self, x: float, y: float) -> tuple[float, float, float]:
        """Outward unit normal of the skin surface."""
        gx, gy = self._profile.slope(x, y)
        inv = 1.0 / math.sqrt(gx * gx + gy * gy + 1.0)
        return -gx * inv, -gy * inv, inv

    def z_skin_np(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        return self._skin_base + self._profile.height_np(xs, ys)

    def z_stop_np(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        h = self.tumor.height_np(xs, ys) if self.tumor is not None else 0.0
        return self.z_skin_np(xs, ys) - self._stack + h

    # -- contact -----------------------------------------------------------

    def contact_force(self, qx: float, qy: float, probe_z: float,
                      probe_vz: float = 0.0) -> ContactResponse:
        """Piecewise spring force along the soft stack, then the hard stop.

        Penetration is the vertical gap below the skin surface.  Damping
        (contact_damping * descent speed) applies only while in contact
        and never produces suction.
        """
        d = self.z_skin(qx, qy) - probe_z
        if d <= 0.0:
            return ContactResponse(0.0, 0.0, NO_CONTACT)
        h = self.h_tumor(qx, qy)
        d_stop = self._stack - h
        if d <= d_stop:
            f = self._k_soft * d
            regime = SOFT_STACK
        else:
            k_hard = self._k_tumor if h > 0.0 else self._k_muscle
            f = self._k_soft * d_stop + k_hard * (d - d_stop)
            regime = HARD_STOP_TUMOR if h > 0.0 else HARD_STOP_MUSCLE
        if probe_vz < 0.0:
            f += self._damping * (-probe_vz)
        return ContactResponse(f, d, regime)

    # -- synthetic sensing --------------------------------------------------

    def synth_depth_cloud(self, region, density: float, noise_sigma: float = 0.0,
                          seed=0) -> PointCloud:
        """Jittered-lattice samples of the skin surface with isotropic noise.

        region is ((xmin, ymin), (xmax, ymax)).  Deterministic for a
        fixed seed.
        """
        (xmin, ymin), (xmax, ymax) = region
        w, h = xmax - xmin, ymax - ymin
        if density <= 0 or w <= 0 or h <= 0:
            raise EmptyRegion(f"degenerate region {region} or density {density}")
        n_target = density * w * h
        nx = max(1, int(round(math.sqrt(n_target * w / h))))
        ny = max(1, int(round(n_target / nx)))
        rng = np.random.default_rng(seed)
        ix, iy = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
        xs = xmin + (ix.ravel() + rng.uniform(0.0, 1.0, nx * ny)) * (w / nx)
        ys = ymin + (iy.ravel() + rng.uniform(0.0, 1.0, nx * ny)) * (h / ny)
        zs = self.z_skin_np(xs, ys)
        pts = np.column_stack([xs, ys, zs])
        if noise_sigma > 0.0:
            pts = pts + rng.normal(0.0, noise_sigma, pts.shape)
        return PointCloud(pts)

    def ground_truth_cloud(self, samples_n: int, seed=0) -> PointCloud:
        """Uniform-in-XY samples of the exposed upper tumor surface."""
        if self.tumor is None:
            raise NoTumor("phantom has no tumor")
        if samples_n <= 0:
            raise EmptyRegion("samples_n must be >= 1")
        tum = self.tumor
        cx, cy = tum.center_xy
        half = tum.radius
        if tum.shape == ELLIPSOID:
            half = max(tum.semi_axes[0], tum.semi_axes[1])
        rng = np.random.default_rng(seed)
        xs = np.empty(samples_n)
        ys = np.empty(samples_n)
        filled = 0
        while filled < samples_n:
            m = 4 * (samples_n - filled) + 16
            px = rng.uniform(cx - half, cx + half, m)
            py = rng.uniform(cy - half, cy + half, m)
            keep = tum.height_np(px, py) > 0.0
            px, py = px[keep], py[keep]
            take = min(px.size, samples_n - filled)
            xs[filled:filled + take] = px[:take]
            ys[filled:filled + take] = py[:take]
            filled += take
        zs = self.z_stop_np(xs, ys)
        return PointCloud(np.column_stack([xs, ys, zs]))


def build_phantom(cfg: PhantomConfig, tumor: Optional[TumorGeometry] = None) -> Phantom:
    """Validate configs and assemble the immutable world."""
    return Phantom(cfg, tumor)


def contact_force(phantom: Phantom, q_xy, probe_z: float, probe_vz: float = 0.0) -> ContactResponse:
    return phantom.contact_force(float(q_xy[0]), float(q_xy[1]), float(probe_z), float(probe_vz))


def synth_depth_cloud(phantom: Phantom, region, density: float,
                      noise_sigma: float = 0.0, seed=0) -> PointCloud:
    return phantom.synth_depth_cloud(region, density, noise_sigma, seed)


def ground_truth_cloud(phantom: Phantom, samples_n: int, seed=0) -> PointCloud:
    return phantom.ground_truth_cloud(samples_n, seed)
