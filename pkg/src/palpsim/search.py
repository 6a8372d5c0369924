"""Stiffness-field search over grid cells: GP regression plus Expected
Improvement acquisition, with a uniform random-search baseline.

The GP uses a squared-exponential kernel over (u, v) cell coordinates
with the length scale in cell units.  Hyperparameters are fixed per run;
sample budgets of 50-80 indentations are too small for stable online
hyperparameter fitting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import ndtr

from .errors import Exhausted, SingularKernel
from .registration import SurfaceGrid

_JITTER = 1e-10
_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class StiffnessSample:
    cell: tuple[int, int]
    k: float  # N/m, >= 0


@dataclass(frozen=True)
class GPHyper:
    length_scale: float = 3.0      # cells
    signal_var: float = 2.5e4      # (N/m)^2
    noise_var: float = 25.0        # (N/m)^2


@dataclass(frozen=True)
class Acquisition:
    """EI parameters: exploration offset xi and incumbent best stiffness."""

    xi: float
    best_k: float

    def __post_init__(self):
        if self.xi < 0:
            raise ValueError("xi must be >= 0")


class GPModel:
    """Posterior over stiffness with a cached Cholesky solve.

    The prior mean is the training-sample mean, so predictions far from
    all data revert to it (and the variance to signal_var).  Immutable
    after fit; predict/EI are concurrency-safe reads.
    """

    def __init__(self, samples: list[StiffnessSample], hyper: GPHyper,
                 x: np.ndarray, y: np.ndarray, mean_y: float, chol, alpha: np.ndarray):
        self.samples = list(samples)
        self.hyper = hyper
        self.x = x
        self.y = y
        self.mean_y = mean_y
        self._chol = chol
        self._alpha = alpha

    @property
    def n(self) -> int:
        return self.x.shape[0]

    def predict_many(self, cells: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Posterior mean and variance at (m, 2) cell coordinates."""
        cells = np.asarray(cells, dtype=float).reshape(-1, 2)
        ks = _kernel(cells, self.x, self.hyper)
        mu = self.mean_y + ks @ self._alpha
        v = cho_solve(self._chol, ks.T)
        var = self.hyper.signal_var - np.einsum("ij,ji->i", ks, v)
        return mu, np.maximum(var, 0.0)


def _kernel(a: np.ndarray, b: np.ndarray, hyper: GPHyper) -> np.ndarray:
    d2 = ((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=-1)
    return hyper.signal_var * np.exp(-0.5 * d2 / (hyper.length_scale**2))


def gp_fit(samples: list[StiffnessSample], hyper: GPHyper = GPHyper()) -> GPModel:
    """Fit the GP; duplicate cells are averaged before solving."""
    if len(samples) == 0:
        raise ValueError("need at least one sample")
    by_cell: dict[tuple[int, int], list[float]] = {}
    order: list[tuple[int, int]] = []
    for s in samples:
        cell = (int(s.cell[0]), int(s.cell[1]))
        if cell not in by_cell:
            by_cell[cell] = []
            order.append(cell)
        by_cell[cell].append(float(s.k))
    x = np.array(order, dtype=float)
    y = np.array([np.mean(by_cell[c]) for c in order])
    mean_y = float(y.mean())
    k = _kernel(x, x, hyper)
    k[np.diag_indices_from(k)] += hyper.noise_var + _JITTER
    try:
        chol = cho_factor(k, lower=True)
    except np.linalg.LinAlgError as exc:
        raise SingularKernel(f"kernel not positive definite: {exc}") from exc
    alpha = cho_solve(chol, y - mean_y)
    return GPModel(samples, hyper, x, y, mean_y, chol, alpha)


def gp_predict(gp: GPModel, cell) -> tuple[float, float]:
    mu, var = gp.predict_many(np.array([cell], dtype=float))
    return float(mu[0]), float(var[0])


def _ei(mu: np.ndarray, sigma: np.ndarray, best_k: float, xi: float) -> np.ndarray:
    imp = mu - best_k - xi
    out = np.maximum(imp, 0.0)
    pos = sigma > 1e-300
    if np.any(pos):
        z = imp[pos] / sigma[pos]
        out[pos] = imp[pos] * ndtr(z) + sigma[pos] * np.exp(-0.5 * z * z) / _SQRT_2PI
    return np.maximum(out, 0.0)


def expected_improvement(gp: GPModel, cell, acq: Acquisition) -> float:
    """EI of probing ``cell``: E[max(K - best_k - xi, 0)], K ~ posterior."""
    mu, var = gp_predict(gp, cell)
    return float(_ei(np.array([mu]), np.array([math.sqrt(var)]), acq.best_k, acq.xi)[0])


def _candidates(grid: SurfaceGrid, visited) -> np.ndarray:
    cells = grid.valid_cells()
    if len(visited):
        mask = np.array([(int(u), int(v)) not in visited for u, v in cells])
        cells = cells[mask]
    return cells


def next_cell_bo(gp: GPModel, grid: SurfaceGrid, visited, acq: Acquisition,
                 rng: np.random.Generator) -> tuple[int, int]:
    """Argmax of EI over unvisited valid cells; ties broken uniformly."""
    if gp.n < 2:
        raise ValueError("BO needs a GP fitted on at least 2 samples")
    cells = _candidates(grid, visited)
    if cells.shape[0] == 0:
        raise Exhausted("no unvisited valid cell")
    mu, var = gp.predict_many(cells.astype(float))
    ei = _ei(mu, np.sqrt(var), acq.best_k, acq.xi)
    best = ei.max()
    ties = np.flatnonzero(ei == best)
    pick = ties[rng.integers(ties.size)]
    return int(cells[pick, 0]), int(cells[pick, 1])


def next_cell_random(grid: SurfaceGrid, visited, rng: np.random.Generator) -> tuple[int, int]:
    """Uniform draw over unvisited valid cells."""
    cells = _candidates(grid, visited)
    if cells.shape[0] == 0:
        raise Exhausted("no unvisited valid cell")
    pick = rng.integers(cells.shape[0])
    return int(cells[pick, 0]), int(cells[pick, 1])
