"""Truncated Dirichlet sine basis of Z = L^2(0, L).

States are stored as coefficients against the orthonormal modes
e_n(y) = sqrt(2/L) sin(n*pi*y/L). Pointwise maps go through the uniform interior
collocation grid y_m = m*L/(Ny+1); on that grid the composite trapezoid
projection is the discrete sine transform, so analyze(synthesize(v)) == v.
"""
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from fractional_control.errors import DomainError, ShapeError


@dataclass(frozen=True)
class BasisConfig:
    """Interval length, truncation level and collocation size"""
    L: float = math.pi
    N: int = 6
    Ny: Optional[int] = None

    def __post_init__(self):
        if not self.L > 0.0:
            raise ValueError(f"L must be positive, got {self.L}")
        if self.N < 1:
            raise ValueError(f"N must be at least 1, got {self.N}")
        if self.Ny is None:
            object.__setattr__(self, "Ny", 2 * self.N + 1)
        elif self.Ny < 2 * self.N + 1:
            raise ValueError(f"Ny must be at least 2N+1 = {2 * self.N + 1}, got {self.Ny}")

    @property
    def spacing(self) -> float:
        return self.L / (self.Ny + 1)

    def grid(self) -> np.ndarray:
        return self.spacing * np.arange(1, self.Ny + 1)

    def eigenvalues(self) -> np.ndarray:
        """mu_n = (n*pi/L)^2 for n = 1..N"""
        return (np.arange(1, self.N + 1) * math.pi / self.L) ** 2

    def mode_matrix(self) -> np.ndarray:
        """Ny x N matrix of e_n sampled on the collocation grid"""
        y = self.grid()
        n = np.arange(1, self.N + 1)
        return math.sqrt(2.0 / self.L) * np.sin(np.outer(y, n) * math.pi / self.L)


@dataclass(frozen=True, eq=False)
class SpectralVector:
    """Coefficients of a state against the orthonormal sine modes"""
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=float).reshape(-1)
        if not np.all(np.isfinite(coeffs)):
            raise ValueError("SpectralVector coefficients must be finite")
        object.__setattr__(self, "coeffs", coeffs)

    @classmethod
    def zeros(cls, N: int) -> "SpectralVector":
        return cls(np.zeros(N))

    @classmethod
    def unit(cls, N: int, n: int, scale: float = 1.0) -> "SpectralVector":
        """scale * e_n with 1-based mode index n"""
        coeffs = np.zeros(N)
        coeffs[n - 1] = scale
        return cls(coeffs)

    @property
    def size(self) -> int:
        return self.coeffs.size

    def norm(self) -> float:
        # Parseval on the truncated span
        return float(np.linalg.norm(self.coeffs))

    def dot(self, other: "SpectralVector") -> float:
        return float(self.coeffs @ other.coeffs)

    def __add__(self, other: "SpectralVector") -> "SpectralVector":
        return SpectralVector(self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralVector") -> "SpectralVector":
        return SpectralVector(self.coeffs - other.coeffs)

    def __mul__(self, scalar: float) -> "SpectralVector":
        return SpectralVector(scalar * self.coeffs)

    __rmul__ = __mul__


@dataclass(eq=False)
class Trajectory:
    """States z(theta_k) on a uniform increasing time grid"""
    grid: np.ndarray
    states: np.ndarray
    _h: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.states = np.asarray(self.states, dtype=float)
        if self.grid.ndim != 1 or self.grid.size < 2:
            raise ShapeError("trajectory grid must be one-dimensional with at least two nodes")
        if self.states.ndim != 2 or self.states.shape[0] != self.grid.size:
            raise ShapeError(
                f"states of shape {self.states.shape} do not match a grid of {self.grid.size} nodes")
        steps = np.diff(self.grid)
        self._h = float(steps.mean())
        if np.any(steps <= 0.0) or not np.allclose(steps, self._h, rtol=1e-9, atol=0.0):
            raise ShapeError("trajectory grid must be uniform and increasing")

    @classmethod
    def constant(cls, grid: np.ndarray, state: SpectralVector) -> "Trajectory":
        grid = np.asarray(grid, dtype=float)
        return cls(grid, np.tile(state.coeffs, (grid.size, 1)))

    @property
    def step(self) -> float:
        return self._h

    @property
    def horizon(self) -> float:
        return float(self.grid[-1])

    def state(self, k: int) -> SpectralVector:
        return SpectralVector(self.states[k])

    def terminal(self) -> SpectralVector:
        return self.state(len(self.grid) - 1)

    def sup_norm(self) -> float:
        """||z||_C = max_k ||z(theta_k)||"""
        return float(np.max(np.linalg.norm(self.states, axis=1)))

    def node_index(self, theta: float) -> int:
        """Index of the grid node nearest to theta, which must lie in [theta_0, theta_end]"""
        slack = 1e-12 * max(1.0, abs(self.horizon))
        if theta < self.grid[0] - slack or theta > self.grid[-1] + slack:
            raise DomainError(f"time {theta} lies outside [{self.grid[0]}, {self.grid[-1]}]")
        return int(np.clip(round((theta - self.grid[0]) / self._h), 0, self.grid.size - 1))

    def __sub__(self, other: "Trajectory") -> "Trajectory":
        if self.states.shape != other.states.shape:
            raise ShapeError("trajectories live on different grids")
        return Trajectory(self.grid, self.states - other.states)


def _check_mode(cfg: BasisConfig, n: int):
    if not 1 <= n <= cfg.N:
        raise IndexError(f"mode index {n} outside 1..{cfg.N}")


def eigenvalue(cfg: BasisConfig, n: int) -> float:
    """Positive eigenvalue (n*pi/L)^2 of -d^2/dy^2 with Dirichlet conditions"""
    _check_mode(cfg, n)
    return (n * math.pi / cfg.L) ** 2


def eigenfunction_at(cfg: BasisConfig, n: int, y: float) -> float:
    _check_mode(cfg, n)
    if not 0.0 <= y <= cfg.L:
        raise DomainError(f"position {y} outside [0, {cfg.L}]")
    return math.sqrt(2.0 / cfg.L) * math.sin(n * math.pi * y / cfg.L)


def synthesize(cfg: BasisConfig, v: SpectralVector, grid: Optional[np.ndarray] = None) -> np.ndarray:
    """Sample a state on the collocation grid"""
    _check_grid(cfg, grid)
    if v.size != cfg.N:
        raise ShapeError(f"expected {cfg.N} coefficients, got {v.size}")
    return cfg.mode_matrix() @ v.coeffs


def analyze(cfg: BasisConfig, samples: np.ndarray) -> SpectralVector:
    """Trapezoid projection of collocation samples onto e_1..e_N"""
    return SpectralVector(analyze_rows(cfg, np.asarray(samples, dtype=float)))


def synthesize_rows(cfg: BasisConfig, coeffs: np.ndarray) -> np.ndarray:
    """Row-wise synthesize: (..., N) coefficients to (..., Ny) samples"""
    return np.asarray(coeffs) @ cfg.mode_matrix().T


def analyze_rows(cfg: BasisConfig, samples: np.ndarray) -> np.ndarray:
    """Row-wise analyze: (..., Ny) samples to (..., N) coefficients"""
    if samples.shape[-1] != cfg.Ny:
        raise ShapeError(f"expected {cfg.Ny} collocation samples, got {samples.shape[-1]}")
    # endpoint samples vanish under Dirichlet conditions
    return cfg.spacing * (samples @ cfg.mode_matrix())


def _check_grid(cfg: BasisConfig, grid: Optional[np.ndarray]):
    if grid is None:
        return
    grid = np.asarray(grid, dtype=float)
    if grid.shape != (cfg.Ny,) or not np.allclose(grid, cfg.grid(), rtol=0.0, atol=1e-12 * cfg.L):
        raise ShapeError(f"grid must be the {cfg.Ny}-point interior collocation grid")


def grid_inner(cfg: BasisConfig, u_samples: np.ndarray, v_samples: np.ndarray) -> float:
    """Trapezoid L^2 inner product of two sampled functions"""
    return float(cfg.spacing * np.dot(u_samples, v_samples))
