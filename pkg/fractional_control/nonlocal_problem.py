"""Problem definitions for the controlled nonlocal system and empirical hypothesis checks.

Nonlinearities act pointwise on collocation samples: ``f(theta, s, w)`` takes the
state samples ``s`` and the already accumulated Volterra samples ``w``,
``g(theta, tau, s)`` is the Volterra integrand. Both broadcast a time array of
shape ``s.shape[:-1]`` against rows of samples.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import trapezoid

from fractional_control.control_operators import InputOperator
from fractional_control.errors import DomainError, ShapeError
from fractional_control.solution_families import FamilyConfig
from fractional_control.spectral_basis import SpectralVector, Trajectory

logger = logging.getLogger(__name__)

SourceMap = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
KernelMap = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]

_SQRT2 = math.sqrt(2.0)


def _column(t) -> np.ndarray:
    return np.asarray(t, dtype=float)[..., None]


def example_g(theta, tau, samples: np.ndarray) -> np.ndarray:
    """e^tau / (sqrt(2) + |s|)"""
    samples = np.asarray(samples, dtype=float)
    return np.exp(_column(tau)) / (_SQRT2 + np.abs(samples))


def example_f(theta, samples: np.ndarray, volterra: np.ndarray) -> np.ndarray:
    """e^-theta |s| / ((3 + e^theta)(1 + |s|)) + w"""
    samples = np.asarray(samples, dtype=float)
    t = _column(theta)
    magnitude = np.abs(samples)
    return np.exp(-t) * magnitude / ((3.0 + np.exp(t)) * (1.0 + magnitude)) + volterra


def zero_f(theta, samples: np.ndarray, volterra: np.ndarray) -> np.ndarray:
    return np.zeros_like(np.asarray(samples, dtype=float))


def identity_f(theta, samples: np.ndarray, volterra: np.ndarray) -> np.ndarray:
    """Unbounded diagnostic source f(theta, s, w) = s"""
    return np.array(samples, dtype=float)


def zero_g(theta, tau, samples: np.ndarray) -> np.ndarray:
    return np.zeros_like(np.asarray(samples, dtype=float))


SOURCE_MAPS: Dict[str, SourceMap] = {
    "example": example_f,
    "zero": zero_f,
    "identity": identity_f,
}

KERNEL_MAPS: Dict[str, KernelMap] = {
    "example": example_g,
    "zero": zero_g,
}

INPUT_OPERATORS: Dict[str, Callable[[int], InputOperator]] = {
    "example": InputOperator.example,
    "identity": InputOperator.identity,
    "zero": InputOperator.zero,
    "modes_from_two": InputOperator.modes_from_two,
}


def lookup(registry: Dict[str, Callable], name: str, kind: str) -> Callable:
    try:
        return registry[name]
    except KeyError:
        raise ValueError(f"unknown {kind} '{name}', expected one of {sorted(registry)}") from None


@dataclass(frozen=True)
class NonlocalWeights:
    """Finite nonlocal condition sum_i w_i z(theta_i)"""
    times: Tuple[float, ...]
    weights: Tuple[float, ...]
    bound: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "times", tuple(float(t) for t in self.times))
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if len(self.times) != len(self.weights):
            raise ShapeError(
                f"{len(self.weights)} nonlocal weights given for {len(self.times)} times")
        if any(t < 0.0 for t in self.times):
            raise DomainError("nonlocal times must be non-negative")
        if self.bound is not None and not self.lipschitz < self.bound:
            raise ValueError(
                f"sum of |weights| = {self.lipschitz} must stay below the declared bound {self.bound}")

    @classmethod
    def none(cls) -> "NonlocalWeights":
        return cls((), ())

    @property
    def count(self) -> int:
        return len(self.weights)

    @property
    def lipschitz(self) -> float:
        """Lipschitz constant in the sup-norm"""
        return float(sum(abs(w) for w in self.weights))


def _nonlocal_sum(w: NonlocalWeights, traj: Trajectory) -> SpectralVector:
    total = np.zeros(traj.states.shape[1])
    for theta, weight in zip(w.times, w.weights):
        total += weight * traj.states[traj.node_index(theta)]
    return SpectralVector(total)


def nonlocal_phi(w: NonlocalWeights, traj: Trajectory) -> SpectralVector:
    return _nonlocal_sum(w, traj)


def nonlocal_psi(w: NonlocalWeights, traj: Trajectory) -> SpectralVector:
    return _nonlocal_sum(w, traj)


@dataclass(frozen=True)
class DeclaredConstants:
    """Lipschitz constants C1, C2, C3, d1, d2 and the bound m of ||f|| (L^2 norm)"""
    C1: float
    C2: float
    C3: float
    d1: float
    d2: float
    m_bound: float

    def __post_init__(self):
        for name in ("C1", "C2", "C3", "d1", "d2", "m_bound"):
            value = getattr(self, name)
            if math.isnan(value) or value < 0.0:
                raise ValueError(f"declared constant {name} must be non-negative, got {value}")


def default_constants(f_name: str, g_name: str, phi: NonlocalWeights, psi: NonlocalWeights,
                      a: float, L: float) -> DeclaredConstants:
    """Constants derived by hand for the registered nonlinearities on horizon a"""
    g_volterra_peak = 0.0
    C3 = 0.0
    if g_name == "example":
        # |d/ds 1/(sqrt2 + |s|)| <= 1/2, and int_0^a e^tau / sqrt2 dtau bounds the accumulation
        C3 = math.exp(a) / 2.0
        g_volterra_peak = (math.exp(a) - 1.0) / _SQRT2
    elif g_name != "zero":
        raise ValueError(f"no default constants for g = '{g_name}'")

    if f_name == "example":
        C1, C2 = 1.0 / 3.0, 1.0
        m_bound = (0.25 + g_volterra_peak) * math.sqrt(L)
    elif f_name == "zero":
        C1, C2, m_bound = 0.0, 0.0, 0.0
    elif f_name == "identity":
        C1, C2, m_bound = 1.0, 0.0, math.inf
    else:
        raise ValueError(f"no default constants for f = '{f_name}'")
    return DeclaredConstants(C1, C2, C3, phi.lipschitz, psi.lipschitz, m_bound)


@dataclass(frozen=True)
class ProblemSpec:
    """The controlled nonlocal system on horizon [0, a]"""
    family: FamilyConfig
    input_operator: InputOperator
    f: SourceMap
    g: KernelMap
    phi: NonlocalWeights
    psi: NonlocalWeights
    z0: SpectralVector
    z1: SpectralVector
    a: float
    constants: DeclaredConstants = field(
        default_factory=lambda: DeclaredConstants(0.0, 0.0, 0.0, 0.0, 0.0, 0.0))

    def __post_init__(self):
        if not self.a > 0.0:
            raise ValueError(f"horizon a must be positive, got {self.a}")
        N = self.family.basis.N
        if self.z0.size != N or self.z1.size != N:
            raise ShapeError(f"initial data must have {N} coefficients")
        if self.input_operator.n_modes != N:
            raise ShapeError(
                f"input operator acts on {self.input_operator.n_modes} modes, basis has {N}")
        for w in (self.phi, self.psi):
            if any(t > self.a * (1.0 + 1e-12) for t in w.times):
                raise DomainError(f"nonlocal times {w.times} leave [0, {self.a}]")

    @property
    def N(self) -> int:
        return self.family.basis.N

    def phi_of(self, traj: Trajectory) -> SpectralVector:
        return nonlocal_phi(self.phi, traj)

    def psi_of(self, traj: Trajectory) -> SpectralVector:
        return nonlocal_psi(self.psi, traj)

    def uncontrolled(self) -> "ProblemSpec":
        """Same problem with B = 0"""
        zero = InputOperator(np.zeros_like(self.input_operator.matrix), "zero")
        return replace(self, input_operator=zero)


def estimate_lipschitz(fn: Callable, sampler: Callable[[np.random.Generator], Tuple],
                       n_samples: int = 200, seed: int = 0,
                       norm: Callable = np.linalg.norm,
                       input_norm: Optional[Callable] = None) -> float:
    """Largest ||F(x) - F(x')|| / ||x - x'|| over sampled pairs.

    This is a lower bound on the true constant; it can flag a declared constant
    as too small but never certify one.
    """
    if n_samples < 100:
        raise ValueError(f"n_samples must be at least 100, got {n_samples}")
    if input_norm is None:
        input_norm = norm
    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(n_samples):
        x, x_other = sampler(rng)
        gap = float(input_norm(x - x_other))
        if gap == 0.0:
            continue
        best = max(best, float(norm(np.asarray(fn(x)) - np.asarray(fn(x_other)))) / gap)
    return best


def check_uniform_bound(fn: Callable, sampler: Callable[[np.random.Generator], np.ndarray],
                        n_samples: int = 200, seed: int = 0,
                        norm: Callable = np.linalg.norm) -> float:
    """Empirical sup of ||F(x)|| over sampled inputs"""
    if n_samples < 100:
        raise ValueError(f"n_samples must be at least 100, got {n_samples}")
    rng = np.random.default_rng(seed)
    return max(float(norm(np.asarray(fn(sampler(rng))))) for _ in range(n_samples))


@dataclass(frozen=True)
class ContractionCheck:
    passed: bool
    margin: float


def check_contraction(M: float, d1: float, d2: float) -> ContractionCheck:
    """M (d1 + d2) < 1, the smallness condition of the existence result"""
    for name, value in (("M", M), ("d1", d1), ("d2", d2)):
        if value < 0.0:
            raise ValueError(f"{name} must be non-negative, got {value}")
    margin = 1.0 - M * (d1 + d2)
    return ContractionCheck(margin > 0.0, margin)


def sample_norm(spacing: float) -> Callable[[np.ndarray], float]:
    """Discrete L^2 norm of collocation samples"""
    return lambda samples: math.sqrt(spacing) * float(np.linalg.norm(samples))


def state_sampler(n_points: int, amplitude: float = 1.0) -> Callable[[np.random.Generator], np.ndarray]:
    return lambda rng: amplitude * rng.standard_normal(n_points)


def state_pair_sampler(n_points: int, amplitude: float = 1.0,
                       spread: float = 1.0) -> Callable[[np.random.Generator], Tuple]:
    """Pairs (x, x + d) with x of size amplitude and d of size spread * amplitude"""
    def sample(rng: np.random.Generator):
        x = amplitude * rng.standard_normal(n_points)
        return x, x + spread * amplitude * rng.standard_normal(n_points)
    return sample


def trajectory_pair_sampler(grid: np.ndarray, N: int,
                            amplitude: float = 1.0) -> Callable[[np.random.Generator], Tuple]:
    def sample(rng: np.random.Generator):
        shape = (len(grid), N)
        return (Trajectory(grid, amplitude * rng.standard_normal(shape)),
                Trajectory(grid, amplitude * rng.standard_normal(shape)))
    return sample


def source_along_state(f: SourceMap, g: KernelMap, theta: float,
                       n_tau: int = 64) -> Callable[[np.ndarray], np.ndarray]:
    """x -> f(theta, x, int_0^theta g(theta, tau, x) dtau) for a state held constant in time"""
    taus = np.linspace(0.0, theta, n_tau + 1)

    def source(samples: np.ndarray) -> np.ndarray:
        samples = np.asarray(samples, dtype=float)
        if theta == 0.0:
            volterra = np.zeros_like(samples)
        else:
            rows = g(np.full(taus.size, theta), taus, np.broadcast_to(samples, (taus.size,) + samples.shape))
            volterra = trapezoid(rows, taus, axis=0)
        return f(theta, samples, volterra)
    return source


def sweep_thetas(a: float, count: int = 5) -> Sequence[float]:
    return tuple(np.linspace(0.0, a, count))
