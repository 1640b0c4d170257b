"""Cosine, sine and Riemann-Liouville families of the Dirichlet Laplacian.

On the sine basis the generator acts as multiplication by -mu_n, so every
family is diagonal with a Mittag-Leffler symbol:

    C_q(t) e_n = E_q(-mu_n t^q) e_n
    S_q(t) e_n = t E_{q,2}(-mu_n t^q) e_n
    P_q(t) e_n = t^{q-1} E_{q,q}(-mu_n t^q) e_n

Higher fractional integrals Phi_j(t) = t^{q-1+j} E_{q,q+j}(-mu_n t^q) of P_q are
the moments used by product integration.
"""
import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.integrate import trapezoid
from scipy.special import gamma

from fractional_control.errors import ShapeError
from fractional_control.mittag_leffler import MlParams, ml_vector
from fractional_control.spectral_basis import BasisConfig, SpectralVector, Trajectory

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FamilyConfig:
    """Fractional order, basis and the uniform bound M of ||C_q(t)||"""
    q: float
    basis: BasisConfig = field(default_factory=BasisConfig)
    M: float = 1.0
    ml_tol: float = 1e-12

    def __post_init__(self):
        if not 1.0 < self.q <= 2.0:
            raise ValueError(f"q must lie in (1, 2], got {self.q}")
        if self.M < 1.0:
            raise ValueError(f"M must be at least 1, got {self.M}")

    def params(self, beta: float) -> MlParams:
        return MlParams(alpha=self.q, beta=beta, series_tol=self.ml_tol)

    def with_measured_bound(self, theta_max: float) -> "FamilyConfig":
        return replace(self, M=measure_cosine_bound(self, theta_max))


def _symbol(cfg: FamilyConfig, beta: float, power: float, thetas) -> np.ndarray:
    """t^power * E_{q,beta}(-mu_n t^q) for every time in thetas and every mode"""
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    if np.any(thetas < 0.0):
        raise ValueError("family times must be non-negative")
    mu = cfg.basis.eigenvalues()
    args = -np.outer(thetas ** cfg.q, mu)
    values = ml_vector(cfg.params(beta), args)
    if power == 0.0:
        return values
    return (thetas ** power)[:, None] * values


def cosine_symbols(cfg: FamilyConfig, thetas) -> np.ndarray:
    return _symbol(cfg, 1.0, 0.0, thetas)


def sine_symbols(cfg: FamilyConfig, thetas) -> np.ndarray:
    return _symbol(cfg, 2.0, 1.0, thetas)


def rl_symbols(cfg: FamilyConfig, thetas) -> np.ndarray:
    return _symbol(cfg, cfg.q, cfg.q - 1.0, thetas)


def rl_moments(cfg: FamilyConfig, thetas, order: int) -> np.ndarray:
    """Phi_order(t) = I^order P_q(t) as a diagonal symbol"""
    return _symbol(cfg, cfg.q + order, cfg.q - 1.0 + order, thetas)


def cq_apply(cfg: FamilyConfig, theta: float, v: SpectralVector) -> SpectralVector:
    if theta == 0.0:
        return SpectralVector(v.coeffs.copy())
    return SpectralVector(cosine_symbols(cfg, theta)[0] * v.coeffs)


def sq_apply(cfg: FamilyConfig, theta: float, v: SpectralVector) -> SpectralVector:
    if theta == 0.0:
        return SpectralVector.zeros(v.size)
    return SpectralVector(sine_symbols(cfg, theta)[0] * v.coeffs)


def pq_apply(cfg: FamilyConfig, theta: float, v: SpectralVector) -> SpectralVector:
    if theta == 0.0:
        return SpectralVector.zeros(v.size)
    return SpectralVector(rl_symbols(cfg, theta)[0] * v.coeffs)


def measure_cosine_bound(cfg: FamilyConfig, theta_max: float, n_grid: int = 400) -> float:
    """Largest |E_q(-mu_n t^q)| over a dense grid of [0, theta_max] and all modes"""
    if not theta_max > 0.0:
        raise ValueError(f"theta_max must be positive, got {theta_max}")
    thetas = np.linspace(0.0, theta_max, n_grid + 1)
    bound = float(np.max(np.abs(cosine_symbols(cfg, thetas))))
    return max(1.0, bound)


def lemma1_bound(cfg: FamilyConfig, a: float) -> float:
    """M a^{q-1} / Gamma(q), the uniform bound of ||P_q(t)|| on [0, a]"""
    return cfg.M * a ** (cfg.q - 1.0) / gamma(cfg.q)


def duhamel_linear(cfg: FamilyConfig, z0: SpectralVector, z1: SpectralVector,
                   forcing: np.ndarray, theta_grid: np.ndarray) -> Trajectory:
    """Mode-wise solution of the linear problem with piecewise linear forcing.

    z(t_k) = C_q(t_k) z0 + S_q(t_k) z1 + int_0^{t_k} P_q(t_k - s) F(s) ds, with the
    convolution integrated exactly against the linear interpolant of F.
    """
    theta_grid = np.asarray(theta_grid, dtype=float)
    forcing = np.asarray(forcing, dtype=float)
    N = cfg.basis.N
    if forcing.shape != (theta_grid.size, N):
        raise ShapeError(
            f"forcing of shape {forcing.shape} does not match grid {theta_grid.size} x {N} modes")
    if z0.size != N or z1.size != N:
        raise ShapeError(f"initial data must have {N} coefficients")
    empty = Trajectory(theta_grid, np.zeros((theta_grid.size, N)))
    h = empty.step
    if abs(theta_grid[0]) > 1e-14:
        raise ShapeError("duhamel grid must start at 0")

    states = cosine_symbols(cfg, theta_grid) * z0.coeffs + sine_symbols(cfg, theta_grid) * z1.coeffs
    offsets = h * np.arange(theta_grid.size)
    phi1 = rl_moments(cfg, offsets, 1)
    phi2 = rl_moments(cfg, offsets, 2)
    for k in range(1, theta_grid.size):
        total = np.zeros(N)
        for j in range(k + 1):
            d = k - j
            if j == 0:
                weight = phi1[k] - (phi2[k] - phi2[k - 1]) / h
            else:
                # hat function centred at t_j, second differences of Phi_2
                below = phi2[d - 1] if d >= 1 else np.zeros(N)
                weight = (phi2[d + 1] - 2.0 * phi2[d] + below) / h
            total += weight * forcing[j]
        states[k] += total
    return Trajectory(theta_grid, states)


def fractional_integral(fn: Callable[[np.ndarray], np.ndarray], theta: float, order: float,
                        n_panels: int = 400, grading: Optional[float] = None) -> np.ndarray:
    """Riemann-Liouville integral (1/Gamma(order)) int_0^theta (theta-s)^{order-1} fn(s) ds.

    The substitution s = theta - theta*u^grading on a uniform u-mesh turns the
    weakly singular kernel near s = theta into a smooth integrand for the
    trapezoid rule.
    """
    if not order > 0.0:
        raise ValueError(f"order must be positive, got {order}")
    if theta == 0.0:
        return np.zeros_like(np.asarray(fn(np.zeros(1)))[0], dtype=float)
    if grading is None:
        grading = max(2.0, 2.0 / order)
    u = np.linspace(0.0, 1.0, n_panels + 1)
    s = theta - theta * u ** grading
    jacobian = grading * theta * u ** (grading - 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        kernel = np.where(u > 0.0, (theta * u ** grading) ** (order - 1.0) * jacobian, 0.0)
    values = np.asarray(fn(s), dtype=float)
    integrand = kernel.reshape((-1,) + (1,) * (values.ndim - 1)) * values
    return trapezoid(integrand, u, axis=0) / gamma(order)


def caputo_derivative(values: np.ndarray, h: float, q: float,
                      initial_velocity: Optional[np.ndarray] = None) -> np.ndarray:
    """Caputo derivative of order q in (1, 2) of uniformly sampled data.

    Second differences are integrated exactly against (t_k - s)^{1-q} cell by
    cell; the ghost value z_{-1} comes from the initial velocity.
    """
    if not 1.0 < q < 2.0:
        raise ValueError(f"order must lie in (1, 2), got {q}")
    values = np.asarray(values, dtype=float)
    n_nodes = values.shape[0]
    if initial_velocity is None:
        initial_velocity = (values[1] - values[0]) / h
    ghost = values[1] - 2.0 * h * np.asarray(initial_velocity, dtype=float)
    padded = np.concatenate([ghost[None, ...], values], axis=0)
    second = padded[2:] - 2.0 * padded[1:-1] + padded[:-2]
    m = np.arange(n_nodes, dtype=float)
    b = (m + 1.0) ** (2.0 - q) - m ** (2.0 - q)
    scale = h ** (-q) / gamma(3.0 - q)
    result = np.zeros_like(values)
    for k in range(1, n_nodes):
        # cell j carries the second difference centred at t_j
        weights = b[:k][::-1]
        result[k] = scale * np.tensordot(weights, second[:k], axes=(0, 0))
    return result
