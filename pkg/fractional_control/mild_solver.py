"""Discrete mild-solution map and its fixed-point iteration.

On the uniform grid theta_k = k*a/n_t the map G = G1 + G2 reads

    G(z)(theta_k) = C_q(theta_k)[z0 - phi(z)] + S_q(theta_k)[z1 - psi(z)]
                    + int_0^theta_k P_q(theta_k - s)[f(s, z(s), w(s)) + B u(s)] ds

with the feedback u(theta) = B* P_q(a - theta) R(beta, K) [z_d - terminal part].
The convolutions use product integration: the forcing is interpolated linearly
and the kernel moments come from the Mittag-Leffler tables.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy.linalg import toeplitz
from scipy.special import gamma

from fractional_control.control_operators import GrammianMatrix
from fractional_control.errors import DivergenceError, DomainError, ShapeError
from fractional_control.nonlocal_problem import ProblemSpec, check_contraction
from fractional_control.solution_families import (cosine_symbols, rl_moments, rl_symbols,
                                                  sine_symbols)
from fractional_control.spectral_basis import (SpectralVector, Trajectory, analyze_rows,
                                               synthesize_rows)

logger = logging.getLogger(__name__)

__all__ = ["SolverConfig", "SolveReport", "MildSolver", "Trajectory", "volterra_accumulate",
           "feedback_control", "apply_G", "residual", "solve_fixed_point", "lemma2_constants"]


@dataclass(frozen=True)
class SolverConfig:
    """Time grid size, fixed-point tolerance, iteration cap and averaging weight"""
    n_t: int = 200
    fp_tol: float = 1e-8
    max_iter: int = 100
    relaxation: float = 1.0

    def __post_init__(self):
        if self.n_t < 16:
            raise ValueError(f"n_t must be at least 16, got {self.n_t}")
        if not self.fp_tol > 0.0:
            raise ValueError(f"fp_tol must be positive, got {self.fp_tol}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be at least 1, got {self.max_iter}")
        if not 0.0 < self.relaxation <= 1.0:
            raise ValueError(f"relaxation must lie in (0, 1], got {self.relaxation}")


@dataclass
class SolveReport:
    trajectory: Trajectory
    controls: np.ndarray
    iterations: int
    update_norm: float
    residual: float
    converged: bool
    lemma2_ok: bool
    control_sup: float = 0.0
    lemma2_bound: float = 0.0
    updates: List[float] = field(default_factory=list)

    def __post_init__(self):
        if self.residual < 0.0:
            raise ValueError(f"residual must be non-negative, got {self.residual}")

    def control_energy(self) -> float:
        """Trapezoid quadrature of ||u(theta)||^2 over the horizon"""
        squares = np.sum(self.controls ** 2, axis=1)
        h = self.trajectory.step
        return float(h * (squares.sum() - 0.5 * (squares[0] + squares[-1])))


def lemma2_constants(problem: ProblemSpec, z_d: SpectralVector, traj: Trajectory) -> Tuple[float, float]:
    """Constants L4, L5 of the control bound sup ||u|| <= (L4 + L5 ||z||_C) / beta.

    The initial-velocity terms carry max(1, a) because ||S_q(t)|| <= M t.
    """
    q, a, M = problem.family.q, problem.a, problem.family.M
    c = problem.constants
    M_B = problem.input_operator.norm()
    y_bar = (problem.z0.norm() + problem.phi_of(traj).norm()
             + max(1.0, a) * (problem.z1.norm() + problem.psi_of(traj).norm()))
    g_q = gamma(q)
    L4 = (M_B * M * a ** (q - 1.0) / g_q) * (z_d.norm() + M * y_bar + (M * a ** q / g_q) * c.m_bound)
    L5 = (M_B * M ** 2 * a ** (2.0 * q - 1.0) / g_q ** 2) * (c.C1 + a * c.C2 * c.C3)
    return L4, L5


class MildSolver:
    """Precomputed family tables and product-integration weights for one problem and grid"""

    def __init__(self, problem: ProblemSpec, K: Optional[GrammianMatrix], n_t: int):
        if n_t < 16:
            raise ValueError(f"n_t must be at least 16, got {n_t}")
        if K is not None and K.size != problem.N:
            raise ShapeError(f"Grammian of size {K.size} does not match {problem.N} modes")
        self.problem = problem
        self.K = K
        self.n_t = n_t
        self.grid = np.linspace(0.0, problem.a, n_t + 1)
        self.h = problem.a / n_t

        family = problem.family
        self.cosine = cosine_symbols(family, self.grid)
        self.sine = sine_symbols(family, self.grid)
        self.kernel = rl_symbols(family, self.grid)
        self.weights = self._weight_tables()
        self._basis = family.basis
        self._B = problem.input_operator.matrix

        # trapezoid weights of the Volterra sums, row k integrates over tau_0..tau_k
        k_idx, j_idx = np.indices((n_t + 1, n_t + 1))
        volterra = np.where(j_idx <= k_idx, self.h, 0.0)
        volterra[j_idx == 0] *= 0.5
        volterra[np.arange(n_t + 1), np.arange(n_t + 1)] *= 0.5
        volterra[0, 0] = 0.0
        self._volterra_weights = volterra

    def _weight_tables(self) -> np.ndarray:
        """W[n, k, j]: weight of F(theta_j) in int_0^theta_k P_q(theta_k - s) F(s) ds for mode n"""
        n_nodes = self.n_t + 1
        family = self.problem.family
        phi1 = rl_moments(family, self.h * np.arange(n_nodes), 1)
        phi2 = rl_moments(family, self.h * np.arange(n_nodes + 1), 2)
        below = np.vstack([np.zeros((1, self.problem.N)), phi2[:-2]])
        interior = (phi2[1:] - 2.0 * phi2[:-1] + below) / self.h
        first = np.zeros((n_nodes, self.problem.N))
        first[1:] = phi1[1:] - (phi2[1:n_nodes] - phi2[:n_nodes - 1]) / self.h
        tables = np.empty((self.problem.N, n_nodes, n_nodes))
        for n in range(self.problem.N):
            tables[n] = toeplitz(interior[:, n], np.zeros(n_nodes))
            tables[n][:, 0] = first[:, n]
        return tables

    def check_grid(self, traj: Trajectory):
        if traj.states.shape != (self.n_t + 1, self.problem.N) or \
                not np.allclose(traj.grid, self.grid, rtol=0.0, atol=1e-12 * max(1.0, self.problem.a)):
            raise ShapeError(f"trajectory is not on the {self.n_t + 1}-node solver grid")

    def convolve(self, forcing: np.ndarray) -> np.ndarray:
        """Product-integrated P_q convolution at every node, forcing of shape (n_t+1, N)"""
        return np.einsum("nkj,jn->kn", self.weights, forcing)

    def volterra_accumulate(self, traj: Trajectory) -> np.ndarray:
        """Collocation samples of w(theta_k) = int_0^theta_k g(theta_k, tau, z(tau)) dtau"""
        self.check_grid(traj)
        samples = synthesize_rows(self._basis, traj.states)
        thetas, taus = np.meshgrid(self.grid, self.grid, indexing="ij")
        integrand = self.problem.g(thetas, taus, np.broadcast_to(samples, (self.n_t + 1,) + samples.shape))
        return np.einsum("kj,kjy->ky", self._volterra_weights, integrand)

    def source(self, traj: Trajectory) -> np.ndarray:
        """Spectral coefficients of f(theta_k, z(theta_k), w(theta_k))"""
        samples = synthesize_rows(self._basis, traj.states)
        volterra = self.volterra_accumulate(traj)
        return analyze_rows(self._basis, self.problem.f(self.grid, samples, volterra))

    def _initial_data(self, traj: Trajectory) -> Tuple[np.ndarray, np.ndarray]:
        x0 = self.problem.z0.coeffs - self.problem.phi_of(traj).coeffs
        x1 = self.problem.z1.coeffs - self.problem.psi_of(traj).coeffs
        return x0, x1

    def feedback_control(self, beta: float, traj: Trajectory, z_d: SpectralVector,
                         source: Optional[np.ndarray] = None) -> np.ndarray:
        """u_beta(theta_k) for every node, shape (n_t+1, number of controls)"""
        if not beta > 0.0:
            raise DomainError(f"beta must be positive, got {beta}")
        if self.K is None:
            raise ValueError("feedback control needs a Grammian")
        self.check_grid(traj)
        if source is None:
            source = self.source(traj)
        x0, x1 = self._initial_data(traj)
        mismatch = (z_d.coeffs - self.cosine[-1] * x0 - self.sine[-1] * x1
                    - self.convolve(source)[-1])
        v = self.K.resolvent(beta, mismatch)
        # P_q(a - theta_k) is the kernel table read backwards
        return (self.kernel[::-1] * v) @ self._B

    def step(self, beta: float, traj: Trajectory, z_d: SpectralVector,
             control: Optional[np.ndarray] = None) -> Tuple[Trajectory, np.ndarray]:
        """One application of G together with the control it used"""
        self.check_grid(traj)
        source = self.source(traj)
        if control is None:
            control = self.feedback_control(beta, traj, z_d, source)
        elif control.shape != (self.n_t + 1, self._B.shape[1]):
            raise ShapeError(f"prescribed control has shape {control.shape}")
        x0, x1 = self._initial_data(traj)
        forcing = source + control @ self._B.T
        states = self.cosine * x0 + self.sine * x1 + self.convolve(forcing)
        return Trajectory(self.grid, states), control

    def apply_G(self, beta: float, traj: Trajectory, z_d: SpectralVector,
                control: Optional[np.ndarray] = None) -> Trajectory:
        return self.step(beta, traj, z_d, control)[0]

    def residual(self, beta: float, traj: Trajectory, z_d: SpectralVector,
                 control: Optional[np.ndarray] = None) -> float:
        """||z - G(z)||_C"""
        return (traj - self.apply_G(beta, traj, z_d, control)).sup_norm()

    def solve(self, beta: float, z_d: SpectralVector, cfg: SolverConfig,
              control: Optional[np.ndarray] = None) -> SolveReport:
        """Averaged Picard iteration from the constant trajectory z0"""
        if cfg.n_t != self.n_t:
            raise ShapeError(f"solver built for n_t={self.n_t}, config asks for {cfg.n_t}")
        c = self.problem.constants
        contraction = check_contraction(self.problem.family.M, c.d1, c.d2)
        if not contraction.passed:
            logger.warning("M(d1 + d2) = %.4g >= 1, iteration may not converge",
                           1.0 - contraction.margin)

        current = Trajectory.constant(self.grid, self.problem.z0)
        updates: List[float] = []
        converged = False
        iterations = 0
        update = math.inf
        omega = cfg.relaxation
        with np.errstate(over="ignore", invalid="ignore"):
            for iterations in range(1, cfg.max_iter + 1):
                mapped, _ = self.step(beta, current, z_d, control)
                states = (1.0 - omega) * current.states + omega * mapped.states
                if not np.all(np.isfinite(states)):
                    raise DivergenceError(
                        f"iterate {iterations} for beta={beta} is not finite")
                update = float(np.max(np.linalg.norm(states - current.states, axis=1)))
                current = Trajectory(self.grid, states)
                updates.append(update)
                logger.debug("beta=%g sweep %d: update %.3e", beta, iterations, update)
                if update <= cfg.fp_tol:
                    converged = True
                    break

        mapped, used = self.step(beta, current, z_d, control)
        defect = (current - mapped).sup_norm()
        L4, L5 = lemma2_constants(self.problem, z_d, current)
        bound = (L4 + L5 * current.sup_norm()) / beta
        control_sup = float(np.max(np.linalg.norm(used, axis=1)))
        lemma2_ok = control_sup <= bound * (1.0 + 1e-9)
        if converged:
            logger.info("beta=%g converged in %d iterations, residual %.3e",
                        beta, iterations, defect)
        else:
            logger.warning("beta=%g not converged after %d iterations, last update %.3e",
                           beta, iterations, update)
        return SolveReport(current, used, iterations, update, defect, converged, lemma2_ok,
                           control_sup, bound, updates)


def _solver_for(problem: ProblemSpec, K: Optional[GrammianMatrix], traj: Trajectory) -> MildSolver:
    return MildSolver(problem, K, len(traj.grid) - 1)


def volterra_accumulate(problem: ProblemSpec, traj: Trajectory) -> np.ndarray:
    return _solver_for(problem, None, traj).volterra_accumulate(traj)


def feedback_control(problem: ProblemSpec, K: GrammianMatrix, beta: float,
                     traj: Trajectory, z_d: SpectralVector) -> np.ndarray:
    return _solver_for(problem, K, traj).feedback_control(beta, traj, z_d)


def apply_G(problem: ProblemSpec, K: GrammianMatrix, beta: float, traj: Trajectory,
            z_d: SpectralVector, control: Optional[np.ndarray] = None) -> Trajectory:
    return _solver_for(problem, K, traj).apply_G(beta, traj, z_d, control)


def residual(problem: ProblemSpec, K: GrammianMatrix, beta: float, traj: Trajectory,
             z_d: SpectralVector) -> float:
    return _solver_for(problem, K, traj).residual(beta, traj, z_d)


def solve_fixed_point(problem: ProblemSpec, K: GrammianMatrix, beta: float, z_d: SpectralVector,
                      cfg: SolverConfig, control: Optional[np.ndarray] = None) -> SolveReport:
    if not beta > 0.0:
        raise DomainError(f"beta must be positive, got {beta}")
    return MildSolver(problem, K, cfg.n_t).solve(beta, z_d, cfg, control)
