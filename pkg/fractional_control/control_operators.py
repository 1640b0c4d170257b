"""Input operator, controllability Grammian and its regularized resolvent."""
import logging
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np
from scipy.integrate import trapezoid
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from fractional_control.errors import DomainError, ResolventError, ShapeError
from fractional_control.solution_families import FamilyConfig, rl_symbols
from fractional_control.spectral_basis import SpectralVector

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ControlVector:
    """Control coefficients; for the example operator, index i holds u_{i+2}"""
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=float).reshape(-1)
        if not np.all(np.isfinite(coeffs)):
            raise ValueError("ControlVector coefficients must be finite")
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def size(self) -> int:
        return self.coeffs.size

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def dot(self, other: "ControlVector") -> float:
        return float(self.coeffs @ other.coeffs)


@dataclass(frozen=True, eq=False)
class InputOperator:
    """Matrix of B: state modes by control components"""
    matrix: np.ndarray
    name: str = "custom"

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=float)
        if matrix.ndim != 2:
            raise ShapeError("input operator must be a matrix")
        object.__setattr__(self, "matrix", matrix)

    @classmethod
    def example(cls, N: int) -> "InputOperator":
        """Bu = 2 u_2 e_1 + sum_{i>=2} u_i e_i on N modes, controls indexed 2..N"""
        if N < 2:
            raise ValueError(f"the example input operator needs N >= 2, got {N}")
        matrix = np.zeros((N, N - 1))
        matrix[0, 0] = 2.0
        matrix[1:, :] = np.eye(N - 1)
        return cls(matrix, "example")

    @classmethod
    def identity(cls, N: int) -> "InputOperator":
        return cls(np.eye(N), "identity")

    @classmethod
    def zero(cls, N: int) -> "InputOperator":
        return cls(np.zeros((N, max(N - 1, 1))), "zero")

    @classmethod
    def modes_from_two(cls, N: int) -> "InputOperator":
        """Identity on modes >= 2 only"""
        if N < 2:
            raise ValueError(f"modes_from_two needs N >= 2, got {N}")
        matrix = np.zeros((N, N - 1))
        matrix[1:, :] = np.eye(N - 1)
        return cls(matrix, "modes_from_two")

    @property
    def n_modes(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_controls(self) -> int:
        return self.matrix.shape[1]

    def apply(self, u: ControlVector) -> SpectralVector:
        if u.size != self.n_controls:
            raise ShapeError(f"expected {self.n_controls} control components, got {u.size}")
        return SpectralVector(self.matrix @ u.coeffs)

    def adjoint(self, v: SpectralVector) -> ControlVector:
        if v.size != self.n_modes:
            raise ShapeError(f"expected {self.n_modes} state coefficients, got {v.size}")
        return ControlVector(self.matrix.T @ v.coeffs)

    def norm(self) -> float:
        """Largest singular value"""
        return float(np.linalg.norm(self.matrix, 2))


def apply_B(u: ControlVector) -> SpectralVector:
    return InputOperator.example(u.size + 1).apply(u)


def apply_B_star(v: SpectralVector) -> ControlVector:
    return InputOperator.example(v.size).adjoint(v)


def operator_norm_B(N: int) -> float:
    if N < 2:
        raise ValueError(f"N must be at least 2, got {N}")
    return InputOperator.example(N).norm()


@dataclass(frozen=True, eq=False)
class GrammianMatrix:
    """Truncated K_0^a = int_0^a P_q(a-s) B B* P_q(a-s) ds"""
    K: np.ndarray
    horizon: float
    quad_nodes: int

    def __post_init__(self):
        K = np.array(self.K, dtype=float)
        if K.ndim != 2 or K.shape[0] != K.shape[1]:
            raise ShapeError(f"Grammian must be square, got shape {K.shape}")
        if np.max(np.abs(K - K.T), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(K), initial=0.0)):
            raise ValueError("Grammian must be symmetric")
        object.__setattr__(self, "K", K)

    @property
    def size(self) -> int:
        return self.K.shape[0]

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.K)

    def min_eigenvalue(self) -> float:
        return float(self.eigenvalues()[0])

    def resolvent(self, beta: float, rhs: np.ndarray) -> np.ndarray:
        """Solve (beta I + K) x = rhs for a vector or a stack of column vectors"""
        if not beta > 0.0:
            raise DomainError(f"beta must be positive, got {beta}")
        try:
            factor = cho_factor(beta * np.eye(self.size) + self.K, lower=True)
            return cho_solve(factor, rhs)
        except (LinAlgError, ValueError) as exc:
            raise ResolventError(f"factorization of beta*I + K failed for beta={beta}: {exc}") from exc


def grammian(cfg: FamilyConfig, a: float, n_quad: int = 400,
             input_operator: InputOperator = None) -> GrammianMatrix:
    """Composite trapezoid approximation of the controllability Grammian"""
    if not a > 0.0:
        raise ValueError(f"horizon must be positive, got {a}")
    if n_quad < 16:
        raise ValueError(f"n_quad must be at least 16, got {n_quad}")
    if input_operator is None:
        input_operator = InputOperator.example(cfg.basis.N)
    if input_operator.n_modes != cfg.basis.N:
        raise ShapeError("input operator and basis disagree on the number of modes")

    # the substitution s = a - nu turns P_q(a - nu) into P_q(s)
    s = np.linspace(0.0, a, n_quad + 1)
    p = rl_symbols(cfg, s)
    moments = trapezoid(p[:, :, None] * p[:, None, :], s, axis=0)
    BBt = input_operator.matrix @ input_operator.matrix.T
    K = BBt * moments
    K = 0.5 * (K + K.T)
    logger.debug("Grammian on %d modes, horizon %g: min eigenvalue %.3e",
                 cfg.basis.N, a, float(np.linalg.eigvalsh(K)[0]))
    return GrammianMatrix(K, a, n_quad)


def resolvent_apply(beta: float, K: GrammianMatrix, v: SpectralVector) -> SpectralVector:
    """R(beta, K) v = (beta I + K)^{-1} v"""
    if v.size != K.size:
        raise ShapeError(f"expected {K.size} coefficients, got {v.size}")
    return SpectralVector(K.resolvent(beta, v.coeffs))


def linear_controllability_indicator(K: GrammianMatrix, v: SpectralVector,
                                     betas: Sequence[float]) -> List[float]:
    """||beta R(beta, K) v|| for each beta; decays to 0 iff the linear system is approximately controllable"""
    betas = [float(beta) for beta in betas]
    if any(beta <= 0.0 for beta in betas):
        raise DomainError("betas must be positive")
    if any(later >= earlier for earlier, later in zip(betas, betas[1:])):
        raise ValueError("betas must be strictly decreasing")
    return [beta * resolvent_apply(beta, K, v).norm() for beta in betas]
