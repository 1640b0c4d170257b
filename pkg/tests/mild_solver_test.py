import math
import unittest

import numpy as np

from fractional_control.control_operators import GrammianMatrix, InputOperator, grammian
from fractional_control.errors import DomainError, ShapeError
from fractional_control.mild_solver import (MildSolver, SolveReport, SolverConfig, Trajectory,
                                            feedback_control, residual, solve_fixed_point,
                                            volterra_accumulate)
from fractional_control.nonlocal_problem import (NonlocalWeights, ProblemSpec, default_constants,
                                                 example_f, example_g, identity_f, zero_f, zero_g)
from fractional_control.solution_families import FamilyConfig, cosine_symbols, duhamel_linear, sine_symbols
from fractional_control.spectral_basis import BasisConfig, SpectralVector


def linear_problem(q: float, z0: SpectralVector, z1: SpectralVector, a: float = 1.0) -> ProblemSpec:
    """No source, no kernel, no nonlocal terms: G does not depend on z"""
    return ProblemSpec(family=FamilyConfig(q=q), input_operator=InputOperator.example(6), f=zero_f, g=zero_g,
                       phi=NonlocalWeights.none(), psi=NonlocalWeights.none(), z0=z0, z1=z1, a=a)


def example_problem(q: float = 1.5) -> ProblemSpec:
    phi = NonlocalWeights((0.5,), (0.2,))
    psi = NonlocalWeights((0.25,), (0.1,))
    family = FamilyConfig(q=q).with_measured_bound(1.0)
    return ProblemSpec(family=family, input_operator=InputOperator.example(6), f=example_f, g=example_g,
                       phi=phi, psi=psi, z0=SpectralVector.unit(6, 1), z1=SpectralVector.zeros(6), a=1.0,
                       constants=default_constants("example", "example", phi, psi, 1.0, math.pi))


def smooth_control(grid: np.ndarray, n_controls: int) -> np.ndarray:
    return np.sin(3.0 * grid)[:, None] * np.linspace(1.0, 0.2, n_controls)[None, :]


class TestSolverConfig(unittest.TestCase):
    def test_defaults(self):
        cfg = SolverConfig()
        self.assertEqual((cfg.n_t, cfg.fp_tol, cfg.max_iter, cfg.relaxation), (200, 1e-8, 100, 1.0))

    def test_invalid(self):
        for kwargs in ({"n_t": 8}, {"fp_tol": 0.0}, {"max_iter": 0}, {"relaxation": 0.0}, {"relaxation": 1.5}):
            with self.assertRaises(ValueError):
                SolverConfig(**kwargs)


class TestVolterra(unittest.TestCase):
    def test_zero_kernel(self):
        problem = linear_problem(1.5, SpectralVector.zeros(6), SpectralVector.zeros(6))
        traj = Trajectory(np.linspace(0.0, 1.0, 101), np.ones((101, 6)))
        self.assertTrue(np.all(volterra_accumulate(problem, traj) == 0.0))

    def test_example_kernel_at_zero_state(self):
        """w(theta) = (e^theta - 1)/sqrt(2) when z = 0"""
        problem = example_problem()
        grid = np.linspace(0.0, 1.0, 401)
        samples = volterra_accumulate(problem, Trajectory(grid, np.zeros((401, 6))))
        expected = (np.exp(grid) - 1.0) / math.sqrt(2.0)
        self.assertEqual(samples.shape, (401, problem.family.basis.Ny))
        self.assertLessEqual(float(np.max(np.abs(samples - expected[:, None]))), 1e-4)

    def test_wrong_grid(self):
        problem = example_problem()
        solver = MildSolver(problem, None, 100)
        with self.assertRaises(ShapeError):
            solver.volterra_accumulate(Trajectory(np.linspace(0.0, 2.0, 101), np.zeros((101, 6))))


class TestLinearSolve(unittest.TestCase):
    def setUp(self):
        rng = np.random.default_rng(17)
        self.z0 = SpectralVector(rng.standard_normal(6))
        self.z1 = SpectralVector(rng.standard_normal(6))

    def test_zero_data(self):
        """zero data, zero maps and zero target converge at once to zero"""
        zero = SpectralVector.zeros(6)
        problem = linear_problem(1.5, zero, zero)
        K = grammian(problem.family, 1.0)
        report = solve_fixed_point(problem, K, 1e-2, zero, SolverConfig(n_t=50))
        self.assertTrue(report.converged)
        self.assertEqual(report.iterations, 1)
        self.assertEqual(report.trajectory.sup_norm(), 0.0)
        self.assertEqual(report.control_energy(), 0.0)

    def test_prescribed_control_matches_duhamel(self):
        """with the control held fixed the solver reproduces the linear solution"""
        for q in (1.3, 1.5, 1.8):
            problem = linear_problem(q, self.z0, self.z1)
            solver = MildSolver(problem, None, 100)
            control = smooth_control(solver.grid, 5)
            report = solver.solve(1.0, SpectralVector.zeros(6), SolverConfig(n_t=100), control)
            forcing = control @ problem.input_operator.matrix.T
            expected = duhamel_linear(problem.family, self.z0, self.z1, forcing, solver.grid)
            np.testing.assert_allclose(report.trajectory.states, expected.states, atol=1e-6, err_msg=f"q={q}")
            self.assertTrue(report.converged)

    def test_reachable_target_needs_no_control(self):
        """a target equal to the free terminal state gives u = 0"""
        problem = linear_problem(1.5, self.z0, self.z1)
        a = np.array([1.0])
        z_d = SpectralVector(cosine_symbols(problem.family, a)[0] * self.z0.coeffs
                             + sine_symbols(problem.family, a)[0] * self.z1.coeffs)
        K = grammian(problem.family, 1.0)
        report = solve_fixed_point(problem, K, 1e-3, z_d, SolverConfig(n_t=50))
        self.assertTrue(report.converged)
        self.assertLessEqual(report.control_sup, 1e-9)
        self.assertLessEqual((report.trajectory.terminal() - z_d).norm(), 1e-10)

    def test_residual_of_perturbation(self):
        """G is constant in z here, so shifting z by d leaves a residual of size ||d||"""
        problem = linear_problem(1.5, self.z0, self.z1)
        K = grammian(problem.family, 1.0)
        z_d = SpectralVector.zeros(6)
        report = solve_fixed_point(problem, K, 1e-2, z_d, SolverConfig(n_t=50))
        self.assertLessEqual(report.residual, 1e-12)
        shifted = Trajectory(report.trajectory.grid, report.trajectory.states + 1e-3 * np.eye(6)[0])
        self.assertAlmostEqual(residual(problem, K, 1e-2, shifted, z_d), 1e-3, delta=1e-9)

    def test_self_convergence(self):
        """halving the step shrinks the terminal state change"""
        problem = linear_problem(1.5, self.z0, self.z1)
        terminals = []
        for n_t in (50, 100, 200):
            solver = MildSolver(problem, None, n_t)
            report = solver.solve(1.0, SpectralVector.zeros(6), SolverConfig(n_t=n_t),
                                  smooth_control(solver.grid, 5))
            terminals.append(report.trajectory.terminal())
        coarse = (terminals[1] - terminals[0]).norm()
        fine = (terminals[2] - terminals[1]).norm()
        self.assertGreaterEqual(coarse / fine, 1.5)

    def test_classical_limit_with_source(self):
        """q = 2, one mode and f(z) = z: z'' = -z + z, so z is affine"""
        family = FamilyConfig(q=2.0, basis=BasisConfig(N=1))
        problem = ProblemSpec(family=family, input_operator=InputOperator.zero(1), f=identity_f, g=zero_g,
                              phi=NonlocalWeights.none(), psi=NonlocalWeights.none(),
                              z0=SpectralVector([1.0]), z1=SpectralVector([0.5]), a=1.0)
        solver = MildSolver(problem, None, 100)
        report = solver.solve(1.0, SpectralVector.zeros(1), SolverConfig(n_t=100, fp_tol=1e-12),
                              np.zeros((101, 1)))
        self.assertTrue(report.converged)
        np.testing.assert_allclose(report.trajectory.states[:, 0], 1.0 + 0.5 * solver.grid, atol=1e-4)

    def test_classical_limit_forced(self):
        """q just below 2 on one mode follows z'' = -z + cos 2t"""
        family = FamilyConfig(q=2.0 - 1e-9, basis=BasisConfig(N=1))
        problem = ProblemSpec(family=family, input_operator=InputOperator.identity(1), f=zero_f, g=zero_g,
                              phi=NonlocalWeights.none(), psi=NonlocalWeights.none(),
                              z0=SpectralVector([1.0]), z1=SpectralVector([0.5]), a=1.0)
        solver = MildSolver(problem, None, 200)
        t = solver.grid
        report = solver.solve(1.0, SpectralVector.zeros(1), SolverConfig(n_t=200), np.cos(2.0 * t)[:, None])
        exact = 4.0 / 3.0 * np.cos(t) + 0.5 * np.sin(t) - np.cos(2.0 * t) / 3.0
        self.assertTrue(report.converged)
        np.testing.assert_allclose(report.trajectory.states[:, 0], exact, atol=1e-4)


class TestFeedback(unittest.TestCase):
    def setUp(self):
        self.problem = example_problem()
        self.K = grammian(self.problem.family, 1.0)
        self.grid = np.linspace(0.0, 1.0, 51)

    def test_control_shape(self):
        """one row per node, one column per control"""
        traj = Trajectory.constant(self.grid, self.problem.z0)
        u = feedback_control(self.problem, self.K, 1e-2, traj, SpectralVector.zeros(6))
        self.assertEqual(u.shape, (51, 5))
        self.assertTrue(np.all(u[-1] == 0.0))

    def test_needs_grammian(self):
        solver = MildSolver(self.problem, None, 50)
        with self.assertRaises(ValueError):
            solver.feedback_control(1e-2, Trajectory.constant(self.grid, self.problem.z0), SpectralVector.zeros(6))

    def test_invalid_beta(self):
        with self.assertRaises(DomainError):
            solve_fixed_point(self.problem, self.K, 0.0, SpectralVector.zeros(6), SolverConfig(n_t=50))
        traj = Trajectory.constant(self.grid, self.problem.z0)
        with self.assertRaises(DomainError):
            feedback_control(self.problem, self.K, -1.0, traj, SpectralVector.zeros(6))

    def test_control_shape_checked(self):
        solver = MildSolver(self.problem, self.K, 50)
        with self.assertRaises(ShapeError):
            solver.step(1e-2, Trajectory.constant(self.grid, self.problem.z0), SpectralVector.zeros(6),
                        np.zeros((51, 6)))

    def test_solver_sizes(self):
        with self.assertRaises(ValueError):
            MildSolver(self.problem, self.K, 8)
        with self.assertRaises(ShapeError):
            MildSolver(self.problem, GrammianMatrix(np.eye(4), 1.0, 16), 50)

    def test_example_solve(self):
        """the example problem converges and respects the control bound"""
        z_d = SpectralVector.unit(6, 2, 0.5)
        report = solve_fixed_point(self.problem, self.K, 1e-1, z_d, SolverConfig(n_t=50))
        self.assertIsInstance(report, SolveReport)
        self.assertTrue(report.converged)
        self.assertTrue(report.lemma2_ok)
        self.assertLessEqual(report.residual, 1e-6)
        self.assertEqual(len(report.updates), report.iterations)


class TestSolveReport(unittest.TestCase):
    def test_control_energy(self):
        """constant controls give a ||u||^2"""
        grid = np.linspace(0.0, 2.0, 41)
        report = SolveReport(Trajectory(grid, np.zeros((41, 2))), np.tile([3.0, 4.0], (41, 1)),
                             1, 0.0, 0.0, True, True)
        self.assertAlmostEqual(report.control_energy(), 50.0, delta=1e-12)

    def test_negative_residual(self):
        grid = np.linspace(0.0, 1.0, 21)
        with self.assertRaises(ValueError):
            SolveReport(Trajectory(grid, np.zeros((21, 1))), np.zeros((21, 1)), 1, 0.0, -1.0, True, True)


if __name__ == '__main__':
    unittest.main()
