import math
import unittest

import numpy as np

from fractional_control.control_operators import (ControlVector, GrammianMatrix, InputOperator, apply_B,
                                                  apply_B_star, grammian, linear_controllability_indicator,
                                                  operator_norm_B, resolvent_apply)
from fractional_control.errors import DomainError, ShapeError
from fractional_control.solution_families import FamilyConfig
from fractional_control.spectral_basis import BasisConfig, SpectralVector


class TestInputOperator(unittest.TestCase):
    def setUp(self):
        self.rng = np.random.default_rng(11)

    def test_apply_example(self):
        """Bu = (2 u_2, u_2, u_3, ..., u_N)"""
        np.testing.assert_array_equal(apply_B(ControlVector([1.0, 2.0, 3.0])).coeffs, [2.0, 1.0, 2.0, 3.0])
        np.testing.assert_array_equal(apply_B(ControlVector([0.0, 0.0])).coeffs, [0.0, 0.0, 0.0])

    def test_adjoint_example(self):
        """B* e_1 = (2, 0, ..., 0) and B* e_n = e_{n-1} for n >= 2"""
        np.testing.assert_array_equal(apply_B_star(SpectralVector.unit(4, 1)).coeffs, [2.0, 0.0, 0.0])
        np.testing.assert_array_equal(apply_B_star(SpectralVector.unit(4, 3)).coeffs, [0.0, 1.0, 0.0])

    def test_adjointness(self):
        """<Bu, v> = <u, B* v> on random pairs"""
        for _ in range(100):
            u = ControlVector(self.rng.standard_normal(7))
            v = SpectralVector(self.rng.standard_normal(8))
            left = apply_B(u).dot(v)
            right = u.dot(apply_B_star(v))
            self.assertLessEqual(abs(left - right), 1e-13 * max(1.0, abs(left)))

    def test_norm(self):
        """||B|| = sqrt(5) for every N >= 2"""
        self.assertAlmostEqual(operator_norm_B(2), math.sqrt(5.0), delta=1e-12)
        self.assertAlmostEqual(operator_norm_B(8), math.sqrt(5.0), delta=1e-12)
        self.assertAlmostEqual(InputOperator.modes_from_two(2).norm(), 1.0, delta=1e-12)
        with self.assertRaises(ValueError):
            operator_norm_B(1)

    def test_shapes(self):
        """the registered operators have N rows and reject mismatched vectors"""
        self.assertEqual(InputOperator.example(6).matrix.shape, (6, 5))
        self.assertEqual(InputOperator.identity(6).n_controls, 6)
        self.assertEqual(InputOperator.zero(6).norm(), 0.0)
        with self.assertRaises(ShapeError):
            InputOperator.example(6).apply(ControlVector(np.zeros(6)))
        with self.assertRaises(ShapeError):
            InputOperator.example(6).adjoint(SpectralVector.zeros(5))


class TestGrammian(unittest.TestCase):
    def test_zero_operator(self):
        """B = 0 gives the zero Grammian"""
        cfg = FamilyConfig(q=1.5)
        K = grammian(cfg, 1.0, input_operator=InputOperator.zero(6))
        self.assertTrue(np.all(K.K == 0.0))

    def test_symmetric(self):
        cfg = FamilyConfig(q=1.5)
        K = grammian(cfg, 1.0).K
        np.testing.assert_array_equal(K, K.T)

    def test_positive_definite(self):
        """the example operator yields a positive definite Grammian on eight modes"""
        for q in (1.3, 1.5, 1.8):
            K = grammian(FamilyConfig(q=q, basis=BasisConfig(N=8)), 1.0)
            self.assertGreater(K.min_eigenvalue(), 0.0, msg=f"q={q}")

    def test_quadrature_refinement(self):
        """entry (3, 3) is stable under a ten times finer quadrature"""
        cfg = FamilyConfig(q=1.5)
        coarse = grammian(cfg, 1.0, n_quad=400).K[2, 2]
        fine = grammian(cfg, 1.0, n_quad=4000).K[2, 2]
        self.assertLessEqual(abs(coarse - fine), 1e-4 * abs(fine))

    def test_classical_closed_form(self):
        """q = 2 and B = I on one mode: int_0^a sin^2 = a/2 - sin(2a)/4"""
        cfg = FamilyConfig(q=2.0, basis=BasisConfig(N=1))
        K = grammian(cfg, 2.0, n_quad=4000, input_operator=InputOperator.identity(1))
        self.assertAlmostEqual(K.K[0, 0], 1.0 - math.sin(4.0) / 4.0, delta=1e-6)

    def test_invalid(self):
        cfg = FamilyConfig(q=1.5)
        with self.assertRaises(ValueError):
            grammian(cfg, 0.0)
        with self.assertRaises(ValueError):
            grammian(cfg, 1.0, n_quad=8)
        with self.assertRaises(ShapeError):
            grammian(cfg, 1.0, input_operator=InputOperator.example(4))
        with self.assertRaises(ValueError):
            GrammianMatrix(np.array([[1.0, 2.0], [0.0, 1.0]]), 1.0, 16)


class TestResolvent(unittest.TestCase):
    def setUp(self):
        self.rng = np.random.default_rng(3)
        X = self.rng.standard_normal((5, 5))
        self.spd = GrammianMatrix(0.5 * (X @ X.T + (X @ X.T).T), 1.0, 16)

    def test_zero_grammian(self):
        """K = 0 gives v / beta"""
        K = GrammianMatrix(np.zeros((3, 3)), 1.0, 16)
        v = SpectralVector([1.0, -2.0, 4.0])
        np.testing.assert_allclose(resolvent_apply(0.5, K, v).coeffs, [2.0, -4.0, 8.0], rtol=1e-14)

    def test_scaled_identity(self):
        """K = kI gives v / (beta + k)"""
        K = GrammianMatrix(3.0 * np.eye(4), 1.0, 16)
        v = SpectralVector([1.0, 2.0, 3.0, 4.0])
        np.testing.assert_allclose(resolvent_apply(1.0, K, v).coeffs, v.coeffs / 4.0, rtol=1e-14)

    def test_residual(self):
        """(beta I + K) x = v on a random positive definite K"""
        v = SpectralVector(self.rng.standard_normal(5))
        for beta in (1.0, 1e-3, 1e-8):
            x = resolvent_apply(beta, self.spd, v).coeffs
            residual = (beta * np.eye(5) + self.spd.K) @ x - v.coeffs
            self.assertLessEqual(np.linalg.norm(residual), 1e-9 * max(1.0, np.linalg.norm(x)))

    def test_norm_bound(self):
        """||R(beta, K) v|| <= ||v|| / beta for positive semidefinite K"""
        for _ in range(20):
            v = SpectralVector(self.rng.standard_normal(5))
            beta = float(10.0 ** self.rng.uniform(-4.0, 1.0))
            self.assertLessEqual(resolvent_apply(beta, self.spd, v).norm(), v.norm() / beta * (1.0 + 1e-12))

    def test_nonpositive_beta(self):
        v = SpectralVector.zeros(5)
        with self.assertRaises(DomainError):
            resolvent_apply(0.0, self.spd, v)
        with self.assertRaises(DomainError):
            resolvent_apply(-1.0, self.spd, v)

    def test_shape(self):
        with self.assertRaises(ShapeError):
            resolvent_apply(1.0, self.spd, SpectralVector.zeros(4))


class TestControllabilityIndicator(unittest.TestCase):
    def setUp(self):
        self.betas = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6]
        self.K = grammian(FamilyConfig(q=1.5), 1.0)

    def test_decreasing(self):
        """the indicator decays as beta goes to zero"""
        v = SpectralVector(np.random.default_rng(5).standard_normal(6))
        values = linear_controllability_indicator(self.K, v, self.betas)
        self.assertTrue(all(later < earlier for earlier, later in zip(values, values[1:])))

    def test_zero_target(self):
        values = linear_controllability_indicator(self.K, SpectralVector.zeros(6), self.betas)
        self.assertEqual(values, [0.0] * 6)

    def test_uncontrolled(self):
        """K = 0 keeps the indicator at ||v||"""
        K = GrammianMatrix(np.zeros((6, 6)), 1.0, 16)
        v = SpectralVector(np.arange(1.0, 7.0))
        for value in linear_controllability_indicator(K, v, self.betas):
            self.assertAlmostEqual(value, v.norm(), delta=1e-12 * v.norm())

    def test_betas_must_decrease(self):
        v = SpectralVector.zeros(6)
        with self.assertRaises(ValueError):
            linear_controllability_indicator(self.K, v, [1e-2, 1e-1])
        with self.assertRaises(ValueError):
            linear_controllability_indicator(self.K, v, [1e-2, 1e-2])
        with self.assertRaises(DomainError):
            linear_controllability_indicator(self.K, v, [1.0, -1.0])


if __name__ == '__main__':
    unittest.main()
