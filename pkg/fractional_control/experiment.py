"""Scenario assembly, hypothesis report and the beta sweep."""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from fractional_control.config import ExperimentConfig
from fractional_control.control_operators import (GrammianMatrix, grammian,
                                                  linear_controllability_indicator)
from fractional_control.errors import DivergenceError, ResolventError
from fractional_control.mild_solver import MildSolver, SolveReport, SolverConfig
from fractional_control.nonlocal_problem import (INPUT_OPERATORS, KERNEL_MAPS, SOURCE_MAPS,
                                                 DeclaredConstants, NonlocalWeights, ProblemSpec,
                                                 check_contraction, check_uniform_bound,
                                                 default_constants, estimate_lipschitz, lookup, nonlocal_phi,
                                                 nonlocal_psi, sample_norm, source_along_state,
                                                 state_pair_sampler, state_sampler, sweep_thetas,
                                                 trajectory_pair_sampler)
from fractional_control.solution_families import FamilyConfig, lemma1_bound
from fractional_control.spectral_basis import BasisConfig, SpectralVector, Trajectory

logger = logging.getLogger(__name__)

LIPSCHITZ_SLACK = 1.05
N_SAMPLES = 400
INDICATOR_BETAS = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6)


@dataclass(frozen=True)
class Scenario:
    """Problem, Grammian and target assembled from one config"""
    config: ExperimentConfig
    problem: ProblemSpec
    grammian: GrammianMatrix
    z_d: SpectralVector

    def solver_config(self) -> SolverConfig:
        c = self.config
        return SolverConfig(c.n_t, c.fp_tol, c.max_iter, c.relaxation)


def build_problem(cfg: ExperimentConfig) -> Scenario:
    cfg.validate()
    basis = BasisConfig(cfg.L, cfg.N, cfg.Ny)
    family = FamilyConfig(cfg.q, basis, ml_tol=cfg.ml_tol).with_measured_bound(cfg.a)
    phi = NonlocalWeights(cfg.phi_times, cfg.phi_weights, cfg.phi_bound)
    psi = NonlocalWeights(cfg.psi_times, cfg.psi_weights, cfg.psi_bound)

    derived = default_constants(cfg.f, cfg.g, phi, psi, cfg.a, cfg.L)
    declared = {name: getattr(cfg, name) for name in ("C1", "C2", "C3", "d1", "d2", "m_bound")}
    constants = DeclaredConstants(**{name: getattr(derived, name) if value is None else value
                                     for name, value in declared.items()})

    input_operator = lookup(INPUT_OPERATORS, cfg.B, "input operator")(cfg.N)
    problem = ProblemSpec(
        family=family,
        input_operator=input_operator,
        f=lookup(SOURCE_MAPS, cfg.f, "source"),
        g=lookup(KERNEL_MAPS, cfg.g, "kernel"),
        phi=phi,
        psi=psi,
        z0=SpectralVector(cfg.padded("z0")),
        z1=SpectralVector(cfg.padded("z1")),
        a=cfg.a,
        constants=constants,
    )
    K = grammian(family, cfg.a, cfg.n_quad, input_operator)
    logger.info("scenario q=%g a=%g N=%d: M=%.6g, min eig K=%.3e",
                cfg.q, cfg.a, cfg.N, family.M, K.min_eigenvalue())
    return Scenario(cfg, problem, K, SpectralVector(cfg.padded("z_d")))


@dataclass(frozen=True)
class HypothesisCheck:
    name: str
    passed: bool
    measured: str
    detail: str


@dataclass
class HypothesisReport:
    checks: List[HypothesisCheck] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def add(self, name: str, passed: bool, measured: str, detail: str = ""):
        self.checks.append(HypothesisCheck(name, passed, measured, detail))
        if not passed:
            logger.warning("hypothesis %s failed: %s %s", name, measured, detail)

    def get(self, name: str) -> HypothesisCheck:
        return next(check for check in self.checks if check.name == name)


def _within(measured: float, declared: float) -> bool:
    return measured <= declared * LIPSCHITZ_SLACK + 1e-12


def check_hypotheses(cfg: ExperimentConfig, scenario: Optional[Scenario] = None) -> HypothesisReport:
    """Empirical evidence for every standing assumption; report-only"""
    if scenario is None:
        scenario = build_problem(cfg)
    problem = scenario.problem
    family = problem.family
    c = problem.constants
    basis = family.basis
    norm = sample_norm(basis.spacing)
    report = HypothesisReport()

    report.add("H1", True, f"M = {family.M:.6g}",
               "structural: finite spectral truncation, compactness not testable numerically")

    # H2(ii): Lipschitz in the state and through the Volterra term
    pairs = state_pair_sampler(basis.Ny, amplitude=0.05, spread=0.01)
    state_only = max(estimate_lipschitz(lambda s, t=t: problem.f(t, s, np.zeros_like(s)), pairs,
                                        N_SAMPLES, cfg.seed, norm) for t in sweep_thetas(cfg.a))
    report.add("H2.C1", _within(state_only, c.C1), f"{state_only:.6g}", f"declared C1 = {c.C1:.6g}")
    volterra_only = estimate_lipschitz(lambda w: problem.f(0.0, np.zeros_like(w), w), pairs,
                                       N_SAMPLES, cfg.seed, norm)
    report.add("H2.C2", _within(volterra_only, c.C2), f"{volterra_only:.6g}", f"declared C2 = {c.C2:.6g}")
    combined = max(estimate_lipschitz(source_along_state(problem.f, problem.g, t), pairs,
                                      N_SAMPLES, cfg.seed, norm) for t in sweep_thetas(cfg.a))
    combined_bound = c.C1 + cfg.a * c.C2 * c.C3
    report.add("H2.combined", _within(combined, combined_bound), f"{combined:.6g}",
               f"declared C1 + a C2 C3 = {combined_bound:.6g}")

    # H2(iii) and H6: sup of ||f||, and growth under larger amplitudes
    bounds = []
    for amplitude in (1.0, 10.0):
        samples = state_sampler(basis.Ny, amplitude)
        bounds.append(max(check_uniform_bound(source_along_state(problem.f, problem.g, t), samples,
                                              N_SAMPLES, cfg.seed, norm) for t in sweep_thetas(cfg.a)))
    report.add("H2.m", _within(bounds[0], c.m_bound), f"{bounds[0]:.6g}",
               f"declared m = {c.m_bound:.6g}")
    unbounded = not np.isfinite(c.m_bound) or bounds[1] > 5.0 * max(bounds[0], 1e-300)
    report.add("H6", not unbounded and _within(bounds[1], c.m_bound), f"{bounds[1]:.6g}",
               "uniformly bounded" if not unbounded else "sup of ||f|| grows with the input")

    # H3: Lipschitz of g in the state at the largest kernel time
    g_lip = estimate_lipschitz(lambda s: problem.g(cfg.a, cfg.a, s), pairs, N_SAMPLES, cfg.seed, norm)
    report.add("H3", _within(g_lip, c.C3), f"{g_lip:.6g}", f"declared C3 = {c.C3:.6g}")

    # H4: nonlocal maps in the sup-norm
    grid = np.linspace(0.0, cfg.a, cfg.n_t + 1)
    trajectories = trajectory_pair_sampler(grid, basis.N)
    for name, apply, weights, declared in (("H4.phi", nonlocal_phi, problem.phi, c.d1),
                                           ("H4.psi", nonlocal_psi, problem.psi, c.d2)):
        measured = estimate_lipschitz(lambda traj, op=apply, w=weights: op(w, traj).coeffs,
                                      trajectories, 100, cfg.seed, np.linalg.norm, Trajectory.sup_norm)
        report.add(name, _within(measured, declared), f"{measured:.6g}", f"declared {declared:.6g}")

    contraction = check_contraction(family.M, c.d1, c.d2)
    report.add("contraction", contraction.passed, f"margin {contraction.margin:.6g}",
               "existence needs M(d1 + d2) < 1")

    # H5: linear approximate controllability on the truncated space
    min_eig = scenario.grammian.min_eigenvalue()
    rng = np.random.default_rng(cfg.seed)
    decays = True
    worst = 0.0
    for _ in range(10):
        v = SpectralVector(rng.standard_normal(basis.N))
        values = linear_controllability_indicator(scenario.grammian, v, INDICATOR_BETAS)
        decays &= all(later < earlier for earlier, later in zip(values, values[1:]))
        decays &= values[-1] <= 0.1 * values[0]
        worst = max(worst, values[-1] / values[0])
    report.add("H5", bool(min_eig > 0.0 and decays), f"min eig {min_eig:.3e}",
               f"worst indicator ratio {worst:.3e}")
    report.add("lemma1", True, f"{lemma1_bound(family, cfg.a):.6g}", "bound on ||P_q(t)|| over [0, a]")
    return report


@dataclass(frozen=True)
class SweepRecord:
    beta: float
    terminal_error: float
    control_energy: float
    iterations: int
    converged: bool
    lemma2_ok: bool

    def __post_init__(self):
        if self.terminal_error < 0.0 or self.control_energy < 0.0:
            raise ValueError("terminal error and control energy must be non-negative")


def _record(beta: float, report: SolveReport, z_d: SpectralVector) -> SweepRecord:
    return SweepRecord(
        beta=beta,
        terminal_error=(report.trajectory.terminal() - z_d).norm(),
        control_energy=report.control_energy(),
        iterations=report.iterations,
        converged=report.converged,
        lemma2_ok=report.lemma2_ok,
    )


def simulate(cfg: ExperimentConfig, beta: float, scenario: Optional[Scenario] = None) -> SolveReport:
    if scenario is None:
        scenario = build_problem(cfg)
    solver_cfg = scenario.solver_config()
    solver = MildSolver(scenario.problem, scenario.grammian, solver_cfg.n_t)
    return solver.solve(beta, scenario.z_d, solver_cfg)


def run_beta_sweep(cfg: ExperimentConfig, jobs: int = 1,
                   scenario: Optional[Scenario] = None) -> List[SweepRecord]:
    """One solve per beta, rows in input order; failed solves become non-converged rows"""
    if jobs < 1:
        raise ValueError(f"jobs must be at least 1, got {jobs}")
    if scenario is None:
        scenario = build_problem(cfg)
    solver_cfg = scenario.solver_config()
    solver = MildSolver(scenario.problem, scenario.grammian, solver_cfg.n_t)

    def run(beta: float) -> SweepRecord:
        try:
            report = solver.solve(beta, scenario.z_d, solver_cfg)
        except (DivergenceError, ResolventError) as exc:
            logger.warning("beta=%g failed: %s", beta, exc)
            return SweepRecord(beta, float("inf"), float("inf"), solver_cfg.max_iter, False, False)
        record = _record(beta, report, scenario.z_d)
        logger.info("beta=%g terminal error %.6e, control energy %.6e",
                    beta, record.terminal_error, record.control_energy)
        return record

    with ThreadPoolExecutor(max_workers=jobs) as executor:
        return list(executor.map(run, cfg.betas))
