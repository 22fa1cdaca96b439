"""
Verification suites run by `main.py verify`

Each suite returns a SuiteResult; a failing check is an outcome, not an exception.
"""
import logging
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List

import numpy as np
import scipy.linalg

from src.ale_kinematics import ReferenceGrid, build_traces, geometric_identity_check
from src.config import DEFAULT_SEED, SSP_EQUALITY_TOL
from src.exceptions import SimulationError
from src.fluid_subproblem import FluidState, FspInputs, assemble_fsp, lift_boundary, solve_fsp, time_term_identity
from src.plate_models import check_coercivity, force, make_model, potential
from src.plate_spectral_basis import PlateGrid, biharmonic_stencil, build_basis
from src.sim_config import SimConfig
from src.splitting_driver import (
    PlanConstants, PlateState, SplittingPlan, average_rate, build_plan, build_problem, initial_data, run, ssp_step,
)

logger = logging.getLogger(__name__)

GRADIENT_EPSILONS = (1e-3, 1e-4, 1e-5)
GRADIENT_AMPLITUDE = 0.1
# central differences of a quadratic potential stay at this relative level
ROUNDOFF_FLOOR = 1e-10
GEOMETRIC_IDENTITY_TOL = 1e-12


@dataclass
class SuiteResult:
    name: str
    passed: bool
    details: Dict = field(default_factory=dict)
    seconds: float = 0.0


@dataclass
class VerificationReport:
    suites: List[SuiteResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(suite.passed for suite in self.suites)

    def to_dict(self) -> Dict:
        return {
            'passed': self.passed,
            'suites': [{'name': s.name, 'passed': s.passed, 'seconds': s.seconds, 'details': s.details}
                       for s in self.suites],
        }


def basis_suite(config: SimConfig) -> SuiteResult:
    """Rayleigh identity and orthonormality on the run grid; dense oracle on an 8x8 grid"""
    g = config.geometry
    basis = build_basis(PlateGrid(g.Lx, g.Ly, g.nx, g.ny), config.run.k)
    rayleigh = max(
        abs(basis.laplacian_norm(basis.W[:, i]) ** 2 - basis.xi[i]) / basis.xi[i] for i in range(basis.k_max)
    )
    gram = basis.grid.cell_area * basis.W.T @ basis.W
    orthonormality = float(np.max(np.abs(gram - np.eye(basis.k_max))))

    oracle_grid = PlateGrid(g.Lx, g.Ly, 8, 8)
    oracle_k = min(8, oracle_grid.size)
    oracle_basis = build_basis(oracle_grid, oracle_k)
    full = scipy.linalg.eigvalsh(biharmonic_stencil(oracle_grid).toarray())[:oracle_k]
    oracle = float(np.max(np.abs(oracle_basis.xi - full) / full))
    passed = rayleigh <= 1e-8 and orthonormality <= 1e-10 and oracle <= 1e-8
    return SuiteResult('basis', passed, {'rayleigh_rel': float(rayleigh), 'orthonormality': orthonormality,
                                         'dense_oracle_rel': oracle})


def geometry_suite(config: SimConfig) -> SuiteResult:
    """Discrete identity d_t J = J div w on the run grid and a coarser grid; it holds to rounding on both"""
    g = config.geometry
    residuals = {}
    for label, nx, ny, nz in (('coarse', max(4, g.nx // 2), max(4, g.ny // 2), max(4, g.nz // 2)),
                              ('fine', g.nx, g.ny, g.nz)):
        basis = build_basis(PlateGrid(g.Lx, g.Ly, nx, ny), 2)
        ref = ReferenceGrid(plate=basis.grid, nz=nz)
        residuals[label] = geometric_identity_check(basis, ref, np.array([0.0, 0.1]), np.array([0.1, 0.0]))
    passed = max(residuals.values()) <= GEOMETRIC_IDENTITY_TOL
    return SuiteResult('geometric_identity', passed, residuals)


def gradient_consistency(model, basis, k: int, seed: int = DEFAULT_SEED, epsilons=GRADIENT_EPSILONS,
                         amplitude: float = GRADIENT_AMPLITUDE) -> Dict:
    """Central-difference directional derivative of Pi against (F(eta), psi); fitted order in epsilon"""
    rng = np.random.default_rng(seed)
    eta = amplitude * rng.standard_normal(k)
    psi = rng.standard_normal(k)
    psi /= np.linalg.norm(psi)
    exact = float(force(model, basis, eta) @ psi)
    errors = []
    for eps in epsilons:
        numeric = (potential(model, basis, eta + eps * psi) - potential(model, basis, eta - eps * psi)) / (2.0 * eps)
        errors.append(abs(numeric - exact))
    errors = np.array(errors)
    floor = ROUNDOFF_FLOOR * max(abs(exact), 1.0)
    if np.all(errors <= floor):
        return {'errors': errors.tolist(), 'slope': None, 'passed': True}
    slope = float(np.polyfit(np.log(epsilons), np.log(np.maximum(errors, 1e-300)), 1)[0])
    return {'errors': errors.tolist(), 'slope': slope, 'passed': bool(abs(slope - 2.0) <= 0.2)}


def model_suite(config: SimConfig) -> SuiteResult:
    problem = build_problem(config)
    details = gradient_consistency(problem.model, problem.basis, config.run.k, config.run.seed)
    return SuiteResult('gradient_consistency', details['passed'], details)


def coercivity_suite(config: SimConfig) -> SuiteResult:
    problem = build_problem(config)
    initial = initial_data(config, problem)
    plan, _ = build_plan(config, problem, initial, sample_assumptions=False)
    report = check_coercivity(problem.model, problem.basis, max(plan.constants.R, 1.0), seed=config.run.seed,
                              k=config.run.k)
    return SuiteResult('coercivity', report['pass'], report)


def _bare_plan(T: float, k: int, N: int) -> SplittingPlan:
    constants = PlanConstants(C_B=0.0, C_Gamma=1.0, C_R=0.0, R=0.0, F0_norm=0.0, C0=0.0, E0=0.0, C_star=0.0,
                              kappa=0.25, c=0.25, C_Pi_eta0=0.0)
    return SplittingPlan(T=T, k=k, alpha=0.5, a=0.0, N=N, N_min=1, N_user=N, strict=False, constants=constants)


def ssp_suite(config: SimConfig) -> SuiteResult:
    """Closed-form linear solutions with the zero force"""
    g = config.geometry
    k = config.run.k
    basis = build_basis(PlateGrid(g.Lx, g.Ly, g.nx, g.ny), k)
    model = make_model('zero', basis)
    plan = _bare_plan(config.run.T, k, 4)
    dt = plan.dt
    xi = basis.xi[:k]
    tol = config.tolerances.tol_ode

    alpha0 = np.linspace(1.0, 0.25, k)
    free = ssp_step(PlateState(alpha0, 0.0), plan, model, basis, np.zeros(k), step=0, tol_ode=tol)
    decay = np.exp(-dt * xi * (free.t1 - free.t0)) * alpha0
    free_error = float(np.max(np.abs(free.eta_end - decay)))

    v = np.linspace(0.5, -0.5, k) if k > 1 else np.array([0.5])
    forced = ssp_step(PlateState(np.zeros(k), 0.0), plan, model, basis, v, step=0, tol_ode=tol)
    growth = (1.0 - np.exp(-dt * xi * (forced.t1 - forced.t0))) * v / (dt * xi)
    forced_error = float(np.max(np.abs(forced.eta_end - growth)))

    quadrature = forced.weights @ forced.rate_nodes / dt
    rate_error = float(np.max(np.abs(average_rate(forced) - quadrature)))
    passed = free_error <= 1e-9 and forced_error <= 1e-9 and rate_error <= 1e-8
    return SuiteResult('ssp_closed_form', passed, {'free_decay': free_error, 'constant_forcing': forced_error,
                                                   'average_rate': rate_error})


def fsp_suite(config: SimConfig) -> SuiteResult:
    """Skew convection, zero-data fixed point and the time-term identity"""
    problem = build_problem(config)
    basis, ref = problem.basis, problem.ref
    traces = build_traces(basis, ref)
    k = config.run.k
    rng = np.random.default_rng(config.run.seed)
    dt = config.run.T / 8.0

    zero = FluidState.zeros(ref, k)
    zero_inputs = FspInputs(u_prev=zero, eta_tilde_next=np.zeros(k), eta_tilde_prev=np.zeros(k),
                            dteta_avg=np.zeros(k), dt=dt, mu=config.physics.mu)
    zero_state = solve_fsp(assemble_fsp(zero_inputs, basis, ref, traces))
    zero_max = float(max(np.max(np.abs(zero_state.u.flat())), np.max(np.abs(zero_state.beta), initial=0.0)))

    lift = lift_boundary(basis, ref, 0.1 * rng.standard_normal(k), traces=traces)
    u_prev = FluidState(u=lift.field, p=np.zeros(ref.cell_shape), beta=lift.psi)
    inputs = FspInputs(u_prev=u_prev, eta_tilde_next=0.02 * rng.standard_normal(k),
                       eta_tilde_prev=0.02 * rng.standard_normal(k), dteta_avg=0.1 * rng.standard_normal(k),
                       dt=dt, mu=config.physics.mu)
    system = assemble_fsp(inputs, basis, ref, traces,
                          corrupt_convection_sign=config.debug.corrupt_convection_sign)
    C = system.convection
    skew = float(abs(C + C.T).max()) if C.nnz else 0.0
    state = solve_fsp(system, tol=config.tolerances.tol_solver)
    U = state.u.flat()
    identity = time_term_identity(system, U) / max(1.0, float(U @ (system.mass_next @ U)))
    passed = skew <= 1e-12 and zero_max == 0.0 and identity <= 1e-12 and state.residual <= config.tolerances.tol_solver
    return SuiteResult('fsp_skew_zero', passed, {'skew': skew, 'zero_state_max': zero_max,
                                                 'time_identity': identity, 'residual': state.residual})


def run_suite(config: SimConfig) -> SuiteResult:
    """Short strict run with every ledger audit"""
    strict = replace(config, run=replace(config.run, strict=True))
    result = run(strict, sample_assumptions=False)
    checks = result.checks
    passed = (
        result.outcome == 'completed'
        and checks['ssp_equality']['passed']
        and checks['ssp_equality']['max_residual'] <= SSP_EQUALITY_TOL
        and checks['fsp_energy']['passed']
        and checks['mismatch']['ssp_bound']['passed']
        and checks['telescoping']['passed']
        and checks['uniform_bound']['passed']
    )
    return SuiteResult('strict_run', bool(passed), {
        'outcome': result.outcome, 'N': result.plan.N, 'N_min': result.plan.N_min,
        'max_ssp_residual': checks['ssp_equality']['max_residual'],
        'min_fsp_slack': checks['fsp_energy']['min_relative_slack'],
        'telescoping': checks['telescoping']['residual'],
        'max_mismatch_sq': checks['mismatch']['ssp_bound']['max_mismatch_sq'],
        'mismatch_bound': checks['mismatch']['ssp_bound']['bound'],
    })


SUITES: List[Callable[[SimConfig], SuiteResult]] = [
    basis_suite, geometry_suite, model_suite, coercivity_suite, ssp_suite, fsp_suite, run_suite,
]


def verify(config: SimConfig) -> VerificationReport:
    """Run every suite in order; an exception inside a suite counts as its failure"""
    report = VerificationReport()
    for suite in SUITES:
        started = time.perf_counter()
        try:
            result = suite(config)
        except SimulationError as e:
            logger.error(f"Suite {suite.__name__} raised: {e}")
            result = SuiteResult(suite.__name__.replace('_suite', ''), False, {'error': str(e)})
        result.seconds = time.perf_counter() - started
        level = logging.INFO if result.passed else logging.WARNING
        logger.log(level, f"{result.name}: {'PASS' if result.passed else 'FAIL'} {result.details}")
        report.suites.append(result)
    return report
