"""
Splitting Driver Module
Runs the Lie splitting loop (plate step, then fluid step, on every
sub-interval), keeps the energy ledger and evaluates the run-time audits.
"""
import logging
import math
from dataclasses import asdict, dataclass, field, fields, replace
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import pandas as pd
from scipy.integrate import solve_ivp

from src.ale_kinematics import PlateTraces, ReferenceGrid, build_traces, jacobian_extrema
from src.config import (
    C_GAMMA, COERCIVITY_SAMPLES, GAUSS_POINTS, LIPSCHITZ_SAMPLES, ODE_METHOD, SSP_EQUALITY_TOL, TELESCOPE_TOL,
    UNIFORM_BOUND_TOL,
)
from src.exceptions import ParameterError, SimulationError, StepError
from src.fluid_subproblem import (
    FluidState, FspInputs, FspSolver, assemble_fsp, dump_system, fluid_kinetic_energy, fsp_energy_audit,
    lift_boundary, solve_fsp,
)
from src.plate_models import (
    PlateModel, assumption_report, check_coercivity, estimate_lipschitz, force, make_model, potential,
    potential_bound,
)
from src.plate_spectral_basis import GalerkinBasis, PlateGrid, build_basis, project, spectral_sobolev_norm
from src.profiles import sample_profile
from src.sim_config import SimConfig

logger = logging.getLogger(__name__)

LEDGER_COLUMNS = (
    'n', 't', 'S', 'F', 'D', 'mismatch_ssp', 'mismatch_fsp', 'J_min', 'J_max', 'energy_kinetic_fluid',
    'energy_elastic', 'energy_plate_kinetic', 'potential', 'fsp_slack',
)


# ---------------------------------------------------------------------------
# Plan and the step-count condition
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class PlanConstants:
    C_B: float
    C_Gamma: float
    C_R: float
    R: float
    F0_norm: float
    C0: float
    E0: float
    C_star: float
    kappa: float
    c: float
    C_Pi_eta0: float
    xi_k: float = 0.0
    sum_xi_a: float = 0.0
    N_min_raw: float = 0.0
    sensitivity: float = 1.0

    def to_dict(self) -> Dict:
        return asdict(self)


@dataclass(frozen=True)
class SplittingPlan:
    T: float
    k: int
    alpha: float
    a: float
    N: int
    N_min: int
    N_user: Optional[int]
    strict: bool
    constants: PlanConstants

    @property
    def T_fraction(self) -> Fraction:
        return Fraction(self.T)

    @property
    def dt(self) -> float:
        return float(self.T_fraction / self.N)

    def time(self, n: int) -> float:
        """t_n = n T / N in rational arithmetic, so time(N) == T"""
        return float(self.T_fraction * n / self.N)


def n_min_breakdown(T: float, alpha: float, a: float, C_B: float, C_R: float, F0_norm: float, xi,
                    C_Gamma: float = C_GAMMA) -> Dict:
    """Each factor of the lower bound on the number of sub-intervals"""
    if alpha >= 2.0 or alpha < 0.0:
        raise ParameterError(f"alpha must lie in [0, 2), got {alpha}")
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    sum_xi_a = float(np.sum(xi ** (0.5 * a)))
    stiffness_term = 2.0 * float(xi[-1]) * C_B
    lipschitz_term = 4.0 * C_R**2 * C_Gamma * (F0_norm**2 + C_B) * sum_xi_a
    base = stiffness_term + lipschitz_term
    exponent = 1.0 / (2.0 - alpha)
    raw = T * base ** exponent
    return {
        'xi_k': float(xi[-1]), 'sum_xi_a': sum_xi_a, 'stiffness_term': stiffness_term,
        'lipschitz_term': lipschitz_term, 'base': base, 'exponent': exponent, 'raw': raw,
        'N_min': max(int(math.ceil(raw)), 1),
    }


def compute_N_min(constants: PlanConstants, basis: GalerkinBasis, T: float, alpha: float, a: float,
                  k: Optional[int] = None) -> int:
    k = basis.k_max if k is None else k
    return n_min_breakdown(T, alpha, a, constants.C_B, constants.C_R, constants.F0_norm, basis.xi[:k],
                           constants.C_Gamma)['N_min']


# ---------------------------------------------------------------------------
# States, trajectories and the ledger
# ---------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class PlateState:
    eta: np.ndarray
    t: float


@dataclass(frozen=True, eq=False)
class SimState:
    plate: PlateState
    fluid: FluidState
    t: float
    step: int


@dataclass(frozen=True, eq=False)
class SspTrajectory:
    """Plate solution on one sub-interval with its Gauss-point samples"""

    step: int
    t0: float
    t1: float
    dt: float
    v_n: np.ndarray
    eta_start: np.ndarray
    eta_end: np.ndarray
    times: np.ndarray
    weights: np.ndarray
    eta_nodes: np.ndarray
    rate_nodes: np.ndarray
    rate_start: np.ndarray
    rate_end: np.ndarray
    dense: object = field(repr=False)

    def rate_energy(self) -> float:
        """(1/2 dt) int ||d_t eta||^2"""
        return float(self.weights @ np.sum(self.rate_nodes**2, axis=1)) / (2.0 * self.dt)

    def mismatch_energy(self) -> float:
        """(1/2 dt) int ||d_t eta - v^n||^2"""
        gap = self.rate_nodes - self.v_n[None, :]
        return float(self.weights @ np.sum(gap**2, axis=1)) / (2.0 * self.dt)

    def sampled_rates(self) -> np.ndarray:
        return np.vstack([self.rate_start, self.rate_nodes, self.rate_end])

    def sampled_eta(self) -> np.ndarray:
        return np.vstack([self.eta_start, self.eta_nodes, self.eta_end])


@dataclass
class LedgerEntry:
    n: int
    t: float
    S: float
    F: float
    D: float
    mismatch_ssp: float
    mismatch_fsp: float
    J_min: float
    J_max: float
    energy_kinetic_fluid: float
    energy_elastic: float
    energy_plate_kinetic: float
    potential: float
    fsp_slack: float
    F_start: float = 0.0
    ssp_residual: float = 0.0
    ssp_drop: float = 0.0
    fsp_drop: float = 0.0
    rate_deviation: float = 0.0
    velocity_increment: float = 0.0
    interface_mismatch: float = 0.0
    end_mismatch: float = 0.0
    velocity_jump: float = 0.0
    physical_energy: float = 0.0
    pressure_mean: float = 0.0
    solver_residual: float = 0.0
    divergence_residual: float = 0.0
    ssp_passed: bool = True
    fsp_passed: bool = True
    terminal: bool = False

    def row(self) -> Dict:
        return {name: getattr(self, name) for name in LEDGER_COLUMNS}


@dataclass
class EnergyLedger:
    F0: float = 0.0
    entries: List[LedgerEntry] = field(default_factory=list)

    def append(self, entry: LedgerEntry) -> None:
        if self.entries and entry.n <= self.entries[-1].n:
            raise ParameterError(f"ledger rows must have increasing n, got {entry.n} after {self.entries[-1].n}")
        self.entries.append(entry)

    def __len__(self) -> int:
        return len(self.entries)

    def rows(self) -> List[Dict]:
        return [entry.row() for entry in self.entries]

    def to_frame(self, full: bool = False) -> pd.DataFrame:
        if full:
            return pd.DataFrame([asdict(entry) for entry in self.entries], columns=[f.name for f in fields(LedgerEntry)])
        return pd.DataFrame(self.rows(), columns=list(LEDGER_COLUMNS))

    def snapshot(self) -> 'EnergyLedger':
        return EnergyLedger(F0=self.F0, entries=[replace(entry) for entry in self.entries])


@dataclass(frozen=True, eq=False)
class InitialData:
    eta0: np.ndarray
    beta0: np.ndarray
    fluid: FluidState
    flux_relief: float
    E0: float
    F0: float


@dataclass(eq=False)
class RunResult:
    config: SimConfig
    plan: SplittingPlan
    basis: GalerkinBasis
    model: PlateModel
    initial: InitialData
    trajectory: List[SimState]
    ledger: EnergyLedger
    outcome: str
    halt_step: Optional[int]
    checks: Dict = field(default_factory=dict)

    def summary(self) -> Dict:
        entries = self.ledger.entries
        active = [e for e in entries if not e.terminal]
        return {
            'outcome': self.outcome,
            'N': self.plan.N,
            'N_min': self.plan.N_min,
            'constants': self.plan.constants.to_dict(),
            'max_slacks': {
                'min_fsp_slack': float(min((e.fsp_slack for e in active), default=0.0)),
                'max_ssp_residual': float(max((e.ssp_residual for e in active), default=0.0)),
                'telescoping_residual': float(self.checks.get('telescoping', {}).get('residual', 0.0)),
            },
            'halt_step': self.halt_step,
            'checks': self.checks,
            'seed': self.config.run.seed,
        }


# ---------------------------------------------------------------------------
# Structure sub-problem
# ---------------------------------------------------------------------------
def _gauss_rule(t0: float, t1: float):
    x, w = np.polynomial.legendre.leggauss(GAUSS_POINTS)
    return t0 + 0.5 * (x + 1.0) * (t1 - t0), 0.5 * w * (t1 - t0)


def ssp_step(state: PlateState, plan: SplittingPlan, model: PlateModel, basis: GalerkinBasis, v_n: np.ndarray,
             step: int = 0, tol_ode: float = 1e-10) -> SspTrajectory:
    """
    Integrate alpha' + dt Xi alpha + dt F(alpha) = V^n over [t_n, t_{n+1}]

    Args:
        state: plate coefficients at t_n
        plan: splitting plan (dt and the time grid)
        model: plate model
        basis: Galerkin basis
        v_n: plate-velocity coefficients from the previous fluid step
        step: sub-interval index n

    Returns:
        SspTrajectory with dense output and Gauss-point samples
    """
    v_n = np.asarray(v_n, dtype=float)
    eta_start = np.asarray(state.eta, dtype=float)
    if v_n.size != eta_start.size:
        raise ParameterError(f"v_n has {v_n.size} coefficients, plate state has {eta_start.size}")
    dt = plan.dt
    xi = basis.xi[:eta_start.size]
    t0, t1 = plan.time(step), plan.time(step + 1)

    def rate(alpha):
        return v_n - dt * (xi * alpha + force(model, basis, alpha))

    solution = solve_ivp(lambda t, y: rate(y), (t0, t1), eta_start, method=ODE_METHOD,
                         rtol=tol_ode, atol=tol_ode, dense_output=True)
    if solution.status != 0 or not np.all(np.isfinite(solution.y)):
        raise StepError(f"plate integration failed ({solution.message}); reduce dt or k", step=step)

    times, weights = _gauss_rule(t0, t1)
    eta_nodes = solution.sol(times).T
    eta_end = solution.y[:, -1].copy()
    return SspTrajectory(
        step=step, t0=t0, t1=t1, dt=dt, v_n=v_n, eta_start=eta_start.copy(), eta_end=eta_end,
        times=times, weights=weights, eta_nodes=eta_nodes,
        rate_nodes=np.array([rate(alpha) for alpha in eta_nodes]),
        rate_start=rate(eta_start), rate_end=rate(eta_end), dense=solution.sol,
    )


def average_rate(trajectory: SspTrajectory) -> np.ndarray:
    """(eta^{n+1}(t_{n+1}) - eta^n(t_n)) / dt"""
    return (trajectory.eta_end - trajectory.eta_start) / trajectory.dt


# ---------------------------------------------------------------------------
# Problem setup
# ---------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class Problem:
    basis: GalerkinBasis
    ref: ReferenceGrid
    traces: PlateTraces
    model: PlateModel


def build_problem(config: SimConfig, basis: Optional[GalerkinBasis] = None) -> Problem:
    geometry = config.geometry
    grid = PlateGrid(Lx=geometry.Lx, Ly=geometry.Ly, nx=geometry.nx, ny=geometry.ny)
    if basis is None:
        cache = Path(config.output.basis_cache) if config.output.basis_cache else None
        basis = build_basis(grid, config.run.k, cache_path=cache)
    ref = ReferenceGrid(plate=grid, nz=geometry.nz)
    traces = build_traces(basis, ref)
    plate = config.plate
    model = make_model(
        plate.model, basis, params=plate.params,
        h=sample_profile(plate.h, grid, basis), F0=sample_profile(plate.F0, grid, basis),
        kappa=plate.kappa, C_star=plate.C_star, a=plate.a, gamma_prime=plate.gamma_prime,
    )
    if plate.eps is not None:
        model = replace(model, eps=float(plate.eps))
    return Problem(basis=basis, ref=ref, traces=traces, model=model)


def plate_energy(model: PlateModel, basis: GalerkinBasis, eta: np.ndarray):
    """(1/2 ||Delta eta||^2, Pi(eta)) for coefficient vector eta"""
    elastic = 0.5 * spectral_sobolev_norm(basis, eta, 2.0) ** 2
    return elastic, potential(model, basis, eta)


def initial_data(config: SimConfig, problem: Problem) -> InitialData:
    """Project eta0, v0 onto the span and extend v0 into the box by the Stokes lift"""
    basis, ref, traces, model = problem.basis, problem.ref, problem.traces, problem.model
    k = config.run.k
    grid = basis.grid
    eta0 = project(basis, sample_profile(config.initial.eta0, grid, basis))[:k]
    beta0 = project(basis, sample_profile(config.initial.v0, grid, basis))[:k]
    lift = lift_boundary(basis, ref, beta0, relief=True, traces=traces, tol=config.tolerances.tol_solver)
    fluid = FluidState(u=lift.field, p=np.zeros(ref.cell_shape), beta=lift.psi.copy(),
                       divergence_residual=lift.divergence_residual)
    kinetic = fluid_kinetic_energy(ref, traces, eta0, lift.field.flat(), j_floor=-np.inf)
    elastic, pot = plate_energy(model, basis, eta0)
    plate_kinetic = 0.5 * float(fluid.beta @ fluid.beta)
    E0 = kinetic + elastic + plate_kinetic
    return InitialData(eta0=eta0, beta0=fluid.beta, fluid=fluid, flux_relief=lift.flux_mismatch, E0=E0, F0=E0 + pot)


def build_plan(config: SimConfig, problem: Problem, initial: InitialData, sample_assumptions: bool = True):
    """Constants of the step-count condition; returns (plan, assumption records)"""
    basis, model = problem.basis, problem.model
    run = config.run
    k = run.k
    alpha = config.plate.alpha
    a = model.a

    C_Pi = potential_bound(model, basis, initial.eta0, seed=run.seed)
    C0 = initial.E0 + C_Pi
    c = 0.5 - model.kappa
    C_B_unit = (model.C_star + C0) / c
    C_B = C_GAMMA * C_B_unit
    R = math.sqrt(max(C_B, 0.0))
    C_R = estimate_lipschitz(model, basis, R, a, LIPSCHITZ_SAMPLES, seed=run.seed, k=k) if R > 0 else 0.0
    F0_norm = spectral_sobolev_norm(basis, force(model, basis, np.zeros(k)), -a)

    breakdown = n_min_breakdown(run.T, alpha, a, C_B, C_R, F0_norm, basis.xi[:k], C_GAMMA)
    doubled = n_min_breakdown(run.T, alpha, a, 2.0 * C_B_unit, C_R, F0_norm, basis.xi[:k], 2.0)
    sensitivity = doubled['raw'] / breakdown['raw'] if breakdown['raw'] > 0 else 1.0

    constants = PlanConstants(
        C_B=C_B, C_Gamma=C_GAMMA, C_R=C_R, R=R, F0_norm=F0_norm, C0=C0, E0=initial.E0, C_star=model.C_star,
        kappa=model.kappa, c=c, C_Pi_eta0=C_Pi, xi_k=breakdown['xi_k'], sum_xi_a=breakdown['sum_xi_a'],
        N_min_raw=breakdown['raw'], sensitivity=sensitivity,
    )
    N_min = breakdown['N_min']
    if run.strict:
        N = max(run.N_user or 0, N_min)
    else:
        N = run.N_user
        if N < N_min:
            logger.warning(f"Exploratory run with N={N} below N_min={N_min}; bound checks are reported only")
    plan = SplittingPlan(T=run.T, k=k, alpha=alpha, a=a, N=N, N_min=N_min, N_user=run.N_user,
                         strict=run.strict, constants=constants)
    logger.info(f"Splitting plan: N={N}, N_min={N_min}, dt={plan.dt:.6g}, C_B={C_B:.6g}, C_R={C_R:.6g}")

    records = []
    if sample_assumptions:
        coercivity = check_coercivity(model, basis, max(R, 1.0), COERCIVITY_SAMPLES, seed=run.seed, k=k)
        records.append(assumption_report(model, basis, R, C_R, run.seed, coercivity))
    return plan, records


# ---------------------------------------------------------------------------
# Main loop
# ---------------------------------------------------------------------------
def _jacobian_range(traces: PlateTraces, etas: np.ndarray):
    extrema = [jacobian_extrema(traces, eta) for eta in etas]
    return min(e[0] for e in extrema), max(e[1] for e in extrema)


def _terminal_entry(n: int, t: float, S: float, j_min: float, j_max: float, kinetic: float, elastic: float,
                    pot: float, F_start: float) -> LedgerEntry:
    return LedgerEntry(
        n=n, t=t, S=S, F=S, D=0.0, mismatch_ssp=0.0, mismatch_fsp=0.0, J_min=j_min, J_max=j_max,
        energy_kinetic_fluid=kinetic, energy_elastic=elastic, energy_plate_kinetic=0.0, potential=pot,
        fsp_slack=0.0, F_start=F_start, terminal=True,
    )


def run(config: SimConfig, basis: Optional[GalerkinBasis] = None, dump_dir: Optional[Path] = None,
        sample_assumptions: bool = True) -> RunResult:
    """
    Run the splitting scheme for one configuration

    Args:
        config: validated SimConfig
        basis: prebuilt basis (built from config when omitted)
        dump_dir: directory for Matrix-Market dumps when debug.dump_system is set
        sample_assumptions: run the sampled coercivity check for the summary record

    Returns:
        RunResult with the SimState trajectory, the ledger and the run checks

    Raises:
        StepError: a sub-step failed; carries the step index and a ledger snapshot
    """
    problem = build_problem(config, basis)
    basis, ref, traces, model = problem.basis, problem.ref, problem.traces, problem.model
    initial = initial_data(config, problem)
    plan, assumptions = build_plan(config, problem, initial, sample_assumptions)
    tol = config.tolerances
    j_floor = config.run.j_floor

    ledger = EnergyLedger(F0=initial.F0)
    fluid = initial.fluid
    eta = initial.eta0
    trajectory = [SimState(PlateState(eta, 0.0), fluid, 0.0, 0)]
    outcome, halt_step = 'completed', None

    j_min0, j_max0 = jacobian_extrema(traces, eta)
    if j_min0 <= j_floor:
        elastic, pot = plate_energy(model, basis, eta)
        kinetic = fluid_kinetic_energy(ref, traces, eta, fluid.u.flat(), j_floor=-np.inf)
        ledger.append(_terminal_entry(0, 0.0, initial.F0, j_min0, j_max0, kinetic, elastic, pot, initial.F0))
        logger.warning(f"Initial plate touches the bottom: J_min={j_min0:.6g} <= j_floor={j_floor}")
        result = RunResult(config, plan, basis, model, initial, trajectory, ledger, 'touched_bottom', 0)
        result.checks = run_checks(ledger, plan, tol.tol_energy, assumptions, initial)
        return result

    F_start = initial.F0
    solver = FspSolver(tol=tol.tol_solver)
    kinetic_prev = fluid_kinetic_energy(ref, traces, eta, fluid.u.flat(), j_floor=j_floor)
    progress_every = max(plan.N // 10, 1)

    for n in range(plan.N):
        try:
            traj = ssp_step(PlateState(eta, plan.time(n)), plan, model, basis, fluid.beta, step=n,
                            tol_ode=tol.tol_ode)
            elastic, pot = plate_energy(model, basis, traj.eta_end)
            S_end = traj.rate_energy() + elastic + pot + kinetic_prev
            ssp_drop = traj.mismatch_energy()
            scale = max(abs(F_start), abs(ssp_drop + S_end))
            ssp_residual = abs(ssp_drop + S_end - F_start) / scale if scale > 0 else 0.0
            ssp_passed = ssp_residual <= SSP_EQUALITY_TOL
            if not ssp_passed:
                logger.warning(f"Step {n}: plate energy equality residual {ssp_residual:.3e}")

            j_min, j_max = _jacobian_range(traces, traj.sampled_eta())
            if j_min <= j_floor:
                ledger.append(_terminal_entry(n, traj.t1, S_end, j_min, j_max, kinetic_prev, elastic, pot, F_start))
                outcome, halt_step = 'touched_bottom', n
                logger.warning(f"Step {n}: plate touched the bottom (J_min={j_min:.6g} <= {j_floor})")
                break

            rate_avg = average_rate(traj)
            inputs = FspInputs(u_prev=fluid, eta_tilde_next=traj.eta_end, eta_tilde_prev=traj.eta_start,
                               dteta_avg=rate_avg, dt=plan.dt, mu=config.physics.mu)
            system = assemble_fsp(inputs, basis, ref, traces, j_floor=j_floor,
                                  corrupt_convection_sign=config.debug.corrupt_convection_sign)
            if config.debug.dump_system and dump_dir is not None:
                dump_system(system, dump_dir, n)
            fluid_next = solve_fsp(system, tol=tol.tol_solver, solver=solver)
            audit = fsp_energy_audit(system, fluid_next, S_end, elastic + pot, tol_energy=tol.tol_energy)
        except StepError as e:
            e.ledger = ledger.snapshot()
            logger.error(f"Step {n} aborted: {e}")
            raise
        except (SimulationError, ValueError, np.linalg.LinAlgError) as e:
            logger.error(f"Step {n} aborted: {e}")
            raise StepError(str(e), step=n, ledger=ledger.snapshot()) from e

        rates = traj.sampled_rates()
        end_gap = traj.rate_end - fluid_next.beta
        entry = LedgerEntry(
            n=n, t=traj.t1, S=S_end, F=audit.F_next, D=audit.dissipation,
            mismatch_ssp=float(np.sqrt(np.max(np.sum((rates - traj.v_n[None, :]) ** 2, axis=1)))),
            mismatch_fsp=float(np.sqrt(2.0 * audit.interface_mismatch)),
            J_min=j_min, J_max=j_max,
            energy_kinetic_fluid=audit.fluid_kinetic, energy_elastic=elastic,
            energy_plate_kinetic=audit.plate_kinetic, potential=pot, fsp_slack=audit.slack,
            F_start=F_start, ssp_residual=ssp_residual, ssp_drop=ssp_drop, fsp_drop=S_end - audit.F_next,
            rate_deviation=float(np.max(np.sum((rates - rate_avg[None, :]) ** 2, axis=1))),
            velocity_increment=audit.velocity_increment, interface_mismatch=audit.interface_mismatch,
            end_mismatch=float(end_gap @ end_gap),
            velocity_jump=float(np.sum((fluid_next.beta - fluid.beta) ** 2)),
            physical_energy=audit.fluid_kinetic + elastic + audit.plate_kinetic,
            pressure_mean=fluid_next.pressure_mean, solver_residual=fluid_next.residual,
            divergence_residual=fluid_next.divergence_residual,
            ssp_passed=ssp_passed, fsp_passed=audit.passed,
        )
        ledger.append(entry)
        logger.debug(f"Step {n}: S={S_end:.10g} F={audit.F_next:.10g} D={audit.dissipation:.3e} "
                     f"slack={audit.slack:.3e}")
        if (n + 1) % progress_every == 0:
            logger.info(f"Step {n + 1}/{plan.N}: t={traj.t1:.6g}, F={audit.F_next:.6g}, J_min={j_min:.6g}")

        eta = traj.eta_end
        fluid = fluid_next
        F_start = audit.F_next
        kinetic_prev = audit.fluid_kinetic
        trajectory.append(SimState(PlateState(eta, traj.t1), fluid, traj.t1, n + 1))

    logger.info(f"Run {config.name} finished: outcome={outcome}, steps={len(ledger)}, "
                f"factorizations={solver.factorizations}, gmres_iterations={solver.iterations}")
    result = RunResult(config, plan, basis, model, initial, trajectory, ledger, outcome, halt_step)
    result.checks = run_checks(ledger, plan, tol.tol_energy, assumptions, initial)
    return result


# ---------------------------------------------------------------------------
# Ledger audits
# ---------------------------------------------------------------------------
def telescoping_check(ledger: EnergyLedger) -> Dict:
    """Sum of per-step drops against F_0 - F_N"""
    active = [e for e in ledger.entries if not e.terminal]
    if not active:
        return {'residual': 0.0, 'passed': True}
    total = sum(e.ssp_drop + e.fsp_drop for e in active)
    expected = ledger.F0 - active[-1].F
    scale = max(abs(ledger.F0), sum(abs(e.ssp_drop) + abs(e.fsp_drop) for e in active))
    residual = abs(total - expected) / scale if scale > 0 else 0.0
    return {'residual': float(residual), 'passed': bool(residual <= TELESCOPE_TOL)}


def uniform_bound_check(ledger: EnergyLedger, C0: float) -> Dict:
    """max_n (F_n + sum_{i<=n} D_i) <= C0 (1 + tol)"""
    running = ledger.F0
    worst = ledger.F0
    dissipation = 0.0
    for entry in ledger.entries:
        dissipation += entry.D
        running = entry.F + dissipation
        worst = max(worst, running)
    limit = C0 + UNIFORM_BOUND_TOL * max(abs(C0), 1.0)
    return {'max_energy': float(worst), 'C0': float(C0), 'passed': bool(worst <= limit)}


def mismatch_report(ledger: EnergyLedger, plan: SplittingPlan) -> Dict:
    """Kinematic-mismatch bounds and the uniform bounds of the stability estimate"""
    active = [e for e in ledger.entries if not e.terminal]
    dt = plan.dt
    constants = plan.constants
    ssp_sq = [e.mismatch_ssp**2 for e in active]
    bound = dt ** plan.alpha
    violations = [e.n for e, value in zip(active, ssp_sq) if value > bound]
    max_dev = max((e.rate_deviation for e in active), default=0.0)
    C_obs = max_dev / dt ** (2.0 * plan.alpha) if active else 0.0
    C_ref = 4.0 / (3.0 * constants.C_B) if constants.C_B > 0 else math.inf

    sums = {
        'end_mismatch': float(sum(e.end_mismatch for e in active)),
        'velocity_jump': float(sum(e.velocity_jump for e in active)),
        'interface_mismatch': float(sum(2.0 * e.interface_mismatch for e in active)),
        'fluid_increment': float(sum(2.0 * e.velocity_increment for e in active)),
        'dissipation': float(sum(e.D for e in active)),
    }
    sup_plate_kinetic = max((2.0 * e.energy_plate_kinetic for e in active), default=0.0)
    sup_elastic = max((constants.c * 2.0 * e.energy_elastic for e in ledger.entries), default=0.0)

    passed = not violations
    if violations and not plan.strict:
        logger.warning(f"Exploratory run: mismatch bound exceeded at steps {violations[:10]}")
    return {
        'ssp_bound': {'max_mismatch_sq': float(max(ssp_sq, default=0.0)), 'bound': float(bound),
                      'violations': violations, 'passed': passed},
        'rate_deviation': {'max': float(max_dev), 'C_obs': float(C_obs), 'C_ref': float(C_ref),
                           'within_reference': bool(C_obs <= C_ref)},
        'sums': sums,
        'sums_finite': bool(all(math.isfinite(v) for v in sums.values())),
        'uniform': {
            'sup_plate_kinetic': float(sup_plate_kinetic),
            'plate_kinetic_bound': float(2.0 * constants.c * constants.C_B / constants.C_Gamma),
            'sup_elastic': float(sup_elastic),
            'elastic_bound': float(constants.C_star + constants.C0),
        },
        'strict': plan.strict,
        'passed': bool(passed or not plan.strict),
    }


def run_checks(ledger: EnergyLedger, plan: SplittingPlan, tol_energy: float, assumptions: List[Dict],
               initial: InitialData) -> Dict:
    active = [e for e in ledger.entries if not e.terminal]
    ssp_max = max((e.ssp_residual for e in active), default=0.0)
    min_slack = min((e.fsp_slack / max(1.0, abs(e.S)) for e in active), default=0.0)
    return {
        'ssp_equality': {'max_residual': float(ssp_max), 'passed': bool(all(e.ssp_passed for e in active))},
        'fsp_energy': {'min_relative_slack': float(min_slack), 'tol': tol_energy,
                       'passed': bool(all(e.fsp_passed for e in active))},
        'telescoping': telescoping_check(ledger),
        'uniform_bound': uniform_bound_check(ledger, plan.constants.C0),
        'mismatch': mismatch_report(ledger, plan),
        'assumptions': assumptions,
        'initial': {'flux_relief': float(initial.flux_relief)},
    }
