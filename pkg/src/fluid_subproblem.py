"""
Fluid Sub-Problem Module
Assembles and solves the linear transformed Navier-Stokes step on the fixed
reference box, audits its discrete energy inequality and builds the Stokes
extension used for initial data.

Unknowns of the saddle-point system are the interior face velocities, the
plate-velocity coefficients beta and one pressure multiplier per cell. The
top-face u3 values are eliminated in favour of beta (u3 = sum_i beta_i w_i
sampled at the cell centres of the top layer).
"""
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
import scipy.io
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, gmres, splu

from src.ale_kinematics import (
    JacobianField, PlateTraces, ReferenceGrid, StaggeredField, TransformCoeffs, build_jacobian, build_traces,
    build_transform, divergence_matrix, flat_transform, gradient_matrices, staggered_operators, strain_matrices,
    strain_quadrature,
)
from src.config import (
    DEFAULT_J_FLOOR, DEFAULT_TOL_ENERGY, DEFAULT_TOL_SOLVER, GMRES_MAX_RESTARTS, GMRES_REFACTOR_ITERATIONS,
    GMRES_RESTART, GMRES_TOL_FACTOR, LU_PERMUTATION,
)
from src.exceptions import CompatibilityError, ParameterError, SolverError
from src.plate_spectral_basis import GalerkinBasis

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class FluidState:
    """Staggered velocity, mean-zero pressure multiplier and plate-velocity coefficients"""

    u: StaggeredField
    p: np.ndarray
    beta: np.ndarray
    pressure_mean: float = 0.0
    residual: float = 0.0
    divergence_residual: float = 0.0

    @classmethod
    def zeros(cls, ref: ReferenceGrid, k: int) -> 'FluidState':
        return cls(u=StaggeredField.zeros(ref), p=np.zeros(ref.cell_shape), beta=np.zeros(k))


@dataclass(frozen=True, eq=False)
class FspInputs:
    u_prev: FluidState
    eta_tilde_next: np.ndarray
    eta_tilde_prev: np.ndarray
    dteta_avg: np.ndarray
    dt: float
    mu: float

    def __post_init__(self):
        if not self.dt > 0:
            raise ParameterError(f"dt must be positive, got {self.dt}")
        if self.mu < 0:
            raise ParameterError(f"mu must be non-negative, got {self.mu}")
        k = len(self.dteta_avg)
        if len(self.eta_tilde_next) != k or len(self.eta_tilde_prev) != k or len(self.u_prev.beta) != k:
            raise ParameterError("FSP inputs carry coefficient vectors of different lengths")


@dataclass(frozen=True, eq=False)
class FspSystem:
    """Assembled saddle-point system together with the blocks the energy audit reads"""

    ref: ReferenceGrid
    traces: PlateTraces
    inputs: FspInputs
    matrix: sp.csc_matrix
    rhs: np.ndarray
    prolongation: sp.csr_matrix
    mass_prev: sp.dia_matrix = field(repr=False)
    mass_next: sp.dia_matrix = field(repr=False)
    stiffness: sp.csr_matrix = field(repr=False)
    convection: sp.csr_matrix = field(repr=False)
    constraint: sp.csr_matrix = field(repr=False)
    u_prev_full: np.ndarray = field(repr=False)

    @property
    def n_velocity(self) -> int:
        return self.prolongation.shape[1]

    @property
    def n_pressure(self) -> int:
        return self.constraint.shape[0]

    @property
    def k(self) -> int:
        return len(self.inputs.dteta_avg)


# ---------------------------------------------------------------------------
# Index bookkeeping
# ---------------------------------------------------------------------------
def _interior_masks(ref: ReferenceGrid):
    """Boolean masks of the free faces of each component (walls, bottom and top excluded)"""
    m1 = np.zeros(ref.shapes[0], dtype=bool)
    m1[1:-1, :, :] = True
    m2 = np.zeros(ref.shapes[1], dtype=bool)
    m2[:, 1:-1, :] = True
    m3 = np.zeros(ref.shapes[2], dtype=bool)
    m3[:, :, 1:-1] = True
    return m1, m2, m3


def interior_indices(ref: ReferenceGrid) -> np.ndarray:
    masks = _interior_masks(ref)
    return np.concatenate([offset + np.flatnonzero(mask.ravel()) for offset, mask in zip(ref.offsets, masks)])


def top_indices(ref: ReferenceGrid) -> np.ndarray:
    """Full-vector indices of the top-face u3 values, ordered like the cell-centre plate trace"""
    i, j = np.meshgrid(np.arange(ref.Nx), np.arange(ref.Ny), indexing='ij')
    return ref.offsets[2] + np.ravel_multi_index((i.ravel(), j.ravel(), np.full(i.size, ref.Nz)), ref.shapes[2])


@lru_cache(maxsize=16)
def prolongation(traces: PlateTraces, k: int) -> sp.csr_matrix:
    """Map [interior velocities, beta] to the full staggered vector"""
    ref = traces.ref
    interior = interior_indices(ref)
    select = sp.csr_matrix((np.ones(interior.size), (interior, np.arange(interior.size))),
                           shape=(ref.n_full, interior.size))
    top = top_indices(ref)
    evaluation = sp.coo_matrix(traces.centre[:, :k])
    lift = sp.csr_matrix((evaluation.data, (top[evaluation.row], evaluation.col)), shape=(ref.n_full, k))
    return sp.hstack([select, lift], format='csr')


def expand(ref: ReferenceGrid, traces: PlateTraces, x_interior: np.ndarray, beta: np.ndarray) -> np.ndarray:
    """Full staggered vector with the top face written directly from beta"""
    U = np.zeros(ref.n_full)
    U[interior_indices(ref)] = x_interior
    U[top_indices(ref)] = traces.centre[:, :len(beta)] @ beta
    return U


def face_mass(ref: ReferenceGrid, traces: PlateTraces, eta_coeffs: np.ndarray, j_floor: float) -> sp.dia_matrix:
    """Diagonal J-weighted face mass"""
    jac = build_jacobian(traces, eta_coeffs, j_floor=j_floor)
    return sp.diags(ref.face_volumes() * jac.face_weights(ref))


def fluid_kinetic_energy(ref: ReferenceGrid, traces: PlateTraces, eta_coeffs: np.ndarray, U: np.ndarray,
                         j_floor: float = 0.0) -> float:
    """1/2 int J |u|^2 by the face rule"""
    M = face_mass(ref, traces, eta_coeffs, j_floor)
    return 0.5 * float(U @ (M @ U))


def viscous_matrix(ref: ReferenceGrid, coeffs: TransformCoeffs, jac: Optional[JacobianField] = None) -> sp.csr_matrix:
    """sum over strain components of S^T diag(w) S, i.e. int J D(u):D(q); J = 1 when jac is omitted"""
    K = sp.csr_matrix((ref.n_full, ref.n_full))
    for term, S in strain_matrices(ref, coeffs):
        weight = term.multiplicity * strain_quadrature(ref, term.location, jac)
        K = K + S.T @ sp.diags(weight) @ S
    return K.tocsr()


def convection_matrix(ref: ReferenceGrid, coeffs: TransformCoeffs, cell_weight: np.ndarray,
                      transport: np.ndarray) -> sp.csr_matrix:
    """N with q^T N u = int J ((b . grad) u) . q, transport b given at cell centres, shape (3, Nc)"""
    G = gradient_matrices(ref, coeffs)
    ops = staggered_operators(ref)
    N = sp.csr_matrix((ref.n_full, ref.n_full))
    for i in range(3):
        for j in range(3):
            N = N + ops.average[i].T @ sp.diags(cell_weight * transport[j]) @ G[i][j]
    return N.tocsr()


def transport_field(ref: ReferenceGrid, traces: PlateTraces, U_prev: np.ndarray, dteta_avg: np.ndarray) -> np.ndarray:
    """u^n - w^{n+1} at cell centres, w = (0, 0, (z+1) averaged plate rate)"""
    ops = staggered_operators(ref)
    b = np.stack([ops.average[i] @ U_prev for i in range(3)])
    _, _, Z = ref.cell_centres()
    rate = traces.centre_values(dteta_avg)[:, :, None]
    b[2] = b[2] - ((Z + 1.0) * rate).ravel()
    return b


def assemble_fsp(inputs: FspInputs, basis: GalerkinBasis, ref: ReferenceGrid, traces: Optional[PlateTraces] = None,
                 j_floor: float = DEFAULT_J_FLOOR, corrupt_convection_sign: bool = False) -> FspSystem:
    """
    Assemble the FSP saddle-point system

    Velocity block: M^n/dt + (M^{n+1} - M^n)/(2 dt) + 2 mu K^{n+1} + C, plus I/dt on beta.
    Constraint: the transformed divergence on the previous geometry.

    Args:
        inputs: FSP data for the step
        basis: Galerkin basis
        ref: reference grid
        traces: plate traces on ref (built when omitted)
        j_floor: Jacobian floor for both geometries
        corrupt_convection_sign: replace the skew pair by its symmetric part (mutation hook)

    Returns:
        FspSystem
    """
    traces = traces or build_traces(basis, ref)
    k = len(inputs.dteta_avg)
    dt = inputs.dt
    P = prolongation(traces, k)

    mass_prev = face_mass(ref, traces, inputs.eta_tilde_prev, j_floor)
    mass_next = face_mass(ref, traces, inputs.eta_tilde_next, j_floor)
    jac_prev = build_jacobian(traces, inputs.eta_tilde_prev, j_floor=j_floor)
    coeffs_next = build_transform(traces, inputs.eta_tilde_next)
    coeffs_prev = build_transform(traces, inputs.eta_tilde_prev)
    cell_weight = ref.cell_volume * jac_prev.cell_weights(ref)

    U_prev = inputs.u_prev.u.flat()
    stiffness = viscous_matrix(ref, coeffs_next, jac_prev)
    transport = transport_field(ref, traces, U_prev, inputs.dteta_avg)
    N = convection_matrix(ref, coeffs_next, cell_weight, transport)
    convection = 0.5 * (N + N.T) if corrupt_convection_sign else 0.5 * (N - N.T)

    full = (mass_prev / dt + 0.5 * (mass_next - mass_prev) / dt + 2.0 * inputs.mu * stiffness + convection).tocsr()
    plate_block = sp.block_diag([sp.csr_matrix((P.shape[1] - k, P.shape[1] - k)), sp.identity(k) / dt])
    A = (P.T @ full @ P + plate_block).tocsr()

    constraint = (ref.cell_volume * divergence_matrix(ref, coeffs_prev)).tocsr()
    Bp = (constraint @ P).tocsr()
    matrix = sp.bmat([[A, Bp.T], [Bp, None]], format='csc')

    rhs_velocity = P.T @ (mass_prev @ U_prev) / dt
    rhs_velocity[-k:] += np.asarray(inputs.dteta_avg) / dt
    rhs = np.concatenate([rhs_velocity, np.zeros(Bp.shape[0])])

    if not (np.all(np.isfinite(matrix.data)) and np.all(np.isfinite(rhs))):
        raise SolverError("FSP assembly produced non-finite entries")

    return FspSystem(
        ref=ref, traces=traces, inputs=inputs, matrix=matrix, rhs=rhs, prolongation=P,
        mass_prev=mass_prev, mass_next=mass_next, stiffness=stiffness, convection=convection.tocsr(),
        constraint=constraint, u_prev_full=U_prev,
    )


class FspSolver:
    """
    Sparse LU of one FSP matrix, reused as the GMRES preconditioner of later steps

    Consecutive FSP matrices differ by the geometry and transport change of one
    step, so the previous factorization keeps the iteration count small. The
    matrix is refactored when the preconditioned iteration misses the tolerance,
    and after an accepted solve that needed more than refactor_iterations.
    """

    def __init__(self, tol: float = DEFAULT_TOL_SOLVER, restart: int = GMRES_RESTART,
                 max_restarts: int = GMRES_MAX_RESTARTS, refactor_iterations: int = GMRES_REFACTOR_ITERATIONS):
        self.tol = tol
        self.restart = restart
        self.max_restarts = max_restarts
        self.refactor_iterations = refactor_iterations
        self.factorizations = 0
        self.iterations = 0
        self._lu = None
        self._shape = None

    def _factor(self, matrix: sp.csc_matrix, what: str):
        try:
            self._lu = splu(matrix, permc_spec=LU_PERMUTATION)
        except RuntimeError as e:
            self._lu = None
            raise SolverError(f"{what} factorization failed: {e}") from e
        self._shape = matrix.shape
        self.factorizations += 1
        logger.debug(f"{what} factorization {self.factorizations}: n={matrix.shape[0]}, nnz={matrix.nnz}, "
                     f"fill={self._lu.L.nnz + self._lu.U.nnz}")

    def _iterate(self, matrix: sp.csc_matrix, rhs: np.ndarray):
        count = [0]

        def _count(_):
            count[0] += 1

        preconditioner = LinearOperator(matrix.shape, matvec=self._lu.solve, dtype=float)
        solution, _ = gmres(matrix, rhs, rtol=GMRES_TOL_FACTOR * self.tol, atol=0.0, restart=self.restart,
                            maxiter=self.max_restarts, M=preconditioner, callback=_count, callback_type='pr_norm')
        self.iterations += count[0]
        return solution, count[0]

    def solve(self, matrix: sp.csc_matrix, rhs: np.ndarray, what: str = 'FSP') -> Tuple[np.ndarray, float]:
        """Solution and its relative residual ||A x - b|| / ||b||"""
        rhs_norm = max(float(np.linalg.norm(rhs)), 1e-300)
        if self._lu is not None and self._shape == matrix.shape:
            solution, iterations = self._iterate(matrix, rhs)
            residual = float(np.linalg.norm(matrix @ solution - rhs)) / rhs_norm
            if np.all(np.isfinite(solution)) and residual <= self.tol:
                if iterations > self.refactor_iterations:
                    logger.debug(f"{what}: {iterations} GMRES iterations; refactoring on the next solve")
                    self._lu = None
                return solution, residual
            logger.debug(f"{what}: reused factorization reached residual {residual:.3e}; refactoring")
        self._factor(matrix, what)
        solution = self._lu.solve(rhs)
        residual = float(np.linalg.norm(matrix @ solution - rhs)) / rhs_norm
        return solution, residual


def solve_fsp(system: FspSystem, tol: float = DEFAULT_TOL_SOLVER, solver: Optional[FspSolver] = None) -> FluidState:
    """Sparse solve (fresh LU, or the run's reusable solver); pressure returned mean-zero with its mean reported"""
    if not np.any(system.rhs):
        logger.debug("FSP right-hand side is zero; returning the zero state")
        return FluidState.zeros(system.ref, system.k)

    solver = solver or FspSolver(tol=tol)
    solution, residual = solver.solve(system.matrix, system.rhs)
    if not np.all(np.isfinite(solution)):
        raise SolverError("FSP solution is not finite")
    if residual > tol:
        raise SolverError("FSP solve missed the residual tolerance", residual=residual)

    ref, k = system.ref, system.k
    n_vel = system.n_velocity
    beta = solution[n_vel - k:n_vel]
    U = expand(ref, system.traces, solution[:n_vel - k], beta)
    multiplier = solution[n_vel:]
    pressure_mean = float(multiplier.mean())
    divergence = system.constraint @ U / ref.cell_volume
    return FluidState(
        u=StaggeredField.from_flat(ref, U),
        p=(multiplier - pressure_mean).reshape(ref.cell_shape),
        beta=beta.copy(),
        pressure_mean=pressure_mean,
        residual=residual,
        divergence_residual=float(np.max(np.abs(divergence))),
    )


@dataclass(frozen=True)
class FspAudit:
    """Terms of the FSP energy inequality at the end of one step"""

    F_next: float
    fluid_kinetic: float
    plate_kinetic: float
    velocity_increment: float
    interface_mismatch: float
    dissipation: float
    lhs: float
    rhs: float
    slack: float
    passed: bool


def fsp_energy_audit(system: FspSystem, out: FluidState, S_next: float, plate_energy_next: float,
                     tol_energy: float = DEFAULT_TOL_ENERGY) -> FspAudit:
    """
    Check F^{n+1} + 1/2 int J^n |du|^2 + 1/2 |v - avg rate|^2 + D <= S^{n+1}(t_{n+1})

    Args:
        system: the assembled step
        out: its solution
        S_next: structure energy at the end of the sub-interval
        plate_energy_next: 1/2 ||Delta eta||^2 + Pi(eta) at t_{n+1}
    """
    inputs = system.inputs
    U = out.u.flat()
    dU = U - system.u_prev_full
    fluid_kinetic = 0.5 * float(U @ (system.mass_next @ U))
    plate_kinetic = 0.5 * float(out.beta @ out.beta)
    velocity_increment = 0.5 * float(dU @ (system.mass_prev @ dU))
    gap = out.beta - np.asarray(inputs.dteta_avg)
    interface_mismatch = 0.5 * float(gap @ gap)
    dissipation = 2.0 * inputs.mu * inputs.dt * float(U @ (system.stiffness @ U))

    F_next = fluid_kinetic + plate_kinetic + plate_energy_next
    lhs = F_next + velocity_increment + interface_mismatch + dissipation
    slack = S_next - lhs
    passed = bool(slack >= -tol_energy * max(1.0, abs(S_next)))
    if not passed:
        logger.warning(f"FSP energy audit failed: slack={slack:.3e}")
    return FspAudit(
        F_next=F_next, fluid_kinetic=fluid_kinetic, plate_kinetic=plate_kinetic,
        velocity_increment=velocity_increment, interface_mismatch=interface_mismatch, dissipation=dissipation,
        lhs=lhs, rhs=S_next, slack=slack, passed=passed,
    )


def time_term_identity(system: FspSystem, U: np.ndarray) -> float:
    """
    |a - b| for the discrete time-term identity

    a = int J^n (u - u^n) . u + 1/2 int (J^{n+1} - J^n) |u|^2
    b = 1/2 (int J^{n+1} |u|^2 + int J^n |u - u^n|^2 - int J^n |u^n|^2)
    """
    U = np.asarray(U, dtype=float)
    U_prev = system.u_prev_full
    Mp, Mn = system.mass_prev, system.mass_next
    dU = U - U_prev
    a = float(dU @ (Mp @ U)) + 0.5 * float(U @ ((Mn - Mp) @ U))
    b = 0.5 * (float(U @ (Mn @ U)) + float(dU @ (Mp @ dU)) - float(U_prev @ (Mp @ U_prev)))
    return abs(a - b)


def dump_system(system: FspSystem, directory: Path, step: int) -> Path:
    """Write the step's matrix and rhs in Matrix-Market format"""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    matrix_path = directory / f"fsp_step_{step:05d}.mtx"
    scipy.io.mmwrite(str(matrix_path), system.matrix, comment=f"FSP step {step}")
    scipy.io.mmwrite(str(directory / f"fsp_step_{step:05d}_rhs.mtx"), system.rhs.reshape(-1, 1))
    return matrix_path


# ---------------------------------------------------------------------------
# Stokes extension of plate velocities (eta = 0 geometry)
# ---------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class LiftResult:
    field: StaggeredField
    psi: np.ndarray           # coefficients actually imposed on the top face
    flux_mismatch: float      # net flux of the requested data before relief
    divergence_residual: float


def top_flux(ref: ReferenceGrid, traces: PlateTraces, psi_coeffs: np.ndarray) -> float:
    """Net discrete flux of (0, 0, psi) through the top face"""
    psi_coeffs = np.asarray(psi_coeffs, dtype=float)
    return ref.hx * ref.hy * float(np.sum(traces.centre[:, :psi_coeffs.size] @ psi_coeffs))


@lru_cache(maxsize=4)
def _stokes_factor(traces: PlateTraces):
    """Factorized bordered Stokes-Brinkman system on the flat box"""
    ref = traces.ref
    coeffs = flat_transform(ref)
    operator = (viscous_matrix(ref, coeffs) + sp.diags(ref.face_volumes())).tocsr()
    interior = interior_indices(ref)
    constraint = (ref.cell_volume * divergence_matrix(ref, coeffs)).tocsr()
    A = operator[interior][:, interior]
    B = constraint[:, interior]
    ones = sp.csr_matrix(np.full((1, ref.n_cells), ref.cell_volume))
    matrix = sp.bmat([[A, B.T, None], [B, None, ones.T], [None, ones, None]], format='csc')
    try:
        lu = splu(matrix, permc_spec=LU_PERMUTATION)
    except RuntimeError as e:
        raise SolverError(f"Stokes extension factorization failed: {e}") from e
    return lu, matrix, operator, constraint, interior


def lift_boundary(basis: GalerkinBasis, ref: ReferenceGrid, psi_coeffs: np.ndarray, relief: bool = True,
                  traces: Optional[PlateTraces] = None, tol: float = DEFAULT_TOL_SOLVER) -> LiftResult:
    """
    Divergence-free staggered field equal to (0, 0, psi) on the plate and zero on the walls

    A nonzero net flux of psi is incompatible with the closed box. The net flux is always
    projected out along w_1 and reported; without relief a flux above tolerance raises
    a CompatibilityError instead.
    """
    traces = traces or build_traces(basis, ref)
    psi = np.asarray(psi_coeffs, dtype=float).copy()
    if psi.size == 0 or not np.any(psi):
        return LiftResult(StaggeredField.zeros(ref), psi, 0.0, 0.0)

    mismatch = top_flux(ref, traces, psi)
    scale = ref.hx * ref.hy * float(np.sum(np.abs(traces.centre[:, :psi.size] @ psi)))
    significant = abs(mismatch) > tol * max(scale, 1.0)
    if significant and not relief:
        raise CompatibilityError("plate velocity has nonzero net flux through the closed box", mismatch=mismatch)
    # linear in psi: applied for every mismatch, however small
    psi[0] -= mismatch / top_flux(ref, traces, np.eye(psi.size)[0])
    if significant:
        logger.info(f"Stokes extension: removed mean flux {mismatch:.3e} along w_1")

    lu, matrix, operator, constraint, interior = _stokes_factor(traces)
    data = np.zeros(ref.n_full)
    data[top_indices(ref)] = traces.centre[:, :psi.size] @ psi
    rhs = np.concatenate([-(operator @ data)[interior], -(constraint @ data), [0.0]])
    solution = lu.solve(rhs)
    residual = float(np.linalg.norm(matrix @ solution - rhs)) / max(float(np.linalg.norm(rhs)), 1e-300)
    if not np.all(np.isfinite(solution)) or residual > tol:
        raise SolverError("Stokes extension missed the residual tolerance", residual=residual)

    U = data.copy()
    U[interior] = solution[:interior.size]
    divergence = float(np.max(np.abs(constraint @ U))) / ref.cell_volume
    return LiftResult(StaggeredField.from_flat(ref, U), psi, mismatch, divergence)
