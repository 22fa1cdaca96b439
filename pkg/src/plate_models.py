"""
Plate Models Module
Nonlinear elastic forces, their potentials and the assumption constants for
the Kirchhoff, von Karman and Berger plates (plus the zero force).

Every discrete force is the exact gradient of its discrete potential with
respect to the grid values: divergence and bracket terms are applied in
summation-by-parts form.
"""
import logging
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Dict, Optional

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from src.config import (
    C_PI_MARGIN, C_PI_SAMPLES, COERCIVITY_SAMPLES, COERCIVITY_TOL, DEFAULT_KAPPA, DEFAULT_KIRCHHOFF_A,
    DEFAULT_SEED, DEFAULT_TOL_SOLVER, DENSE_EIG_LIMIT, KAPPA_FLOOR, LIPSCHITZ_SAFETY, SLOPE_TEST_RANGE,
)
from src.exceptions import ParameterError, PlateModelError, SamplingError, SolverError
from src.plate_spectral_basis import (
    GalerkinBasis, PlateGrid, central_difference, dirichlet_lambda1, dirichlet_laplacian, midpoint_average,
    midpoint_difference, project, second_difference, spectral_sobolev_norm,
)

logger = logging.getLogger(__name__)

MODEL_KINDS = ('kirchhoff', 'von_karman', 'berger', 'zero')


# ---------------------------------------------------------------------------
# Kirchhoff built-in nonlinearities: f, its primitive Phi, and the lower-bound
# data Phi(s) >= -gamma*s^2/2 - C_phi (C_phi per unit area)
# ---------------------------------------------------------------------------
def _linear(c):
    return (lambda s: c * s, lambda s: 0.5 * c * s * s, max(0.0, -c), 0.0)


def _cubic(c):
    return (lambda s: c * s**3, lambda s: 0.25 * c * s**4, 0.0, 0.0)


def _sine(c):
    # 1 - cos s written as 2 sin^2(s/2) to avoid cancellation near 0
    return (lambda s: c * np.sin(s), lambda s: 2.0 * c * np.sin(0.5 * s) ** 2, 0.0, max(0.0, -2.0 * c))


BUILTIN_NONLINEARITIES = {'linear': _linear, 'cubic': _cubic, 'sine': _sine}


@dataclass(frozen=True)
class PlateOperators:
    """Sparse stencils shared by the plate models on one grid"""

    cell_gx: sp.csr_matrix  # gradient at dual-cell centres (between four nodes)
    cell_gy: sp.csr_matrix
    face_gx: sp.csr_matrix  # forward differences on x-faces
    face_gy: sp.csr_matrix
    dxx: sp.csr_matrix
    dyy: sp.csr_matrix
    dxy: sp.csr_matrix
    laplacian: sp.csr_matrix


@lru_cache(maxsize=8)
def plate_operators(grid: PlateGrid) -> PlateOperators:
    nx, ny, hx, hy = grid.nx, grid.ny, grid.hx, grid.hy
    Ix = sp.identity(nx, format='csr')
    Iy = sp.identity(ny, format='csr')
    return PlateOperators(
        cell_gx=sp.kron(midpoint_difference(nx, hx), midpoint_average(ny), format='csr'),
        cell_gy=sp.kron(midpoint_average(nx), midpoint_difference(ny, hy), format='csr'),
        face_gx=sp.kron(midpoint_difference(nx, hx), Iy, format='csr'),
        face_gy=sp.kron(Ix, midpoint_difference(ny, hy), format='csr'),
        dxx=sp.kron(second_difference(nx, hx), Iy, format='csr'),
        dyy=sp.kron(Ix, second_difference(ny, hy), format='csr'),
        dxy=sp.kron(central_difference(nx, hx), central_difference(ny, hy), format='csr'),
        laplacian=dirichlet_laplacian(grid),
    )


@lru_cache(maxsize=8)
def _biharmonic_factor(basis: GalerkinBasis):
    return splu(basis.B.tocsc())


@dataclass(frozen=True, eq=False)
class PlateModel:
    """Plate force selection with its parameters and derived assumption constants"""

    kind: str
    nu: float = 0.0
    q: float = 2.0
    r: float = 0.0
    mu: float = 0.0
    f_name: str = 'linear'
    f_scale: float = 0.0
    G: float = 0.0
    h: Optional[np.ndarray] = field(default=None, repr=False)
    F0: Optional[np.ndarray] = field(default=None, repr=False)
    kappa: float = DEFAULT_KAPPA
    C_star: float = 0.0
    a: float = 0.0
    eps: float = 1.0
    lambda1: Optional[float] = None
    gamma_prime: Optional[float] = None

    @property
    def label(self) -> str:
        return {'kirchhoff': 'Kirchhoff', 'von_karman': 'VonKarman', 'berger': 'Berger', 'zero': 'Zero'}[self.kind]


@dataclass(frozen=True)
class AiryField:
    v: np.ndarray
    residual: float


# ---------------------------------------------------------------------------
# Von Karman bracket and Airy stress function
# ---------------------------------------------------------------------------
def _second_derivatives(grid: PlateGrid, w: np.ndarray):
    ops = plate_operators(grid)
    return ops.dxx @ w, ops.dyy @ w, ops.dxy @ w


def _check_field(grid: PlateGrid, w: np.ndarray, name: str) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.size != grid.size or (w.ndim == 2 and w.shape != grid.shape):
        raise ParameterError(f"{name} has shape {w.shape}, expected {grid.shape}")
    return w.ravel()


def vk_bracket(grid: PlateGrid, w: np.ndarray, u: np.ndarray) -> np.ndarray:
    """[w,u] = w_xx u_yy + w_yy u_xx - 2 w_xy u_xy by centered differences, shape (nx, ny)"""
    w = _check_field(grid, w, 'w')
    u = _check_field(grid, u, 'u')
    wxx, wyy, wxy = _second_derivatives(grid, w)
    uxx, uyy, uxy = _second_derivatives(grid, u)
    return grid.as_field(wxx * uyy + wyy * uxx - 2.0 * wxy * uxy)


def _bracket_adjoint(grid: PlateGrid, a: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Transpose of delta -> [a, delta] applied to v (the stencils are symmetric)"""
    ops = plate_operators(grid)
    axx, ayy, axy = _second_derivatives(grid, a)
    return ops.dyy @ (axx * v) + ops.dxx @ (ayy * v) - 2.0 * (ops.dxy @ (axy * v))


def airy_solve(basis: GalerkinBasis, eta: np.ndarray, tol: float = DEFAULT_TOL_SOLVER) -> AiryField:
    """
    Solve B v = -Mq [eta, eta] with clamped conditions on v

    Args:
        basis: Galerkin basis (provides B and Mq)
        eta: plate field on the grid
        tol: relative residual tolerance

    Returns:
        AiryField with the flat grid vector v and its relative residual
    """
    grid = basis.grid
    rhs = -grid.cell_area * np.ravel(vk_bracket(grid, eta, eta))
    rhs_norm = np.linalg.norm(rhs)
    if rhs_norm == 0.0:
        return AiryField(v=np.zeros(grid.size), residual=0.0)
    try:
        v = _biharmonic_factor(basis).solve(rhs)
    except RuntimeError as e:
        raise SolverError(f"Airy solve failed: {e}") from e
    residual = float(np.linalg.norm(basis.B @ v - rhs) / rhs_norm)
    if not np.isfinite(residual) or residual > tol:
        raise SolverError("Airy solve missed its tolerance", residual=residual)
    return AiryField(v=v, residual=residual)


# ---------------------------------------------------------------------------
# Force (grid gradient of the potential divided by the quadrature weight)
# ---------------------------------------------------------------------------
def _finite(values, term: str, model: PlateModel):
    if not np.all(np.isfinite(values)):
        raise PlateModelError(f"{model.label} force produced non-finite values", term=term)
    return values


def _cell_gradient(grid: PlateGrid, eta: np.ndarray):
    ops = plate_operators(grid)
    gx = ops.cell_gx @ eta
    gy = ops.cell_gy @ eta
    return gx, gy, np.sqrt(gx * gx + gy * gy)


def _gradient_energy(grid: PlateGrid, eta: np.ndarray) -> float:
    """I(eta) = integral of |grad eta|^2 by face quadrature"""
    ops = plate_operators(grid)
    dx = ops.face_gx @ eta
    dy = ops.face_gy @ eta
    return grid.cell_area * float(np.dot(dx, dx) + np.dot(dy, dy))


def _load(model: PlateModel, grid: PlateGrid) -> np.ndarray:
    return np.zeros(grid.size) if model.h is None else np.ravel(model.h)


def force_field(model: PlateModel, basis: GalerkinBasis, eta: np.ndarray) -> np.ndarray:
    """F(eta) on the grid for a flat grid vector eta"""
    grid = basis.grid
    eta = np.ravel(eta)
    h = _load(model, grid)

    if model.kind == 'zero':
        return np.zeros(grid.size)

    if model.kind == 'kirchhoff':
        ops = plate_operators(grid)
        f, _, _, _ = BUILTIN_NONLINEARITIES[model.f_name](model.f_scale)
        total = _finite(f(eta), 'f(eta)', model) - h
        if model.nu != 0.0:
            gx, gy, mag = _cell_gradient(grid, eta)
            flux_scale = mag ** model.q - model.mu * mag ** model.r
            flux = ops.cell_gx.T @ (flux_scale * gx) + ops.cell_gy.T @ (flux_scale * gy)
            total = total + model.nu * _finite(flux, 'div(|grad eta|^q grad eta - mu |grad eta|^r grad eta)', model)
        return total

    if model.kind == 'berger':
        ops = plate_operators(grid)
        tension = model.nu * _gradient_energy(grid, eta) - model.G
        return _finite(-tension * (ops.laplacian @ eta), '(nu I - G) Delta eta', model) - h

    if model.kind == 'von_karman':
        airy = airy_solve(basis, eta)
        total = -_bracket_adjoint(grid, eta, airy.v)
        if model.F0 is not None:
            F0 = np.ravel(model.F0)
            total = total - 0.5 * (_bracket_adjoint(grid, F0, eta) + np.ravel(vk_bracket(grid, F0, eta)))
        return _finite(total, '[eta, v(eta) + F0]', model) - h

    raise ParameterError(f"unknown plate model {model.kind!r}")


def force(model: PlateModel, basis: GalerkinBasis, eta_coeffs: np.ndarray) -> np.ndarray:
    """Galerkin force vector ((F(eta), w_1)_h, ..., (F(eta), w_k)_h)"""
    if model.kind == 'zero':
        return np.zeros(np.size(eta_coeffs))
    eta = basis.synthesize(eta_coeffs)
    coeffs = project(basis, force_field(model, basis, eta))
    return coeffs[:np.size(eta_coeffs)]


def potential_field(model: PlateModel, basis: GalerkinBasis, eta: np.ndarray) -> float:
    """Pi(eta) by grid quadrature for a flat grid vector eta"""
    grid = basis.grid
    area = grid.cell_area
    eta = np.ravel(eta)
    load_work = area * float(np.dot(eta, _load(model, grid)))

    if model.kind == 'zero':
        return 0.0

    if model.kind == 'kirchhoff':
        _, Phi, _, _ = BUILTIN_NONLINEARITIES[model.f_name](model.f_scale)
        value = area * float(np.sum(Phi(eta)))
        if model.nu != 0.0:
            _, _, mag = _cell_gradient(grid, eta)
            value += model.nu * area * float(
                np.sum(mag ** (model.q + 2)) / (model.q + 2) - model.mu * np.sum(mag ** (model.r + 2)) / (model.r + 2)
            )
        value -= load_work
    elif model.kind == 'berger':
        energy = _gradient_energy(grid, eta)
        value = 0.25 * model.nu * energy**2 - 0.5 * model.G * energy - load_work
    elif model.kind == 'von_karman':
        airy = airy_solve(basis, eta)
        value = 0.25 * float(airy.v @ (basis.B @ airy.v)) - load_work
        if model.F0 is not None:
            value -= 0.5 * area * float(np.dot(eta, np.ravel(vk_bracket(grid, model.F0, eta))))
    else:
        raise ParameterError(f"unknown plate model {model.kind!r}")

    if not np.isfinite(value):
        raise PlateModelError(f"{model.label} potential is not finite", term='potential')
    return value


def potential(model: PlateModel, basis: GalerkinBasis, eta_coeffs: np.ndarray) -> float:
    return potential_field(model, basis, basis.synthesize(eta_coeffs))


# ---------------------------------------------------------------------------
# Model construction with the documented assumption constants
# ---------------------------------------------------------------------------
def _slope_test(model: PlateModel, lambda1: float) -> Optional[str]:
    """Sampled check of liminf f(s)/s > -lambda1^2; returns an error string or None"""
    f, _, _, _ = BUILTIN_NONLINEARITIES[model.f_name](model.f_scale)
    s = np.concatenate([np.linspace(-SLOPE_TEST_RANGE, -0.5 * SLOPE_TEST_RANGE, 501),
                        np.linspace(0.5 * SLOPE_TEST_RANGE, SLOPE_TEST_RANGE, 501)])
    worst = float(np.min(f(s) / s))
    if worst <= -lambda1**2:
        return f"f={model.f_name} with scale {model.f_scale} has slope {worst:.4g} <= -lambda1^2 = {-lambda1**2:.4g}"
    return None


def _require_definite(basis: GalerkinBasis, Q: sp.spmatrix, what: str) -> None:
    if basis.grid.size > DENSE_EIG_LIMIT:
        return
    lowest = scipy.linalg.eigvalsh(Q.toarray(), subset_by_index=[0, 0])[0]
    if lowest <= 0.0:
        raise ParameterError(f"{what}: quadratic part is not coercive (lowest eigenvalue {lowest:.4g}); lower the load or raise kappa")


def _quadratic_floor(basis: GalerkinBasis, Q: sp.spmatrix, b: np.ndarray, what: str) -> float:
    """1/4 b^T Q^{-1} b = -min(eta^T Q eta - b^T eta), for positive definite Q"""
    if not np.any(b):
        return 0.0
    _require_definite(basis, Q, what)
    y = splu(sp.csc_matrix(Q)).solve(b)
    value = 0.25 * float(b @ y)
    if not np.isfinite(value) or value < 0.0:
        raise ParameterError(f"{what}: quadratic part is not coercive")
    return value


def _default_constants(model: PlateModel, basis: GalerkinBasis, kappa: Optional[float] = None):
    """(kappa, C_star, gamma_prime) per model; a given kappa is kept and C_star built for it"""
    grid = basis.grid
    area = grid.cell_area
    Mq = basis.Mq
    b = area * _load(model, grid)

    if model.kind == 'zero':
        return kappa or DEFAULT_KAPPA, 0.0, None

    if model.kind == 'berger':
        kappa = kappa or DEFAULT_KAPPA
        tension_floor = max(model.G, 0.0) ** 2 / (4.0 * model.nu)
        return kappa, tension_floor + _quadratic_floor(basis, kappa * basis.B, b, 'Berger load'), None

    if model.kind == 'von_karman':
        kappa = kappa or DEFAULT_KAPPA
        Q = kappa * basis.B
        if model.F0 is not None and np.any(model.F0):
            ops = plate_operators(grid)
            F0 = np.ravel(model.F0)
            fxx, fyy, fxy = _second_derivatives(grid, F0)
            K = sp.diags(fxx) @ ops.dyy + sp.diags(fyy) @ ops.dxx - 2.0 * sp.diags(fxy) @ ops.dxy
            Q = Q - 0.25 * area * (K + K.T)
            _require_definite(basis, Q.tocsr(), 'von Karman F0')
        return kappa, _quadratic_floor(basis, Q.tocsr(), b, 'von Karman load'), None

    # kirchhoff
    lambda1 = model.lambda1
    _, _, gamma, c_phi = BUILTIN_NONLINEARITIES[model.f_name](model.f_scale)
    if model.gamma_prime is not None:
        gamma_prime = model.gamma_prime
    elif np.any(b):
        gamma_prime = gamma + 0.5 * (lambda1**2 - gamma)
    else:
        gamma_prime = gamma
    if kappa is None:
        kappa = max(gamma_prime / (2.0 * lambda1**2), KAPPA_FLOOR)

    C_phi = c_phi * area * grid.size
    C_grad = 0.0
    if model.nu > 0.0 and model.mu > 0.0:
        t_star = model.mu ** (1.0 / (model.q - model.r))
        per_cell = model.nu * model.mu * t_star ** (model.r + 2) * (1.0 / (model.q + 2) - 1.0 / (model.r + 2))
        C_grad = -per_cell * area * (grid.nx + 1) * (grid.ny + 1)
    Q = (kappa * basis.B - 0.5 * gamma * Mq).tocsr()
    return kappa, C_phi + C_grad + _quadratic_floor(basis, Q, b, 'Kirchhoff load'), gamma_prime


def make_model(kind: str, basis: GalerkinBasis, params: Optional[Dict] = None, h: Optional[np.ndarray] = None,
               F0: Optional[np.ndarray] = None, kappa: Optional[float] = None, C_star: Optional[float] = None,
               a: Optional[float] = None, gamma_prime: Optional[float] = None) -> PlateModel:
    """
    Build a PlateModel and fill in its assumption constants

    Args:
        kind: kirchhoff | von_karman | berger | zero
        basis: Galerkin basis of the plate grid
        params: model parameters (nu, q, r, mu, f, f_scale, G)
        h, F0: grid fields (flat or (nx, ny)); None means zero
        kappa, C_star: override the documented defaults
        a: nonlinearity order (Kirchhoff only; other models use a = 0)
        gamma_prime: Kirchhoff coercivity level gamma' < lambda1^2

    Returns:
        PlateModel with kappa, C_star, a, eps (and lambda1 for Kirchhoff)
    """
    params = dict(params or {})
    if kind not in MODEL_KINDS:
        raise ParameterError(f"plate model must be one of {MODEL_KINDS}, got {kind!r}")
    grid = basis.grid
    h = None if h is None else np.ravel(np.asarray(h, dtype=float))
    F0 = None if F0 is None else np.ravel(np.asarray(F0, dtype=float))

    model = PlateModel(kind=kind, h=h, F0=F0 if kind == 'von_karman' else None)
    if kind == 'kirchhoff':
        a = DEFAULT_KIRCHHOFF_A if a is None else float(a)
        if not 0.0 < a <= 1.0:
            raise ParameterError(f"Kirchhoff order a must lie in (0, 1], got {a}")
        model = replace(
            model,
            nu=float(params.get('nu', 0.0)), q=float(params.get('q', 2.0)), r=float(params.get('r', 0.0)),
            mu=float(params.get('mu', 0.0)), f_name=params.get('f', 'linear'), f_scale=float(params.get('f_scale', 0.0)),
            a=a, eps=0.5 * a, lambda1=dirichlet_lambda1(grid), gamma_prime=gamma_prime,
        )
        if model.nu < 0.0:
            raise ParameterError(f"Kirchhoff nu must be >= 0, got {model.nu}")
        if not model.q > model.r >= 0.0:
            raise ParameterError(f"Kirchhoff exponents need q > r >= 0, got q={model.q}, r={model.r}")
        if model.f_name not in BUILTIN_NONLINEARITIES:
            raise ParameterError(f"Kirchhoff f must be one of {sorted(BUILTIN_NONLINEARITIES)}, got {model.f_name!r}")
        if model.f_name == 'cubic' and model.f_scale < 0.0:
            raise ParameterError("cubic f needs f_scale >= 0")
        slope_error = _slope_test(model, model.lambda1)
        if slope_error:
            raise ParameterError(slope_error)
        if gamma_prime is not None and not gamma_prime < model.lambda1**2:
            raise ParameterError(f"gamma_prime must be < lambda1^2 = {model.lambda1**2:.6g}")
    elif kind == 'berger':
        model = replace(model, nu=float(params.get('nu', 1.0)), G=float(params.get('G', 0.0)))
        if model.nu <= 0.0:
            raise ParameterError(f"Berger nu must be > 0, got {model.nu}")

    if kappa is not None and C_star is not None:
        default_kappa, default_C_star, derived_gamma = float(kappa), float(C_star), gamma_prime
    else:
        default_kappa, default_C_star, derived_gamma = _default_constants(model, basis, kappa=kappa)
    model = replace(
        model,
        kappa=default_kappa if kappa is None else float(kappa),
        C_star=default_C_star if C_star is None else float(C_star),
        gamma_prime=derived_gamma,
    )
    if not 0.0 < model.kappa < 0.5:
        raise ParameterError(f"kappa must lie in (0, 1/2), got {model.kappa}")
    if model.C_star < 0.0:
        raise ParameterError(f"C_star must be >= 0, got {model.C_star}")
    logger.info(f"Plate model {model.label}: kappa={model.kappa:.4g}, C*={model.C_star:.6g}, a={model.a}, eps={model.eps}")
    return model


# ---------------------------------------------------------------------------
# Sampled assumption checks
# ---------------------------------------------------------------------------
def sample_h2_ball(basis: GalerkinBasis, k: int, R: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """n coefficient vectors uniformly distributed in {sum xi_i c_i^2 <= R^2}, shape (n, k)"""
    directions = rng.standard_normal((n, k))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    radii = R * rng.random(n) ** (1.0 / k)
    return directions * radii[:, None] / np.sqrt(basis.xi[:k])[None, :]


def estimate_lipschitz(model: PlateModel, basis: GalerkinBasis, R: float, a: float, n_samples: int,
                       seed: int = DEFAULT_SEED, k: Optional[int] = None) -> float:
    """Sampled C_R: max ||F(e1)-F(e2)||_{H^-a} / ||e1-e2||_{H^2} over the H^2 ball, times the safety factor"""
    if n_samples < 100:
        raise ParameterError(f"estimate_lipschitz needs n_samples >= 100, got {n_samples}")
    if model.kind == 'zero':
        return 0.0
    k = basis.k_max if k is None else k
    rng = np.random.default_rng(seed)
    first = sample_h2_ball(basis, k, R, n_samples, rng)
    second = sample_h2_ball(basis, k, R, n_samples, rng)

    best = 0.0
    usable = 0
    for c1, c2 in zip(first, second):
        gap = spectral_sobolev_norm(basis, c1 - c2, 2.0)
        if gap <= 1e-14 * max(R, 1.0):
            continue
        usable += 1
        diff = force(model, basis, c1) - force(model, basis, c2)
        best = max(best, spectral_sobolev_norm(basis, diff, -a) / gap)
    if usable == 0:
        raise SamplingError("every sampled pair was degenerate")
    return LIPSCHITZ_SAFETY * best


def check_coercivity(model: PlateModel, basis: GalerkinBasis, R: float, n_samples: int = COERCIVITY_SAMPLES,
                     seed: int = DEFAULT_SEED, k: Optional[int] = None) -> Dict:
    """Minimum of kappa ||Delta eta||^2 + Pi(eta) + C* over sampled eta; pass iff >= -1e-12"""
    k = basis.k_max if k is None else k
    rng = np.random.default_rng(seed)
    samples = np.vstack([np.zeros((1, k)), sample_h2_ball(basis, k, R, n_samples - 1, rng)])
    margins = [
        model.kappa * spectral_sobolev_norm(basis, c, 2.0) ** 2 + potential(model, basis, c) + model.C_star
        for c in samples
    ]
    min_margin = float(np.min(margins))
    passed = min_margin >= -COERCIVITY_TOL
    if not passed:
        logger.warning(f"Coercivity FAIL for {model.label}: min margin {min_margin:.3e}")
    return {
        'model': model.label, 'R': float(R), 'seed': int(seed), 'kappa': model.kappa,
        'C_star': model.C_star, 'min_margin': min_margin, 'pass': bool(passed),
    }


def potential_bound(model: PlateModel, basis: GalerkinBasis, eta0_coeffs: np.ndarray,
                    n_samples: int = C_PI_SAMPLES, seed: int = DEFAULT_SEED) -> float:
    """C(Pi, eta0): max Pi over the H^2 ball of radius ||eta0||_{H^2}, plus a 10% margin"""
    eta0_coeffs = np.asarray(eta0_coeffs, dtype=float)
    k = eta0_coeffs.size
    radius = spectral_sobolev_norm(basis, eta0_coeffs, 2.0)
    rng = np.random.default_rng(seed)
    samples = np.vstack([eta0_coeffs[None, :], sample_h2_ball(basis, k, radius, n_samples - 1, rng)])
    best = max(potential(model, basis, c) for c in samples)
    return float(best + C_PI_MARGIN * abs(best))


def assumption_report(model: PlateModel, basis: GalerkinBasis, R: float, C_R: float, seed: int,
                      coercivity: Dict) -> Dict:
    """JSON record of the sampled assumption constants for one model"""
    return {
        'model': model.label, 'R': float(R), 'seed': int(seed), 'C_R': float(C_R), 'label': 'empirical',
        'kappa': model.kappa, 'C_star': model.C_star, 'a': model.a, 'eps': model.eps,
        'min_margin': coercivity['min_margin'], 'pass': coercivity['pass'],
    }
