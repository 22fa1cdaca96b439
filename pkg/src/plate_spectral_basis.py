"""
Clamped-plate spectral basis
Builds the discrete biharmonic eigenbasis on the rectangle and the spectral
Sobolev norms that every step-count constant is measured in.
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from src.config import BASIS_CACHE_VERSION, DENSE_EIG_LIMIT, EIGSH_SEED, EIGSH_TOL, MIN_PLATE_POINTS
from src.exceptions import BasisError, ParameterError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PlateGrid:
    """Uniform grid of interior points on [0, Lx] x [0, Ly]; boundary values are implicit zeros"""

    Lx: float
    Ly: float
    nx: int
    ny: int

    def __post_init__(self):
        if self.nx < MIN_PLATE_POINTS or self.ny < MIN_PLATE_POINTS:
            raise ParameterError(f"plate grid needs nx, ny >= {MIN_PLATE_POINTS}, got {self.nx}x{self.ny}")
        if self.Lx <= 0 or self.Ly <= 0:
            raise ParameterError(f"side lengths must be positive, got Lx={self.Lx}, Ly={self.Ly}")

    @property
    def hx(self) -> float:
        return self.Lx / (self.nx + 1)

    @property
    def hy(self) -> float:
        return self.Ly / (self.ny + 1)

    @property
    def size(self) -> int:
        return self.nx * self.ny

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def cell_area(self) -> float:
        return self.hx * self.hy

    def coordinates(self) -> Tuple[np.ndarray, np.ndarray]:
        """Interior node coordinates as (X, Y) arrays of shape (nx, ny)"""
        x = self.hx * np.arange(1, self.nx + 1)
        y = self.hy * np.arange(1, self.ny + 1)
        return np.meshgrid(x, y, indexing='ij')

    def as_field(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values, dtype=float).reshape(self.shape)

    def padded(self, values: np.ndarray) -> np.ndarray:
        """Field with its zero boundary ring attached, shape (nx+2, ny+2)"""
        return np.pad(self.as_field(values), 1)


def second_difference(n: int, h: float) -> sp.csr_matrix:
    """Three-point second difference on n interior nodes with zero end values"""
    return sp.diags([np.ones(n - 1), -2.0 * np.ones(n), np.ones(n - 1)], [-1, 0, 1], format='csr') / h**2


def central_difference(n: int, h: float) -> sp.csr_matrix:
    """Centered first difference on n interior nodes with zero end values"""
    return sp.diags([-np.ones(n - 1), np.ones(n - 1)], [-1, 1], format='csr') / (2.0 * h)


def midpoint_difference(n: int, h: float) -> sp.csr_matrix:
    """(n+1) x n: differences at the midpoints between consecutive nodes, zero end values"""
    rows = np.concatenate([np.arange(n), np.arange(1, n + 1)])
    cols = np.concatenate([np.arange(n), np.arange(n)])
    vals = np.concatenate([np.ones(n), -np.ones(n)]) / h
    return sp.csr_matrix((vals, (rows, cols)), shape=(n + 1, n))


def midpoint_average(n: int) -> sp.csr_matrix:
    rows = np.concatenate([np.arange(n), np.arange(1, n + 1)])
    cols = np.concatenate([np.arange(n), np.arange(n)])
    return sp.csr_matrix((np.full(2 * n, 0.5), (rows, cols)), shape=(n + 1, n))


def dirichlet_laplacian(grid: PlateGrid) -> sp.csr_matrix:
    """Five-point Laplacian on the interior nodes"""
    Ix = sp.identity(grid.nx, format='csr')
    Iy = sp.identity(grid.ny, format='csr')
    return (sp.kron(second_difference(grid.nx, grid.hx), Iy) + sp.kron(Ix, second_difference(grid.ny, grid.hy))).tocsr()


def dirichlet_lambda1(grid: PlateGrid) -> float:
    """First eigenvalue of the discrete Dirichlet Laplacian (closed form)"""
    return float(
        4.0 / grid.hx**2 * np.sin(np.pi * grid.hx / (2.0 * grid.Lx)) ** 2
        + 4.0 / grid.hy**2 * np.sin(np.pi * grid.hy / (2.0 * grid.Ly)) ** 2
    )


def clamped_laplacian(grid: PlateGrid) -> Tuple[sp.csr_matrix, np.ndarray]:
    """
    Laplacian evaluated on interior nodes and on the non-corner boundary nodes.

    At a boundary node the reflected ghost (w = dw/dn = 0) leaves only the
    normal second difference, 2*w_1/h^2. Boundary rows carry quadrature
    weight hx*hy/4, interior rows hx*hy.

    Returns:
        (operator, weights) with operator of shape (rows, nx*ny)
    """
    nx, ny = grid.nx, grid.ny
    interior = dirichlet_laplacian(grid)

    def _edge(index_pairs, scale):
        rows = np.arange(len(index_pairs))
        cols = np.array([i * ny + j for i, j in index_pairs])
        return sp.csr_matrix((np.full(len(index_pairs), scale), (rows, cols)), shape=(len(index_pairs), grid.size))

    blocks = [
        interior,
        _edge([(0, j) for j in range(ny)], 2.0 / grid.hx**2),
        _edge([(nx - 1, j) for j in range(ny)], 2.0 / grid.hx**2),
        _edge([(i, 0) for i in range(nx)], 2.0 / grid.hy**2),
        _edge([(i, ny - 1) for i in range(nx)], 2.0 / grid.hy**2),
    ]
    operator = sp.vstack(blocks, format='csr')
    weights = np.concatenate([
        np.full(grid.size, grid.cell_area),
        np.full(2 * ny + 2 * nx, 0.25 * grid.cell_area),
    ])
    return operator, weights


def biharmonic_stencil(grid: PlateGrid) -> sp.csr_matrix:
    """The 13-point clamped biharmonic stencil (ghost-reflected end rows)"""
    def _fourth(n, h):
        D2 = second_difference(n, h)
        corner = sp.csr_matrix(([1.0, 1.0], ([0, n - 1], [0, n - 1])), shape=(n, n)) / h**4
        return (D2 @ D2 + corner).tocsr()

    Ix = sp.identity(grid.nx, format='csr')
    Iy = sp.identity(grid.ny, format='csr')
    D2x = second_difference(grid.nx, grid.hx)
    D2y = second_difference(grid.ny, grid.hy)
    return (
        sp.kron(_fourth(grid.nx, grid.hx), Iy)
        + 2.0 * sp.kron(D2x, D2y)
        + sp.kron(Ix, _fourth(grid.ny, grid.hy))
    ).tocsr()


@dataclass(frozen=True, eq=False)
class GalerkinBasis:
    """Discrete clamped-plate eigenpairs (xi_i, w_i), L2-orthonormal under Mq"""

    grid: PlateGrid
    k_max: int
    xi: np.ndarray
    W: np.ndarray
    B: sp.csr_matrix = field(repr=False)
    Mq: sp.dia_matrix = field(repr=False)
    laplacian: sp.csr_matrix = field(repr=False)
    laplacian_weights: np.ndarray = field(repr=False)

    @property
    def k(self) -> int:
        return self.k_max

    def synthesize(self, coeffs: np.ndarray) -> np.ndarray:
        """Grid vector sum_i c_i w_i"""
        coeffs = np.asarray(coeffs, dtype=float)
        return self.W[:, :coeffs.size] @ coeffs

    def inner(self, f: np.ndarray, g: np.ndarray) -> float:
        return float(self.grid.cell_area * np.dot(np.ravel(f), np.ravel(g)))

    def l2_norm(self, f: np.ndarray) -> float:
        return float(np.sqrt(max(self.inner(f, f), 0.0)))

    def laplacian_norm(self, f: np.ndarray) -> float:
        """||Delta_h f||_{L2,h} including the clamped boundary rows"""
        lap = self.laplacian @ np.ravel(f)
        return float(np.sqrt(np.dot(self.laplacian_weights, lap * lap)))


def _assemble_operators(grid: PlateGrid):
    laplacian, weights = clamped_laplacian(grid)
    B = (laplacian.T @ sp.diags(weights) @ laplacian).tocsr()
    Mq = sp.diags(np.full(grid.size, grid.cell_area))
    return B, Mq, laplacian, weights


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Make the largest-magnitude entry of each column positive"""
    pivots = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[pivots, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def _solve_eigenpairs(grid: PlateGrid, stencil: sp.csr_matrix, k_max: int) -> Tuple[np.ndarray, np.ndarray]:
    if grid.size <= DENSE_EIG_LIMIT:
        try:
            xi, vectors = scipy.linalg.eigh(stencil.toarray(), subset_by_index=[0, k_max - 1])
        except np.linalg.LinAlgError as e:
            raise BasisError(f"dense eigensolve failed: {e}", index=1) from e
        return xi, vectors

    rng = np.random.default_rng(EIGSH_SEED)
    v0 = rng.standard_normal(grid.size)
    try:
        xi, vectors = eigsh(stencil.tocsc(), k=k_max, sigma=0.0, which='LM', v0=v0, tol=EIGSH_TOL)
    except ArpackNoConvergence as e:
        converged = len(e.eigenvalues)
        raise BasisError(f"shift-invert iteration did not converge at eigenpair {converged + 1}", index=converged + 1) from e
    order = np.argsort(xi)
    return xi[order], vectors[:, order]


def build_basis(grid: PlateGrid, k_max: int, cache_path: Optional[Path] = None) -> GalerkinBasis:
    """
    Build the clamped-plate Galerkin basis

    Args:
        grid: Plate grid
        k_max: Number of eigenpairs to keep
        cache_path: Optional .npz cache; read on hit, written on miss

    Returns:
        GalerkinBasis with ascending eigenvalues
    """
    if k_max < 1 or k_max > grid.size:
        raise ParameterError(f"k_max must lie in [1, {grid.size}] for a {grid.nx}x{grid.ny} grid, got {k_max}")

    if cache_path is not None:
        cached = load_basis_cache(grid, k_max, cache_path)
        if cached is not None:
            logger.info(f"Basis cache hit: {cache_path}")
            return cached

    B, Mq, laplacian, weights = _assemble_operators(grid)
    stencil = (B / grid.cell_area).tocsr()
    xi, vectors = _solve_eigenpairs(grid, stencil, k_max)

    if not np.all(np.isfinite(xi)) or xi[0] <= 0:
        raise BasisError(f"non-positive or non-finite eigenvalue {xi[0]}", index=1)
    if k_max > 1 and not xi[1] > xi[0] * (1.0 + 1e-12):
        raise BasisError(f"first eigenvalue is not simple: xi_1={xi[0]}, xi_2={xi[1]}", index=2)

    W = _fix_signs(vectors) / np.sqrt(grid.cell_area)
    basis = _freeze(grid, k_max, xi, W, B, Mq, laplacian, weights)
    logger.info(f"Built clamped-plate basis on {grid.nx}x{grid.ny}: xi_1={xi[0]:.6g}, xi_{k_max}={xi[-1]:.6g}")

    if cache_path is not None:
        save_basis_cache(basis, cache_path)
    return basis


def _freeze(grid, k_max, xi, W, B, Mq, laplacian, weights) -> GalerkinBasis:
    xi = np.array(xi, dtype=float)
    W = np.array(W, dtype=float)
    xi.setflags(write=False)
    W.setflags(write=False)
    return GalerkinBasis(grid=grid, k_max=k_max, xi=xi, W=W, B=B, Mq=Mq, laplacian=laplacian, laplacian_weights=weights)


def project(basis: GalerkinBasis, f: np.ndarray) -> np.ndarray:
    """Coefficients ((f, w_1)_h, ..., (f, w_k)_h) of a grid field"""
    f = np.ravel(np.asarray(f, dtype=float))
    if f.size != basis.grid.size:
        raise ParameterError(f"field has {f.size} values, grid has {basis.grid.size}")
    return basis.grid.cell_area * (basis.W.T @ f)


def spectral_sobolev_norm(basis: GalerkinBasis, coeffs: np.ndarray, s: float) -> float:
    """(sum_i xi_i^{s/2} c_i^2)^{1/2} for s in [-2, 2]"""
    if not -2.0 <= s <= 2.0:
        raise ParameterError(f"Sobolev order must lie in [-2, 2], got {s}")
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.size > basis.k_max:
        raise ParameterError(f"{coeffs.size} coefficients exceed k_max={basis.k_max}")
    weights = basis.xi[:coeffs.size] ** (0.5 * s)
    return float(np.sqrt(np.sum(weights * coeffs**2)))


def save_basis_cache(basis: GalerkinBasis, path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    grid = basis.grid
    with open(path, 'wb') as handle:
        np.savez(
            handle,
            format_version=np.array(BASIS_CACHE_VERSION),
            grid=np.array([grid.Lx, grid.Ly, grid.nx, grid.ny], dtype=float),
            k_max=np.array(basis.k_max),
            xi=np.asarray(basis.xi),
            W=np.asarray(basis.W),
        )
    logger.info(f"Basis cache written: {path}")


def load_basis_cache(grid: PlateGrid, k_max: int, path: Path) -> Optional[GalerkinBasis]:
    """Return the cached basis, or None on a missing file or any mismatch"""
    path = Path(path)
    if not path.exists():
        return None
    try:
        with np.load(path) as record:
            if int(record['format_version']) != BASIS_CACHE_VERSION:
                logger.warning(f"Basis cache {path} has format {int(record['format_version'])}, expected {BASIS_CACHE_VERSION}")
                return None
            stored = record['grid']
            if not np.array_equal(stored, np.array([grid.Lx, grid.Ly, grid.nx, grid.ny], dtype=float)):
                return None
            if int(record['k_max']) < k_max:
                return None
            xi = record['xi'][:k_max].copy()
            W = record['W'][:, :k_max].copy()
    except (OSError, KeyError, ValueError) as e:
        logger.warning(f"Ignoring unreadable basis cache {path}: {e}")
        return None

    B, Mq, laplacian, weights = _assemble_operators(grid)
    return _freeze(grid, k_max, xi, W, B, Mq, laplacian, weights)
