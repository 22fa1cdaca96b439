"""
ALE Kinematics Module
LE map, Jacobian, LE velocity and the transformed gradient/divergence/strain
operators on the fixed reference box Omega = Gamma x (-1, 0).

Fluid layout (MAC): the plate's interior nodes sit on the cell corners of an
(nx+1) x (ny+1) x nz cell grid, so the side walls coincide with the clamped
plate boundary. u1 lives on x-faces, u2 on y-faces, u3 on z-faces and the
pressure at cell centres. Full staggered vectors include the boundary faces.
Gradient and divergence components are evaluated at cell centres; the
viscous strain uses compact stencils with each component on its own
staggered location.
"""
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import scipy.sparse as sp

from src.config import DEFAULT_J_FLOOR, MIN_FLUID_LAYERS
from src.exceptions import GeometryError, ParameterError
from src.plate_spectral_basis import GalerkinBasis, PlateGrid, central_difference, midpoint_average, midpoint_difference

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ReferenceGrid:
    """Staggered grid on Gamma x (-1, 0) aligned with the plate grid"""

    plate: PlateGrid
    nz: int

    def __post_init__(self):
        if self.nz < MIN_FLUID_LAYERS:
            raise ParameterError(f"nz must be >= {MIN_FLUID_LAYERS}, got {self.nz}")

    @property
    def Nx(self) -> int:
        return self.plate.nx + 1

    @property
    def Ny(self) -> int:
        return self.plate.ny + 1

    @property
    def Nz(self) -> int:
        return self.nz

    @property
    def hx(self) -> float:
        return self.plate.hx

    @property
    def hy(self) -> float:
        return self.plate.hy

    @property
    def dz(self) -> float:
        return 1.0 / self.nz

    @property
    def cell_volume(self) -> float:
        return self.hx * self.hy * self.dz

    @property
    def shapes(self) -> Tuple[Tuple[int, int, int], ...]:
        Nx, Ny, Nz = self.Nx, self.Ny, self.Nz
        return ((Nx + 1, Ny, Nz), (Nx, Ny + 1, Nz), (Nx, Ny, Nz + 1))

    @property
    def cell_shape(self) -> Tuple[int, int, int]:
        return (self.Nx, self.Ny, self.Nz)

    @property
    def n_cells(self) -> int:
        return self.Nx * self.Ny * self.Nz

    @property
    def component_sizes(self) -> Tuple[int, int, int]:
        return tuple(int(np.prod(s)) for s in self.shapes)

    @property
    def n_full(self) -> int:
        return sum(self.component_sizes)

    @property
    def offsets(self) -> Tuple[int, int, int]:
        n1, n2, _ = self.component_sizes
        return (0, n1, n1 + n2)

    def cell_centres(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        x = (np.arange(self.Nx) + 0.5) * self.hx
        y = (np.arange(self.Ny) + 0.5) * self.hy
        z = -1.0 + (np.arange(self.Nz) + 0.5) * self.dz
        return np.meshgrid(x, y, z, indexing='ij')

    def face_coordinates(self, component: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        x_c = (np.arange(self.Nx) + 0.5) * self.hx
        y_c = (np.arange(self.Ny) + 0.5) * self.hy
        z_c = -1.0 + (np.arange(self.Nz) + 0.5) * self.dz
        if component == 0:
            axes = (np.arange(self.Nx + 1) * self.hx, y_c, z_c)
        elif component == 1:
            axes = (x_c, np.arange(self.Ny + 1) * self.hy, z_c)
        else:
            axes = (x_c, y_c, -1.0 + np.arange(self.Nz + 1) * self.dz)
        return np.meshgrid(*axes, indexing='ij')

    def face_volumes(self) -> np.ndarray:
        """Quadrature volume of every face in the full staggered vector (half cells on the boundary)"""
        def _weights(n_faces, h):
            w = np.full(n_faces, h)
            w[0] = w[-1] = 0.5 * h
            return w

        hx, hy, dz = self.hx, self.hy, self.dz
        Nx, Ny, Nz = self.Nx, self.Ny, self.Nz
        v1 = np.einsum('i,j,k->ijk', _weights(Nx + 1, hx), np.full(Ny, hy), np.full(Nz, dz))
        v2 = np.einsum('i,j,k->ijk', np.full(Nx, hx), _weights(Ny + 1, hy), np.full(Nz, dz))
        v3 = np.einsum('i,j,k->ijk', np.full(Nx, hx), np.full(Ny, hy), _weights(Nz + 1, dz))
        return np.concatenate([v1.ravel(), v2.ravel(), v3.ravel()])


@dataclass(frozen=True)
class StaggeredField:
    """Velocity-like field on the staggered grid, boundary faces included"""

    u1: np.ndarray
    u2: np.ndarray
    u3: np.ndarray

    @classmethod
    def zeros(cls, ref: ReferenceGrid) -> 'StaggeredField':
        return cls(*(np.zeros(s) for s in ref.shapes))

    @classmethod
    def from_flat(cls, ref: ReferenceGrid, values: np.ndarray) -> 'StaggeredField':
        values = np.asarray(values, dtype=float)
        if values.size != ref.n_full:
            raise ParameterError(f"staggered vector has {values.size} entries, grid needs {ref.n_full}")
        parts = np.split(values, np.cumsum(ref.component_sizes)[:-1])
        return cls(*(p.reshape(s) for p, s in zip(parts, ref.shapes)))

    def flat(self) -> np.ndarray:
        return np.concatenate([self.u1.ravel(), self.u2.ravel(), self.u3.ravel()])

    def components(self) -> List[np.ndarray]:
        return [self.u1, self.u2, self.u3]


def sample_staggered(ref: ReferenceGrid, func: Callable) -> StaggeredField:
    """Sample func(x, y, z) -> (f1, f2, f3) at the face locations of each component"""
    parts = []
    for component in range(3):
        X, Y, Z = ref.face_coordinates(component)
        parts.append(np.broadcast_to(np.asarray(func(X, Y, Z)[component], dtype=float), X.shape).copy())
    return StaggeredField(*parts)


# ---------------------------------------------------------------------------
# LE map and velocity
# ---------------------------------------------------------------------------
def le_map(eta, X, z):
    """(X, (z+1) eta(X) + z); eta given by its values at X"""
    eta = np.asarray(eta, dtype=float)
    z = np.asarray(z, dtype=float)
    return X, (z + 1.0) * eta + z


def le_velocity(dt_eta, X, z) -> np.ndarray:
    """(0, 0, (z+1) dt_eta(X)) stacked on a trailing axis of length 3"""
    dt_eta = np.asarray(dt_eta, dtype=float)
    z = np.asarray(z, dtype=float)
    w3 = (z + 1.0) * dt_eta
    zero = np.zeros_like(w3)
    return np.stack([zero, zero, w3], axis=-1)


# ---------------------------------------------------------------------------
# Plate-to-fluid traces
# ---------------------------------------------------------------------------
def _embed(n: int) -> sp.csr_matrix:
    """(n+2) x n: interior values plus zero boundary rows"""
    return sp.csr_matrix((np.ones(n), (np.arange(1, n + 1), np.arange(n))), shape=(n + 2, n))


# plate-level location -> (x position, y position); 'c' = cell centre, 'f' = node / wall line
SURFACE_LOCATIONS = {'centre': ('c', 'c'), 'xface': ('f', 'c'), 'yface': ('c', 'f'), 'vertex': ('f', 'f')}


def surface_shape(ref: ReferenceGrid, location: str) -> Tuple[int, int]:
    px, py = SURFACE_LOCATIONS[location]
    return (ref.Nx + (px == 'f'), ref.Ny + (py == 'f'))


@dataclass(frozen=True, eq=False)
class PlateTraces:
    """Basis functions and their derivatives evaluated at the fluid's plate-level locations"""

    ref: ReferenceGrid
    centre: np.ndarray   # (Nx*Ny, k) bilinear value at cell centres; also the top-face evaluation matrix
    xface: np.ndarray    # ((Nx+1)*Ny, k)
    yface: np.ndarray    # (Nx*(Ny+1), k)
    dx_centre: np.ndarray
    dy_centre: np.ndarray
    surface: Dict[str, Tuple[np.ndarray, np.ndarray, np.ndarray]]  # location -> (value, d_x, d_y)

    def centre_values(self, coeffs: np.ndarray) -> np.ndarray:
        return (self.centre[:, :len(coeffs)] @ coeffs).reshape(self.ref.Nx, self.ref.Ny)

    def values(self, location: str, coeffs: np.ndarray, derivative: int = 0) -> np.ndarray:
        """eta (derivative 0), eta_x (1) or eta_y (2) on the given plate-level location"""
        matrix = self.surface[location][derivative]
        return (matrix[:, :len(coeffs)] @ coeffs).reshape(surface_shape(self.ref, location))


def build_traces(basis: GalerkinBasis, ref: ReferenceGrid) -> PlateTraces:
    """Differentiate the Galerkin expansion once per basis function at the fluid locations"""
    if ref.plate != basis.grid:
        raise ParameterError("reference grid and basis use different plate grids")
    grid = basis.grid
    W = np.asarray(basis.W)

    def _axis(n, h):
        # value and slope at the cell centres and at the nodes; the clamped edge has zero slope
        return {'c': (midpoint_average(n), midpoint_difference(n, h)),
                'f': (_embed(n), (_embed(n) @ central_difference(n, h)).tocsr())}

    axis_x, axis_y = _axis(grid.nx, grid.hx), _axis(grid.ny, grid.hy)
    surface = {}
    for location, (px, py) in SURFACE_LOCATIONS.items():
        (vx, dx), (vy, dy) = axis_x[px], axis_y[py]
        surface[location] = tuple(sp.kron(a, b, format='csr') @ W for a, b in ((vx, vy), (dx, vy), (vx, dy)))
    centre, dx_centre, dy_centre = surface['centre']
    return PlateTraces(
        ref=ref, centre=centre, xface=surface['xface'][0], yface=surface['yface'][0],
        dx_centre=dx_centre, dy_centre=dy_centre, surface=surface,
    )


@dataclass(frozen=True, eq=False)
class JacobianField:
    """J = 1 + eta at cell centres, x/y face columns and vertical edges; constant in z"""

    J: np.ndarray         # (Nx, Ny) cell-centred
    J_xface: np.ndarray   # (Nx+1, Ny)
    J_yface: np.ndarray   # (Nx, Ny+1)
    J_vertex: np.ndarray  # (Nx+1, Ny+1), the plate nodes plus the clamped ring
    eta_ref: np.ndarray
    j_min: float
    j_max: float

    def at(self, location: str) -> np.ndarray:
        return {'centre': self.J, 'xface': self.J_xface, 'yface': self.J_yface, 'vertex': self.J_vertex}[location]

    def face_weights(self, ref: ReferenceGrid) -> np.ndarray:
        """J at every face of the full staggered vector"""
        Nz = ref.Nz
        return np.concatenate([
            np.repeat(self.J_xface[:, :, None], Nz, axis=2).ravel(),
            np.repeat(self.J_yface[:, :, None], Nz, axis=2).ravel(),
            np.repeat(self.J[:, :, None], Nz + 1, axis=2).ravel(),
        ])

    def cell_weights(self, ref: ReferenceGrid) -> np.ndarray:
        return np.repeat(self.J[:, :, None], ref.Nz, axis=2).ravel()


def jacobian_extrema(traces: PlateTraces, eta_coeffs: np.ndarray) -> Tuple[float, float]:
    """(min J, max J) over every fluid location without enforcing the floor"""
    k = len(eta_coeffs)
    values = np.concatenate([traces.surface[location][0][:, :k] @ eta_coeffs for location in SURFACE_LOCATIONS])
    return float(1.0 + values.min()), float(1.0 + values.max())


def build_jacobian(traces: PlateTraces, eta_coeffs: np.ndarray, j_floor: float = DEFAULT_J_FLOOR) -> JacobianField:
    """Construct J = 1 + eta; refuses min J <= j_floor"""
    eta_coeffs = np.asarray(eta_coeffs, dtype=float)
    J = {location: 1.0 + traces.values(location, eta_coeffs) for location in SURFACE_LOCATIONS}
    j_min = float(min(values.min() for values in J.values()))
    j_max = float(max(values.max() for values in J.values()))
    if not j_min > j_floor:
        raise GeometryError(f"Jacobian floor {j_floor} violated", j_min=j_min)
    return JacobianField(J=J['centre'], J_xface=J['xface'], J_yface=J['yface'], J_vertex=J['vertex'],
                         eta_ref=eta_coeffs.copy(), j_min=j_min, j_max=j_max)


@dataclass(frozen=True, eq=False)
class TransformCoeffs:
    """Third row of (grad A_eta)^{-1}, Abar = (-(z+1) eta_x, -(z+1) eta_y, 1) / (1 + eta)"""

    Abar: np.ndarray      # (3, Nx, Ny, Nz) at cell centres
    grad_eta: np.ndarray  # (2, Nx, Ny)
    eta_ref: np.ndarray
    surface: Dict[str, np.ndarray]  # location -> (eta_x / J, eta_y / J, 1 / J), shape (3, *surface_shape)

    def row(self, ref: ReferenceGrid, j: int, location: str) -> np.ndarray:
        """Abar_j on a staggered location such as 'fcf' (x, y, z positions), flattened"""
        slope_x, slope_y, inv_J = self.surface[_surface_name(location)]
        height = _axis_offsets(ref.Nz, ref.dz, location[2])  # z + 1
        if j == 2:
            values = np.repeat(inv_J[:, :, None], height.size, axis=2)
        else:
            values = -height[None, None, :] * (slope_x if j == 0 else slope_y)[:, :, None]
        return values.ravel()


def build_transform(traces: PlateTraces, eta_coeffs: np.ndarray) -> TransformCoeffs:
    ref = traces.ref
    eta_coeffs = np.asarray(eta_coeffs, dtype=float)
    surface = {}
    for location in SURFACE_LOCATIONS:
        inv_J = 1.0 / (1.0 + traces.values(location, eta_coeffs))
        surface[location] = np.stack([
            traces.values(location, eta_coeffs, 1) * inv_J, traces.values(location, eta_coeffs, 2) * inv_J, inv_J,
        ])
    slope_x, slope_y, inv_J = surface['centre']
    _, _, Z = ref.cell_centres()
    Abar = np.stack([
        -(Z + 1.0) * slope_x[:, :, None],
        -(Z + 1.0) * slope_y[:, :, None],
        np.broadcast_to(inv_J[:, :, None], Z.shape),
    ])
    if not all(np.all(np.isfinite(values)) for values in surface.values()):
        raise GeometryError("transform coefficients are not finite",
                            j_min=float(1.0 + traces.values('centre', eta_coeffs).min()))
    grad_eta = np.stack([traces.values('centre', eta_coeffs, 1), traces.values('centre', eta_coeffs, 2)])
    return TransformCoeffs(Abar=Abar, grad_eta=grad_eta, eta_ref=eta_coeffs.copy(), surface=surface)


def flat_transform(ref: ReferenceGrid) -> TransformCoeffs:
    """Abar for eta = 0"""
    shape = ref.cell_shape
    Abar = np.stack([np.zeros(shape), np.zeros(shape), np.ones(shape)])
    surface = {}
    for location in SURFACE_LOCATIONS:
        nx, ny = surface_shape(ref, location)
        surface[location] = np.stack([np.zeros((nx, ny)), np.zeros((nx, ny)), np.ones((nx, ny))])
    return TransformCoeffs(Abar=Abar, grad_eta=np.zeros((2, ref.Nx, ref.Ny)), eta_ref=np.zeros(0), surface=surface)


# ---------------------------------------------------------------------------
# Staggered difference stencils (full vector -> cell centres)
# ---------------------------------------------------------------------------
def _face_to_cell_difference(n: int, h: float) -> sp.csr_matrix:
    return sp.diags([-np.ones(n), np.ones(n)], [0, 1], shape=(n, n + 1), format='csr') / h


def _face_to_cell_average(n: int) -> sp.csr_matrix:
    return sp.diags([np.full(n, 0.5), np.full(n, 0.5)], [0, 1], shape=(n, n + 1), format='csr')


def _cell_centred_difference(n: int, h: float) -> sp.csr_matrix:
    """(c[i+1] - c[i-1]) / 2h with odd reflection through the walls (zero wall value)"""
    D = sp.diags([-np.ones(n - 1), np.ones(n - 1)], [-1, 1], shape=(n, n), format='lil')
    D[0, 0] = 1.0
    D[n - 1, n - 1] = -1.0
    return (D.tocsr() / (2.0 * h)).tocsr()


@dataclass(frozen=True, eq=False)
class StaggeredOperators:
    """derivative[i][j]: d/dx_j of component i at cell centres; average[i]: component i at cell centres"""

    derivative: Tuple[Tuple[sp.csr_matrix, ...], ...]
    average: Tuple[sp.csr_matrix, ...]


def _kron3(a, b, c) -> sp.csr_matrix:
    return sp.kron(a, sp.kron(b, c), format='csr')


def _lift(ref: ReferenceGrid, op: sp.spmatrix, component: int) -> sp.csr_matrix:
    """Extend a component-local operator to the full staggered vector"""
    size = ref.component_sizes[component]
    select = sp.csr_matrix((np.ones(size), (np.arange(size), ref.offsets[component] + np.arange(size))),
                           shape=(size, ref.n_full))
    return (op @ select).tocsr()


@lru_cache(maxsize=8)
def staggered_operators(ref: ReferenceGrid) -> StaggeredOperators:
    Nx, Ny, Nz = ref.Nx, ref.Ny, ref.Nz
    hx, hy, dz = ref.hx, ref.hy, ref.dz
    I = sp.identity
    Dfc = _face_to_cell_difference
    Afc = _face_to_cell_average
    Dcc = _cell_centred_difference

    local = (
        (_kron3(Dfc(Nx, hx), I(Ny), I(Nz)), _kron3(Afc(Nx), Dcc(Ny, hy), I(Nz)), _kron3(Afc(Nx), I(Ny), Dcc(Nz, dz))),
        (_kron3(Dcc(Nx, hx), Afc(Ny), I(Nz)), _kron3(I(Nx), Dfc(Ny, hy), I(Nz)), _kron3(I(Nx), Afc(Ny), Dcc(Nz, dz))),
        (_kron3(Dcc(Nx, hx), I(Ny), Afc(Nz)), _kron3(I(Nx), Dcc(Ny, hy), Afc(Nz)), _kron3(I(Nx), I(Ny), Dfc(Nz, dz))),
    )
    averages = (_kron3(Afc(Nx), I(Ny), I(Nz)), _kron3(I(Nx), Afc(Ny), I(Nz)), _kron3(I(Nx), I(Ny), Afc(Nz)))

    derivative = tuple(tuple(_lift(ref, local[i][j], i) for j in range(3)) for i in range(3))
    average = tuple(_lift(ref, averages[i], i) for i in range(3))
    return StaggeredOperators(derivative=derivative, average=average)


def raw_gradient(ref: ReferenceGrid, f: StaggeredField) -> np.ndarray:
    """Untransformed discrete gradient, shape (3, 3, Nx, Ny, Nz) with [i, j] = d_j f_i"""
    ops = staggered_operators(ref)
    values = f.flat()
    return np.stack([
        np.stack([(ops.derivative[i][j] @ values).reshape(ref.cell_shape) for j in range(3)])
        for i in range(3)
    ])


def transformed_gradient(ref: ReferenceGrid, coeffs: TransformCoeffs, f: StaggeredField) -> np.ndarray:
    """grad_h f (grad A)^{-1}: columns 1, 2 gain Abar_j d_z f, column 3 is Abar_3 d_z f"""
    raw = raw_gradient(ref, f)
    Abar = coeffs.Abar
    out = np.empty_like(raw)
    for i in range(3):
        out[i, 0] = raw[i, 0] + Abar[0] * raw[i, 2]
        out[i, 1] = raw[i, 1] + Abar[1] * raw[i, 2]
        out[i, 2] = Abar[2] * raw[i, 2]
    return out


def transformed_divergence(ref: ReferenceGrid, coeffs: TransformCoeffs, f: StaggeredField) -> np.ndarray:
    G = transformed_gradient(ref, coeffs, f)
    return G[0, 0] + G[1, 1] + G[2, 2]


def sym_gradient(ref: ReferenceGrid, coeffs: TransformCoeffs, f: StaggeredField) -> np.ndarray:
    G = transformed_gradient(ref, coeffs, f)
    return 0.5 * (G + np.swapaxes(G, 0, 1))


def gradient_matrices(ref: ReferenceGrid, coeffs: TransformCoeffs) -> List[List[sp.csr_matrix]]:
    """Sparse form of transformed_gradient: G[i][j] maps the full staggered vector to cell centres"""
    ops = staggered_operators(ref)
    A = [sp.diags(coeffs.Abar[j].ravel()) for j in range(3)]
    G = []
    for i in range(3):
        dz_i = ops.derivative[i][2]
        G.append([
            (ops.derivative[i][0] + A[0] @ dz_i).tocsr(),
            (ops.derivative[i][1] + A[1] @ dz_i).tocsr(),
            (A[2] @ dz_i).tocsr(),
        ])
    return G


def divergence_matrix(ref: ReferenceGrid, coeffs: TransformCoeffs) -> sp.csr_matrix:
    G = gradient_matrices(ref, coeffs)
    return (G[0][0] + G[1][1] + G[2][2]).tocsr()


# ---------------------------------------------------------------------------
# Compact strain stencils for the viscous form
# ---------------------------------------------------------------------------
# A staggered location is three of 'c' (cell centre) / 'f' (face or wall line) for
# x, y and z: D11 and D22 sit on z-faces, D33 at cell centres, D12 on vertices,
# D13 and D23 on the vertical-horizontal edges.
_SURFACE_NAMES = {('c', 'c'): 'centre', ('f', 'c'): 'xface', ('c', 'f'): 'yface', ('f', 'f'): 'vertex'}


def _surface_name(location: str) -> str:
    return _SURFACE_NAMES[(location[0], location[1])]


def _axis_offsets(n: int, h: float, kind: str) -> np.ndarray:
    """Distance from the low wall of the cell centres ('c') or of the faces ('f')"""
    return (np.arange(n) + 0.5) * h if kind == 'c' else np.arange(n + 1) * h


def _axis_weights(n: int, h: float, kind: str) -> np.ndarray:
    if kind == 'c':
        return np.full(n, h)
    w = np.full(n + 1, h)
    w[0] = w[-1] = 0.5 * h
    return w


def _cell_to_face_difference(n: int, h: float) -> sp.csr_matrix:
    """(n+1) x n difference onto the faces, zero wall value by odd reflection"""
    D = sp.diags([np.ones(n), -np.ones(n)], [0, -1], shape=(n + 1, n), format='lil')
    D[0, 0] = 2.0
    D[n, n - 1] = -2.0
    return (D.tocsr() / h).tocsr()


def _cell_to_face_average(n: int, wall: float = 0.0) -> sp.csr_matrix:
    """(n+1) x n average onto the faces; a wall row is wall * the adjacent cell (0 odd, 1 even reflection)"""
    A = sp.diags([np.full(n, 0.5), np.full(n, 0.5)], [0, -1], shape=(n + 1, n), format='lil')
    A[0, 0] = wall
    A[n, n - 1] = wall
    A = A.tocsr()
    A.eliminate_zeros()
    return A


@dataclass(frozen=True, eq=False)
class StrainTerm:
    """scale * (base + sum_j diag(Abar_j) part_j) evaluated at one staggered location"""

    location: str
    scale: float
    multiplicity: float  # 2 for an off-diagonal component, which appears twice in D:D
    base: sp.csr_matrix
    parts: Tuple[Tuple[int, sp.csr_matrix], ...]


@lru_cache(maxsize=8)
def strain_stencils(ref: ReferenceGrid) -> Tuple[StrainTerm, ...]:
    """Geometry-free pieces of D11, D22, D33, D12, D13, D23; every difference spans neighbouring unknowns only"""
    Nx, Ny, Nz = ref.Nx, ref.Ny, ref.Nz
    hx, hy, dz = ref.hx, ref.hy, ref.dz
    I = sp.identity
    Dfc = _face_to_cell_difference
    Afc = _face_to_cell_average
    Dcf = _cell_to_face_difference
    Acf = _cell_to_face_average
    # d_z u3 at cell centres carried back onto the z-faces
    dz_u3 = (_cell_to_face_average(Nz, wall=1.0) @ Dfc(Nz, dz)).tocsr()

    def lift(op, component):
        return _lift(ref, op, component)

    return (
        StrainTerm('ccf', 1.0, 1.0, lift(_kron3(Dfc(Nx, hx), I(Ny), Acf(Nz)), 0),
                   ((0, lift(_kron3(Afc(Nx), I(Ny), Dcf(Nz, dz)), 0)),)),
        StrainTerm('ccf', 1.0, 1.0, lift(_kron3(I(Nx), Dfc(Ny, hy), Acf(Nz)), 1),
                   ((1, lift(_kron3(I(Nx), Afc(Ny), Dcf(Nz, dz)), 1)),)),
        StrainTerm('ccc', 1.0, 1.0, sp.csr_matrix((ref.n_cells, ref.n_full)),
                   ((2, lift(_kron3(I(Nx), I(Ny), Dfc(Nz, dz)), 2)),)),
        StrainTerm('fff', 0.5, 2.0,
                   lift(_kron3(I(Nx + 1), Dcf(Ny, hy), Acf(Nz)), 0) + lift(_kron3(Dcf(Nx, hx), I(Ny + 1), Acf(Nz)), 1),
                   ((1, lift(_kron3(I(Nx + 1), Acf(Ny), Dcf(Nz, dz)), 0)),
                    (0, lift(_kron3(Acf(Nx), I(Ny + 1), Dcf(Nz, dz)), 1)))),
        StrainTerm('fcf', 0.5, 2.0, lift(_kron3(Dcf(Nx, hx), I(Ny), I(Nz + 1)), 2),
                   ((2, lift(_kron3(I(Nx + 1), I(Ny), Dcf(Nz, dz)), 0)),
                    (0, lift(_kron3(Acf(Nx), I(Ny), dz_u3), 2)))),
        StrainTerm('cff', 0.5, 2.0, lift(_kron3(I(Nx), Dcf(Ny, hy), I(Nz + 1)), 2),
                   ((2, lift(_kron3(I(Nx), I(Ny + 1), Dcf(Nz, dz)), 1)),
                    (1, lift(_kron3(I(Nx), Acf(Ny), dz_u3), 2)))),
    )


def strain_matrices(ref: ReferenceGrid, coeffs: TransformCoeffs) -> List[Tuple[StrainTerm, sp.csr_matrix]]:
    """Each strain component of D^eta(u) as a sparse map from the full staggered vector to its location"""
    out = []
    for term in strain_stencils(ref):
        S = term.base
        for j, part in term.parts:
            S = S + sp.diags(coeffs.row(ref, j, term.location)) @ part
        out.append((term, (term.scale * S).tocsr()))
    return out


def strain_quadrature(ref: ReferenceGrid, location: str, jac: Optional[JacobianField] = None) -> np.ndarray:
    """Product trapezoid weights at a staggered location, times J when given"""
    wx = _axis_weights(ref.Nx, ref.hx, location[0])
    wy = _axis_weights(ref.Ny, ref.hy, location[1])
    wz = _axis_weights(ref.Nz, ref.dz, location[2])
    w = np.einsum('i,j,k->ijk', wx, wy, wz)
    if jac is not None:
        w = w * jac.at(_surface_name(location))[:, :, None]
    return w.ravel()


def le_velocity_field(ref: ReferenceGrid, traces: PlateTraces, dt_eta_coeffs: np.ndarray) -> StaggeredField:
    """w = (0, 0, (z+1) dt_eta) sampled on the staggered grid"""
    field = StaggeredField.zeros(ref)
    dt_eta = traces.centre_values(np.asarray(dt_eta_coeffs, dtype=float))
    X, _, Z = ref.face_coordinates(2)
    w = le_velocity(dt_eta[:, :, None], X, Z)
    return StaggeredField(field.u1, field.u2, np.ascontiguousarray(w[..., 2]))


def geometric_identity_check(basis: GalerkinBasis, ref: ReferenceGrid, eta_t: np.ndarray, eta: np.ndarray,
                             traces: PlateTraces = None) -> float:
    """
    max over cells of |d_t eta - J (div^eta w^eta)_h|

    Args:
        basis: Galerkin basis
        ref: reference grid
        eta_t, eta: coefficient vectors of d_t eta and eta

    Returns:
        residual (the identity d_t J = J div^eta w^eta measured on the grid)
    """
    traces = traces or build_traces(basis, ref)
    eta_t = np.asarray(eta_t, dtype=float)
    eta = np.asarray(eta, dtype=float)
    jac = build_jacobian(traces, eta, j_floor=0.0)
    coeffs = build_transform(traces, eta)
    w = le_velocity_field(ref, traces, eta_t)
    div = transformed_divergence(ref, coeffs, w)
    dt_eta = traces.centre_values(eta_t)[:, :, None]
    return float(np.max(np.abs(dt_eta - jac.J[:, :, None] * div))) if eta_t.size else 0.0
