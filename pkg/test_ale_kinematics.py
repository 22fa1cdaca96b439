"""
Tests for the LE map, the Jacobian and the transformed staggered operators
"""
import numpy as np
import pytest

from src.ale_kinematics import (
    ReferenceGrid, StaggeredField, build_jacobian, build_transform, divergence_matrix, flat_transform,
    geometric_identity_check, jacobian_extrema, le_map, le_velocity, le_velocity_field, raw_gradient,
    sample_staggered, strain_matrices, strain_quadrature, sym_gradient, transformed_divergence, transformed_gradient,
)
from src.exceptions import GeometryError, ParameterError
from src.plate_spectral_basis import PlateGrid

INTERIOR = (slice(1, -1), slice(1, -1), slice(1, -1))


def test_le_map_pins_bottom_and_follows_plate():
    X = np.array([0.3, 0.4])
    eta = np.array([0.1, -0.2])
    _, bottom = le_map(eta, X, -1.0)
    _, top = le_map(eta, X, 0.0)
    np.testing.assert_allclose(bottom, -1.0)
    np.testing.assert_allclose(top, eta)


def test_le_map_is_identity_for_flat_plate():
    z = np.linspace(-1.0, 0.0, 5)
    _, mapped = le_map(0.0, 0.5, z)
    np.testing.assert_allclose(mapped, z)


def test_le_velocity_vanishes_at_bottom():
    w = le_velocity(np.array([2.0]), np.array([0.5]), np.array([-1.0]))
    np.testing.assert_allclose(w, 0.0)
    w = le_velocity(np.array([2.0]), np.array([0.5]), np.array([0.0]))
    np.testing.assert_allclose(w[..., 2], 2.0)


def test_reference_grid_needs_four_layers(grid):
    with pytest.raises(ParameterError):
        ReferenceGrid(plate=grid, nz=3)


def test_reference_grid_aligns_with_plate(ref, grid):
    assert (ref.Nx, ref.Ny, ref.Nz) == (grid.nx + 1, grid.ny + 1, 4)
    assert ref.hx == pytest.approx(grid.hx)
    assert ref.dz == pytest.approx(0.25)


def test_face_volumes_fill_three_boxes(ref):
    assert ref.face_volumes().sum() == pytest.approx(3.0 * ref.plate.Lx * ref.plate.Ly)


def test_from_flat_checks_size(ref):
    with pytest.raises(ParameterError):
        StaggeredField.from_flat(ref, np.zeros(ref.n_full - 1))


def test_flat_transform_matches_raw_operators(ref, rng):
    field = StaggeredField.from_flat(ref, rng.standard_normal(ref.n_full))
    coeffs = flat_transform(ref)
    assert np.array_equal(transformed_gradient(ref, coeffs, field), raw_gradient(ref, field))


def test_zero_coefficients_match_flat_transform(ref, traces, rng):
    field = StaggeredField.from_flat(ref, rng.standard_normal(ref.n_full))
    coeffs = build_transform(traces, np.zeros(4))
    assert np.array_equal(transformed_gradient(ref, coeffs, field), raw_gradient(ref, field))


def test_divergence_free_linear_field(ref):
    field = sample_staggered(ref, lambda x, y, z: (x, y, -2.0 * z))
    div = transformed_divergence(ref, flat_transform(ref), field)
    np.testing.assert_allclose(div, 0.0, atol=1e-12)


def test_rotation_is_divergence_free(ref):
    field = sample_staggered(ref, lambda x, y, z: (-(y - 0.5), x - 0.5, 0.0 * z))
    div = transformed_divergence(ref, flat_transform(ref), field)
    np.testing.assert_allclose(div, 0.0, atol=1e-12)


def test_gradient_of_linear_field_in_interior(ref):
    field = sample_staggered(ref, lambda x, y, z: (x + 2 * y + 3 * z,) * 3)
    G = raw_gradient(ref, field)
    for i in range(3):
        for j, expected in enumerate((1.0, 2.0, 3.0)):
            np.testing.assert_allclose(G[i, j][INTERIOR], expected, rtol=1e-10)


def test_sym_gradient_trace_is_divergence(ref, traces, rng):
    field = StaggeredField.from_flat(ref, rng.standard_normal(ref.n_full))
    coeffs = build_transform(traces, np.array([0.05, 0.02, -0.01, 0.0]))
    E = sym_gradient(ref, coeffs, field)
    np.testing.assert_allclose(E[0, 0] + E[1, 1] + E[2, 2], transformed_divergence(ref, coeffs, field), atol=1e-12)
    np.testing.assert_allclose(E, np.swapaxes(E, 0, 1))


def test_divergence_matrix_matches_field_form(ref, traces, rng):
    values = rng.standard_normal(ref.n_full)
    coeffs = build_transform(traces, np.array([0.05, 0.0, 0.02, 0.0]))
    from_matrix = divergence_matrix(ref, coeffs) @ values
    direct = transformed_divergence(ref, coeffs, StaggeredField.from_flat(ref, values)).ravel()
    np.testing.assert_allclose(from_matrix, direct, atol=1e-10)


def test_transform_third_row_scales_by_jacobian(ref, traces):
    eta = np.array([0.1, 0.0, 0.0, 0.03])
    coeffs = build_transform(traces, eta)
    centre = traces.centre_values(eta)
    np.testing.assert_allclose(coeffs.Abar[2], np.broadcast_to((1.0 / (1.0 + centre))[:, :, None], ref.cell_shape))


def test_geometric_identity_holds_to_rounding(basis, ref, traces):
    residual = geometric_identity_check(basis, ref, np.array([0.3, -0.1, 0.2, 0.05]),
                                        np.array([0.05, 0.02, 0.0, -0.01]), traces=traces)
    assert residual <= 1e-12


def test_le_velocity_field_top_face_carries_plate_velocity(ref, traces):
    dt_eta = np.array([1.0, 0.0, 0.0, 0.0])
    w = le_velocity_field(ref, traces, dt_eta)
    np.testing.assert_allclose(w.u3[:, :, -1], traces.centre_values(dt_eta))
    np.testing.assert_allclose(w.u3[:, :, 0], 0.0)
    assert not np.any(w.u1) and not np.any(w.u2)


def test_jacobian_floor_violation_raises(traces):
    eta = np.array([-50.0, 0.0, 0.0, 0.0])
    with pytest.raises(GeometryError) as info:
        build_jacobian(traces, eta, j_floor=1e-3)
    assert info.value.j_min < 1e-3


def test_jacobian_extrema_for_flat_plate(traces):
    assert jacobian_extrema(traces, np.zeros(4)) == (1.0, 1.0)


def test_jacobian_face_weights_cover_every_face(ref, traces):
    jac = build_jacobian(traces, np.array([0.02, 0.0, 0.0, 0.0]))
    assert jac.face_weights(ref).size == ref.n_full
    assert jac.cell_weights(ref).size == ref.n_cells
    assert jac.j_min > 0.0


def test_vertex_jacobian_is_the_plate_node_values(basis, traces):
    eta = np.array([0.05, -0.02, 0.0, 0.01])
    jac = build_jacobian(traces, eta)
    nodes = basis.grid.padded(np.asarray(basis.W)[:, :4] @ eta)
    np.testing.assert_allclose(jac.J_vertex, 1.0 + nodes, atol=1e-14)
    assert jac.j_min <= jac.J_vertex.min()


def test_transform_rows_on_cells_match_abar(ref, traces):
    coeffs = build_transform(traces, np.array([0.1, 0.02, -0.03, 0.01]))
    for j in range(3):
        np.testing.assert_allclose(coeffs.row(ref, j, 'ccc'), coeffs.Abar[j].ravel(), atol=1e-14)


def test_flat_transform_rows_are_the_identity_row(ref):
    coeffs = flat_transform(ref)
    assert not np.any(coeffs.row(ref, 0, 'fcf'))
    assert not np.any(coeffs.row(ref, 1, 'cff'))
    np.testing.assert_array_equal(coeffs.row(ref, 2, 'fff'), 1.0)


def test_strain_quadrature_integrates_one_over_the_box(ref):
    for location in ('ccc', 'ccf', 'fff', 'fcf', 'cff'):
        assert strain_quadrature(ref, location).sum() == pytest.approx(ref.plate.Lx * ref.plate.Ly)


def test_compact_strain_of_a_vertical_shear(ref):
    # u1 = z + 1 on the interior x-faces gives D13 = 1/2 on the interior xz-edges
    coeffs = flat_transform(ref)
    zero = StaggeredField.zeros(ref)
    _, _, Z = ref.face_coordinates(0)
    u1 = Z + 1.0
    u1[0] = u1[-1] = 0.0
    field = StaggeredField(u1, zero.u2, zero.u3)
    strains = {term.location: S @ field.flat() for term, S in strain_matrices(ref, coeffs)}
    edges = strains['fcf'].reshape(ref.Nx + 1, ref.Ny, ref.Nz + 1)
    np.testing.assert_allclose(edges[1:-1, :, 1:-1], 0.5, atol=1e-12)


def test_geometric_identity_on_rectangle():
    from src.ale_kinematics import build_traces
    from src.plate_spectral_basis import build_basis

    basis = build_basis(PlateGrid(2.0, 1.0, 8, 5), 3)
    ref = ReferenceGrid(plate=basis.grid, nz=5)
    residual = geometric_identity_check(basis, ref, np.array([0.2, 0.1, -0.3]), np.array([0.01, -0.02, 0.0]),
                                        traces=build_traces(basis, ref))
    assert residual <= 1e-12
