"""Tests for the quadratic relaxation stage used before segmentation."""

import math

import numpy as np
import pytest

from meshseg import cube, plane
from meshseg.core import Flap, TriMesh, build_topology
from meshseg.errors import SolverDivergedError
from meshseg.noise import NoiseSpec, add_noise
from meshseg.prefilter import (
    PrefilterParams,
    assemble_system,
    edge_weights,
    prefilter,
    quadratic_energy,
    regularizer,
)


def test_params_validation():
    with pytest.raises(ValueError):
        PrefilterParams(alpha=-1.0)
    with pytest.raises(ValueError):
        PrefilterParams(sigma_w=0.0)
    with pytest.raises(ValueError):
        PrefilterParams(solver_tol=0.0)
    assert PrefilterParams().max_iter_for(100) == math.ceil(10 * math.sqrt(100))


def test_regularizer_hand_expansion():
    """Edge midpoint minus opposite-pair midpoint, expanded by hand."""
    flap = Flap(
        p1=np.array([1.0, 2.0, 3.0]),
        p2=np.array([4.0, 5.0, 6.0]),
        p3=np.array([7.0, 8.0, 10.0]),
        p4=np.array([0.0, -1.0, 2.0]),
        faces=(0, 1),
        vertex_ids=(0, 1, 2, 3),
    )
    # (p1+p3)/2 = (4, 5, 6.5); (p2+p4)/2 = (2, 2, 4).
    np.testing.assert_allclose(regularizer(flap), [2.0, 3.0, 2.5], atol=1e-15)


def test_edge_weights_flat_is_one():
    mesh = plane(3)
    topo = build_topology(mesh)
    w = edge_weights(mesh, topo)
    np.testing.assert_allclose(w[topo.interior_edge_ids], 1.0, atol=1e-12)
    assert (w[topo.boundary_edge_mask] == 0.0).all()


def test_edge_weights_right_angle_value():
    """Across a 90-degree crease ||n_a - n_b||^2 = 2, so the default
    sigma_w = 0.35 gives exp(-2 / 0.245) ~ 2.85e-4."""
    mesh = cube(1)
    topo = build_topology(mesh)
    w = edge_weights(mesh, topo, sigma_w=0.35)
    expected = math.exp(-2.0 / (2.0 * 0.35**2))
    crease = w[w < 0.5]
    assert len(crease)  # the cube has crease edges
    np.testing.assert_allclose(crease, expected, rtol=1e-12)


def test_edge_weights_in_unit_interval():
    mesh = add_noise(cube(3), NoiseSpec(0.4, "normal", seed=2))
    topo = build_topology(mesh)
    w = edge_weights(mesh, topo)
    interior = w[topo.interior_edge_ids]
    assert (interior > 0.0).all()
    assert (interior <= 1.0).all()


def test_zero_alpha_beta_is_identity():
    mesh = add_noise(cube(2), NoiseSpec(0.5, "normal", seed=4))
    out = prefilter(mesh, PrefilterParams(alpha=0.0, beta=0.0))
    np.testing.assert_array_equal(out.vertices, mesh.vertices)


def test_prefilter_descends_frozen_energy():
    params = PrefilterParams()
    for seed in range(4):
        mesh = add_noise(cube(3), NoiseSpec(0.5, "normal", seed=seed))
        out = prefilter(mesh, params)
        e_in = quadratic_energy(mesh, mesh.vertices, params)
        e_out = quadratic_energy(mesh, out.vertices, params)
        assert e_out <= e_in


def test_prefilter_residual_within_tolerance():
    params = PrefilterParams(solver_tol=1e-8)
    mesh = add_noise(cube(3), NoiseSpec(0.5, "normal", seed=8))
    out = prefilter(mesh, params)
    system, _, _, _ = assemble_system(mesh, params)
    for k in range(3):
        rhs = mesh.vertices[:, k]
        residual = np.linalg.norm(rhs - system @ out.vertices[:, k])
        assert residual <= params.solver_tol * np.linalg.norm(rhs)


def test_prefilter_smooths_noise():
    """Relaxation moves a noisy flat sheet toward the plane it came from."""
    truth = plane(8)
    noisy = add_noise(truth, NoiseSpec(0.3, "normal", seed=6))
    out = prefilter(noisy, PrefilterParams(alpha=3.0, beta=3.0, sigma_w=2.0))
    z_before = np.abs(noisy.vertices[:, 2]).mean()
    z_after = np.abs(out.vertices[:, 2]).mean()
    assert z_after < 0.5 * z_before


def test_system_is_symmetric_positive_definite():
    mesh = add_noise(cube(2), NoiseSpec(0.4, "normal", seed=10))
    system, _, _, _ = assemble_system(mesh, PrefilterParams())
    dense = system.toarray()
    np.testing.assert_allclose(dense, dense.T, atol=1e-12)
    eigvals = np.linalg.eigvalsh(dense)
    assert eigvals.min() >= 1.0 - 1e-9  # I plus a PSD smoothing term


def test_solver_iteration_cap_raises():
    mesh = add_noise(cube(3), NoiseSpec(0.5, "normal", seed=1))
    tight = PrefilterParams(alpha=50.0, beta=50.0, solver_tol=1e-14, solver_max_iter=1)
    with pytest.raises(SolverDivergedError):
        prefilter(mesh, tight)


def test_prefilter_preserves_connectivity_and_empty_mesh():
    mesh = cube(1)
    out = prefilter(mesh, PrefilterParams())
    np.testing.assert_array_equal(out.faces, mesh.faces)
    empty = TriMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=int))
    out_empty = prefilter(empty, PrefilterParams())
    assert out_empty.n_vertices == 0
