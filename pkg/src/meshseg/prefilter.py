"""Quadratic vertex prefilter used to stabilize segmentation of noisy input.

Minimizes, over new positions ``q``,

    sum_v ||q_v - p_v||^2
      + alpha * sum_e w(e) ||D_e q||^2
      + beta  * sum_e w(e) ||R_e q||^2

where ``D_e`` applies the differential edge operator with coefficients
frozen at the input geometry, ``R_e q = (q1 + q3)/2 - (q2 + q4)/2`` is a
flap smoothness term, and ``w(e)`` is a normal-difference Gaussian that
turns the regularization down across sharp creases. Freezing the
coefficients makes the problem a symmetric positive-definite linear
system (identity plus PSD terms), solved per coordinate by conjugate
gradients started at the input positions — so the objective can only
move downhill from the input even if CG stops early.

Only the segmentation stage consumes the prefiltered positions;
denoising proper always restarts from the original noisy mesh.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import cg

from .core import Flap, FaceGeometry, TopologyCache, TriMesh, build_topology, face_geometry
from .errors import SolverDivergedError


@dataclass(frozen=True)
class PrefilterParams:
    alpha: float = 0.1
    beta: float = 0.1
    sigma_w: float = 0.35
    solver_tol: float = 1e-8
    solver_max_iter: int | None = None  # default: ceil(10 * sqrt(V))

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be >= 0")
        if self.sigma_w <= 0:
            raise ValueError("sigma_w must be > 0")
        if self.solver_tol <= 0:
            raise ValueError("solver_tol must be > 0")
        if self.solver_max_iter is not None and self.solver_max_iter < 1:
            raise ValueError("solver_max_iter must be >= 1")

    def max_iter_for(self, n_vertices: int) -> int:
        if self.solver_max_iter is not None:
            return self.solver_max_iter
        return max(1, math.ceil(10.0 * math.sqrt(max(n_vertices, 1))))


def edge_weights(
    mesh: TriMesh,
    topo: TopologyCache,
    geometry: FaceGeometry | None = None,
    sigma_w: float = 0.35,
) -> np.ndarray:
    """Per-edge weights exp(-||n_a - n_b||^2 / (2 sigma_w^2)), shape (E,).

    Interior entries lie in (0, 1]; boundary edges get 0.0, which simply
    drops them from both energy sums.
    """
    if geometry is None:
        geometry = face_geometry(mesh)
    weights = np.zeros(topo.n_edges, dtype=np.float64)
    interior = topo.interior_edge_ids
    if interior.size:
        n_a = geometry.normals[topo.edge_faces[interior, 0]]
        n_b = geometry.normals[topo.edge_faces[interior, 1]]
        diff2 = np.einsum("ij,ij->i", n_a - n_b, n_a - n_b)
        weights[interior] = np.exp(-diff2 / (2.0 * sigma_w * sigma_w))
    return weights


def regularizer(flap: Flap) -> np.ndarray:
    """R(e) = midpoint of the edge minus midpoint of the opposite pair."""
    return 0.5 * (flap.p1 + flap.p3) - 0.5 * (flap.p2 + flap.p4)


def _flap_vertex_table(mesh: TriMesh, topo: TopologyCache):
    """(n_interior, 4) vertex ids per interior flap, columns p1, p2, p3, p4."""
    interior = topo.interior_edge_ids
    edges = topo.edges[interior]
    face_sum = mesh.faces.sum(axis=1)
    v1 = edges[:, 0]
    v3 = edges[:, 1]
    v2 = face_sum[topo.edge_faces[interior, 0]] - v1 - v3
    v4 = face_sum[topo.edge_faces[interior, 1]] - v1 - v3
    return interior, np.stack([v1, v2, v3, v4], axis=1)


def _operator_coefficients(mesh: TriMesh, flap_vertices: np.ndarray) -> np.ndarray:
    """(n_interior, 4) frozen D(e) coefficients at the input geometry."""
    pts = mesh.vertices
    p1 = pts[flap_vertices[:, 0]]
    p2 = pts[flap_vertices[:, 1]]
    p3 = pts[flap_vertices[:, 2]]
    p4 = pts[flap_vertices[:, 3]]
    e = p3 - p1
    ee = np.einsum("ij,ij->i", e, e)
    a123 = 0.5 * np.linalg.norm(np.cross(p2 - p1, e), axis=-1)
    a134 = 0.5 * np.linalg.norm(np.cross(e, p4 - p1), axis=-1)
    total = a123 + a134
    denom = ee * total
    c1 = (
        a123 * np.einsum("ij,ij->i", p4 - p3, e)
        + a134 * np.einsum("ij,ij->i", p1 - p3, p3 - p2)
    ) / denom
    c3 = (
        a123 * np.einsum("ij,ij->i", e, p1 - p4)
        + a134 * np.einsum("ij,ij->i", p2 - p1, p1 - p3)
    ) / denom
    return np.stack([c1, a134 / total, c3, a123 / total], axis=1)


def assemble_system(
    mesh: TriMesh,
    params: PrefilterParams,
    topo: TopologyCache | None = None,
    geometry: FaceGeometry | None = None,
):
    """Sparse SPD system matrix M = I + alpha A'WA + beta B'WB.

    Returns (M, A, B, w_interior) where A and B map stacked vertex
    coordinates (per scalar coordinate) to per-interior-edge operator and
    regularizer values, and w_interior are the interior edge weights.
    """
    if topo is None:
        topo = build_topology(mesh)
    if geometry is None:
        geometry = face_geometry(mesh)
    n = mesh.n_vertices
    interior, flap_vertices = _flap_vertex_table(mesh, topo)
    m = len(interior)
    if m == 0:
        ident = sp.identity(n, format="csr")
        empty = sp.csr_matrix((0, n))
        return ident, empty, empty, np.zeros(0)

    rows = np.repeat(np.arange(m), 4)
    cols = flap_vertices.reshape(-1)
    d_coeff = _operator_coefficients(mesh, flap_vertices)
    a_op = sp.csr_matrix((d_coeff.reshape(-1), (rows, cols)), shape=(m, n))
    r_coeff = np.tile(np.array([0.5, -0.5, 0.5, -0.5]), m)
    b_op = sp.csr_matrix((r_coeff, (rows, cols)), shape=(m, n))

    w_int = edge_weights(mesh, topo, geometry, params.sigma_w)[interior]
    w_diag = sp.diags(w_int)
    system = (
        sp.identity(n, format="csr")
        + params.alpha * (a_op.T @ w_diag @ a_op)
        + params.beta * (b_op.T @ w_diag @ b_op)
    )
    return system.tocsr(), a_op, b_op, w_int


def quadratic_energy(
    mesh: TriMesh,
    candidate_vertices: np.ndarray,
    params: PrefilterParams,
    topo: TopologyCache | None = None,
    geometry: FaceGeometry | None = None,
) -> float:
    """Objective value at *candidate_vertices* with coefficients frozen
    at *mesh*'s geometry (the quantity :func:`prefilter` minimizes)."""
    _, a_op, b_op, w_int = assemble_system(mesh, params, topo, geometry)
    q = np.asarray(candidate_vertices, dtype=np.float64)
    data = float(((q - mesh.vertices) ** 2).sum())
    smooth = 0.0
    if a_op.shape[0]:
        d_vals = np.stack([a_op @ q[:, k] for k in range(3)], axis=1)
        r_vals = np.stack([b_op @ q[:, k] for k in range(3)], axis=1)
        smooth = params.alpha * float(
            (w_int * np.einsum("ij,ij->i", d_vals, d_vals)).sum()
        ) + params.beta * float((w_int * np.einsum("ij,ij->i", r_vals, r_vals)).sum())
    return data + smooth


def prefilter(
    mesh: TriMesh,
    params: PrefilterParams | None = None,
    topo: TopologyCache | None = None,
) -> TriMesh:
    """Solve the frozen-coefficient quadratic problem, returning the
    relaxed mesh (same connectivity).

    With alpha == beta == 0 the system is the identity and the input
    positions are returned bit-for-bit. CG starts from the input
    positions, so each coordinate solve only descends the objective.

    Raises
    ------
    SolverDivergedError
        If CG fails to reach ``solver_tol`` within the iteration cap.
    """
    if params is None:
        params = PrefilterParams()
    if mesh.n_vertices == 0:
        return mesh.with_vertices(mesh.vertices)
    system, _, _, _ = assemble_system(mesh, params, topo)
    max_iter = params.max_iter_for(mesh.n_vertices)
    out = np.empty_like(mesh.vertices)
    for k in range(3):
        rhs = mesh.vertices[:, k]
        solution, info = cg(
            system,
            rhs,
            x0=rhs.copy(),
            rtol=params.solver_tol,
            atol=0.0,
            maxiter=max_iter,
        )
        if info != 0:
            raise SolverDivergedError(
                f"CG on coordinate {k} did not reach rtol={params.solver_tol:g} "
                f"within {max_iter} iterations (info={info})"
            )
        out[:, k] = solution
    return mesh.with_vertices(out)
