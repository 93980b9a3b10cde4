"""Feature-aware mesh denoising built on edge-operator segmentation.

Pipeline in one breath: corrupt or load a triangle mesh, optionally
relax it with a quadratic prefilter, grow face clusters wherever the
differential edge operator stays small, absorb undersized clusters, then
denoise with a cluster-constrained two-step filter (iterated face-normal
filtering + vertex fitting) and score the result against ground truth.
"""

from .core import (
    Flap,
    FaceGeometry,
    TopologyCache,
    TriMesh,
    build_topology,
    face_geometry,
    face_ring,
    flap_of_edge,
    geometric_neighborhood,
    vertex_normals,
)
from .denoise import (
    BnfParams,
    DenoiseParams,
    GnfParams,
    L1Params,
    UnfParams,
    denoise,
    filter_bnf,
    filter_gnf,
    filter_l1median,
    filter_normals,
    filter_unf,
    neighbors,
    params_from_tuple,
    params_to_tuple,
    vertex_update,
)
from .edgeop import EdgeOperatorField, edge_operator, edge_operator_field, write_norms_csv
from .errors import (
    BoundaryEdgeError,
    ConnectivityMismatchError,
    DegenerateFaceError,
    DegenerateFlapError,
    EmptyMeshError,
    LabelLengthMismatchError,
    MeshError,
    MeshParseError,
    NonManifoldEdgeError,
    NonTriangleFaceError,
    SolverDivergedError,
    ZeroAreaFaceError,
)
from .fileio import ColorMap, read_labels, read_obj, write_labels, write_obj, write_ply_colored
from .fixtures import cube, icosahedron, make_fixture, plane
from .metrics import MetricsReport, TriangleBVH, compute_report, ev, msae
from .noise import NoiseSpec, add_noise
from .prefilter import PrefilterParams, edge_weights, prefilter, quadratic_energy, regularizer
from .segment import ClusterLabels, SegmentParams, refine, region_grow, segment

__version__ = "0.1.0"

__all__ = [
    "BnfParams",
    "BoundaryEdgeError",
    "ClusterLabels",
    "ColorMap",
    "ConnectivityMismatchError",
    "DegenerateFaceError",
    "DegenerateFlapError",
    "DenoiseParams",
    "EdgeOperatorField",
    "EmptyMeshError",
    "FaceGeometry",
    "Flap",
    "GnfParams",
    "L1Params",
    "LabelLengthMismatchError",
    "MeshError",
    "MeshParseError",
    "MetricsReport",
    "NoiseSpec",
    "NonManifoldEdgeError",
    "NonTriangleFaceError",
    "PrefilterParams",
    "SegmentParams",
    "SolverDivergedError",
    "TopologyCache",
    "TriangleBVH",
    "TriMesh",
    "UnfParams",
    "ZeroAreaFaceError",
    "add_noise",
    "build_topology",
    "compute_report",
    "cube",
    "denoise",
    "edge_operator",
    "edge_operator_field",
    "edge_weights",
    "ev",
    "face_geometry",
    "face_ring",
    "filter_bnf",
    "filter_gnf",
    "filter_l1median",
    "filter_normals",
    "filter_unf",
    "flap_of_edge",
    "geometric_neighborhood",
    "icosahedron",
    "make_fixture",
    "msae",
    "neighbors",
    "params_from_tuple",
    "params_to_tuple",
    "plane",
    "prefilter",
    "quadratic_energy",
    "read_labels",
    "read_obj",
    "refine",
    "region_grow",
    "regularizer",
    "segment",
    "vertex_normals",
    "vertex_update",
    "write_labels",
    "write_norms_csv",
    "write_obj",
    "write_ply_colored",
]
