"""Face clustering: region growing bounded by the edge operator, then
absorption of small clusters into their best large neighbor.

Growing is a flood fill over face adjacency in which an edge may be
crossed only while ||D(e)|| stays strictly below ``d_thr``; seeds are
taken in ascending face id, so labels are deterministic and numbered by
first discovery. Refinement reassigns every face of each undersized
cluster to the large cluster in its surrounding ring whose normals agree
best (sum of cosines), computed against a snapshot of the pre-refinement
labels so the pass order cannot cascade.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .core import (
    FaceGeometry,
    TopologyCache,
    TriMesh,
    build_topology,
    face_geometry,
    face_ring,
)
from .edgeop import EdgeOperatorField, edge_operator_field
from .errors import LabelLengthMismatchError
from .prefilter import PrefilterParams, prefilter

BASELINE_MODES = ("edgeop", "normal-angle", "none")


@dataclass(frozen=True)
class SegmentParams:
    """Knobs for :func:`segment`.

    d_thr is the strict region-growing bound on ||D(e)|| ("edgeop" mode)
    or on the dihedral angle in radians ("normal-angle" mode); it is
    ignored by mode "none", which lumps every face into one cluster.
    """

    d_thr: float
    min_cluster_size: int = 50
    refine: bool = True
    ring_depth: int = 2
    baseline_mode: str = "edgeop"
    refine_passes: int = 1

    def __post_init__(self):
        if not (self.d_thr >= 0):  # also rejects NaN
            raise ValueError(f"d_thr must be >= 0, got {self.d_thr}")
        if self.min_cluster_size < 1:
            raise ValueError("min_cluster_size must be >= 1")
        if self.ring_depth < 1:
            raise ValueError("ring_depth must be >= 1")
        if self.baseline_mode not in BASELINE_MODES:
            raise ValueError(
                f"baseline_mode must be one of {BASELINE_MODES}, "
                f"got {self.baseline_mode!r}"
            )
        if self.refine_passes < 1:
            raise ValueError("refine_passes must be >= 1")


@dataclass(frozen=True)
class ClusterLabels:
    """Face labels 0..cluster_count-1; cluster_sizes[k] counts label k."""

    labels: np.ndarray
    cluster_count: int
    cluster_sizes: np.ndarray

    @classmethod
    def from_array(cls, labels: np.ndarray, n_faces: int | None = None) -> "ClusterLabels":
        labels = np.asarray(labels, dtype=np.int64)
        if n_faces is not None and labels.shape != (n_faces,):
            raise LabelLengthMismatchError(
                f"expected {n_faces} labels, got shape {labels.shape}"
            )
        if labels.size == 0:
            return cls(labels=labels, cluster_count=0, cluster_sizes=np.zeros(0, np.int64))
        count = int(labels.max()) + 1
        if labels.min() < 0:
            raise ValueError("labels must be non-negative")
        sizes = np.bincount(labels, minlength=count)
        if (sizes == 0).any():
            raise ValueError("labels must be contiguous: every id 0..max used")
        labels = labels.copy()
        labels.setflags(write=False)
        sizes.setflags(write=False)
        return cls(labels=labels, cluster_count=count, cluster_sizes=sizes)


def _grow(topo: TopologyCache, edge_passes: np.ndarray) -> np.ndarray:
    """Connected components of faces over passing edges; labels numbered
    by first discovery with seeds in ascending face id."""
    labels = np.full(topo.n_faces, -1, dtype=np.int64)
    adjacent = topo.face_adjacent
    face_edges = topo.face_edges
    current = 0
    for seed in range(topo.n_faces):
        if labels[seed] >= 0:
            continue
        labels[seed] = current
        queue = deque([seed])
        while queue:
            face = queue.popleft()
            for slot in range(3):
                neighbor = adjacent[face, slot]
                if neighbor < 0 or labels[neighbor] >= 0:
                    continue
                if edge_passes[face_edges[face, slot]]:
                    labels[neighbor] = current
                    queue.append(neighbor)
        current += 1
    return labels


def region_grow(
    mesh: TriMesh,
    topo: TopologyCache,
    field: EdgeOperatorField,
    d_thr: float,
) -> ClusterLabels:
    """Flood-fill faces across edges with ||D(e)|| strictly below *d_thr*.

    Boundary edges carry an infinite norm, so they never merge faces; a
    d_thr of +inf merges each connected component into one cluster, and
    d_thr = 0 isolates every face.
    """
    if len(field.norms) != topo.n_edges:
        raise LabelLengthMismatchError(
            f"field has {len(field.norms)} edges, topology has {topo.n_edges}"
        )
    return ClusterLabels.from_array(_grow(topo, field.norms < d_thr), topo.n_faces)


def refine(
    mesh: TriMesh,
    topo: TopologyCache,
    geometry: FaceGeometry,
    clusters: ClusterLabels,
    params: SegmentParams,
) -> ClusterLabels:
    """Absorb clusters smaller than ``min_cluster_size`` into large ones.

    Every face of an undersized cluster is reassigned to the large
    cluster with the highest sum of normal cosines over the face's
    ring (depth ``ring_depth``, grown further if no large cluster is in
    sight); ties pick the lowest label. Faces whose entire connectivity
    component contains no large cluster fall back to the globally
    largest cluster. If *no* cluster is large, everything merges into
    the largest one. Decisions read a snapshot of the input labels, so
    nothing cascades within one pass. Labels are recompacted afterward.
    """
    sizes = clusters.cluster_sizes
    if clusters.cluster_count == 0:
        return clusters
    small_label = sizes < params.min_cluster_size
    if not small_label.any():
        return clusters

    snapshot = clusters.labels
    new_labels = snapshot.copy()
    # Ties on size resolve to the lowest label id (np.argmax convention).
    globally_largest = int(np.argmax(sizes))

    if small_label.all():
        new_labels[:] = globally_largest
    else:
        normals = geometry.normals
        small_faces = np.flatnonzero(small_label[snapshot])
        for face in small_faces:
            face = int(face)
            depth = params.ring_depth
            ring = face_ring(topo, face, depth)
            # Grow the ring until it reaches a large cluster or stalls
            # (component exhausted).
            while True:
                ring_ids = np.fromiter(ring, dtype=np.int64, count=len(ring))
                ring_labels = snapshot[ring_ids] if len(ring_ids) else ring_ids
                candidate = len(ring_ids) > 0 and (~small_label[ring_labels]).any()
                if candidate:
                    break
                depth += 1
                bigger = face_ring(topo, face, depth)
                if len(bigger) == len(ring):
                    break
                ring = bigger
            if not candidate:
                new_labels[face] = globally_largest
                continue
            keep = ~small_label[ring_labels]
            cosines = normals[ring_ids[keep]] @ normals[face]
            score = np.bincount(
                ring_labels[keep], weights=cosines, minlength=clusters.cluster_count
            )
            # Only large clusters actually present in the ring may win.
            eligible = np.zeros(clusters.cluster_count, dtype=bool)
            eligible[ring_labels[keep]] = True
            score[~eligible] = -np.inf
            new_labels[face] = int(np.argmax(score))

    _, compact = np.unique(new_labels, return_inverse=True)
    return ClusterLabels.from_array(compact.astype(np.int64), topo.n_faces)


def _dihedral_passes(
    topo: TopologyCache, geometry: FaceGeometry, d_thr: float
) -> np.ndarray:
    """Baseline predicate: normal angle (radians) strictly below d_thr."""
    passes = np.zeros(topo.n_edges, dtype=bool)
    interior = topo.interior_edge_ids
    if interior.size:
        n_a = geometry.normals[topo.edge_faces[interior, 0]]
        n_b = geometry.normals[topo.edge_faces[interior, 1]]
        dots = np.clip(np.einsum("ij,ij->i", n_a, n_b), -1.0, 1.0)
        passes[interior] = np.arccos(dots) < d_thr
    return passes


def segment(
    mesh: TriMesh,
    params: SegmentParams,
    prefilter_params: PrefilterParams | None = None,
) -> ClusterLabels:
    """Full segmentation pipeline: optional prefilter, growing, refinement.

    When *prefilter_params* is given, the operator field (or baseline
    predicate) and the refinement normals are computed on the prefiltered
    positions; the labels still apply to *mesh* face-for-face because the
    prefilter never touches connectivity.
    """
    work = mesh if prefilter_params is None else prefilter(mesh, prefilter_params)
    topo = build_topology(work)

    if params.baseline_mode == "none":
        labels = np.zeros(work.n_faces, dtype=np.int64)
        return ClusterLabels.from_array(labels, work.n_faces)

    geometry = face_geometry(work)
    if params.baseline_mode == "normal-angle":
        passes = _dihedral_passes(topo, geometry, params.d_thr)
        clusters = ClusterLabels.from_array(_grow(topo, passes), work.n_faces)
    else:
        field = edge_operator_field(work, topo)
        clusters = region_grow(work, topo, field, params.d_thr)

    if params.refine:
        for _ in range(params.refine_passes):
            refined = refine(work, topo, geometry, clusters, params)
            if refined.cluster_count == clusters.cluster_count and np.array_equal(
                refined.labels, clusters.labels
            ):
                clusters = refined
                break
            clusters = refined
    return clusters
