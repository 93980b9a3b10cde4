"""Wavefront OBJ reading/writing and colored PLY export.

Only the tiny OBJ subset needed for triangle meshes is supported:
``v x y z`` and ``f i j k`` records (1-based indices, optional ``/vt/vn``
suffixes). Everything else is ignored. Writing emits one ``v`` line per
vertex followed by one ``f`` line per face, nothing else, with float
coordinates in shortest round-trip decimal form so a write/read cycle
reproduces positions exactly.
"""

from __future__ import annotations

import colorsys
from dataclasses import dataclass

import numpy as np

from .core import TriMesh
from .errors import LabelLengthMismatchError, MeshParseError, NonTriangleFaceError

GOLDEN_RATIO_CONJUGATE = 0.618034


def read_obj(path) -> TriMesh:
    """Parse *path* as OBJ, returning the mesh.

    Raises MeshParseError (with file and line number) on malformed
    records, NonTriangleFaceError on faces that are not triangles.
    """
    vertices: list[tuple[float, float, float]] = []
    faces: list[tuple[int, int, int]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            tag = parts[0]
            if tag == "v":
                if len(parts) < 4:
                    raise MeshParseError(
                        f"{path}:{lineno}: vertex record needs 3 coordinates: {line!r}"
                    )
                try:
                    vertices.append(tuple(float(x) for x in parts[1:4]))
                except ValueError as exc:
                    raise MeshParseError(
                        f"{path}:{lineno}: bad vertex coordinate: {line!r}"
                    ) from exc
            elif tag == "f":
                refs = parts[1:]
                if len(refs) != 3:
                    raise NonTriangleFaceError(
                        f"{path}:{lineno}: face has {len(refs)} vertices, "
                        f"only triangles are supported: {line!r}"
                    )
                idx = []
                for ref in refs:
                    head = ref.split("/", 1)[0]
                    try:
                        i = int(head)
                    except ValueError as exc:
                        raise MeshParseError(
                            f"{path}:{lineno}: bad face index {ref!r}"
                        ) from exc
                    if i < 1:
                        raise MeshParseError(
                            f"{path}:{lineno}: face indices must be positive "
                            f"(1-based), got {i}"
                        )
                    idx.append(i - 1)
                faces.append(tuple(idx))
            # Any other record type (vn, vt, o, g, s, mtllib, ...) is skipped.
    fmax = max((max(f) for f in faces), default=-1)
    if fmax >= len(vertices):
        raise MeshParseError(
            f"{path}: face references vertex {fmax + 1} but only "
            f"{len(vertices)} vertices are defined"
        )
    return TriMesh(
        np.array(vertices, dtype=np.float64).reshape(-1, 3),
        np.array(faces, dtype=np.int64).reshape(-1, 3),
    )


def write_obj(mesh: TriMesh, path) -> None:
    """Write *mesh* to *path*; output is V + F lines, byte-deterministic."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for x, y, z in mesh.vertices:
            fh.write(f"v {float(x)!r} {float(y)!r} {float(z)!r}\n")
        for a, b, c in mesh.faces:
            fh.write(f"f {a + 1} {b + 1} {c + 1}\n")


@dataclass(frozen=True)
class ColorMap:
    """Label -> RGB table built by golden-ratio hue stepping.

    Hue of label k is fract(k * 0.618034) at full saturation and value,
    which keeps any <= 256 labels pairwise distinct after 8-bit
    quantization while spreading neighboring labels far apart on the
    color wheel.
    """

    colors: np.ndarray  # (n_labels, 3) uint8

    @classmethod
    def for_count(cls, n_labels: int) -> "ColorMap":
        hues = (np.arange(n_labels) * GOLDEN_RATIO_CONJUGATE) % 1.0
        rgb = np.array([colorsys.hsv_to_rgb(h, 1.0, 1.0) for h in hues])
        rgb = rgb.reshape(-1, 3)
        colors = np.clip(np.round(rgb * 255.0), 0, 255).astype(np.uint8)
        colors.setflags(write=False)
        return cls(colors=colors)

    def __getitem__(self, label: int) -> tuple[int, int, int]:
        r, g, b = self.colors[label]
        return int(r), int(g), int(b)


def write_ply_colored(mesh: TriMesh, labels, path) -> None:
    """ASCII PLY with one uchar RGB triple per face, colored by label."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (mesh.n_faces,):
        raise LabelLengthMismatchError(
            f"got {labels.shape[0] if labels.ndim else 'scalar'} labels "
            f"for {mesh.n_faces} faces"
        )
    if labels.size and labels.min() < 0:
        raise ValueError("labels must be non-negative")
    cmap = ColorMap.for_count(int(labels.max()) + 1 if labels.size else 0)
    face_colors = cmap.colors[labels] if labels.size else np.zeros((0, 3), np.uint8)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("ply\n")
        fh.write("format ascii 1.0\n")
        fh.write(f"element vertex {mesh.n_vertices}\n")
        fh.write("property float x\n")
        fh.write("property float y\n")
        fh.write("property float z\n")
        fh.write(f"element face {mesh.n_faces}\n")
        fh.write("property list uchar int vertex_indices\n")
        fh.write("property uchar red\n")
        fh.write("property uchar green\n")
        fh.write("property uchar blue\n")
        fh.write("end_header\n")
        for x, y, z in mesh.vertices:
            fh.write(f"{float(x)!r} {float(y)!r} {float(z)!r}\n")
        for (a, b, c), (r, g, b_) in zip(mesh.faces, face_colors):
            fh.write(f"3 {a} {b} {c} {r} {g} {b_}\n")


def write_labels(labels, path) -> None:
    """One integer label per line, in face order."""
    labels = np.asarray(labels, dtype=np.int64)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for lab in labels:
            fh.write(f"{int(lab)}\n")


def read_labels(path) -> np.ndarray:
    """Read a label file written by :func:`write_labels`."""
    with open(path, "r", encoding="utf-8") as fh:
        labels = [int(line) for line in fh if line.strip()]
    return np.asarray(labels, dtype=np.int64)
