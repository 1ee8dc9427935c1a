"""Meshes, point clouds, unit-cube normalization, surface sampling and yaw poses.

Yaw convention (right-handed, about +y):

    +90 deg:  (x, y, z) -> ( z, y, -x)
    180 deg:  (x, y, z) -> (-x, y, -z)
    270 deg:  (x, y, z) -> (-z, y,  x)

All four poses are coordinate swaps and sign flips, so composing them is
exact in floating point.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import DataError

YAW_ANGLES = (0, 90, 180, 270)

# (source axis, sign) for the output x and z components of each yaw pose.
_YAW_TABLE = {
    0: ((0, 1.0), (2, 1.0)),
    90: ((2, 1.0), (0, -1.0)),
    180: ((0, -1.0), (2, -1.0)),
    270: ((2, -1.0), (0, 1.0)),
}

_MAX_NORMALIZE_PASSES = 8


def _frozen(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    vertices: np.ndarray  # (V, 3) float64
    triangles: np.ndarray  # (F, 3) int64

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64)
        t = np.asarray(self.triangles, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 3:
            raise DataError(f"vertices must have shape (V, 3), got {v.shape}")
        if t.size == 0:
            t = t.reshape(0, 3)
        if t.ndim != 2 or t.shape[1] != 3:
            raise DataError(f"triangles must have shape (F, 3), got {t.shape}")
        if not np.all(np.isfinite(v)):
            raise DataError("mesh has non-finite vertex coordinates")
        if t.size and (t.min() < 0 or t.max() >= len(v)):
            raise DataError("triangle index out of range")
        object.__setattr__(self, "vertices", _frozen(v))
        object.__setattr__(self, "triangles", _frozen(t))

    def __eq__(self, other):
        if not isinstance(other, TriangleMesh):
            return NotImplemented
        return np.array_equal(self.vertices, other.vertices) and np.array_equal(
            self.triangles, other.triangles
        )

    __hash__ = None

    def triangle_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        cross = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
        return 0.5 * np.linalg.norm(cross, axis=1)

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)


@dataclass(frozen=True, eq=False)
class PointCloud:
    points: np.ndarray  # (N, 3) float64

    def __post_init__(self):
        p = np.asarray(self.points, dtype=np.float64)
        if p.ndim != 2 or p.shape[1] != 3:
            raise DataError(f"points must have shape (N, 3), got {p.shape}")
        if not np.all(np.isfinite(p)):
            raise DataError("point cloud has non-finite coordinates")
        object.__setattr__(self, "points", _frozen(p))

    def __len__(self):
        return len(self.points)


def _obj_index(token: str, n_vertices: int, lineno: int) -> int:
    ref = token.split("/", 1)[0]
    try:
        idx = int(ref)
    except ValueError:
        raise DataError(f"line {lineno}: bad face index {token!r}") from None
    if idx > 0:
        idx -= 1
    elif idx < 0:
        idx += n_vertices
    else:
        raise DataError(f"line {lineno}: face index 0 is invalid in OBJ")
    if not 0 <= idx < n_vertices:
        raise DataError(f"line {lineno}: face index {token} out of range")
    return idx


def parse_obj(text: str) -> TriangleMesh:
    """Parse ASCII OBJ text. Only ``v`` and ``f`` records are read; n-gons are fan-triangulated."""
    vertices = []
    triangles = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "v":
            if len(parts) < 4:
                raise DataError(f"line {lineno}: vertex needs 3 coordinates")
            try:
                vertices.append([float(x) for x in parts[1:4]])
            except ValueError:
                raise DataError(f"line {lineno}: bad vertex coordinates") from None
        elif parts[0] == "f":
            if len(parts) < 4:
                raise DataError(f"line {lineno}: face needs at least 3 vertices")
            idx = [_obj_index(tok, len(vertices), lineno) for tok in parts[1:]]
            for k in range(1, len(idx) - 1):
                triangles.append((idx[0], idx[k], idx[k + 1]))
    if not triangles:
        raise DataError("mesh has zero triangles")
    return TriangleMesh(np.array(vertices, dtype=np.float64).reshape(-1, 3), np.array(triangles))


def load_mesh(path) -> TriangleMesh:
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise DataError(f"mesh file not found: {path}")
    if not path.lower().endswith(".obj"):
        raise DataError(f"unsupported mesh format (OBJ only): {path}")
    try:
        with open(path, encoding="utf-8", errors="replace") as f:
            text = f.read()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    try:
        return parse_obj(text)
    except DataError as exc:
        raise DataError(f"{path}: {exc}") from None


def write_obj(mesh: TriangleMesh, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        # shortest repr that round-trips float64 exactly
        for x, y, z in mesh.vertices.tolist():
            f.write(f"v {x!r} {y!r} {z!r}\n")
        for a, b, c in mesh.triangles.tolist():
            f.write(f"f {a + 1} {b + 1} {c + 1}\n")


def _normalize_pass(v):
    lo, hi = v.min(axis=0), v.max(axis=0)
    extent = (hi - lo).max()
    return (v - (lo + hi) / 2.0) / extent


def normalize_to_unit_cube(mesh: TriangleMesh) -> TriangleMesh:
    """Center the bounding box at the origin and scale its largest side to 1.

    A single pass can leave the box off-center by an ulp, so the transform is
    repeated until it reaches a bitwise fixed point. This makes the function
    exactly idempotent.
    """
    v = mesh.vertices
    if len(v) == 0:
        raise DataError("cannot normalize a mesh without vertices")
    lo, hi = mesh.bounds()
    if not (hi - lo).max() > 0:
        raise DataError("cannot normalize: all vertices coincide (zero extent)")
    for _ in range(_MAX_NORMALIZE_PASSES):
        nxt = _normalize_pass(v)
        if np.array_equal(nxt, v):
            break
        v = nxt
    if v is mesh.vertices:
        return mesh
    return TriangleMesh(v, mesh.triangles)


def sample_surface_points(mesh: TriangleMesh, n: int = 4096, seed: int = 0) -> PointCloud:
    """Area-weighted surface sampling by inverse CDF over the cumulative area table.

    Zero-area triangles occupy empty CDF intervals and are never selected.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    areas = mesh.triangle_areas()
    cdf = np.cumsum(areas)
    total = cdf[-1] if len(cdf) else 0.0
    if not total > 0:
        raise DataError("mesh has zero total surface area")
    rng = np.random.default_rng(seed)
    u = rng.random(n) * total
    tri = np.searchsorted(cdf, u, side="right")
    np.minimum(tri, len(cdf) - 1, out=tri)
    r1 = np.sqrt(rng.random(n))
    r2 = rng.random(n)
    p = mesh.vertices[mesh.triangles[tri]]
    w0 = (1.0 - r1)[:, None]
    w1 = (r1 * (1.0 - r2))[:, None]
    w2 = (r1 * r2)[:, None]
    return PointCloud(w0 * p[:, 0] + w1 * p[:, 1] + w2 * p[:, 2])


def rotate_points_yaw(points: np.ndarray, angle: int) -> np.ndarray:
    if angle not in _YAW_TABLE:
        raise ValueError(f"yaw angle must be one of {YAW_ANGLES}, got {angle!r}")
    (xa, xs), (za, zs) = _YAW_TABLE[angle]
    out = np.empty_like(points)
    out[:, 0] = points[:, xa] if xs > 0 else -points[:, xa]
    out[:, 1] = points[:, 1]
    out[:, 2] = points[:, za] if zs > 0 else -points[:, za]
    return out


def rotate_yaw(mesh: TriangleMesh, angle: int) -> TriangleMesh:
    if angle == 0:
        return mesh
    return TriangleMesh(rotate_points_yaw(mesh.vertices, angle), mesh.triangles)
