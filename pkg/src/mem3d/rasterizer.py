"""Binary silhouette rendering from the ten canonical light-field viewpoints.

Projection is orthographic. One global scale is used for every view of every
shape: the circumscribed sphere of the unit cube (radius sqrt(3)/2) maps to a
disk of radius 0.45 * 256 pixels around the image center, so each silhouette
of a normalized mesh lies inside the Zernike unit disk.

Image coordinates: column x grows to the right, row y grows downward; pixel
(row i, col j) covers [j, j+1] x [i, i+1] and is foreground iff its center
(j + 0.5, i + 0.5) lies inside a projected triangle.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numba
import numpy as np
from scipy import ndimage

from .errors import DataError
from .geometry import TriangleMesh

RESOLUTION = 256
N_VIEWS = 10
DISK_FRACTION = 0.45
PIXELS_PER_UNIT = DISK_FRACTION * RESOLUTION / (math.sqrt(3.0) / 2.0)

_PHI = (1.0 + math.sqrt(5.0)) / 2.0


@dataclass(frozen=True)
class Camera:
    position: tuple[float, float, float]
    view: tuple[float, float, float]
    up: tuple[float, float, float]

    @property
    def right(self) -> np.ndarray:
        return np.cross(np.asarray(self.view), np.asarray(self.up))

    def check_basis(self, tol=1e-9):
        v = np.asarray(self.view, dtype=np.float64)
        u = np.asarray(self.up, dtype=np.float64)
        if (
            abs(np.dot(v, v) - 1.0) > tol
            or abs(np.dot(u, u) - 1.0) > tol
            or abs(np.dot(u, v)) > tol
        ):
            raise ValueError("degenerate camera basis: view and up must be orthonormal")


def _camera_from_direction(d: np.ndarray) -> Camera:
    d = d / np.linalg.norm(d)
    view = -d
    ref = np.array([0.0, 1.0, 0.0])
    if abs(np.dot(ref, view)) > 0.999:
        ref = np.array([1.0, 0.0, 0.0])
    up = ref - np.dot(ref, view) * view
    up /= np.linalg.norm(up)
    return Camera(tuple(d.tolist()), tuple(view.tolist()), tuple(up.tolist()))


@lru_cache(maxsize=1)
def canonical_viewpoints() -> tuple[Camera, ...]:
    """One camera per antipodal pair of regular-dodecahedron vertices.

    The representative of each pair is the vertex whose first non-zero
    coordinate is positive. Fixed order: the four cube vertices (1, +-1, +-1),
    then (0, 1/phi, +-phi), (1/phi, +-phi, 0), (phi, 0, +-1/phi).
    """
    ip = 1.0 / _PHI
    dirs = [
        (1.0, 1.0, 1.0),
        (1.0, 1.0, -1.0),
        (1.0, -1.0, 1.0),
        (1.0, -1.0, -1.0),
        (0.0, ip, _PHI),
        (0.0, ip, -_PHI),
        (ip, _PHI, 0.0),
        (ip, -_PHI, 0.0),
        (_PHI, 0.0, ip),
        (_PHI, 0.0, -ip),
    ]
    return tuple(_camera_from_direction(np.array(d)) for d in dirs)


@dataclass(frozen=True, eq=False)
class SilhouetteImage:
    mask: np.ndarray  # (256, 256) bool

    def __post_init__(self):
        m = np.ascontiguousarray(self.mask, dtype=bool)
        if m.shape != (RESOLUTION, RESOLUTION):
            raise ValueError(f"silhouette must be {RESOLUTION}x{RESOLUTION}, got {m.shape}")
        m.setflags(write=False)
        object.__setattr__(self, "mask", m)

    @property
    def width(self):
        return RESOLUTION

    @property
    def height(self):
        return RESOLUTION

    def __eq__(self, other):
        if not isinstance(other, SilhouetteImage):
            return NotImplemented
        return np.array_equal(self.mask, other.mask)

    __hash__ = None

    def foreground_count(self) -> int:
        return int(self.mask.sum())


@numba.njit(cache=True, nogil=True)
def _edge(ax, ay, bx, by, px, py):
    # Evaluated from the lexicographically smaller endpoint so that an edge
    # shared by two triangles yields exactly opposite values.
    if ax < bx or (ax == bx and ay < by):
        return (bx - ax) * (py - ay) - (by - ay) * (px - ax)
    return -((ax - bx) * (py - by) - (ay - by) * (px - bx))


@numba.njit(cache=True, nogil=True)
def _owns_edge(ax, ay, bx, by):
    dx = bx - ax
    dy = by - ay
    return dy < 0.0 or (dy == 0.0 and dx > 0.0)


@numba.njit(cache=True, nogil=True)
def _inside(e, owned):
    return e > 0.0 or (e == 0.0 and owned)


@numba.njit(cache=True, nogil=True)
def _fill_triangles(xy, tris, mask):
    h, w = mask.shape
    for t in range(tris.shape[0]):
        ia, ib, ic = tris[t, 0], tris[t, 1], tris[t, 2]
        ax, ay = xy[ia, 0], xy[ia, 1]
        bx, by = xy[ib, 0], xy[ib, 1]
        cx, cy = xy[ic, 0], xy[ic, 1]
        area = _edge(ax, ay, bx, by, cx, cy)
        if area == 0.0:
            continue
        if area < 0.0:
            bx, by, cx, cy = cx, cy, bx, by
        x0 = max(int(math.ceil(min(ax, bx, cx) - 0.5)), 0)
        x1 = min(int(math.floor(max(ax, bx, cx) - 0.5)), w - 1)
        y0 = max(int(math.ceil(min(ay, by, cy) - 0.5)), 0)
        y1 = min(int(math.floor(max(ay, by, cy) - 0.5)), h - 1)
        own0 = _owns_edge(ax, ay, bx, by)
        own1 = _owns_edge(bx, by, cx, cy)
        own2 = _owns_edge(cx, cy, ax, ay)
        for i in range(y0, y1 + 1):
            py = i + 0.5
            for j in range(x0, x1 + 1):
                if mask[i, j]:
                    continue
                px = j + 0.5
                if (
                    _inside(_edge(ax, ay, bx, by, px, py), own0)
                    and _inside(_edge(bx, by, cx, cy, px, py), own1)
                    and _inside(_edge(cx, cy, ax, ay, px, py), own2)
                ):
                    mask[i, j] = 1


def rasterize_triangles(xy: np.ndarray, triangles: np.ndarray, size: int = RESOLUTION) -> np.ndarray:
    """Coverage mask of 2-D triangles given in pixel coordinates (x right, y down)."""
    mask = np.zeros((size, size), dtype=np.uint8)
    _fill_triangles(
        np.ascontiguousarray(xy, dtype=np.float64),
        np.ascontiguousarray(triangles, dtype=np.int64),
        mask,
    )
    return mask.astype(bool)


def project(vertices: np.ndarray, cam: Camera) -> np.ndarray:
    right = cam.right
    up = np.asarray(cam.up)
    u = vertices @ right
    v = vertices @ up
    c = RESOLUTION / 2.0
    return np.stack([c + u * PIXELS_PER_UNIT, c - v * PIXELS_PER_UNIT], axis=1)


def render_mask(mesh: TriangleMesh, cam: Camera) -> SilhouetteImage:
    """Like render_silhouette but silent about empty masks (batch use)."""
    cam.check_basis()
    return SilhouetteImage(rasterize_triangles(project(mesh.vertices, cam), mesh.triangles))


def render_silhouette(mesh: TriangleMesh, cam: Camera) -> SilhouetteImage:
    img = render_mask(mesh, cam)
    if not img.mask.any():
        warnings.warn("silhouette is empty for this view", RuntimeWarning, stacklevel=2)
    return img


@numba.njit(cache=True, nogil=True)
def _trace(padded, sx, sy, out):
    # Crack following along pixel edges with foreground kept on the left-hand
    # side; turning right first keeps diagonally touching pixels together.
    px, py = sx, sy
    dx, dy = 0, 1
    n = 0
    while True:
        out[n, 0] = px
        out[n, 1] = py
        n += 1
        px += dx
        py += dy
        lx, ly = dy, -dx
        # pixel centers ahead-left / ahead-right, shifted by +1 for padding
        la = padded[py + (dy + ly - 1) // 2 + 1, px + (dx + lx - 1) // 2 + 1]
        ra = padded[py + (dy - ly - 1) // 2 + 1, px + (dx - lx - 1) // 2 + 1]
        if ra:
            dx, dy = -lx, -ly
        elif not la:
            dx, dy = lx, ly
        if px == sx and py == sy and dx == 0 and dy == 1:
            break
    return n


def largest_contour(img: SilhouetteImage) -> np.ndarray:
    """Outer boundary of the largest 8-connected component as (x, y) pixel corners.

    Traversal is counter-clockwise as displayed (foreground on the left) and
    starts at the top-left corner of the component's first pixel in raster
    order. Equal-size components are resolved by that same raster order.
    """
    mask = img.mask if isinstance(img, SilhouetteImage) else np.asarray(img, dtype=bool)
    labels, count = ndimage.label(mask, structure=np.ones((3, 3), dtype=int))
    if count == 0:
        raise DataError("cannot trace a contour on an all-background image")
    sizes = np.bincount(labels.ravel())[1:]
    # ndimage labels components in raster order of their first pixel
    best = int(np.argmax(sizes)) + 1
    comp = labels == best
    rows, cols = np.nonzero(comp)
    sy, sx = int(rows[0]), int(cols[0])
    padded = np.pad(comp, 1).astype(np.uint8)
    out = np.empty((4 * (int(sizes[best - 1]) + 1) + 8, 2), dtype=np.int64)
    n = _trace(padded, sx, sy, out)
    return out[:n].astype(np.float64)


def write_pgm(img: SilhouetteImage, path) -> None:
    """Binary PGM (P5, 8-bit): foreground 255, background 0."""
    data = np.where(img.mask, 255, 0).astype(np.uint8)
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n255\n" % (RESOLUTION, RESOLUTION))
        f.write(data.tobytes())
