"""Light field descriptors: per-view Zernike + Fourier features and the LFD metric.

A descriptor is a float32 array of shape (10, 45): for each canonical view,
35 Zernike magnitudes (orders n <= 10, (0, 0) excluded) followed by 10
normalized Fourier magnitudes of the silhouette's outer contour. Views are
compared one-to-one in canonical order; there is no rotation search across
views and no feature quantization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numba
import numpy as np

from .errors import DataError
from .geometry import YAW_ANGLES, TriangleMesh, rotate_yaw
from .rasterizer import (
    N_VIEWS,
    RESOLUTION,
    SilhouetteImage,
    canonical_viewpoints,
    largest_contour,
    render_mask,
)

ZERNIKE_MAX_ORDER = 10
N_ZERNIKE = 35
N_FOURIER = 10
N_FEATURES = N_ZERNIKE + N_FOURIER
DESCRIPTOR_SIZE = N_VIEWS * N_FEATURES
CONTOUR_SAMPLES = 128
# half-width of the moving average applied to traced pixel contours
CONTOUR_SMOOTHING = 2

ZERNIKE_ORDERS = tuple(
    (n, m)
    for n in range(ZERNIKE_MAX_ORDER + 1)
    for m in range(n + 1)
    if (n - m) % 2 == 0 and (n, m) != (0, 0)
)
assert len(ZERNIKE_ORDERS) == N_ZERNIKE


@dataclass(frozen=True, eq=False)
class LightFieldDescriptor:
    views: np.ndarray  # (10, 45) float32
    shape_id: str = ""
    pose: int = field(default=0)

    def __post_init__(self):
        v = np.ascontiguousarray(self.views, dtype=np.float32)
        if v.shape != (N_VIEWS, N_FEATURES):
            raise ValueError(f"descriptor must have shape ({N_VIEWS}, {N_FEATURES}), got {v.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "views", v)

    def __eq__(self, other):
        if not isinstance(other, LightFieldDescriptor):
            return NotImplemented
        return self.shape_id == other.shape_id and np.array_equal(self.views, other.views)

    __hash__ = None

    def flat(self) -> np.ndarray:
        return self.views.reshape(-1)


def radial_polynomial(n: int, m: int, rho: np.ndarray) -> np.ndarray:
    out = np.zeros_like(rho)
    for s in range((n - m) // 2 + 1):
        c = (
            (-1) ** s
            * math.factorial(n - s)
            / (
                math.factorial(s)
                * math.factorial((n + m) // 2 - s)
                * math.factorial((n - m) // 2 - s)
            )
        )
        out += c * rho ** (n - 2 * s)
    return out


@lru_cache(maxsize=1)
def _zernike_table():
    """Conjugated basis values at the centers of pixels inside the unit disk.

    Returns (flat pixel indices, real part (35, P), imaginary part (35, P)),
    already multiplied by (n + 1) / pi and the pixel area.
    """
    half = RESOLUTION / 2.0
    c = (np.arange(RESOLUTION) + 0.5 - half) / half
    x = c[None, :]
    y = -c[:, None]
    rho = np.hypot(x, y)
    theta = np.arctan2(y, x)
    inside = (rho <= 1.0).ravel()
    idx = np.flatnonzero(inside)
    rho = rho.ravel()[idx]
    theta = np.broadcast_to(theta, (RESOLUTION, RESOLUTION)).ravel()[idx]
    pixel_area = 1.0 / (half * half)
    re = np.empty((N_ZERNIKE, len(idx)))
    im = np.empty((N_ZERNIKE, len(idx)))
    for k, (n, m) in enumerate(ZERNIKE_ORDERS):
        r = radial_polynomial(n, m, rho) * ((n + 1) / math.pi * pixel_area)
        re[k] = r * np.cos(m * theta)
        im[k] = -r * np.sin(m * theta)
    for a in (idx, re, im):
        a.setflags(write=False)
    return idx, re, im


def _mask_of(img) -> np.ndarray:
    return img.mask if isinstance(img, SilhouetteImage) else np.asarray(img, dtype=bool)


def zernike_moments(img: SilhouetteImage) -> np.ndarray:
    """|Z_nm| of the binary mask over the image's inscribed unit disk, in ZERNIKE_ORDERS order."""
    mask = _mask_of(img)
    if not mask.any():
        raise DataError("cannot compute Zernike moments of an empty mask")
    idx, re, im = _zernike_table()
    f = mask.ravel()[idx].astype(np.float64)
    return np.hypot(re @ f, im @ f)


def _canonical_start(contour: np.ndarray) -> int:
    # lowest row, then lowest column; duplicates (pinch points) are resolved
    # by comparing the vertex sequences that follow each occurrence
    key = np.lexsort((contour[:, 0], contour[:, 1]))
    first = contour[key[0]]
    ties = [int(i) for i in key if np.array_equal(contour[i], first)]
    if len(ties) == 1:
        return ties[0]
    return min(ties, key=lambda i: np.roll(contour, -i, axis=0).ravel().tolist())


def resample_contour(contour: np.ndarray, count: int = CONTOUR_SAMPLES) -> np.ndarray:
    """``count`` points spaced uniformly by arc length along the closed polygon."""
    pts = np.roll(np.asarray(contour, dtype=np.float64), -_canonical_start(contour), axis=0)
    closed = np.vstack([pts, pts[:1]])
    seg = np.linalg.norm(np.diff(closed, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    total = cum[-1]
    if not total > 0:
        raise DataError("degenerate contour with zero perimeter")
    s = np.arange(count) * (total / count)
    return np.stack(
        [np.interp(s, cum, closed[:, 0]), np.interp(s, cum, closed[:, 1])], axis=1
    )


def fourier_descriptor(contour: np.ndarray) -> np.ndarray:
    """|c_k| / |c_0|, k = 1..10, of the centroid-distance signature of a closed contour.

    Resampling starts at a canonical vertex, so the result does not depend on
    which vertex the contour listing begins with.
    """
    contour = np.asarray(contour, dtype=np.float64)
    if contour.ndim != 2 or contour.shape[1] != 2 or len(contour) < 8:
        raise DataError("contour needs at least 8 vertices")
    pts = resample_contour(contour)
    r = np.linalg.norm(pts - pts.mean(axis=0), axis=1)
    mag = np.abs(np.fft.fft(r))
    if not mag[0] > 0:
        raise DataError("degenerate contour with zero centroid distance")
    return mag[1 : N_FOURIER + 1] / mag[0]


def smooth_contour(contour: np.ndarray, half_width: int = CONTOUR_SMOOTHING) -> np.ndarray:
    """Circular moving average over vertex index.

    Pixel-edge contours are staircases whose arc length depends on edge
    orientation; averaging pulls them onto the underlying outline so that the
    arc-length resampling is close to rotation invariant.
    """
    if half_width <= 0:
        return contour
    acc = np.zeros_like(contour, dtype=np.float64)
    for k in range(-half_width, half_width + 1):
        acc += np.roll(contour, -k, axis=0)
    return acc / (2 * half_width + 1)


def view_descriptor(img: SilhouetteImage) -> np.ndarray:
    contour = smooth_contour(largest_contour(img))
    return np.concatenate([zernike_moments(img), fourier_descriptor(contour)])


def light_field_descriptor(mesh: TriangleMesh, shape_id: str = "", pose: int = 0) -> LightFieldDescriptor:
    views = np.empty((N_VIEWS, N_FEATURES), dtype=np.float64)
    for i, cam in enumerate(canonical_viewpoints()):
        img = render_mask(mesh, cam)
        if not img.mask.any():
            raise DataError(f"view {i} produced an empty silhouette")
        try:
            views[i] = view_descriptor(img)
        except DataError as exc:
            raise DataError(f"view {i}: {exc}") from None
    return LightFieldDescriptor(views.astype(np.float32), shape_id, pose)


@numba.njit(cache=True, nogil=True)
def _l1(a, b):
    acc = 0.0
    for k in range(a.shape[0]):
        acc += abs(np.float64(a[k]) - np.float64(b[k]))
    return acc


@numba.njit(cache=True, nogil=True)
def l1_scan(matrix, q, out):
    """Sequential-float64 L1 distance from ``q`` to every row of ``matrix``."""
    for i in range(matrix.shape[0]):
        out[i] = _l1(matrix[i], q)


def _as_flat(d) -> np.ndarray:
    if isinstance(d, LightFieldDescriptor):
        return d.flat()
    return np.ascontiguousarray(d, dtype=np.float32).reshape(-1)


def lfd_distance(a, b) -> float:
    """Sum over the 10 views of the L1 distance between corresponding 45-vectors."""
    fa, fb = _as_flat(a), _as_flat(b)
    if fa.shape != (DESCRIPTOR_SIZE,) or fb.shape != (DESCRIPTOR_SIZE,):
        raise ValueError("descriptors must hold 10 x 45 values")
    return float(_l1(fa, fb))


def yaw_descriptors(mesh: TriangleMesh, shape_id: str = "") -> list[LightFieldDescriptor]:
    return [light_field_descriptor(rotate_yaw(mesh, a), shape_id, a) for a in YAW_ANGLES]


def yaw_min_lfd(gen: TriangleMesh, train_descriptor: LightFieldDescriptor) -> float:
    """Minimum LFD over the four yaw poses of the generated mesh."""
    return min(lfd_distance(d, train_descriptor) for d in yaw_descriptors(gen))
