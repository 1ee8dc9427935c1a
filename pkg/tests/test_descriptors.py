import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mem3d import procedural
from mem3d.descriptors import (
    DESCRIPTOR_SIZE,
    N_FEATURES,
    N_FOURIER,
    N_ZERNIKE,
    ZERNIKE_ORDERS,
    LightFieldDescriptor,
    fourier_descriptor,
    lfd_distance,
    light_field_descriptor,
    radial_polynomial,
    view_descriptor,
    yaw_min_lfd,
    zernike_moments,
)
from mem3d.errors import DataError
from mem3d.geometry import TriangleMesh, normalize_to_unit_cube, rotate_yaw
from mem3d.rasterizer import RESOLUTION, SilhouetteImage, canonical_viewpoints, rasterize_triangles, render_mask

C = RESOLUTION / 2.0


def _polygon_mask(pts):
    """Rasterize a polygon that is star-shaped about the image centre."""
    xy = np.vstack([[C, C], pts])
    n = len(pts)
    tris = np.array([[0, 1 + i, 1 + (i + 1) % n] for i in range(n)])
    return SilhouetteImage(rasterize_triangles(xy, tris))


def _rot(xy, a):
    c, s = math.cos(a), math.sin(a)
    x, y = xy[:, 0] * c - xy[:, 1] * s, xy[:, 0] * s + xy[:, 1] * c
    return np.stack([C + x, C - y], axis=1)


def _shape(angle_deg):
    # an asymmetric blob: ellipse with a notch, rotated about the image centre
    t = np.linspace(0, 2 * math.pi, 180, endpoint=False)
    r = 1 + 0.25 * np.cos(3 * t) + 0.1 * np.sin(2 * t)
    xy = np.stack([95 * r * np.cos(t) / 1.35, 60 * r * np.sin(t) / 1.35], axis=1)
    return _polygon_mask(_rot(xy, math.radians(angle_deg)))


def _disk_mask(radius, cx=C, cy=C):
    yy, xx = np.mgrid[0:RESOLUTION, 0:RESOLUTION] + 0.5
    return SilhouetteImage((xx - cx) ** 2 + (yy - cy) ** 2 <= radius**2)


def test_order_table():
    assert len(ZERNIKE_ORDERS) == N_ZERNIKE == 35
    assert (0, 0) not in ZERNIKE_ORDERS
    assert all(n <= 10 and (n - m) % 2 == 0 and 0 <= m <= n for n, m in ZERNIKE_ORDERS)


def test_radial_polynomial_known_values():
    rho = np.linspace(0, 1, 11)
    np.testing.assert_allclose(radial_polynomial(2, 0, rho), 2 * rho**2 - 1, atol=1e-14)
    np.testing.assert_allclose(radial_polynomial(4, 2, rho), 4 * rho**4 - 3 * rho**2, atol=1e-14)
    # R_n^m(1) = 1 for every valid pair
    for n, m in ZERNIKE_ORDERS:
        assert radial_polynomial(n, m, np.array([1.0]))[0] == pytest.approx(1.0, abs=1e-12)


def _direct_zernike(mask):
    # independent oracle: explicit complex sum over pixel centres inside the disk
    yy, xx = np.mgrid[0:RESOLUTION, 0:RESOLUTION]
    x = (xx + 0.5 - C) / C
    y = -(yy + 0.5 - C) / C
    z = x + 1j * y
    rho = np.abs(z)
    sel = mask & (rho <= 1.0)
    out = []
    for n, m in ZERNIKE_ORDERS:
        v = radial_polynomial(n, m, rho[sel]) * np.exp(-1j * m * np.angle(z[sel]))
        out.append(abs((n + 1) / math.pi * v.sum() / C**2))
    return np.array(out)


def test_zernike_matches_direct_sum():
    for img in (_shape(0), _shape(37), _disk_mask(70, 150, 110)):
        np.testing.assert_allclose(zernike_moments(img), _direct_zernike(img.mask), atol=1e-10)


def test_zernike_against_supersampled_continuum():
    # a filled disk of radius a (unit-disk units) has |Z_n0| = (n+1) * int_0^a R_n0(r) 2r dr
    a = 100 / C
    img = _disk_mask(100)
    got = dict(zip(ZERNIKE_ORDERS, zernike_moments(img)))
    r = (np.arange(1024 * 8) + 0.5) / (1024 * 8) * a
    dr = a / (1024 * 8)
    for n in (2, 4, 6):
        exact = abs((n + 1) * np.sum(radial_polynomial(n, 0, r) * 2 * r) * dr)
        assert got[(n, 0)] == pytest.approx(exact, abs=0.01)


def test_radially_symmetric_mask_has_no_angular_moments():
    z = zernike_moments(_disk_mask(100))
    angular = [v for (n, m), v in zip(ZERNIKE_ORDERS, z) if m != 0]
    assert max(angular) < 1e-3
    assert min(v for (n, m), v in zip(ZERNIKE_ORDERS, z) if m == 0) > 0.05


def test_zernike_empty_mask():
    with pytest.raises(DataError):
        zernike_moments(SilhouetteImage(np.zeros((RESOLUTION, RESOLUTION), bool)))


@pytest.mark.parametrize("angle", [37, 90 + 37, 200])
def test_rotated_silhouettes_agree(angle):
    a, b = view_descriptor(_shape(0)), view_descriptor(_shape(angle))
    assert np.max(np.abs(a - b)) < 0.02
    assert np.max(np.abs(zernike_moments(_shape(0)) - zernike_moments(_shape(angle)))) < 0.02


def test_disk_and_half_disk_are_distinguished():
    disk = _disk_mask(100)
    half = SilhouetteImage(disk.mask & (np.arange(RESOLUTION)[None, :] < C))
    assert np.abs(view_descriptor(disk) - view_descriptor(half)).sum() > 0.1


def _circle(n=256, r=50.0, start=0.0):
    t = np.linspace(0, 2 * math.pi, n, endpoint=False) + start
    return np.stack([C + r * np.cos(t), C + r * np.sin(t)], axis=1)


def test_circle_fourier_is_flat():
    assert np.max(fourier_descriptor(_circle())) < 1e-3


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 179))
def test_fourier_start_point_invariance(shift):
    t = np.linspace(0, 2 * math.pi, 180, endpoint=False)
    r = 60 * (1 + 0.3 * np.cos(3 * t) + 0.1 * np.sin(5 * t))
    contour = np.stack([C + r * np.cos(t), C + r * np.sin(t)], axis=1)
    a = fourier_descriptor(contour)
    b = fourier_descriptor(np.roll(contour, shift, axis=0))
    assert np.max(np.abs(a - b)) < 1e-9


def test_square_contour_peaks_at_fourth_harmonic():
    s = np.linspace(0, 1, 32, endpoint=False)
    side = [np.stack([s, np.zeros_like(s)], 1), np.stack([np.ones_like(s), s], 1),
            np.stack([1 - s, np.ones_like(s)], 1), np.stack([np.zeros_like(s), 1 - s], 1)]
    f = fourier_descriptor(np.vstack(side) * 80)
    assert len(f) == N_FOURIER and int(np.argmax(f)) + 1 == 4


def test_fourier_rejects_tiny_contours():
    with pytest.raises(DataError):
        fourier_descriptor(np.zeros((5, 2)))
    with pytest.raises(DataError):
        fourier_descriptor(np.zeros((10, 2)))


def test_view_descriptor_layout():
    img = _shape(0)
    d = view_descriptor(img)
    assert d.shape == (N_FEATURES,)
    np.testing.assert_array_equal(d[:N_ZERNIKE], zernike_moments(img))


def test_descriptor_container(torus):
    d = light_field_descriptor(torus, "t")
    assert d.views.shape == (10, 45) and d.views.dtype == np.float32
    assert d.flat().shape == (DESCRIPTOR_SIZE,)
    assert not d.views.flags.writeable
    with pytest.raises(ValueError):
        LightFieldDescriptor(np.zeros((10, 44)))


def test_sphere_views_match(sphere):
    d = light_field_descriptor(sphere).views
    assert np.max(np.abs(d - d[0])) < 1e-3


def test_cube_symmetric_views_match(unit_cube):
    # the four body-diagonal views of a cube see congruent hexagons
    d = light_field_descriptor(unit_cube).views
    assert np.max(np.abs(d[:4] - d[0])) < 0.02


def test_empty_view_is_reported():
    # a planar triangle in z = 0 is edge-on for the viewpoints with zero z component
    flat = TriangleMesh([[-0.5, -0.5, 0], [0.5, -0.5, 0], [0, 0.5, 0]], [[0, 1, 2]])
    with pytest.raises(DataError, match="view 6"):
        light_field_descriptor(flat)


def test_lfd_distance_basics():
    zeros = LightFieldDescriptor(np.zeros((10, 45)))
    ones = LightFieldDescriptor(np.ones((10, 45)))
    assert lfd_distance(zeros, ones) == 450.0
    assert lfd_distance(ones, ones) == 0.0
    with pytest.raises(ValueError):
        lfd_distance(np.zeros(449), np.zeros(450))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(1e-3, 1e3))
def test_lfd_metric_axioms(seed, scale):
    rng = np.random.default_rng(seed)
    a, b, c = (rng.random((3, 450)) * scale).astype(np.float32)
    assert lfd_distance(a, b) == lfd_distance(b, a)
    assert lfd_distance(a, a) == 0.0
    assert lfd_distance(a, c) <= lfd_distance(a, b) + lfd_distance(b, c) + 1e-9


def test_lfd_matches_float64_reference():
    rng = np.random.default_rng(5)
    a, b = rng.random(450).astype(np.float32), rng.random(450).astype(np.float32)
    ref = 0.0
    for x, y in zip(a.astype(np.float64), b.astype(np.float64)):
        ref += abs(x - y)
    assert lfd_distance(a, b) == ref


def test_yaw_min_bounds_plain_lfd(torus):
    gen = normalize_to_unit_cube(procedural.merge(procedural.box((1, 0.3, 0.3)), procedural.box((0.3, 1, 0.3), (0.3, 0, 0))))
    train = light_field_descriptor(rotate_yaw(gen, 90))
    assert yaw_min_lfd(gen, train) <= lfd_distance(light_field_descriptor(gen), train)
    assert yaw_min_lfd(gen, train) == 0.0


def test_scale_translation_invariance_is_bitwise(torus):
    moved = normalize_to_unit_cube(TriangleMesh(torus.vertices * 4.0 + [3, -1, 2], torus.triangles))
    assert light_field_descriptor(moved) == light_field_descriptor(torus)


def test_descriptor_uses_render_mask(torus):
    cam = canonical_viewpoints()[3]
    img = render_mask(torus, cam)
    np.testing.assert_array_equal(light_field_descriptor(torus).views[3], view_descriptor(img).astype(np.float32))
