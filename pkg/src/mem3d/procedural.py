"""Procedural test meshes: boxes, icospheres, tori, cylinders and random primitives."""

from __future__ import annotations

import math

import numpy as np

from .geometry import TriangleMesh

_BOX_QUADS = [
    (0, 2, 3, 1),
    (4, 5, 7, 6),
    (0, 1, 5, 4),
    (2, 6, 7, 3),
    (0, 4, 6, 2),
    (1, 3, 7, 5),
]


def box(extents=(1.0, 1.0, 1.0), center=(0.0, 0.0, 0.0)) -> TriangleMesh:
    ex = np.asarray(extents, dtype=np.float64)
    corners = np.array([[i, j, k] for i in (0, 1) for j in (0, 1) for k in (0, 1)], dtype=np.float64)
    v = (corners - 0.5) * ex + np.asarray(center, dtype=np.float64)
    tris = []
    for a, b, c, d in _BOX_QUADS:
        tris += [(a, b, c), (a, c, d)]
    return TriangleMesh(v, np.array(tris))


def icosphere(subdivisions: int = 3, radius: float = 1.0) -> TriangleMesh:
    t = (1.0 + math.sqrt(5.0)) / 2.0
    verts = [
        (-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
        (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
        (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1),
    ]
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = [np.array(v, dtype=np.float64) / np.linalg.norm(v) for v in verts]
    for _ in range(subdivisions):
        cache = {}

        def mid(a, b):
            key = (min(a, b), max(a, b))
            if key not in cache:
                m = verts[a] + verts[b]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        new = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new
    return TriangleMesh(np.array(verts) * radius, np.array(faces))


def torus(major: float = 1.0, minor: float = 0.35, segments: int = 32, rings: int = 16) -> TriangleMesh:
    u = np.arange(segments) * (2 * math.pi / segments)
    v = np.arange(rings) * (2 * math.pi / rings)
    uu, vv = np.meshgrid(u, v, indexing="ij")
    x = (major + minor * np.cos(vv)) * np.cos(uu)
    z = (major + minor * np.cos(vv)) * np.sin(uu)
    y = minor * np.sin(vv)
    verts = np.stack([x, y, z], axis=-1).reshape(-1, 3)
    tris = []
    for i in range(segments):
        for j in range(rings):
            a = i * rings + j
            b = ((i + 1) % segments) * rings + j
            c = ((i + 1) % segments) * rings + (j + 1) % rings
            d = i * rings + (j + 1) % rings
            tris += [(a, b, c), (a, c, d)]
    return TriangleMesh(verts, np.array(tris))


def cylinder(radius: float = 0.5, height: float = 1.0, segments: int = 24) -> TriangleMesh:
    ang = np.arange(segments) * (2 * math.pi / segments)
    ring = np.stack([radius * np.cos(ang), np.zeros(segments), radius * np.sin(ang)], axis=1)
    bottom = ring - [0, height / 2, 0]
    top = ring + [0, height / 2, 0]
    verts = np.vstack([bottom, top, [[0, -height / 2, 0], [0, height / 2, 0]]])
    cb, ct = 2 * segments, 2 * segments + 1
    tris = []
    for i in range(segments):
        j = (i + 1) % segments
        tris += [(i, j, segments + j), (i, segments + j, segments + i)]
        tris += [(cb, j, i), (ct, segments + i, segments + j)]
    return TriangleMesh(verts, np.array(tris))


def merge(*meshes: TriangleMesh) -> TriangleMesh:
    verts, tris, off = [], [], 0
    for m in meshes:
        verts.append(m.vertices)
        tris.append(m.triangles + off)
        off += len(m.vertices)
    return TriangleMesh(np.vstack(verts), np.vstack(tris))


def transformed(mesh: TriangleMesh, scale=1.0, offset=(0.0, 0.0, 0.0)) -> TriangleMesh:
    return TriangleMesh(mesh.vertices * scale + np.asarray(offset, dtype=np.float64), mesh.triangles)


def random_primitive(rng: np.random.Generator) -> TriangleMesh:
    """A random composite of two or three low-poly primitives with random sizes and offsets."""
    parts = []
    for _ in range(int(rng.integers(2, 4))):
        kind = int(rng.integers(0, 3))
        size = rng.uniform(0.2, 1.0, size=3)
        center = rng.uniform(-0.5, 0.5, size=3)
        if kind == 0:
            parts.append(box(size, center))
        elif kind == 1:
            c = cylinder(0.5, 1.0, segments=12)
            parts.append(TriangleMesh(c.vertices * size + center, c.triangles))
        else:
            s = icosphere(1)
            parts.append(TriangleMesh(s.vertices * size / 2 + center, s.triangles))
    return merge(*parts)
