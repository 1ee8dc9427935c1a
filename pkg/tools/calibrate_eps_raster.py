"""One-time calibration of the raster noise floor used by the LFD acceptance check.

Each mesh is re-rendered after sub-pixel vertex jitter (phase shifts of the
sampling grid, supersampling the ways a silhouette edge can land between
pixel centres). The largest LFD seen against the unjittered mesh at the
smallest step (1/8 px) is the discretization noise floor; rounded up to the
next 0.05 it is frozen as EPS_RASTER in tests/test_acceptance.py.

Result on 2026-10-16 (seed 0): floor 0.7143 (cube) -> EPS_RASTER = 0.75.
"""

import math

import numpy as np

from mem3d import procedural
from mem3d.descriptors import lfd_distance, light_field_descriptor
from mem3d.geometry import TriangleMesh, normalize_to_unit_cube
from mem3d.rasterizer import PIXELS_PER_UNIT

SUBSTEPS = 8


def meshes():
    yield "cube", procedural.box()
    yield "icosphere", procedural.icosphere(3)
    yield "torus", procedural.torus()
    yield "bar", procedural.merge(procedural.box((1, 0.3, 0.3)), procedural.box((0.3, 1, 0.3), (0.3, 0, 0)))


def main():
    rng = np.random.default_rng(0)
    worst = floor = 0.0
    for name, mesh in meshes():
        base = normalize_to_unit_cube(mesh)
        ref = light_field_descriptor(base)
        for k in range(1, SUBSTEPS):
            # shift every vertex by k/SUBSTEPS of a pixel in a random direction
            step = rng.normal(size=base.vertices.shape)
            step /= np.linalg.norm(step, axis=1, keepdims=True)
            moved = TriangleMesh(base.vertices + step * (k / SUBSTEPS) / PIXELS_PER_UNIT * 0.5, base.triangles)
            d = lfd_distance(light_field_descriptor(normalize_to_unit_cube(moved)), ref)
            worst = max(worst, d)
            if k == 1:
                floor = max(floor, d)
            print(f"{name:10s} shift {k}/{SUBSTEPS} px  LFD {d:.4f}")
    print(f"worst {worst:.4f}  1/{SUBSTEPS}-px floor {floor:.4f}  EPS_RASTER {math.ceil(floor * 20) / 20:.2f}")


if __name__ == "__main__":
    main()
