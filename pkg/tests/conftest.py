import numpy as np
import pytest

from mem3d import procedural
from mem3d.formats import ManifestRecord, write_manifest
from mem3d.geometry import normalize_to_unit_cube, write_obj

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def unit_cube():
    return normalize_to_unit_cube(procedural.box())


@pytest.fixture(scope="session")
def sphere():
    return normalize_to_unit_cube(procedural.icosphere(4))


@pytest.fixture(scope="session")
def torus():
    return normalize_to_unit_cube(procedural.torus())


@pytest.fixture
def make_manifest(tmp_path):
    """Write OBJ files for {split: [mesh, ...]} and a manifest referencing them."""

    def _make(splits, name="manifest.csv", extra=()):
        mesh_dir = tmp_path / "meshes"
        mesh_dir.mkdir(exist_ok=True)
        records = []
        for split, meshes in splits.items():
            for i, mesh in enumerate(meshes):
                sid = f"{split}_{i:04d}"
                path = mesh_dir / f"{sid}.obj"
                write_obj(mesh, path)
                records.append(ManifestRecord(sid, path, split))
        records.extend(extra)
        manifest = tmp_path / name
        write_manifest(manifest, records)
        return manifest

    return _make


def random_shapes(count, seed):
    rng = np.random.default_rng(seed)
    return [procedural.random_primitive(rng) for _ in range(count)]
