"""On-disk formats: LFD1 descriptor caches, EMB1 embedding files and CSV manifests.

All binary layouts are little-endian.

LFD1::

    b"LFD1" | u32 count | u32 views (=10) | u32 features (=45)
    count x ( u32 id_len | id (UTF-8) | 450 x f32 )

EMB1 (row ids live in a sidecar ``<path>.ids``, one UTF-8 id per line)::

    b"EMB1" | u32 count | u32 dim | count*dim x f32
"""

from __future__ import annotations

import csv
import os
import re
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .descriptors import DESCRIPTOR_SIZE, N_FEATURES, LightFieldDescriptor
from .errors import DataError
from .metrics import EmbeddingSet
from .rasterizer import N_VIEWS

LFD_MAGIC = b"LFD1"
EMB_MAGIC = b"EMB1"
SPLITS = ("train", "test", "gen")
MANIFEST_COLUMNS = ("shape_id", "mesh_path", "split", "prompt", "label")

_U32 = struct.Struct("<I")
_HEADER = struct.Struct("<4sIII")
_EMB_HEADER = struct.Struct("<4sII")
_POSE_RE = re.compile(r"^(.*)::yaw(\d{3})$")


def pose_tag(shape_id: str, pose: int) -> str:
    return f"{shape_id}::yaw{pose:03d}"


def split_pose_tag(tag: str) -> tuple[str, int | None]:
    m = _POSE_RE.match(tag)
    if m is None:
        return tag, None
    return m.group(1), int(m.group(2))


def encode_lfd(entries) -> bytes:
    """Serialize (id, descriptor) pairs; the id is written verbatim."""
    parts = [_HEADER.pack(LFD_MAGIC, len(entries), N_VIEWS, N_FEATURES)]
    for key, desc in entries:
        raw = key.encode("utf-8")
        flat = desc.flat() if isinstance(desc, LightFieldDescriptor) else np.asarray(desc).reshape(-1)
        parts.append(_U32.pack(len(raw)))
        parts.append(raw)
        parts.append(np.ascontiguousarray(flat, dtype="<f4").tobytes())
    return b"".join(parts)


def decode_lfd(data: bytes) -> list[tuple[str, np.ndarray]]:
    if len(data) < _HEADER.size:
        raise DataError("LFD1 file truncated: header incomplete")
    magic, count, views, features = _HEADER.unpack_from(data, 0)
    if magic != LFD_MAGIC:
        raise DataError(f"not an LFD1 file (magic {magic!r})")
    if views != N_VIEWS or features != N_FEATURES:
        raise DataError(f"LFD1 layout {views}x{features} is not {N_VIEWS}x{N_FEATURES}")
    pos = _HEADER.size
    out = []
    payload = DESCRIPTOR_SIZE * 4
    for i in range(count):
        if pos + 4 > len(data):
            raise DataError(f"LFD1 file truncated at entry {i}")
        (n,) = _U32.unpack_from(data, pos)
        pos += 4
        if pos + n + payload > len(data):
            raise DataError(f"LFD1 file truncated at entry {i}")
        try:
            key = data[pos : pos + n].decode("utf-8")
        except UnicodeDecodeError:
            raise DataError(f"LFD1 entry {i} has an invalid UTF-8 id") from None
        pos += n
        vec = np.frombuffer(data, dtype="<f4", count=DESCRIPTOR_SIZE, offset=pos).astype(np.float32)
        pos += payload
        out.append((key, vec.reshape(N_VIEWS, N_FEATURES)))
    if pos != len(data):
        raise DataError(f"LFD1 file has {len(data) - pos} trailing bytes")
    return out


def write_lfd(path, entries) -> None:
    Path(path).write_bytes(encode_lfd(entries))


def read_lfd(path) -> list[tuple[str, np.ndarray]]:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read descriptor cache {path}: {exc}") from exc
    try:
        return decode_lfd(data)
    except DataError as exc:
        raise DataError(f"{path}: {exc}") from None


def ids_path(path) -> Path:
    return Path(os.fspath(path) + ".ids")


def write_emb(path, emb: EmbeddingSet) -> None:
    values = np.ascontiguousarray(emb.values, dtype="<f4")
    count, dim = values.shape
    Path(path).write_bytes(_EMB_HEADER.pack(EMB_MAGIC, count, dim) + values.tobytes())
    ids_path(path).write_bytes("".join(f"{k}\n" for k in emb.ids).encode("utf-8"))


def read_emb(path) -> EmbeddingSet:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read embedding file {path}: {exc}") from exc
    if len(data) < _EMB_HEADER.size:
        raise DataError(f"{path}: EMB1 header incomplete")
    magic, count, dim = _EMB_HEADER.unpack_from(data, 0)
    if magic != EMB_MAGIC:
        raise DataError(f"{path}: not an EMB1 file (magic {magic!r})")
    if dim == 0:
        raise DataError(f"{path}: EMB1 dimension is zero")
    expected = _EMB_HEADER.size + count * dim * 4
    if len(data) != expected:
        raise DataError(f"{path}: EMB1 payload is {len(data) - _EMB_HEADER.size} bytes, expected {count * dim * 4}")
    values = np.frombuffer(data, dtype="<f4", offset=_EMB_HEADER.size).astype(np.float32).reshape(count, dim)
    sidecar = ids_path(path)
    try:
        ids = sidecar.read_bytes().decode("utf-8").splitlines()
    except OSError as exc:
        raise DataError(f"cannot read id sidecar {sidecar}: {exc}") from exc
    except UnicodeDecodeError:
        raise DataError(f"{sidecar}: ids are not valid UTF-8") from None
    if len(ids) != count:
        raise DataError(f"{sidecar}: {len(ids)} ids for {count} embedding rows")
    return EmbeddingSet(tuple(ids), values)


@dataclass(frozen=True)
class ManifestRecord:
    shape_id: str
    mesh_path: Path
    split: str
    prompt: str = ""
    label: str = ""


def read_manifest(path) -> list[ManifestRecord]:
    """UTF-8 CSV with header shape_id,mesh_path,split,prompt,label.

    Relative mesh paths resolve against the manifest's directory.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise DataError(f"cannot read manifest {path}: {exc}") from exc
    reader = csv.DictReader(text.splitlines())
    missing = [c for c in ("shape_id", "mesh_path", "split") if c not in (reader.fieldnames or [])]
    if missing:
        raise DataError(f"{path}: manifest is missing columns {missing}")
    records, seen = [], set()
    for lineno, row in enumerate(reader, start=2):
        sid = (row.get("shape_id") or "").strip()
        split = (row.get("split") or "").strip()
        mesh = (row.get("mesh_path") or "").strip()
        if not sid or not mesh:
            raise DataError(f"{path}:{lineno}: shape_id and mesh_path are required")
        if split not in SPLITS:
            raise DataError(f"{path}:{lineno}: split must be one of {SPLITS}, got {split!r}")
        if sid in seen:
            raise DataError(f"{path}:{lineno}: duplicate shape_id {sid!r}")
        if split_pose_tag(sid)[1] is not None:
            raise DataError(f"{path}:{lineno}: shape_id {sid!r} uses the reserved '::yaw' suffix")
        seen.add(sid)
        mp = Path(mesh)
        if not mp.is_absolute():
            mp = path.parent / mp
        records.append(
            ManifestRecord(sid, mp, split, (row.get("prompt") or ""), (row.get("label") or ""))
        )
    return records


def write_manifest(path, records) -> None:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(MANIFEST_COLUMNS)
        for r in records:
            mp = Path(r.mesh_path)
            try:
                mp = mp.relative_to(path.parent)
            except ValueError:
                pass
            w.writerow([r.shape_id, mp.as_posix(), r.split, r.prompt, r.label])
