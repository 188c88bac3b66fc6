"""
File-level persistence helpers: JSON manifests, raw little-endian float64 arrays and hashing.
"""
import hashlib
import logging
from pathlib import Path
from typing import Iterable, List, Type, TypeVar

import numpy as np
from pydantic import BaseModel, ValidationError

from exceptions import DatasetFormatError
from schemas import ArtifactRecord, RunManifest

logger = logging.getLogger(__name__)

# All binary artifacts are little-endian 64-bit floats
F64 = np.dtype("<f8")

ModelT = TypeVar("ModelT", bound=BaseModel)


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path: Path) -> str:
    """Hash a file in 1 MiB chunks."""
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def f64_bytes(*arrays: np.ndarray) -> bytes:
    """Concatenate arrays into one little-endian float64 buffer."""
    if not arrays:
        return b""
    flat = np.concatenate([np.asarray(a, dtype=np.float64).ravel() for a in arrays])
    return flat.astype(F64, copy=False).tobytes()


def write_f64(path: Path, *arrays: np.ndarray) -> str:
    """Write arrays back to back and return the sha256 of the written bytes."""
    data = f64_bytes(*arrays)
    Path(path).write_bytes(data)
    return sha256_bytes(data)


def read_f64(path: Path, count: int, item_id: str) -> np.ndarray:
    """
    Read exactly `count` float64 values.

    Raises DatasetFormatError tagged with `item_id` when the file is
    missing or holds a different number of bytes.
    """
    path = Path(path)
    if not path.exists():
        raise DatasetFormatError(f"missing file {path.name}", item_id)
    data = path.read_bytes()
    expected = count * F64.itemsize
    if len(data) != expected:
        raise DatasetFormatError(
            f"{path.name} holds {len(data)} bytes, expected {expected} (truncated or foreign file)", item_id
        )
    return np.frombuffer(data, dtype=F64).astype(np.float64)


def write_model(path: Path, model: BaseModel) -> str:
    """Write a pydantic model as indented JSON and return its sha256."""
    data = model.model_dump_json(indent=2).encode("utf-8")
    Path(path).write_bytes(data)
    return sha256_bytes(data)


def read_model(path: Path, model_cls: Type[ModelT], error_cls: Type[Exception] = DatasetFormatError) -> ModelT:
    """Parse a JSON manifest, converting parse failures to `error_cls`."""
    path = Path(path)
    if not path.exists():
        raise error_cls(f"Manifest not found: {path}")
    try:
        return model_cls.model_validate_json(path.read_text(encoding="utf-8"))
    except ValidationError as e:
        raise error_cls(f"Malformed manifest {path}: {e}") from e


def artifact_records(output_dir: Path, paths: Iterable[Path]) -> List[ArtifactRecord]:
    """Hash every artifact, recording paths relative to `output_dir`."""
    output_dir = Path(output_dir)
    records = []
    for path in sorted(Path(p) for p in paths):
        records.append(ArtifactRecord(
            path=path.relative_to(output_dir).as_posix(),
            sha256=sha256_file(path),
            bytes=path.stat().st_size,
        ))
    return records


def write_run_manifest(output_dir: Path, manifest: RunManifest) -> Path:
    """Write run_manifest.json next to the artifacts it describes."""
    path = Path(output_dir) / "run_manifest.json"
    write_model(path, manifest)
    logger.info(f"Run manifest written: {path} ({len(manifest.artifacts)} artifacts)")
    return path
