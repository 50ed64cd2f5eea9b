"""On-disk model artifact: JSON metadata plus a raw little-endian basis blob.

Layout of an artifact directory::

    metadata.json   format version, dimensions, seeds, spectrum, checksum
    basis.f64le     p x k matrix U_k, float64 little-endian, row-major

The checksum is the 8-byte BLAKE2b digest of the blob, hex encoded.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .errors import DataError

FORMAT_VERSION = "1.0"
METADATA_NAME = "metadata.json"
BASIS_NAME = "basis.f64le"


def checksum(blob: bytes) -> str:
    return hashlib.blake2b(blob, digest_size=8).hexdigest()


def basis_to_bytes(basis: np.ndarray) -> bytes:
    return np.ascontiguousarray(basis, dtype="<f8").tobytes(order="C")


def save_artifact(directory: str | Path, metadata: dict, basis: np.ndarray) -> dict:
    """Write the artifact; returns the metadata as stored (with checksum)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    blob = basis_to_bytes(basis)
    meta = dict(metadata)
    meta["format_version"] = FORMAT_VERSION
    meta["basis_shape"] = [int(basis.shape[0]), int(basis.shape[1])]
    meta["checksum"] = checksum(blob)
    (directory / BASIS_NAME).write_bytes(blob)
    (directory / METADATA_NAME).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return meta


def load_artifact(directory: str | Path) -> tuple[dict, np.ndarray]:
    directory = Path(directory)
    try:
        meta = json.loads((directory / METADATA_NAME).read_text())
        blob = (directory / BASIS_NAME).read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read artifact in {directory}: {exc}", code="UNREADABLE_FILE") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"artifact metadata is not valid JSON: {exc}", code="ARTIFACT_CORRUPT") from exc

    version = str(meta.get("format_version", ""))
    major = version.split(".")[0]
    if major != FORMAT_VERSION.split(".")[0]:
        raise DataError(
            f"unsupported artifact format version {version!r} (this build reads {FORMAT_VERSION})",
            code="ARTIFACT_VERSION",
        )
    if checksum(blob) != meta.get("checksum"):
        raise DataError("basis checksum mismatch", code="ARTIFACT_CORRUPT")
    rows, cols = meta["basis_shape"]
    if len(blob) != rows * cols * 8:
        raise DataError(
            f"basis blob holds {len(blob)} bytes, expected {rows * cols * 8}",
            code="ARTIFACT_CORRUPT",
        )
    basis = np.frombuffer(blob, dtype="<f8").reshape(rows, cols).astype(float)
    return meta, basis
