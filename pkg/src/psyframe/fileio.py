"""Line-delimited JSON file helpers shared by dataset, weights, and session files.

Every artifact file is a manifest line followed by record lines, one JSON
object per line. Floats round-trip bit-exactly through the shortest-repr
encoding used by the json module; arrays that must stay compact are carried
as base64 of their little-endian float64 bytes.
"""

from __future__ import annotations

import base64
import hashlib
import json
from pathlib import Path
from typing import Any, Iterable, Iterator

import numpy as np


def dump_line(obj: dict[str, Any]) -> str:
    """Canonical single-line encoding: insertion order, compact separators."""
    return json.dumps(obj, separators=(",", ":"), allow_nan=False)


def write_ndjson(path: str | Path, lines: Iterable[dict[str, Any]]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for obj in lines:
            fh.write(dump_line(obj))
            fh.write("\n")


def read_ndjson(path: str | Path) -> Iterator[dict[str, Any]]:
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: malformed record: {exc}") from exc


def read_manifest(path: str | Path, expected_format: str) -> tuple[dict[str, Any], Iterator[dict[str, Any]]]:
    """Read the first line as a manifest, check its format tag, return the rest."""
    records = read_ndjson(path)
    try:
        manifest = next(records)
    except StopIteration:
        raise ValueError(f"{path}: empty file") from None
    if manifest.get("format") != expected_format:
        raise ValueError(
            f"{path}: expected format {expected_format!r}, found {manifest.get('format')!r}"
        )
    return manifest, records


def encode_array(name: str, a: np.ndarray) -> dict[str, Any]:
    a = np.ascontiguousarray(a, dtype=np.float64)
    payload = base64.b64encode(a.astype("<f8", copy=False).tobytes()).decode("ascii")
    return {"type": "array", "name": name, "shape": list(a.shape), "dtype": "float64", "data": payload}


def decode_array(record: dict[str, Any]) -> np.ndarray:
    if record.get("dtype") != "float64":
        raise ValueError(f"unsupported array dtype {record.get('dtype')!r}")
    raw = base64.b64decode(record["data"])
    a = np.frombuffer(raw, dtype="<f8").astype(np.float64)
    return a.reshape(record["shape"])


def sha256_file(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()
