"""Reading datasets and writing draws, reports and manifests."""

from __future__ import annotations

import csv
import hashlib
import io
import json
from pathlib import Path

import numpy as np

from .errors import DataError


def fmt(x: float) -> str:
    """Shortest decimal string that parses back to the same double."""
    return repr(float(x))


def canonical_bytes(raw: bytes) -> bytes:
    return raw.replace(b"\r\n", b"\n").replace(b"\r", b"\n")


def dataset_digest(raw: bytes) -> str:
    """64-bit BLAKE2b digest (hex) of the newline-normalized CSV bytes."""
    return hashlib.blake2b(canonical_bytes(raw), digest_size=8).hexdigest()


def read_numeric_csv(text: str) -> tuple[list[str], np.ndarray]:
    """Header plus an ``(n, k)`` float array; every column must be numeric."""
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if len(rows) < 2:
        raise DataError("CSV needs a header and at least one data row")
    header = [h.strip() for h in rows[0]]
    try:
        body = np.array([[float(c) for c in r] for r in rows[1:]], dtype=float)
    except ValueError as exc:
        raise DataError(f"non-numeric CSV entry: {exc}") from exc
    if body.ndim != 2 or body.shape[1] != len(header):
        raise DataError("every CSV row must have as many fields as the header")
    if not np.all(np.isfinite(body)):
        raise DataError("CSV contains non-finite values")
    return header, body


def draws_csv(draws: np.ndarray) -> str:
    draws = np.atleast_2d(draws)
    lines = [",".join(f"θ_{k + 1}" for k in range(draws.shape[1]))]
    lines += [",".join(fmt(v) for v in row) for row in draws]
    return "\n".join(lines) + "\n"


def table_csv(header: list[str], rows: list[list]) -> str:
    def cell(v):
        if isinstance(v, (float, np.floating)):
            return fmt(v)
        if isinstance(v, (np.integer,)):
            return str(int(v))
        return str(v)

    out = [",".join(header)]
    out += [",".join(cell(v) for v in r) for r in rows]
    return "\n".join(out) + "\n"


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    return obj


def dumps(obj) -> str:
    """Deterministic JSON; Python's float repr round-trips exactly."""
    return json.dumps(_plain(obj), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def write_text(path: Path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path
