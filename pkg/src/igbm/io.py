"""CSV and manifest writers shared by the command-line tools."""
from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


def fmt(x) -> str:
    """Round-trippable decimal form (17 significant digits)."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.17g}"


def write_csv(path, header: Sequence[str], columns: Iterable) -> Path:
    """Write equal-length columns under ``header``; ``\\n`` line endings."""
    path = Path(path)
    cols = [np.asarray(c) for c in columns]
    if len(cols) != len(header):
        raise ValueError("one column per header field expected")
    n = {c.shape[0] for c in cols}
    if len(n) > 1:
        raise ValueError("columns differ in length")
    lines = [",".join(header)]
    for row in zip(*(c.tolist() for c in cols)):
        lines.append(",".join(fmt(v) for v in row))
    _atomic_write(path, "\n".join(lines) + "\n")
    return path


def read_csv(path) -> tuple[list[str], np.ndarray]:
    text = Path(path).read_text(encoding="utf-8").splitlines()
    header = text[0].split(",")
    rows = [[float(v) for v in line.split(",")] for line in text[1:] if line]
    return header, np.array(rows).reshape(len(rows), len(header))


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=path.suffix)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if np.isfinite(v) else None  # JSON has no NaN
    return obj


def write_json(path, payload) -> Path:
    path = Path(path)
    _atomic_write(path, json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")
    return path
