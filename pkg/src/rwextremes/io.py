"""Reading and writing paths, exact laws and reports."""

from __future__ import annotations

import csv
import io
import json
import os
from pathlib import Path

import numpy as np

from .walk import WalkPath

OUTPUT_DIR_ENV = "RWEXTREMES_OUTPUT_DIR"


def default_output_dir() -> Path:
    return Path(os.environ.get(OUTPUT_DIR_ENV, "."))


def resolve_output(path: str | None) -> Path | None:
    """Relative output paths are placed under the directory named by ``RWEXTREMES_OUTPUT_DIR``."""
    if path is None:
        return None
    p = Path(path)
    return p if p.is_absolute() else default_output_dir() / p


def path_to_csv(path: WalkPath) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x"])
    for v in path.increments.tolist():
        w.writerow([repr(v) if isinstance(v, float) else v])
    return buf.getvalue()


def _parse_number(text: str):
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        return float(text)


def path_from_csv(text: str) -> WalkPath:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or [c.strip() for c in rows[0]] != ["x"]:
        raise ValueError("path CSV must have the single header 'x'")
    vals = [_parse_number(r[0]) for r in rows[1:] if r and r[0].strip()]
    if any(isinstance(v, float) for v in vals):
        return WalkPath.from_increments(np.array(vals, dtype=float))
    return WalkPath.from_increments(np.array(vals, dtype=np.int64))


def path_to_json(path: WalkPath) -> str:
    return json.dumps(path.to_dict())


def path_from_json(text: str) -> WalkPath:
    data = json.loads(text)
    if "increments" not in data:
        raise ValueError("path JSON needs an 'increments' list")
    vals = data["increments"]
    if any(isinstance(v, float) for v in vals):
        return WalkPath.from_increments(np.array(vals, dtype=float))
    return WalkPath.from_increments(np.array(vals, dtype=np.int64))


def read_path(filename: str | Path) -> WalkPath:
    """Load a path from ``.csv`` or ``.json`` by extension."""
    p = Path(filename)
    text = p.read_text()
    if p.suffix.lower() == ".json":
        return path_from_json(text)
    return path_from_csv(text)


def dumps(obj) -> str:
    """Deterministic JSON (sorted keys) so identical runs give identical bytes."""
    return json.dumps(obj, sort_keys=True, indent=2, default=_default)


def _default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    return str(o)


def rows_to_csv(header: list[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in r])
    return buf.getvalue()


def write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
