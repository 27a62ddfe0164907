"""Rating files, study layouts and atomic artifact writes.

Rating CSVs have a ``time,value`` header (or none) and a uniform time step.
A study layout is a directory with ``targets/<stim>.csv`` and
``perceivers/<id>/<stim>.csv``.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Dict, Iterable, List, Sequence

import numpy as np

from .core import SampledFunction, UniformGrid

__all__ = [
    "InputError",
    "fmt",
    "read_rating",
    "write_rating",
    "write_csv",
    "write_json",
    "read_layout",
    "write_layout",
]

SPACING_RTOL = 1e-6


class InputError(ValueError):
    """Malformed input file or layout; the message names the offender."""


def fmt(v) -> str:
    """17 significant digits: enough for every double to round-trip."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def _atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_rating(path) -> SampledFunction:
    """Read a two-column rating file onto its native uniform grid."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(f"{path}: cannot read ({exc.strerror})") from exc
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if rows and [c.strip().lower() for c in rows[0]] == ["time", "value"]:
        rows = rows[1:]
    if len(rows) < 3:
        raise InputError(f"{path}: need at least 3 rows, found {len(rows)}")
    try:
        data = np.array([[float(a), float(b)] for a, b in rows])
    except ValueError as exc:
        raise InputError(f"{path}: expected two numeric columns ({exc})") from exc
    t, v = data[:, 0], data[:, 1]
    if not (np.all(np.isfinite(t)) and np.all(np.isfinite(v))):
        raise InputError(f"{path}: non-finite time or value")
    dt = np.diff(t)
    if np.any(dt <= 0):
        raise InputError(f"{path}: time must be strictly increasing")
    step = (t[-1] - t[0]) / (len(t) - 1)
    if np.max(np.abs(dt - step)) > SPACING_RTOL * step:
        raise InputError(f"{path}: time points are not equally spaced")
    return SampledFunction(UniformGrid(float(t[0]), float(t[-1]), len(t)), v)


def _csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(c) for c in r])
    return buf.getvalue()


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    _atomic_write(Path(path), _csv_text(header, rows))


def write_rating(path, f: SampledFunction, header=("time", "value")) -> None:
    write_csv(path, header, zip(f.grid.points(), f.values))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def write_json(path, obj) -> None:
    """Non-finite floats become ``null``; key order is kept as built."""
    _atomic_write(Path(path), json.dumps(_jsonable(obj), indent=2) + "\n")


def read_layout(root):
    """Load ``targets/`` and ``perceivers/<id>/`` under ``root``.

    Every perceiver must rate every target stimulus and nothing else.

    Returns
    -------
    targets : dict
        Stimulus name to target rating.
    perceivers : dict
        Perceiver id to a dict of stimulus name to rating.
    """
    root = Path(root)
    tdir, pdir = root / "targets", root / "perceivers"
    if not tdir.is_dir():
        raise InputError(f"{root}: missing targets/ directory")
    if not pdir.is_dir():
        raise InputError(f"{root}: missing perceivers/ directory")
    targets = {p.stem: read_rating(p) for p in sorted(tdir.glob("*.csv"))}
    if not targets:
        raise InputError(f"{tdir}: no target files")
    perceivers: Dict[str, Dict[str, SampledFunction]] = {}
    for d in sorted(p for p in pdir.iterdir() if p.is_dir()):
        files = {p.stem: p for p in sorted(d.glob("*.csv"))}
        extra = sorted(set(files) - set(targets))
        if extra:
            raise InputError(f"{d}: stimulus {extra[0]!r} has no target file")
        missing = sorted(set(targets) - set(files))
        if missing:
            raise InputError(f"{d}: missing stimulus {missing[0]!r}")
        perceivers[d.name] = {s: read_rating(files[s]) for s in targets}
    if not perceivers:
        raise InputError(f"{pdir}: no perceiver directories")
    return targets, perceivers


def write_layout(root, targets: Dict[str, SampledFunction],
                 perceivers: Dict[str, Dict[str, SampledFunction]]) -> List[Path]:
    root = Path(root)
    written = []
    for stim, f in targets.items():
        p = root / "targets" / f"{stim}.csv"
        write_rating(p, f)
        written.append(p)
    for pid, ratings in perceivers.items():
        for stim, f in ratings.items():
            p = root / "perceivers" / pid / f"{stim}.csv"
            write_rating(p, f)
            written.append(p)
    return written
