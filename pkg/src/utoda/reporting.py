"""Artifact writers: residual-report JSON, field CSVs, run metadata.

Every writer is atomic (temp file + rename in the target directory) and
byte-deterministic: keys are sorted, floats go through repr via %.17g, and
the one timestamp a run produces lives in run_metadata.json, never in a
report.  That keeps criterion-style "same config, same bytes" comparisons
honest.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigurationError
from .numerics import Grid2D, ResidualReport

FIELD_HEADER = ("site", "ix", "iy", "x", "y", "value")
FIELD_HEADER_T = ("site", "ix", "iy", "x", "y", "tbar", "value")


def atomic_write_text(path: str | Path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _plain(value):
    """Recursively strip numpy scalar types so json stays stdlib-clean."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    return value


def report_document(subcommand: str, cfg_hash: str,
                    reports: list[ResidualReport], extra: dict | None = None) -> dict:
    doc = {
        "version": __version__,
        "subcommand": subcommand,
        "config_sha256": cfg_hash,
        "pass": all(r.passed for r in reports),
        "reports": [_plain(r.to_json()) for r in reports],
    }
    if extra:
        doc.update(_plain(extra))
    return doc


def write_report(path: str | Path, doc: dict) -> Path:
    return atomic_write_text(path, json.dumps(doc, sort_keys=True, indent=2) + "\n")


def write_report_array(path: str | Path, reports: list[ResidualReport]) -> Path:
    body = [_plain(r.to_json()) for r in reports]
    return atomic_write_text(path, json.dumps(body, sort_keys=True, indent=2) + "\n")


def _fmt(v: float) -> str:
    return "%.17g" % float(v)


def write_field_csv(path: str | Path, fields: dict, grid: Grid2D) -> Path:
    """Dump site-indexed (Nx, Ny) arrays as one delimited table.

    ``fields`` maps an integer site (or field slot) to its array; rows come
    out sorted by (site, ix, iy) so identical data gives identical bytes.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(FIELD_HEADER)
    for site in sorted(fields):
        arr = np.asarray(fields[site], dtype=np.float64)
        if arr.shape != (grid.Nx, grid.Ny):
            raise ConfigurationError(
                f"field at site {site} has shape {arr.shape}, "
                f"grid wants {(grid.Nx, grid.Ny)}")
        for ix in range(grid.Nx):
            x = _fmt(grid.xs[ix])
            for iy in range(grid.Ny):
                w.writerow((site, ix, iy, x, _fmt(grid.ys[iy]),
                            _fmt(arr[ix, iy])))
    return atomic_write_text(path, buf.getvalue())


def write_field_csv_t(path: str | Path, fields: dict, xs, ys, ts) -> Path:
    """Same table with the slow-time column; arrays are (Nx, Ny, Nt)."""
    xs = np.asarray(xs)
    ys = np.asarray(ys)
    ts = np.asarray(ts)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(FIELD_HEADER_T)
    for site in sorted(fields):
        arr = np.asarray(fields[site], dtype=np.float64)
        if arr.shape != (len(xs), len(ys), len(ts)):
            raise ConfigurationError(
                f"field at site {site} has shape {arr.shape}, "
                f"expected {(len(xs), len(ys), len(ts))}")
        for ix in range(len(xs)):
            x = _fmt(xs[ix])
            for iy in range(len(ys)):
                y = _fmt(ys[iy])
                for it in range(len(ts)):
                    w.writerow((site, ix, iy, x, y, _fmt(ts[it]),
                                _fmt(arr[ix, iy, it])))
    return atomic_write_text(path, buf.getvalue())


def read_field_csv(path: str | Path) -> tuple[dict, Grid2D]:
    """Rebuild {site: (Nx, Ny) array} and the grid from a field table."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read field table {path}: {exc}")
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != FIELD_HEADER:
        raise ConfigurationError(
            f"{path} is not a field table (header must be "
            f"{','.join(FIELD_HEADER)})")
    sites: dict[int, dict] = {}
    xs: dict[int, float] = {}
    ys: dict[int, float] = {}
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        try:
            site, ix, iy = int(row[0]), int(row[1]), int(row[2])
            x, y, value = float(row[3]), float(row[4]), float(row[5])
        except (ValueError, IndexError):
            raise ConfigurationError(f"{path}:{lineno}: malformed row")
        sites.setdefault(site, {})[(ix, iy)] = value
        xs[ix] = x
        ys[iy] = y
    if not sites:
        raise ConfigurationError(f"{path} holds no field rows")
    Nx, Ny = max(xs) + 1, max(ys) + 1
    if sorted(xs) != list(range(Nx)) or sorted(ys) != list(range(Ny)):
        raise ConfigurationError(f"{path} does not cover a full grid")
    hx = (xs[Nx - 1] - xs[0]) / (Nx - 1)
    hy = (ys[Ny - 1] - ys[0]) / (Ny - 1)
    grid = Grid2D(x0=xs[0], y0=ys[0], hx=hx, hy=hy, Nx=Nx, Ny=Ny)
    fields = {}
    for site, table in sites.items():
        if len(table) != Nx * Ny:
            raise ConfigurationError(
                f"{path}: site {site} has {len(table)} rows, grid wants {Nx * Ny}")
        arr = np.empty((Nx, Ny))
        for (ix, iy), v in table.items():
            arr[ix, iy] = v
        fields[site] = arr
    return fields, grid


def csv_header(path: str | Path) -> tuple:
    with open(path, encoding="utf-8", newline="") as fh:
        row = next(csv.reader(fh), None)
    return tuple(row) if row else ()


def read_field_csv_t(path: str | Path) -> tuple[dict, np.ndarray, np.ndarray, np.ndarray]:
    """Rebuild {site: (Nx, Ny, Nt) array} plus axes from a slow-time table."""
    path = Path(path)
    rows = list(csv.reader(io.StringIO(path.read_text(encoding="utf-8"))))
    if not rows or tuple(rows[0]) != FIELD_HEADER_T:
        raise ConfigurationError(
            f"{path} is not a slow-time field table (header must be "
            f"{','.join(FIELD_HEADER_T)})")
    sites: dict[int, list] = {}
    xs: dict[int, float] = {}
    ys: dict[int, float] = {}
    ts: list[float] = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        try:
            site, ix, iy = int(row[0]), int(row[1]), int(row[2])
            x, y, t, value = (float(v) for v in row[3:7])
        except (ValueError, IndexError):
            raise ConfigurationError(f"{path}:{lineno}: malformed row")
        if t not in ts:
            ts.append(t)
        sites.setdefault(site, []).append((ix, iy, ts.index(t), value))
        xs[ix] = x
        ys[iy] = y
    if not sites:
        raise ConfigurationError(f"{path} holds no field rows")
    Nx, Ny, Nt = max(xs) + 1, max(ys) + 1, len(ts)
    fields = {}
    for site, entries in sites.items():
        arr = np.full((Nx, Ny, Nt), np.nan)
        for ix, iy, it, v in entries:
            arr[ix, iy, it] = v
        fields[site] = arr
    ax = np.array([xs[i] for i in range(Nx)])
    ay = np.array([ys[i] for i in range(Ny)])
    return fields, ax, ay, np.array(ts)


def write_run_metadata(outdir: str | Path, subcommand: str, cfg_hash: str,
                       seed: int, flags: dict | None = None) -> Path:
    """The only artifact that carries a wall-clock timestamp."""
    doc = {
        "version": __version__,
        "subcommand": subcommand,
        "config_sha256": cfg_hash,
        "seed": seed,
        "flags": _plain(flags or {}),
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    return atomic_write_text(Path(outdir) / "run_metadata.json",
                             json.dumps(doc, sort_keys=True, indent=2) + "\n")


def print_report_lines(reports: list[ResidualReport], stream=None) -> None:
    import sys
    stream = stream or sys.stdout
    for r in reports:
        status = "PASS" if r.passed else "FAIL"
        print(f"{status} {r.name}: max |r| = {r.max_abs:.3e} "
              f"(tol {r.tol:.1e})", file=stream)
