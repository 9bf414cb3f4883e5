"""Run configuration: JSON loading, schema validation, canonical hashing.

The CLI consumes one JSON object per run.  Validation is a small hand-rolled
walk (no schema library) so every complaint can carry the JSON-pointer path
of the offending value; the command line prints that path verbatim and exits
with code 2.  Unknown keys are rejected everywhere, which keeps typos from
silently becoming defaults.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

from .errors import ConfigurationError
from .flows import coefficient_function
from .lattice import LatticeConfig
from .numerics import Grid2D

COEFFICIENT_KINDS = ("poly", "exp", "const")


def _fail(msg: str, pointer: str):
    raise ConfigurationError(msg, pointer=pointer or None)


def _check_keys(obj: dict, allowed: tuple, pointer: str):
    for k in obj:
        if k not in allowed:
            _fail(f"unknown key {k!r} (allowed: {', '.join(allowed)})",
                  f"{pointer}/{k}")


def _get_int(obj: dict, key: str, pointer: str, lo: int | None = None,
             hi: int | None = None, default=None):
    if key not in obj:
        if default is not None:
            return default
        _fail(f"missing required integer {key!r}", f"{pointer}/{key}")
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, int):
        _fail(f"{key!r} must be an integer", f"{pointer}/{key}")
    if lo is not None and v < lo:
        _fail(f"{key!r} must be >= {lo}, got {v}", f"{pointer}/{key}")
    if hi is not None and v > hi:
        _fail(f"{key!r} must be <= {hi}, got {v}", f"{pointer}/{key}")
    return v


def _get_number(obj: dict, key: str, pointer: str, default=None,
                positive: bool = False):
    if key not in obj:
        if default is not None:
            return default
        _fail(f"missing required number {key!r}", f"{pointer}/{key}")
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        _fail(f"{key!r} must be a number", f"{pointer}/{key}")
    if positive and not v > 0:
        _fail(f"{key!r} must be positive, got {v}", f"{pointer}/{key}")
    return float(v)


def _number_list(value, pointer: str) -> tuple:
    if not isinstance(value, list) or not value:
        _fail("expected a non-empty array of numbers", pointer)
    out = []
    for i, v in enumerate(value):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            _fail("expected a number", f"{pointer}/{i}")
        out.append(float(v))
    return tuple(out)


@dataclass(frozen=True)
class AlgebraSpec:
    series: str
    n: int


@dataclass(frozen=True)
class CoefficientSpec:
    """One Lagrangian block: which side/grade/site, and its scalar profile."""

    side: str
    grade: int
    site: int
    kind: str
    params: dict

    def build(self) -> Callable[[float], float]:
        return coefficient_function(self.kind, **self.params)


@dataclass(frozen=True)
class FrameSpec:
    """Wronskian frame data; amps default to the origin normalization."""

    k: int
    modes: tuple
    amps: tuple | None = None

    def build(self):
        from .solitons import WronskianFrame, normalized_frame
        if self.amps is None:
            return normalized_frame(self.k, self.modes)
        return WronskianFrame(self.k, self.modes, self.amps)


@dataclass(frozen=True)
class TimeFlowSpec:
    k: int
    frame: FrameSpec
    span: tuple = (-0.04, 0.04)
    steps: int = 8
    sites: tuple | None = None  # (u_site, v_site) for the nonlocal-pair check


@dataclass(frozen=True)
class RunConfig:
    """Validated run configuration plus the raw document it came from.

    Sections are optional at parse time; each subcommand demands what it
    needs through :meth:`require`, so a missing-grid complaint points at
    "/grid" no matter which pipeline noticed it.
    """

    algebra: AlgebraSpec | None = None
    m1: int | None = None
    m2: int | None = None
    coefficients: tuple = ()
    grid: Grid2D | None = None
    time_flow: TimeFlowSpec | None = None
    s: tuple | None = None
    sbar: tuple | None = None
    tasks: tuple | None = None
    seed: int = 0
    out: str | None = None
    tol: float | None = None
    raw: dict = field(default_factory=dict)

    def require(self, name: str):
        value = getattr(self, name)
        if value is None:
            _fail(f"missing required section {name!r}", f"/{name}")
        return value

    def sha256(self) -> str:
        return config_hash(self.raw)

    def lattice_config(self, m1: int | None = None, m2: int | None = None) -> LatticeConfig:
        """Assemble the lattice coefficient table for this run."""
        alg = self.require("algebra")
        m1 = m1 if m1 is not None else (self.m1 or 1)
        m2 = m2 if m2 is not None else (self.m2 or 1)
        phi: dict = {}
        phibar: dict = {}
        for c in self.coefficients:
            table = phi if c.side == "minus" else phibar
            if (c.grade, c.site) in table:
                _fail(f"duplicate coefficient block side={c.side} "
                      f"grade={c.grade} site={c.site}", "/coefficients")
            table[(c.grade, c.site)] = c.build()
        return LatticeConfig.build(alg.n, m1, m2, phi=phi, phibar=phibar)


def config_hash(data: dict) -> str:
    """sha256 of the canonical (sorted-keys, tight-separator) JSON form."""
    canon = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def _parse_algebra(obj, pointer="/algebra") -> AlgebraSpec:
    if not isinstance(obj, dict):
        _fail("algebra must be an object {series, n}", pointer)
    _check_keys(obj, ("series", "n"), pointer)
    series = obj.get("series", "A")
    if series != "A":
        _fail(f"only the A series is constructible, got {series!r}",
              f"{pointer}/series")
    n = _get_int(obj, "n", pointer, lo=1)
    return AlgebraSpec(series=series, n=n)


def _parse_coefficients(items, pointer="/coefficients") -> tuple:
    if not isinstance(items, list):
        _fail("coefficients must be an array", pointer)
    out = []
    for i, item in enumerate(items):
        p = f"{pointer}/{i}"
        if not isinstance(item, dict):
            _fail("coefficient spec must be an object", p)
        _check_keys(item, ("side", "grade", "site", "kind", "params"), p)
        side = item.get("side")
        if side not in ("plus", "minus"):
            _fail(f"side must be 'plus' or 'minus', got {side!r}", f"{p}/side")
        grade = _get_int(item, "grade", p, lo=1)
        site = _get_int(item, "site", p, lo=1)
        kind = item.get("kind")
        if kind not in COEFFICIENT_KINDS:
            _fail(f"kind must be one of {COEFFICIENT_KINDS}, got {kind!r}",
                  f"{p}/kind")
        params = item.get("params", {})
        if not isinstance(params, dict):
            _fail("params must be an object", f"{p}/params")
        spec = CoefficientSpec(side=side, grade=grade, site=site, kind=kind,
                               params=params)
        try:
            spec.build()
        except (ConfigurationError, KeyError, TypeError, ValueError) as exc:
            _fail(f"bad parameters for kind {kind!r}: {exc}", f"{p}/params")
        out.append(spec)
    return tuple(out)


def _parse_grid(obj, pointer="/grid") -> Grid2D:
    if not isinstance(obj, dict):
        _fail("grid must be an object {x0, y0, hx, hy, Nx, Ny}", pointer)
    _check_keys(obj, ("x0", "y0", "hx", "hy", "Nx", "Ny"), pointer)
    return Grid2D(
        x0=_get_number(obj, "x0", pointer, default=-1.0),
        y0=_get_number(obj, "y0", pointer, default=-1.0),
        hx=_get_number(obj, "hx", pointer, default=0.01, positive=True),
        hy=_get_number(obj, "hy", pointer, default=0.01, positive=True),
        Nx=_get_int(obj, "Nx", pointer, lo=5, default=201),
        Ny=_get_int(obj, "Ny", pointer, lo=5, default=201),
    )


def _parse_frame(obj, pointer) -> FrameSpec:
    if not isinstance(obj, dict):
        _fail("frame must be an object {k, modes, amps}", pointer)
    _check_keys(obj, ("k", "modes", "amps"), pointer)
    k = _get_int(obj, "k", pointer, lo=2)
    if "modes" not in obj:
        _fail("missing required array 'modes'", f"{pointer}/modes")
    modes = _number_list(obj["modes"], f"{pointer}/modes")
    amps = None
    if "amps" in obj:
        amps = _number_list(obj["amps"], f"{pointer}/amps")
        if len(amps) != len(modes):
            _fail(f"amps length {len(amps)} != modes length {len(modes)}",
                  f"{pointer}/amps")
    return FrameSpec(k=k, modes=modes, amps=amps)


def _parse_time_flow(obj, pointer="/time_flow") -> TimeFlowSpec:
    if not isinstance(obj, dict):
        _fail("time_flow must be an object {k, frame, ...}", pointer)
    _check_keys(obj, ("k", "frame", "span", "steps", "sites"), pointer)
    if "frame" not in obj:
        _fail("missing required object 'frame'", f"{pointer}/frame")
    frame = _parse_frame(obj["frame"], f"{pointer}/frame")
    k = _get_int(obj, "k", pointer, lo=2, default=frame.k)
    if k != frame.k:
        _fail(f"time_flow k={k} disagrees with frame k={frame.k}",
              f"{pointer}/k")
    span = (-0.04, 0.04)
    if "span" in obj:
        span = _number_list(obj["span"], f"{pointer}/span")
        if len(span) != 2 or not span[1] > span[0]:
            _fail("span must be an increasing pair [t0, t1]", f"{pointer}/span")
    steps = _get_int(obj, "steps", pointer, lo=2, default=8)
    sites = None
    if "sites" in obj:
        raw = obj["sites"]
        if not (isinstance(raw, list) and len(raw) == 2
                and all(isinstance(v, int) and not isinstance(v, bool) for v in raw)):
            _fail("sites must be a pair of integers [u_site, v_site]",
                  f"{pointer}/sites")
        sites = (raw[0], raw[1])
    return TimeFlowSpec(k=k, frame=frame, span=(span[0], span[1]),
                        steps=steps, sites=sites)


def _parse_pattern(value, pointer: str, n: int | None) -> tuple:
    if not isinstance(value, list):
        _fail("pattern must be an array of 0/1 entries", pointer)
    for i, v in enumerate(value):
        if isinstance(v, bool) or v not in (0, 1):
            _fail("pattern entries must be 0 or 1", f"{pointer}/{i}")
    if n is not None and len(value) != n - 1:
        _fail(f"pattern must have length n-1 = {n - 1}, got {len(value)}",
              pointer)
    return tuple(int(v) for v in value)


_TOP_KEYS = ("algebra", "m1", "m2", "coefficients", "grid", "time_flow",
             "s", "sbar", "tasks", "seed", "out", "tol")


def parse_config(data: Any) -> RunConfig:
    """Validate a decoded JSON document into a :class:`RunConfig`."""
    if not isinstance(data, dict):
        _fail("configuration must be a JSON object", "")
    _check_keys(data, _TOP_KEYS, "")

    algebra = _parse_algebra(data["algebra"]) if "algebra" in data else None
    m1 = _get_int(data, "m1", "", lo=1) if "m1" in data else None
    m2 = _get_int(data, "m2", "", lo=1) if "m2" in data else None
    coefficients = _parse_coefficients(data.get("coefficients", []))
    grid = _parse_grid(data["grid"]) if "grid" in data else None
    time_flow = _parse_time_flow(data["time_flow"]) if "time_flow" in data else None
    n = algebra.n if algebra else None
    s = _parse_pattern(data["s"], "/s", n) if "s" in data else None
    sbar = _parse_pattern(data["sbar"], "/sbar", n) if "sbar" in data else None

    tasks = None
    if "tasks" in data:
        raw = data["tasks"]
        if not isinstance(raw, list) or not all(isinstance(t, str) for t in raw):
            _fail("tasks must be an array of strings", "/tasks")
        tasks = tuple(raw)

    seed = _get_int(data, "seed", "", lo=0, default=0)
    out = data.get("out")
    if out is not None and not isinstance(out, str):
        _fail("out must be a string path", "/out")
    tol = _get_number(data, "tol", "", positive=True) if "tol" in data else None

    for spec in coefficients:
        if algebra is not None:
            depth = m1 if spec.side == "minus" else m2
            if depth is not None and spec.grade > depth:
                _fail(f"grade {spec.grade} exceeds depth {depth} on the "
                      f"{spec.side} side", "/coefficients")

    return RunConfig(algebra=algebra, m1=m1, m2=m2, coefficients=coefficients,
                     grid=grid, time_flow=time_flow, s=s, sbar=sbar,
                     tasks=tasks, seed=seed, out=out, tol=tol, raw=data)


def load_config(path: str | Path) -> RunConfig:
    """Read and validate a configuration file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config is not valid JSON: {exc}")
    return parse_config(data)
