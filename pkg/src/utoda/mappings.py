"""Integrable substitutions as grid-to-grid transformations.

The three maps realize the shift symmetries of the lattice systems: each
sends the fields attached to site i of a chain to the fields at site i+1.
The UToda maps live in the +theta orientation, the Darboux map in the
reflected one; the oracle tests match map output against independently
extracted lattice data one site over.

Derivatives use the shared fourth-order stencils, so every application
eats one stencil ring (``numerics.RING`` points) at each boundary. The
consumed rings ride along in the state; ``trimmed`` cuts a state down to
its finite core, which matters before anything integrates along an axis.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigurationError, ContractError, SingularityError
from .numerics import (RING, Grid2D, ResidualReport, cumulative_integral,
                       mixed_second_derivative, partial_axis, worst)

#: field names per map kind; the counts realize 2^(m1+m2-1)
KIND_FIELDS = {
    "utoda11": ("phi1", "phi2"),
    "dt": ("u", "v"),
    "utoda12": ("phi1", "phi2", "phi3", "phi4"),
}


@dataclass
class MappingState:
    """Named grid functions plus the grid they live on.

    ``applications`` counts how many maps produced this state; each one
    widens the NaN halo by one stencil ring.
    """

    kind: str
    fields: dict
    grid: Grid2D
    applications: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KIND_FIELDS:
            raise ConfigurationError(
                f"unknown mapping kind {self.kind!r}; expected one of "
                f"{sorted(KIND_FIELDS)}", pointer="/kind")
        names = KIND_FIELDS[self.kind]
        if set(self.fields) != set(names):
            raise ConfigurationError(
                f"kind {self.kind!r} needs fields {names}, got "
                f"{tuple(sorted(self.fields))}", pointer="/fields")
        shape = (self.grid.Nx, self.grid.Ny)
        for name in names:
            arr = np.asarray(self.fields[name], dtype=np.float64)
            if arr.shape != shape:
                raise ConfigurationError(
                    f"field {name} has shape {arr.shape}, grid wants {shape}",
                    pointer=f"/fields/{name}")
            self.fields[name] = arr

    def halo(self) -> int:
        """Width in grid points of the boundary band consumed so far."""
        return RING * self.applications


def trimmed(state: MappingState) -> MappingState:
    """Cut the consumed halo off, returning a state on a smaller grid."""
    k = state.halo()
    if k == 0:
        return state
    g = state.grid
    if g.Nx - 2 * k < 5 or g.Ny - 2 * k < 5:
        raise ConfigurationError("grid too small to trim the consumed halo; "
                                 "fewer iterations or a larger grid needed")
    inner = Grid2D(x0=g.x0 + k * g.hx, y0=g.y0 + k * g.hy,
                   hx=g.hx, hy=g.hy, Nx=g.Nx - 2 * k, Ny=g.Ny - 2 * k)
    cut = {n: f[k:-k, k:-k].copy() for n, f in state.fields.items()}
    return MappingState(kind=state.kind, fields=cut, grid=inner,
                        applications=0, meta=dict(state.meta))


def _sign_nodes(f: np.ndarray) -> list:
    """Nodes where ``f`` vanishes or takes the minority sign ([] if none)."""
    good = np.isfinite(f)
    pos = (f > 0) & good
    neg = (f < 0) & good
    bad = (f == 0) & good
    if pos.any() and neg.any():
        bad |= neg if pos.sum() >= neg.sum() else pos
    if not bad.any():
        return []
    return [tuple(int(i) for i in idx) for idx in np.argwhere(bad)[:16]]


def utoda11_map(state: MappingState) -> MappingState:
    """One-site shift of the depth-(1,1) chain.

    phi1' = (ln phi1)_xy + 2 phi1 - phi2, phi2' = phi1. Requires phi1 of
    one sign on the valid region (the logarithm's branch); all-negative
    input is fine since only the log derivative enters.
    """
    p1 = state.fields["phi1"]
    p2 = state.fields["phi2"]
    nodes = _sign_nodes(p1)
    if nodes:
        raise ContractError(f"phi1 changes sign or vanishes on the grid "
                            f"(first nodes {nodes[:4]}); no log branch")
    mixed = mixed_second_derivative(np.log(np.abs(p1)), state.grid)
    out = {"phi1": mixed + 2.0 * p1 - p2, "phi2": p1.copy()}
    return replace(state, fields=out, applications=state.applications + 1)


def darboux_toda_map(state: MappingState) -> MappingState:
    """One-site shift of the (u, v) pair: u' = 1/v, v' = v(uv - (ln v)_xy)."""
    u = state.fields["u"]
    v = state.fields["v"]
    nodes = _sign_nodes(v)
    if nodes:
        raise SingularityError("v crosses zero", nodes=nodes)
    mixed = mixed_second_derivative(np.log(np.abs(v)), state.grid)
    out = {"u": 1.0 / v, "v": v * (u * v - mixed)}
    return replace(state, fields=out, applications=state.applications + 1)


def utoda12_map(state: MappingState) -> MappingState:
    """One-site shift of the depth-(1,2) chain.

    Solve order matters: phi4' = phi3 and phi2' = phi1 are copies,
    phi1' = phi2 + d phi3/dy needs a stencil, and phi3' divides by phi1',
    so the zero check runs on the already-updated field.
    """
    p1, p2, p3, p4 = (state.fields[k] for k in ("phi1", "phi2", "phi3", "phi4"))
    nodes = _sign_nodes(p1)
    if nodes:
        raise ContractError(f"phi1 changes sign or vanishes on the grid "
                            f"(first nodes {nodes[:4]}); no log branch")
    new1 = p2 + partial_axis(p3, state.grid.hy, axis=1)
    nodes = _sign_nodes(new1)
    if nodes:
        raise SingularityError("updated phi1 crosses zero", nodes=nodes)
    mixed = mixed_second_derivative(np.log(np.abs(p1)), state.grid)
    new3 = (mixed - p2 * p4 + 2.0 * p1 * p3) / new1
    out = {"phi1": new1, "phi2": p1.copy(), "phi3": new3, "phi4": p3.copy()}
    return replace(state, fields=out, applications=state.applications + 1)


MAPS = {"utoda11": utoda11_map, "dt": darboux_toda_map, "utoda12": utoda12_map}


def iterate(state: MappingState, times: int) -> MappingState:
    """Apply the state's own map ``times`` times."""
    if times < 0:
        raise ConfigurationError("iteration count must be >= 0",
                                 pointer="/iterations")
    for _ in range(times):
        state = MAPS[state.kind](state)
    return state


def _ds_residuals(u, v, ts, hx: float, hy: float):
    """Residual fields of the two evolution equations with a shared W.

    W is the x-antiderivative of (uv)_y taken from the right edge; its free
    basepoint per (y, t) is fixed by least squares against the u-equation,
    so the u-residual measures the x-profile mismatch and the v-residual is
    an independent equation consuming the same W.
    """
    ht = float(ts[1] - ts[0])
    u_t = partial_axis(u, ht, axis=2)
    v_t = partial_axis(v, ht, axis=2)
    u_yy = partial_axis(partial_axis(u, hy, axis=1), hy, axis=1)
    v_yy = partial_axis(partial_axis(v, hy, axis=1), hy, axis=1)
    uv_y = partial_axis(u * v, hy, axis=1)
    cum = cumulative_integral(uv_y, baseline_index=0, h=hx, axis=0)

    r0 = -u_t + u_yy - 2.0 * u * cum    # u-equation residual at basepoint 0
    w = 2.0 * u
    good = np.isfinite(r0)
    num = np.sum(np.where(good, r0 * w, 0.0), axis=0)
    den = np.sum(np.where(good, w * w, 0.0), axis=0)
    C = np.where(den > 0, -num / np.where(den > 0, den, 1.0), 0.0)
    W = -cum + C[None, :, :]
    res_u = -u_t + u_yy + 2.0 * u * W
    res_v = v_t + v_yy + 2.0 * v * W
    return res_u, res_v


def ds_invariance_check(u, v, ts, hx: float, hy: float,
                        tol: float = 1e-4, mapped_tol: float = 1e-3) -> ResidualReport:
    """Residuals of the evolution pair, before and after the Darboux map.

        -du/dt + d2u/dy2 + 2uW = 0,   dv/dt + d2v/dy2 + 2vW = 0,

    with W the nonlocal term recovered by cumulative integration of (uv)_y
    along x. The mapped pair is checked against the same system on its
    trimmed core (the map's one-site shift is a symmetry of the hierarchy);
    its statistics land in ``meta`` under ``mapped_*``, with the differencing
    noise of the extra stencils budgeted by ``mapped_tol``.

    The identically-zero pair short-circuits: both equations hold and the
    substitution degenerates, so no map is attempted.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    ts = np.asarray(ts, dtype=np.float64)
    if u.shape != v.shape or u.ndim != 3:
        raise ConfigurationError(f"u and v must share an (x, y, t) shape, "
                                 f"got {u.shape} and {v.shape}")
    if u.shape[2] != len(ts):
        raise ConfigurationError("time axis length does not match the fields",
                                 pointer="/ts")
    if not (u.any() or v.any()):
        return ResidualReport(name="ds-invariance", max_abs=0.0, rms=0.0,
                              tol=tol, argmax="zero pair",
                              meta={"trivial": True})

    res_u, res_v = _ds_residuals(u, v, ts, hx, hy)
    base_u = ResidualReport.from_field("ds-u", res_u, tol)
    base_v = ResidualReport.from_field("ds-v", res_v, tol)

    grid = Grid2D(x0=0.0, y0=0.0, hx=hx, hy=hy, Nx=u.shape[0], Ny=u.shape[1])
    mu = np.empty_like(u)
    mv = np.empty_like(v)
    for j in range(u.shape[2]):
        slab = MappingState(kind="dt", grid=grid,
                            fields={"u": u[:, :, j], "v": v[:, :, j]})
        mapped = darboux_toda_map(slab)
        mu[:, :, j] = mapped.fields["u"]
        mv[:, :, j] = mapped.fields["v"]
    core = (slice(RING, -RING), slice(RING, -RING), slice(None))
    mres_u, mres_v = _ds_residuals(mu[core], mv[core], ts, hx, hy)
    mapped_u = ResidualReport.from_field("ds-mapped-u", mres_u, mapped_tol)
    mapped_v = ResidualReport.from_field("ds-mapped-v", mres_v, mapped_tol)

    base = worst([base_u, base_v])
    return ResidualReport(
        name="ds-invariance", max_abs=base.max_abs, rms=base.rms, tol=tol,
        argmax=base.name,
        meta={"u_max": base_u.max_abs, "v_max": base_v.max_abs,
              "mapped_u_max": mapped_u.max_abs, "mapped_v_max": mapped_v.max_abs,
              "mapped_tol": mapped_tol,
              "mapped_pass": bool(mapped_u.passed and mapped_v.passed)})
