"""Shared numerical kernels.

Matrix exponential, classical RK4 for linear matrix ODEs, fourth-order
central differences on uniform grids, cumulative Simpson quadrature, and
leading principal minors. Everything here is deterministic and pure; the
accuracy budget is set so that grid residuals of the lattice identities are
dominated by the identities themselves, not by this module:

  * RK4 with substeps keeps flow paths near 1e-10 on the default grids;
  * fourth-order stencils leave ~1e-8 truncation on desk-scale fields where
    second-order ones would sit at ~1e-5, above the acceptance tolerances;
  * every derivative consumer excludes a 2-point boundary ring, which is
    exactly the stencil halo.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.linalg

from .errors import ConfigurationError

RING = 2  # boundary ring excluded by the 4th-order stencils


@dataclass(frozen=True)
class Grid2D:
    """Uniform 2-D grid, origin-centered by default."""

    x0: float = -1.0
    y0: float = -1.0
    hx: float = 0.01
    hy: float = 0.01
    Nx: int = 201
    Ny: int = 201

    def __post_init__(self):
        if self.hx <= 0 or self.hy <= 0:
            raise ConfigurationError("grid steps must be positive")
        if self.Nx < 5 or self.Ny < 5:
            raise ConfigurationError("grids need at least 5 points per axis "
                                     "for interior central differences")

    @property
    def xs(self) -> np.ndarray:
        return self.x0 + self.hx * np.arange(self.Nx)

    @property
    def ys(self) -> np.ndarray:
        return self.y0 + self.hy * np.arange(self.Ny)

    def interior(self, shape=None) -> tuple[slice, slice]:
        return (slice(RING, self.Nx - RING), slice(RING, self.Ny - RING))


@dataclass
class ResidualReport:
    """Max/rms statistics of a residual field against a tolerance.

    ``passed`` is always max_abs <= tol by construction. ``argmax`` is the
    grid location of the worst node for field residuals, or a short label
    for structured (non-grid) checks.
    """

    name: str
    max_abs: float
    rms: float
    tol: float
    argmax: object = None
    meta: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(self.max_abs <= self.tol)

    def to_json(self) -> dict:
        argmax = list(self.argmax) if isinstance(self.argmax, tuple) else self.argmax
        out = {"name": self.name, "max_abs": self.max_abs, "rms": self.rms,
               "argmax": argmax, "tol": self.tol, "pass": self.passed}
        if self.meta:
            out["meta"] = self.meta
        return out

    @classmethod
    def from_field(cls, name: str, residual: np.ndarray, tol: float,
                   mask: np.ndarray | None = None, meta: dict | None = None):
        """Statistics over the finite, unmasked entries of ``residual``.

        ``mask`` marks nodes to exclude (singular loci and the like); NaN
        entries (the stencil halo) are excluded automatically.
        """
        r = np.asarray(residual, dtype=np.float64)
        good = np.isfinite(r)
        if mask is not None:
            good &= ~mask
        if not good.any():
            return cls(name=name, max_abs=math.inf, rms=math.inf, tol=tol,
                       argmax=None, meta={"empty": True, **(meta or {})})
        vals = np.abs(np.where(good, r, 0.0))
        flat = int(np.argmax(vals))
        loc = tuple(int(v) for v in np.unravel_index(flat, r.shape))
        rms = float(np.sqrt(np.mean(r[good] ** 2)))
        return cls(name=name, max_abs=float(vals.flat[flat]), rms=rms, tol=tol,
                   argmax=loc, meta=meta or {})


def worst(reports) -> ResidualReport:
    """The report with the largest max_abs (ties keep the earlier one)."""
    reports = list(reports)
    out = reports[0]
    for r in reports[1:]:
        if r.max_abs > out.max_abs:
            out = r
    return out


def matrix_exp(A: np.ndarray) -> np.ndarray:
    """exp(A) by scaling-and-squaring with Pade approximants (scipy.linalg.expm)."""
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ConfigurationError(f"matrix_exp needs a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ConfigurationError("matrix_exp needs finite entries")
    return scipy.linalg.expm(A)


def ode_linear_integrate(L, t0: float, t1: float, steps: int, M0: np.ndarray,
                         substeps: int = 1, right: bool = False):
    """Sample the solution of dM/dt = L(t) M with classical RK4.

    Returns (ts, path) with ``steps + 1`` samples including both endpoints.
    ``substeps`` inserts extra RK4 steps between samples (the samples stay on
    the uniform grid). With ``right=True`` the equation is dM/dt = M L(t)
    instead, integrated via its transpose.
    """
    if steps < 1:
        raise ConfigurationError("steps must be >= 1")
    M0 = np.asarray(M0, dtype=np.float64)
    if right:
        ts, path = ode_linear_integrate(lambda t: np.asarray(L(t)).T, t0, t1,
                                        steps, M0.T, substeps=substeps)
        return ts, path.transpose(0, 2, 1)

    ts = np.linspace(t0, t1, steps + 1)
    h = (t1 - t0) / (steps * substeps)
    path = np.empty((steps + 1,) + M0.shape)
    path[0] = M = M0.copy()
    t = t0
    for k in range(steps):
        for _ in range(substeps):
            k1 = L(t) @ M
            k2 = L(t + h / 2) @ (M + h / 2 * k1)
            k3 = L(t + h / 2) @ (M + h / 2 * k2)
            k4 = L(t + h) @ (M + h * k3)
            M = M + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
            t += h
        t = t0 + (k + 1) * (t1 - t0) / steps  # keep sample times exact
        path[k + 1] = M
    return ts, path


def partial_axis(f: np.ndarray, h: float, axis: int) -> np.ndarray:
    """Fourth-order central first derivative along ``axis``.

    The 2-point halo at each end is NaN; callers treat NaN as "outside".
    """
    f = np.asarray(f, dtype=np.float64)
    if f.shape[axis] < 5:
        raise ConfigurationError("axis too short for the 4th-order stencil")
    out = np.full_like(f, np.nan)

    def sl(a, b):
        idx = [slice(None)] * f.ndim
        idx[axis] = slice(a, b)
        return tuple(idx)

    n = f.shape[axis]
    out[sl(2, n - 2)] = (-f[sl(4, n)] + 8 * f[sl(3, n - 1)]
                         - 8 * f[sl(1, n - 3)] + f[sl(0, n - 4)]) / (12 * h)
    return out


def mixed_second_derivative(f: np.ndarray, grid: Grid2D) -> np.ndarray:
    """Cross derivative d2f/dxdy as composed fourth-order central stencils.

    Input axes are (x, y[, extra]); the returned array carries NaN on the
    2-ring halo, which residual statistics then skip.
    """
    f = np.asarray(f, dtype=np.float64)
    if f.shape[0] != grid.Nx or f.shape[1] != grid.Ny:
        raise ConfigurationError(f"field shape {f.shape} does not match grid "
                                 f"({grid.Nx}, {grid.Ny})")
    return partial_axis(partial_axis(f, grid.hx, 0), grid.hy, 1)


def cumulative_integral(f: np.ndarray, baseline_index: int = 0, h: float = 1.0,
                        axis: int = 0) -> np.ndarray:
    """Cumulative composite-Simpson antiderivative vanishing at the baseline.

    Odd prefix sums use the 3-point Newton-Gregory start, then pairs of
    panels advance by plain Simpson; overall fourth-order.
    """
    f = np.asarray(f, dtype=np.float64)
    f = np.moveaxis(f, axis, 0)
    n = f.shape[0]
    if n < 3:
        raise ConfigurationError("cumulative_integral needs >= 3 samples")
    out = np.zeros_like(f)
    out[1] = h * (5 * f[0] + 8 * f[1] - f[2]) / 12
    for k in range(2, n):
        out[k] = out[k - 2] + h * (f[k - 2] + 4 * f[k - 1] + f[k]) / 3
    out = out - out[baseline_index]
    return np.moveaxis(out, 0, axis)


def leading_minors(X: np.ndarray) -> list:
    """Determinants of the upper-left i x i blocks, i = 0..k (Det_0 = 1).

    Exact (int/Fraction) input goes through fraction-free Bareiss
    elimination, whose pivots are precisely the leading minors; float input
    uses pivoted LU per block.
    """
    X = np.asarray(X)
    k = X.shape[0]
    if X.ndim != 2 or X.shape[1] != k:
        raise ConfigurationError("leading_minors needs a square matrix")
    if X.dtype == object or np.issubdtype(X.dtype, np.integer):
        rows = [[v if isinstance(v, Fraction) else Fraction(v) for v in row]
                for row in X.tolist()]
        a = [row[:] for row in rows]
        minors = [Fraction(1)]
        prev = Fraction(1)
        for step in range(k):
            piv = a[step][step]
            if piv == 0:
                # zero leading minor: Bareiss stalls, finish the remaining
                # blocks by exact cofactor expansion (rare, small inputs)
                for i in range(step + 1, k + 1):
                    minors.append(_exact_det([r[:i] for r in rows[:i]]))
                return minors
            # fraction-free elimination; the pivot after step s equals the
            # (s+1)-th leading principal minor
            for r in range(step + 1, k):
                for c in range(step + 1, k):
                    a[r][c] = (a[r][c] * piv - a[r][step] * a[step][c]) / prev
                a[r][step] = Fraction(0)
            minors.append(piv)
            prev = piv
        return minors

    X = X.astype(np.float64)
    out = [1.0]
    for i in range(1, k + 1):
        out.append(float(np.linalg.det(X[:i, :i])))
    return out


def _exact_det(rows) -> Fraction:
    n = len(rows)
    if n == 0:
        return Fraction(1)
    if n == 1:
        return rows[0][0]
    total = Fraction(0)
    for c in range(n):
        if rows[0][c] == 0:
            continue
        minor = [r[:c] + r[c + 1:] for r in rows[1:]]
        total += (-1) ** c * rows[0][c] * _exact_det(minor)
    return total
