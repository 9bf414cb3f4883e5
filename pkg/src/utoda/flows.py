"""Linear group-element flows and the two-sided kernel K(x, y).

A graded Lagrangian L(t) = sum_s sum_i c_i^{(s)}(t) Y_i^{(+-s)} drives the
matrix ODE dM/dt = L(t) M in every fundamental representation at once.  The
kernel combines a plus-side path in y with a minus-side path in x,

    K(x, y) = M_plus(y) N(x),      dM_plus/dy = L_plus M_plus,
                                   dN/dx = N L_minus,

both normalized to the identity at the flow origin, so that for A_1 with
L_plus = X+ and L_minus = X- the highest-weight element is exactly 1 + x y.
N is the inverse of the minus-side solution of dM/dx = -L_minus M; it is
integrated directly from its own (right-multiplication) ODE rather than by
inverting matrices node by node.

Matrix elements <j| X+... K X-... |j> are evaluated as rank-one couplings of
a bra propagated through M_plus(y) and a ket propagated through N(x), which
keeps field extraction O(dim) per grid node instead of O(dim^2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .algebra import FundamentalRep, grading_operator_float, graded_generators
from .errors import ConfigurationError, ContractError
from .numerics import ode_linear_integrate


def coefficient_function(kind: str, **params) -> Callable[[float], float]:
    """Scalar coefficient factory for Lagrangian blocks.

    kind "const": params value. kind "poly": params coeffs (c0, c1, ...)
    giving c0 + c1 t + ... . kind "exp": params amp, rate giving
    amp * exp(rate t). The returned callables carry a ``description``
    attribute so configs can be echoed back in reports.
    """
    if kind == "const":
        value = float(params["value"])
        fn = lambda t, v=value: v
        fn.description = f"const({value})"
        fn.constant_value = value
    elif kind == "poly":
        coeffs = [float(c) for c in params["coeffs"]]
        if not coeffs:
            raise ConfigurationError("poly coefficient needs at least one entry")

        def fn(t, c=tuple(coeffs)):
            acc = 0.0
            for ck in reversed(c):
                acc = acc * t + ck
            return acc

        fn.description = f"poly({coeffs})"
        if len(coeffs) == 1:
            fn.constant_value = coeffs[0]
    elif kind == "exp":
        amp = float(params.get("amp", 1.0))
        rate = float(params["rate"])
        fn = lambda t, a=amp, r=rate: a * math.exp(r * t)
        fn.description = f"exp(amp={amp}, rate={rate})"
    else:
        raise ConfigurationError(f"unknown coefficient kind {kind!r}")
    return fn


def _as_callable(c):
    if callable(c):
        return c
    return coefficient_function("const", value=float(c))


@dataclass(frozen=True)
class GradedLagrangian:
    """One side of the flow: coefficients per (grade, site).

    Grade 0 terms multiply Cartan generators h_i (sites 1..n); grade s >= 1
    terms multiply the nested-commutator generators of grade +-s rooted at
    site i (sites 1..n-s+1). ``side`` picks raising (plus) or lowering
    (minus) generators. Coefficient values are functions of the flow
    parameter; plain numbers are accepted by :meth:`build` and wrapped.
    """

    side: str
    rank: int
    terms: tuple  # ((grade, site, callable), ...) sorted by (grade, site)

    def __post_init__(self):
        if self.side not in ("plus", "minus"):
            raise ConfigurationError(f"side must be 'plus' or 'minus', got {self.side!r}")
        if self.rank < 1:
            raise ConfigurationError("rank must be >= 1")
        for grade, site, fn in self.terms:
            if grade < 0:
                raise ConfigurationError(f"negative grade {grade}")
            hi = self.rank if grade == 0 else self.rank - grade + 1
            if hi < 1:
                raise ConfigurationError(
                    f"grade {grade} has no admissible sites at rank {self.rank}")
            if not (1 <= site <= hi):
                raise ConfigurationError(
                    f"site {site} out of range 1..{hi} for grade {grade}")
            if not callable(fn):
                raise ConfigurationError("coefficients must be callables")
        object.__setattr__(self, "_stacks", {})

    @classmethod
    def build(cls, side: str, rank: int, coefficients: dict) -> "GradedLagrangian":
        """coefficients: {(grade, site): callable or number}."""
        terms = tuple(sorted(
            (int(g), int(i), _as_callable(c)) for (g, i), c in coefficients.items()))
        return cls(side=side, rank=rank, terms=terms)

    @property
    def depth(self) -> int:
        return max((g for g, _, _ in self.terms), default=0)

    @property
    def sign(self) -> int:
        return +1 if self.side == "plus" else -1

    def is_constant(self) -> bool:
        return all(hasattr(fn, "constant_value") for _, _, fn in self.terms)

    def _stack(self, rep: FundamentalRep):
        """Per-rep stacked generator matrices aligned with self.terms."""
        key = (rep.n, rep.j)
        hit = self._stacks.get(key)
        if hit is not None:
            return hit
        if rep.n != self.rank:
            raise ConfigurationError(
                f"representation rank {rep.n} does not match Lagrangian rank {self.rank}")
        by_grade: dict[int, list] = {}
        mats = np.zeros((len(self.terms), rep.dim, rep.dim))
        for k, (grade, site, _) in enumerate(self.terms):
            if grade == 0:
                mats[k] = rep.as_float("h", site)
            else:
                if grade not in by_grade:
                    by_grade[grade] = graded_generators(rep, grade, self.sign)
                mats[k] = by_grade[grade][site - 1].astype(np.float64)
        self._stacks[key] = mats
        return mats

    def matrix(self, rep: FundamentalRep, t: float) -> np.ndarray:
        mats = self._stack(rep)
        c = np.array([fn(t) for _, _, fn in self.terms])
        if not np.all(np.isfinite(c)):
            bad = [self.terms[k][:2] for k in np.flatnonzero(~np.isfinite(c))]
            raise ConfigurationError(
                f"coefficient not finite at t={t}: blocks {bad}")
        return np.einsum("k,kij->ij", c, mats)

    def matrix_fn(self, rep: FundamentalRep) -> Callable[[float], np.ndarray]:
        self._stack(rep)  # warm the cache before the closure is hot
        return lambda t: self.matrix(rep, t)

    def verify_grading(self, rep: FundamentalRep, tol: float = 1e-12) -> None:
        """Check [H, L_s] = +-s L_s per grade block; raise ContractError."""
        H = grading_operator_float(rep)
        mats = self._stack(rep)
        for k, (grade, site, _) in enumerate(self.terms):
            g = mats[k]
            want = self.sign * grade * g
            err = np.max(np.abs(H @ g - g @ H - want))
            scale = max(1.0, float(np.max(np.abs(g))))
            if err > tol * scale:
                raise ContractError(
                    f"grade block (grade={grade}, site={site}, side={self.side}) "
                    f"violates [H, L] = {self.sign * grade:+d} L "
                    f"(residual {err:.3e} in rep j={rep.j})")


@dataclass(frozen=True)
class FlowPath:
    """Sampled solution of dM/dt = L(t) M across a representation set.

    M(ts[base_index]) = I; samples cover the whole requested span on a
    uniform axis (the base point may sit in the interior, in which case the
    ODE is integrated out in both directions).
    """

    lagrangian: GradedLagrangian
    reps: tuple
    ts: np.ndarray
    mats: tuple  # per rep: (len(ts), dim, dim)
    base_index: int

    def index_of(self, t: float) -> int:
        h = self.ts[1] - self.ts[0]
        i = int(round((t - self.ts[0]) / h))
        if not (0 <= i < len(self.ts)) or abs(self.ts[i] - t) > 1e-9 * max(1.0, abs(h)):
            raise ConfigurationError(f"{t} is not a sample node of this path")
        return i


def _integrate_axis(matfn, ts, base_index, M0, substeps, right=False):
    """Two-directional RK4 sampling of dM/dt = A(t) M (or M A if right)."""
    n = len(ts)
    dim = M0.shape[0]
    out = np.empty((n, dim, dim))
    out[base_index] = M0
    if base_index < n - 1:
        _, fwd = ode_linear_integrate(matfn, ts[base_index], ts[-1],
                                      n - 1 - base_index, M0,
                                      substeps=substeps, right=right)
        out[base_index:] = fwd
    if base_index > 0:
        _, bwd = ode_linear_integrate(matfn, ts[base_index], ts[0],
                                      base_index, M0,
                                      substeps=substeps, right=right)
        out[:base_index + 1] = bwd[::-1]
    return out


def _axis(span, steps, base):
    t0, t1 = float(span[0]), float(span[1])
    if not (t1 > t0):
        raise ConfigurationError("axis span must be increasing")
    if steps < 1:
        raise ConfigurationError("steps must be >= 1")
    ts = np.linspace(t0, t1, steps + 1)
    if base is None:
        base = t0
    h = (t1 - t0) / steps
    bi = int(round((base - t0) / h))
    if not (0 <= bi <= steps) or abs(ts[bi] - base) > 1e-9 * h:
        raise ConfigurationError(
            f"base point {base} must coincide with a sample node")
    return ts, bi


def solve_smatrix(lagrangian: GradedLagrangian,
                  reps: FundamentalRep | Sequence[FundamentalRep],
                  span: tuple[float, float], steps: int,
                  base: float | None = None, substeps: int = 4) -> FlowPath:
    """Integrate dM/dt = L(t) M from M(base) = I over a uniform axis.

    The grade structure of L is verified in every representation before any
    integration starts.
    """
    if isinstance(reps, FundamentalRep):
        reps = (reps,)
    reps = tuple(reps)
    if not reps:
        raise ConfigurationError("need at least one representation")
    ts, bi = _axis(span, steps, base)
    mats = []
    for rep in reps:
        lagrangian.verify_grading(rep)
        fn = lagrangian.matrix_fn(rep)
        mats.append(_integrate_axis(fn, ts, bi, np.eye(rep.dim), substeps))
    return FlowPath(lagrangian=lagrangian, reps=reps, ts=ts,
                    mats=tuple(mats), base_index=bi)


def raising_word(site: int, length: int, direction: int = +1) -> tuple[int, ...]:
    """Simple-root indices of R^(+-)_length rooted at ``site``, left to right."""
    return tuple(site + direction * k for k in range(length))


def lowering_word(site: int, length: int, direction: int = +1) -> tuple[int, ...]:
    """Indices of T^(+-)_length rooted at ``site``: farthest factor first."""
    return tuple(site + direction * k for k in range(length - 1, -1, -1))


@dataclass
class KernelField:
    """K(x, y) = M_plus(y) N(x) over all fundamental representations.

    Built by :func:`kernel`. ``element_field`` returns full-grid matrix
    elements; results are cached per (weight, words). The minus-side path N
    solves dN/dx = N L_minus with N = I at the x base point, i.e. it is the
    inverse of the solution of dM/dx = -L_minus M.
    """

    reps: tuple
    xs: np.ndarray
    ys: np.ndarray
    n_mats: tuple   # per rep: (len(xs), dim, dim)
    m_mats: tuple   # per rep: (len(ys), dim, dim)
    x_base: int
    y_base: int
    plus: GradedLagrangian
    minus: GradedLagrangian
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def rank(self) -> int:
        return self.reps[0].n

    def _rep(self, j: int) -> FundamentalRep:
        if not (1 <= j <= self.rank):
            raise ConfigurationError(f"fundamental weight {j} outside 1..{self.rank}")
        return self.reps[j - 1]

    def element_field(self, j: int, left: Sequence[int] = (),
                      right: Sequence[int] = ()) -> np.ndarray:
        """<j| X+_{left...} K X-_{right...} |j> on the full (x, y) grid."""
        key = (j, tuple(left), tuple(right))
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        rep = self._rep(j)
        for w in (*left, *right):
            if not (1 <= w <= self.rank):
                raise ConfigurationError(f"generator index {w} outside 1..{self.rank}")
        row = np.zeros(rep.dim)
        row[rep.hw_index] = 1.0
        for w in left:
            row = row @ rep.as_float("e", w)
        col = np.zeros(rep.dim)
        col[rep.hw_index] = 1.0
        for w in reversed(right):
            col = rep.as_float("f", w) @ col
        bra = np.einsum("d,yde->ye", row, self.m_mats[j - 1])
        ket = np.einsum("xde,e->xd", self.n_mats[j - 1], col)
        out = np.einsum("xd,yd->xy", ket, bra)
        out.setflags(write=False)
        self._cache[key] = out
        return out

    def tau(self, j: int) -> np.ndarray:
        """<j| K |j> on the grid; weights 0 and n+1 are identically 1."""
        if j == 0 or j == self.rank + 1:
            ones = np.ones((len(self.xs), len(self.ys)))
            ones.setflags(write=False)
            return ones
        return self.element_field(j)

    def element_derivative(self, j: int, dx: int = 0, dy: int = 0) -> np.ndarray:
        """Derivative fields of <j| K |j>, taken through the flow equations.

        K = M(y) N(x) satisfies dK/dy = L_plus(y) K and dK/dx = K L_minus(x)
        identically, so first and mixed derivatives are themselves matrix
        elements of L-sandwiched kernels. No grid differencing is involved;
        the only error is the ODE error already present in the factors.
        """
        if dx not in (0, 1) or dy not in (0, 1):
            raise ConfigurationError("dx and dy each take 0 or 1")
        key = ("deriv", j, dx, dy)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        rep = self._rep(j)
        if dy:
            fn = self.plus.matrix_fn(rep)
            bra = np.stack([fn(y)[rep.hw_index, :] @ self.m_mats[j - 1][iy]
                            for iy, y in enumerate(self.ys)])
        else:
            row = np.zeros(rep.dim)
            row[rep.hw_index] = 1.0
            bra = np.einsum("d,yde->ye", row, self.m_mats[j - 1])
        if dx:
            fn = self.minus.matrix_fn(rep)
            ket = np.stack([self.n_mats[j - 1][ix] @ fn(x)[:, rep.hw_index]
                            for ix, x in enumerate(self.xs)])
        else:
            col = np.zeros(rep.dim)
            col[rep.hw_index] = 1.0
            ket = np.einsum("xde,e->xd", self.n_mats[j - 1], col)
        out = np.einsum("xd,yd->xy", ket, bra)
        out.setflags(write=False)
        self._cache[key] = out
        return out

    def matrix_at(self, j: int, ix: int, iy: int) -> np.ndarray:
        return self.m_mats[j - 1][iy] @ self.n_mats[j - 1][ix]

    def unimodularity_report(self, samples: int = 100, seed: int = 0):
        """det K - 1 on random grid nodes, worst representation."""
        from .numerics import ResidualReport
        rng = np.random.default_rng(seed)
        worst = 0.0
        where = None
        for _ in range(samples):
            ix = int(rng.integers(len(self.xs)))
            iy = int(rng.integers(len(self.ys)))
            for j in range(1, self.rank + 1):
                d = abs(np.linalg.det(self.matrix_at(j, ix, iy)) - 1.0)
                if d > worst:
                    worst, where = d, (ix, iy, j)
        return ResidualReport(name=f"kernel-unimodular-A{self.rank}",
                              max_abs=worst, rms=worst, tol=1e-9, argmax=where)


def kernel(plus_path: FlowPath, minus_path: FlowPath,
           substeps: int = 4) -> KernelField:
    """Combine a plus-side y-path and a minus-side x-path into K(x, y).

    The minus path supplies its Lagrangian and axis; the factor N = M_minus
    inverse is integrated from dN/dx = N L_minus (the companion equation of
    dM_minus/dx = -L_minus M_minus), never by inverting sampled matrices.
    """
    keys_p = [(r.n, r.j) for r in plus_path.reps]
    keys_m = [(r.n, r.j) for r in minus_path.reps]
    if keys_p != keys_m:
        raise ConfigurationError(
            f"representation sets differ: {keys_p} vs {keys_m}")
    n_mats = []
    for rep in minus_path.reps:
        fn = minus_path.lagrangian.matrix_fn(rep)
        n_mats.append(_integrate_axis(fn, minus_path.ts, minus_path.base_index,
                                      np.eye(rep.dim), substeps, right=True))
    return KernelField(reps=plus_path.reps, xs=minus_path.ts, ys=plus_path.ts,
                       n_mats=tuple(n_mats), m_mats=plus_path.mats,
                       x_base=minus_path.base_index, y_base=plus_path.base_index,
                       plus=plus_path.lagrangian, minus=minus_path.lagrangian)


def matrix_element(K: KernelField, j: int, left: Sequence[int] = (),
                   right: Sequence[int] = (), x: float | None = None,
                   y: float | None = None):
    """Field or point value of <j| X+... K X-... |j>.

    With x and y omitted the full grid field is returned; with both given
    the value at that sample node (exact node match required).
    """
    fld = K.element_field(j, left, right)
    if x is None and y is None:
        return fld
    if x is None or y is None:
        raise ConfigurationError("give both x and y, or neither")
    hx = K.xs[1] - K.xs[0]
    hy = K.ys[1] - K.ys[0]
    ix = int(round((x - K.xs[0]) / hx))
    iy = int(round((y - K.ys[0]) / hy))
    if not (0 <= ix < len(K.xs) and 0 <= iy < len(K.ys)) \
            or abs(K.xs[ix] - x) > 1e-9 or abs(K.ys[iy] - y) > 1e-9:
        raise ConfigurationError(f"({x}, {y}) is not a grid node")
    return float(fld[ix, iy])


@dataclass
class TimeFlow:
    """M(y, t) sheets from a time Lagrangian layered over a base y-path."""

    base: FlowPath
    t_values: np.ndarray
    mats: tuple  # per rep: (len(ys), len(t_values), dim, dim)
    consistency: object  # ResidualReport


def solve_timeflow(time_matrix, base: FlowPath, t_span: tuple[float, float],
                   steps: int, substeps: int = 4, space_matrix=None,
                   tol: float = 1e-6) -> TimeFlow:
    """Extend a y-path in a second (time) direction and measure consistency.

    ``time_matrix(rep, y, t)`` is the assembled time Lagrangian P; the sheet
    M(y, t) integrates dM/dt = P M from the base path at t = t_span[0], for
    every y sample. Path independence of the corner values is measured by
    re-integrating the y-flow at the final time with ``space_matrix(rep, y,
    t)`` (defaults to the base Lagrangian, read as time-independent) and
    comparing sheet against re-integration across all y; the result is
    reported, not raised.
    """
    from .numerics import ResidualReport
    ts, _ = _axis(t_span, steps, t_span[0])
    sheets = []
    worst = 0.0
    where = None
    for r_idx, rep in enumerate(base.reps):
        if space_matrix is None:
            lag_fn = base.lagrangian.matrix_fn(rep)
            space_fn = lambda y, t, f=lag_fn: f(y)
        else:
            space_fn = lambda y, t, rp=rep: space_matrix(rp, y, t)
        ys = base.ts
        sheet = np.empty((len(ys), len(ts), rep.dim, rep.dim))
        for iy in range(len(ys)):
            sheet[iy] = _integrate_axis(
                lambda t, yy=ys[iy], rp=rep: time_matrix(rp, yy, t),
                ts, 0, base.mats[r_idx][iy], substeps)
        sheets.append(sheet)
        # route B: y-integration at the final time from the base-node corner
        t1 = ts[-1]
        routeB = _integrate_axis(lambda y, t=t1: space_fn(y, t),
                                 ys, base.base_index,
                                 sheet[base.base_index, -1], substeps)
        diff = np.max(np.abs(sheet[:, -1] - routeB), axis=(1, 2))
        k = int(np.argmax(diff))
        if diff[k] > worst:
            worst, where = float(diff[k]), (rep.j, k)
    report = ResidualReport(name=f"timeflow-consistency-A{base.reps[0].n}",
                            max_abs=worst, rms=worst, tol=tol, argmax=where)
    return TimeFlow(base=base, t_values=ts, mats=tuple(sheets),
                    consistency=report)
