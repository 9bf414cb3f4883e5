"""Cartan data and exact fundamental representations of A_n.

Matrix conventions. The defining (n+1)-dimensional module of A_n uses

    h_i   = E_{i,i} - E_{i+1,i+1}
    X+_i  = E_{i,i+1}
    X-_i  = E_{i+1,i}

(1-indexed sites). The j-th fundamental module is realized as the j-th
exterior power of the defining one, with basis e_{k1} ^ ... ^ e_{kj},
k1 < ... < kj, ordered lexicographically. Because a simple raising or
lowering operator only trades adjacent indices k <-> k+1, the wedge action
never needs a reordering sign, and every generator matrix has entries in
{0, 1} (off-diagonal) or {0, +-1} (Cartan). All of this is exact integer
arithmetic; floating point enters only downstream, at the flow solvers.

The bilinear form is the standard one of the weight basis: <a| is the
transpose of |a>, and matrix elements <a|G|b> are plain matrix entries.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from math import comb

import numpy as np

from .errors import ConfigurationError

_SERIES = ("A", "B", "C", "D", "G2")


@dataclass(frozen=True)
class CartanMatrix:
    """Integer Cartan matrix of a classical series (or G2).

    Only the A series supports representation construction downstream; the
    other series are carried as coefficient data for the lattice formulas
    that consume a Cartan matrix directly.
    """

    series: str
    rank: int
    entries: np.ndarray  # (rank, rank) int array

    def __post_init__(self):
        self.entries.setflags(write=False)

    def inverse(self) -> np.ndarray:
        return cartan_inverse(self)


def cartan_matrix(series: str, rank: int) -> CartanMatrix:
    """Build the Cartan matrix of the given series and rank.

    Raises ConfigurationError for an invalid series/rank pairing
    (e.g. G2 with rank != 2).
    """
    if series not in _SERIES:
        raise ConfigurationError(f"unknown series {series!r}; expected one of {_SERIES}")
    min_rank = {"A": 1, "B": 2, "C": 2, "D": 3, "G2": 2}[series]
    if rank < min_rank or (series == "G2" and rank != 2):
        raise ConfigurationError(f"series {series} needs rank >= {min_rank}"
                                 + (" and exactly 2" if series == "G2" else "")
                                 + f", got {rank}")

    K = 2 * np.eye(rank, dtype=np.int64)
    for i in range(rank - 1):
        K[i, i + 1] = K[i + 1, i] = -1
    if series == "B":
        # alpha_rank short: K_{rank-1,rank} = -2 (1-indexed).
        K[rank - 2, rank - 1] = -2
    elif series == "C":
        K[rank - 1, rank - 2] = -2
    elif series == "D":
        K[rank - 2, rank - 1] = K[rank - 1, rank - 2] = 0
        K[rank - 3, rank - 1] = K[rank - 1, rank - 3] = -1
    elif series == "G2":
        K[0, 1] = -1
        K[1, 0] = -3
    return CartanMatrix(series, rank, K)


def cartan_inverse(K: CartanMatrix | np.ndarray) -> np.ndarray:
    """Exact rational inverse, returned as an object array of Fractions."""
    entries = K.entries if isinstance(K, CartanMatrix) else np.asarray(K)
    r = entries.shape[0]
    if entries.shape != (r, r):
        raise ConfigurationError("Cartan matrix must be square")
    # Gauss-Jordan over Fraction. Supported Cartan matrices are unimodular
    # up to small determinants, so a zero pivot here is a genuine bug.
    aug = [[Fraction(int(entries[i, j])) for j in range(r)]
           + [Fraction(int(i == j)) for j in range(r)] for i in range(r)]
    for col in range(r):
        piv = next((row for row in range(col, r) if aug[row][col] != 0), None)
        if piv is None:
            raise ArithmeticError("singular Cartan matrix")
        aug[col], aug[piv] = aug[piv], aug[col]
        inv_p = 1 / aug[col][col]
        aug[col] = [v * inv_p for v in aug[col]]
        for row in range(r):
            if row != col and aug[row][col] != 0:
                f = aug[row][col]
                aug[row] = [a - f * b for a, b in zip(aug[row], aug[col])]
    out = np.empty((r, r), dtype=object)
    for i in range(r):
        for j in range(r):
            out[i, j] = aug[i][r + j]
    return out


@dataclass(frozen=True)
class FundamentalRep:
    """Explicit integer matrices of the j-th fundamental representation of A_n.

    H[i], E[i], F[i] hold h_{i+1}, X+_{i+1}, X-_{i+1} (lists are 0-indexed,
    sites are 1-indexed everywhere else). ``basis`` lists the wedge index
    tuples in matrix order and ``hw_index`` is the position of the highest
    vector e_1 ^ ... ^ e_j, looked up rather than assumed.
    """

    n: int
    j: int
    dim: int
    H: tuple[np.ndarray, ...]
    E: tuple[np.ndarray, ...]
    F: tuple[np.ndarray, ...]
    basis: tuple[tuple[int, ...], ...]
    hw_index: int
    series: str = "A"
    _float_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def hw_column(self) -> np.ndarray:
        e = np.zeros(self.dim, dtype=np.int64)
        e[self.hw_index] = 1
        return e

    def as_float(self, kind: str, i: int) -> np.ndarray:
        """Float64 view of h_i / X+_i / X-_i, cached, read-only."""
        key = (kind, i)
        if key not in self._float_cache:
            mat = {"h": self.H, "e": self.E, "f": self.F}[kind][i - 1]
            arr = mat.astype(np.float64)
            arr.setflags(write=False)
            self._float_cache[key] = arr
        return self._float_cache[key]


def fundamental_rep(n: int, j: int) -> FundamentalRep:
    """Construct the j-th fundamental representation of A_n (exterior power).

    Raises ConfigurationError unless 1 <= j <= n.
    """
    if not 1 <= j <= n:
        raise ConfigurationError(f"fundamental weight index j={j} out of range 1..{n}")
    basis = tuple(combinations(range(1, n + 2), j))
    index = {b: k for k, b in enumerate(basis)}
    dim = comb(n + 1, j)

    H = [np.zeros((dim, dim), dtype=np.int64) for _ in range(n)]
    E = [np.zeros((dim, dim), dtype=np.int64) for _ in range(n)]
    F = [np.zeros((dim, dim), dtype=np.int64) for _ in range(n)]
    for col, b in enumerate(basis):
        occupied = set(b)
        for i in range(1, n + 1):
            # weight of e_k under h_i is +1 at k=i, -1 at k=i+1
            H[i - 1][col, col] = (i in occupied) - (i + 1 in occupied)
            # X+_i sends e_{i+1} -> e_i; on a wedge this replaces index i+1
            # by i when i is free (adjacent swap: no sign)
            if i + 1 in occupied and i not in occupied:
                target = tuple(sorted(occupied - {i + 1} | {i}))
                E[i - 1][index[target], col] = 1
            # X-_i sends e_i -> e_{i+1}
            if i in occupied and i + 1 not in occupied:
                target = tuple(sorted(occupied - {i} | {i + 1}))
                F[i - 1][index[target], col] = 1
    for mats in (H, E, F):
        for m in mats:
            m.setflags(write=False)
    hw = tuple(range(1, j + 1))
    return FundamentalRep(n=n, j=j, dim=dim, H=tuple(H), E=tuple(E), F=tuple(F),
                          basis=basis, hw_index=index[hw])


def all_fundamental_reps(n: int) -> list[FundamentalRep]:
    return [fundamental_rep(n, j) for j in range(1, n + 1)]


def grading_operator(rep: FundamentalRep, c=None) -> np.ndarray:
    """Grading operator H = sum_i (K^{-1} c)_i h_i as exact Fractions.

    ``c`` is a 0/1 vector of length n; the default (all ones) is the
    principal grading, for which [H, X+-_i] = +-X+-_i.
    """
    n = rep.n
    if c is None:
        c = [1] * n
    if len(c) != n:
        raise ConfigurationError(f"grading vector length {len(c)} != rank {n}")
    K = cartan_matrix("A", n)
    Kinv = cartan_inverse(K)
    coeff = [sum(Kinv[i, k] * Fraction(int(c[k])) for k in range(n)) for i in range(n)]
    out = np.zeros((rep.dim, rep.dim), dtype=object)
    for i in range(n):
        out = out + np.array([[coeff[i] * int(v) for v in row] for row in rep.H[i]],
                             dtype=object)
    return out


def grading_operator_float(rep: FundamentalRep, c=None) -> np.ndarray:
    return grading_operator(rep, c).astype(np.float64)


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def graded_generators(rep: FundamentalRep, m: int, sign: int) -> list[np.ndarray]:
    """Generators Y_i^{+-m} = [X_{i+m-1}, [... [X_{i+1}, X_i] ...]] of grade +-m.

    Returns the list over sites i = 1..n-m+1, empty for m > n. sign is
    +1 or -1 and selects raising/lowering words.
    """
    if m < 1:
        raise ConfigurationError(f"grade m={m} must be >= 1")
    if sign not in (+1, -1):
        raise ConfigurationError("sign must be +1 or -1")
    gens = rep.E if sign > 0 else rep.F
    out = []
    for i in range(1, rep.n - m + 2):
        Y = gens[i - 1]
        for k in range(i + 1, i + m):
            Y = commutator(gens[k - 1], Y)
        out.append(Y)
    return out


def verify_chevalley(rep: FundamentalRep, H=None, E=None, F=None):
    """Residual report over all Chevalley and highest-weight relations.

    With the exact integer matrices of ``rep`` the residual is exactly zero;
    passing perturbed float matrices (H/E/F overrides) reports their
    worst-entry defect instead.
    """
    from .numerics import ResidualReport

    n = rep.n
    H = list(rep.H) if H is None else list(H)
    E = list(rep.E) if E is None else list(E)
    F = list(rep.F) if F is None else list(F)
    K = cartan_matrix("A", n).entries
    worst = 0.0
    where = "none"
    sq = 0.0
    count = 0

    def track(mat, label):
        nonlocal worst, where, sq, count
        m = np.max(np.abs(mat)) if mat.size else 0.0
        sq += float(np.sum(np.asarray(mat, dtype=np.float64) ** 2))
        count += mat.size
        if m > worst:
            worst = float(m)
            where = label

    for i in range(n):
        for j in range(n):
            track(commutator(H[i], H[j]), f"[h_{i+1},h_{j+1}]")
            track(commutator(H[i], E[j]) - K[i, j] * E[j], f"[h_{i+1},X+_{j+1}]")
            track(commutator(H[i], F[j]) + K[i, j] * F[j], f"[h_{i+1},X-_{j+1}]")
            delta = 1 if i == j else 0
            track(commutator(E[i], F[j]) - delta * H[j], f"[X+_{i+1},X-_{j+1}]")
    hw = rep.hw_column().astype(H[0].dtype if hasattr(H[0], "dtype") else np.float64)
    for i in range(n):
        track(np.atleast_1d(E[i] @ hw), f"X+_{i+1}|hw>")
        want = hw if (i + 1) == rep.j else np.zeros_like(hw)
        track(np.atleast_1d(H[i] @ hw - want), f"h_{i+1}|hw>")
    track(np.atleast_1d(hw @ hw - 1), "<hw|hw>")

    rms = (sq / count) ** 0.5 if count else 0.0
    return ResidualReport(name=f"chevalley-A{n}-j{rep.j}", max_abs=float(worst),
                          rms=float(rms), argmax=where, tol=1e-13)


def rep_to_json(rep: FundamentalRep) -> dict:
    """Serializable dump with entries as exact rational strings "p/q"."""

    def encode(mat):
        return [[f"{int(v)}/1" for v in row] for row in mat]

    return {
        "series": rep.series,
        "n": rep.n,
        "j": rep.j,
        "dim": rep.dim,
        "hw_index": rep.hw_index,
        "matrices": {
            "h": [encode(m) for m in rep.H],
            "e": [encode(m) for m in rep.E],
            "f": [encode(m) for m in rep.F],
        },
    }


def rep_from_json(data: dict) -> FundamentalRep:
    """Rebuild a representation from ``rep_to_json`` output (exact)."""
    n, j = int(data["n"]), int(data["j"])

    def decode(mat):
        out = np.array([[Fraction(v) for v in row] for row in mat], dtype=object)
        if any(x.denominator != 1 for x in out.flat):
            return out.astype(np.float64)
        return np.array([[int(x) for x in row] for row in out], dtype=np.int64)

    H = tuple(decode(m) for m in data["matrices"]["h"])
    E = tuple(decode(m) for m in data["matrices"]["e"])
    F = tuple(decode(m) for m in data["matrices"]["f"])
    basis = tuple(combinations(range(1, n + 2), j))
    return FundamentalRep(n=n, j=j, dim=int(data["dim"]), H=H, E=E, F=F,
                          basis=basis, hw_index=int(data["hw_index"]),
                          series=data.get("series", "A"))
