"""Determinant identities for highest-weight matrix elements.

Two identities power every lattice derivation in this package: the
determinant ("first Jacobi") identity

    det [[<j|X+_j G X-_j|j>, <j|X+_j G|j>],
         [<j|G X-_j|j>,      <j|G|j>    ]]  =  prod_(i != j) <i|G|i>^(-K_ji)

and its two-site companion linking the bilinear elements of neighbouring
fundamental representations. Both are checked numerically on random group
elements together with the Q-recurrence built from them.

Group elements are sampled as short products of exponentials of Chevalley
generators, evaluated simultaneously in all fundamental representations of
the same A_n, so the identities couple genuinely different matrices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import all_fundamental_reps, cartan_matrix
from .errors import ConfigurationError, SingularityError
from .flows import lowering_word, raising_word
from .numerics import ResidualReport, matrix_exp


@dataclass(frozen=True)
class GroupElementSample:
    """One abstract group element realized in every fundamental rep of A_n.

    ``mats[j-1]`` is G in the j-th fundamental representation. The build
    recipe (a product of exp(c Z) with random Chevalley generators Z and
    |c| <= 1) is reproducible from the seed alone.
    """

    n: int
    seed: int
    word: tuple              # ((kind, site, coefficient), ...)
    reps: tuple
    mats: tuple

    @classmethod
    def generate(cls, n: int, seed: int, length: int = 8) -> "GroupElementSample":
        rng = np.random.default_rng(seed)
        word = []
        for _ in range(length):
            kind = ("e", "f", "h")[int(rng.integers(3))]
            site = int(rng.integers(1, n + 1))
            c = float(rng.uniform(-1.0, 1.0))
            word.append((kind, site, c))
        return cls.from_word(n, tuple(word), seed=seed)

    @classmethod
    def from_word(cls, n: int, word: tuple, seed: int = -1) -> "GroupElementSample":
        reps = all_fundamental_reps(n)
        mats = []
        for rep in reps:
            G = np.eye(rep.dim)
            for kind, site, c in word:
                G = G @ matrix_exp(c * rep.as_float(kind, site))
            G.setflags(write=False)
            mats.append(G)
        return cls(n=n, seed=seed, word=word, reps=tuple(reps), mats=tuple(mats))

    def det_report(self, tol: float = 1e-9) -> ResidualReport:
        devs = [abs(np.linalg.det(G) - 1.0) for G in self.mats]
        j = int(np.argmax(devs))
        return ResidualReport(name=f"sample-unimodular-A{self.n}",
                              max_abs=float(devs[j]), rms=float(np.mean(devs)),
                              tol=tol, argmax=f"j={j + 1}")

    def torus_transform(self, d1, d2) -> "GroupElementSample":
        """exp(sum d1_k h_k) G exp(sum d2_k h_k), a new valid sample."""
        left = tuple(("h", k + 1, float(c)) for k, c in enumerate(d1))
        right = tuple(("h", k + 1, float(c)) for k, c in enumerate(d2))
        return GroupElementSample.from_word(self.n, left + self.word + right,
                                            seed=self.seed)

    def perturbed(self, j: int, entry: tuple[int, int], eps: float) -> "GroupElementSample":
        """Copy with one matrix entry of rep j nudged off the group."""
        mats = [np.array(G) for G in self.mats]
        mats[j - 1][entry] += eps
        for G in mats:
            G.setflags(write=False)
        return GroupElementSample(n=self.n, seed=self.seed, word=self.word,
                                  reps=self.reps, mats=tuple(mats))


def word_element(sample: GroupElementSample, j: int, left=(), right=()) -> float:
    """<j| X+_(left...) G X-_(right...) |j> with fixed-end conventions.

    Weights 0 and n+1 carry the trivial representation: 1 for empty words,
    0 otherwise (the chain ends). Weights beyond that have no representation
    at all and give 0 outright, matching minors of negative or over-full
    order. A word whose site indices leave 1..n contributes 0.
    """
    n = sample.n
    if j in (0, n + 1):
        return 1.0 if (len(left) == 0 and len(right) == 0) else 0.0
    if not (1 <= j <= n):
        return 0.0
    if any(not (1 <= w <= n) for w in (*left, *right)):
        return 0.0
    rep = sample.reps[j - 1]
    row = np.zeros(rep.dim)
    row[rep.hw_index] = 1.0
    for w in left:
        row = row @ rep.as_float("e", w)
    col = np.zeros(rep.dim)
    col[rep.hw_index] = 1.0
    for w in reversed(right):
        col = rep.as_float("f", w) @ col
    return float(row @ sample.mats[j - 1] @ col)


def _tau(sample, i):
    return word_element(sample, i)


def _require_nonzero(sample, sites, context):
    for i in sites:
        if 1 <= i <= sample.n and abs(_tau(sample, i)) < 1e-12:
            raise SingularityError(
                f"<{i}|G|{i}> vanishes for this sample ({context})",
                nodes=[(i,)])


def first_jacobi_residual(G: GroupElementSample, j: int,
                          tol: float = 1e-9) -> ResidualReport:
    """Residual of the determinant identity at weight j."""
    if not (1 <= j <= G.n):
        raise ConfigurationError(f"weight {j} outside 1..{G.n}")
    K = cartan_matrix("A", G.n).entries
    neighbours = [i for i in range(1, G.n + 1) if i != j and K[j - 1, i - 1] != 0]
    _require_nonzero(G, neighbours, f"first Jacobi at j={j}")
    lhs = word_element(G, j, (j,), (j,)) * word_element(G, j) \
        - word_element(G, j, (j,)) * word_element(G, j, (), (j,))
    rhs = 1.0
    for i in range(1, G.n + 1):
        if i == j:
            continue
        k = int(K[j - 1, i - 1])
        if k:
            rhs *= _tau(G, i) ** (-k)
    res = abs(lhs - rhs)
    return ResidualReport(name=f"jacobi1-A{G.n}-j{j}", max_abs=res, rms=res,
                          tol=tol, argmax=f"seed={G.seed}")


def second_jacobi_residual(G: GroupElementSample, i: int, j: int,
                           tol: float = 1e-9) -> ResidualReport:
    """Residual of the two-weight bilinear identity for adjacent i, j.

    All parity prefactors are +1: only bosonic algebras are handled here,
    where the superdeterminant collapses to the determinant.
    """
    K = cartan_matrix("A", G.n).entries
    kij = int(K[i - 1, j - 1])
    kji = int(K[j - 1, i - 1])
    if kij == 0:
        raise ConfigurationError(f"sites {i}, {j} are not linked (K_ij = 0)")
    _require_nonzero(G, [i, j], f"second Jacobi at ({i},{j})")
    ti, tj = _tau(G, i), _tau(G, j)
    val = kij * word_element(G, j, (j, i)) / tj \
        + kji * word_element(G, i, (i, j)) / ti \
        + kij * kji * (word_element(G, j, (j,)) / tj) * (word_element(G, i, (i,)) / ti)
    res = abs(val)
    return ResidualReport(name=f"jacobi2-A{G.n}-{i}{j}", max_abs=res, rms=res,
                          tol=tol, argmax=f"seed={G.seed}")


def _alpha_like(G, j, a, b, sign):
    """(abar^(sign a)_j, alpha^(sign b)_j) word ratios for one sample."""
    t = _tau(G, j) if 1 <= j <= G.n else 1.0
    abar = 1.0 if a == 0 else word_element(G, j, raising_word(j, a, sign), ()) / t
    alph = 1.0 if b == 0 else word_element(G, j, (), lowering_word(j, b, sign)) / t
    return abar, alph


def q_element(G: GroupElementSample, j: int, a: int, b: int, sign: int) -> float:
    """Q_(a,b;j) = <j| R^(sign)_a(X+_j) G T^(sign)_b(X-_j) |j>."""
    return word_element(G, j, raising_word(j, a, sign) if a else (),
                        lowering_word(j, b, sign) if b else ())


def recurrence_residual(G: GroupElementSample, i: int, a: int, b: int,
                        sign: int = +1, tol: float = 1e-9) -> ResidualReport:
    """Residual of the Q-recurrence relating sites i+-1 and i+-2.

    Q_(a,b;i+-1) = (<i>/<i+-1>) Q_(a-1,b-1;i+-2)
                   + <i+-1> abar^(+-a)_(i+-1) alpha^(+-b)_(i+-1)

    At a = b = 1 this is a rearrangement of the first determinant identity.
    """
    if a < 1 or b < 1:
        raise ConfigurationError("recurrence needs a, b >= 1")
    if sign not in (+1, -1):
        raise ConfigurationError("sign must be +1 or -1")
    j1 = i + sign
    j2 = i + 2 * sign
    _require_nonzero(G, [x for x in (i, j1) if 1 <= x <= G.n],
                     f"recurrence at i={i}")
    lhs = q_element(G, j1, a, b, sign)
    t1 = _tau(G, j1)
    rhs = (_tau(G, i) / t1) * q_element(G, j2, a - 1, b - 1, sign) if t1 else 0.0
    abar, alph = _alpha_like(G, j1, a, b, sign)
    rhs += t1 * abar * alph
    res = abs(lhs - rhs)
    return ResidualReport(name=f"qrec-A{G.n}-i{i}{'+' if sign > 0 else '-'}a{a}b{b}",
                          max_abs=res, rms=res, tol=tol, argmax=f"seed={G.seed}")


def identity_sweep(max_rank: int, samples: int, seed: int,
                   tol: float = 1e-9, jobs: int = 1) -> list[ResidualReport]:
    """Worst-case residual reports over seeded random group elements.

    For every rank n <= max_rank: ``samples`` elements, first identity at
    every weight, second identity at every linked pair, recurrence at every
    admissible (i, a, b, sign) with a = b <= 2. One aggregated report per
    (rank, identity kind). Ranks are independent of each other, and each
    sample's seed depends only on (seed, n, s), so sweeping them with
    ``jobs`` worker threads changes nothing but the wall time.
    """

    def sweep_rank(n):
        worst = {"jacobi1": None, "jacobi2": None, "qrec": None}

        def keep(kind, rep):
            if worst[kind] is None or rep.max_abs > worst[kind].max_abs:
                worst[kind] = rep

        for s in range(samples):
            G = GroupElementSample.generate(n, seed + 1000 * n + s)
            for j in range(1, n + 1):
                keep("jacobi1", first_jacobi_residual(G, j, tol))
            for i in range(1, n):
                keep("jacobi2", second_jacobi_residual(G, i, i + 1, tol))
            for sign in (+1, -1):
                for i in range(1, n + 1):
                    for ab in (1, 2):
                        keep("qrec", recurrence_residual(G, i, ab, ab, sign, tol))
        out = []
        for kind, rep in worst.items():
            if rep is None:
                continue
            rep.name = f"{kind}-A{n}-sweep"
            rep.meta.update(samples=samples, seed=seed)
            out.append(rep)
        return out

    ranks = range(1, max_rank + 1)
    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(sweep_rank, ranks))
    else:
        chunks = [sweep_rank(n) for n in ranks]
    return [rep for chunk in chunks for rep in chunk]
