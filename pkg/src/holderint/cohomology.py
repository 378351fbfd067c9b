"""Weight-graded Chevalley-Eilenberg cohomology of graded nilpotent Lie algebras.

Everything is exact: the differential has rational entries, ranks come from
Fraction Gaussian elimination, and the Hölder bound is a Fraction.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

from .lie import GradedLieAlgebra, load_algebra
from .linalg import rank


class CohomologyError(ValueError):
    pass


def _algebra(a) -> GradedLieAlgebra:
    return load_algebra(a) if isinstance(a, str) else a


def basis(n: int, k: int):
    return list(itertools.combinations(range(n), k))


def _dtheta(alg: GradedLieAlgebra):
    """d theta^i = -sum_{j<l} c^i_{jl} theta^j ^ theta^l, as {i: {(j, l): coef}}."""
    out = {i: {} for i in range(alg.n)}
    for j, l, i, c in alg.constants:
        if c:
            out[i][(j, l)] = out[i].get((j, l), 0) - c
    return out


def _sort_sign(idx):
    if len(set(idx)) < len(idx):
        return 0, None
    idx = list(idx)
    sign = 1
    for a in range(len(idx)):
        for b in range(len(idx) - 1 - a):
            if idx[b] > idx[b + 1]:
                idx[b], idx[b + 1] = idx[b + 1], idx[b]
                sign = -sign
    return sign, tuple(idx)


def ce_differential(algebra, k: int):
    """Matrix of d: Lambda^k g* -> Lambda^{k+1} g* in the basis of increasing multi-indices.

    Rows index degree k+1, columns degree k.
    """
    alg = _algebra(algebra)
    n = alg.n
    if not 0 <= k <= n:
        raise CohomologyError(f"degree {k} out of range [0, {n}]")
    src, dst = basis(n, k), basis(n, k + 1)
    pos = {I: r for r, I in enumerate(dst)}
    M = [[Fraction(0)] * len(src) for _ in dst]
    dth = _dtheta(alg)
    for c, I in enumerate(src):
        for p, i in enumerate(I):
            for (j, l), coef in dth[i].items():
                s, K = _sort_sign(I[:p] + (j, l) + I[p + 1:])
                if s:
                    M[pos[K]][c] += (-1) ** p * s * coef
    return M


def _weight(alg, I):
    return sum(alg.weights[i] for i in I)


def weight_blocks(algebra, k: int):
    """Split d_k into weight blocks ``{w: (rows, cols, matrix)}``; asserts it never mixes weights."""
    alg = _algebra(algebra)
    M = ce_differential(alg, k)
    src, dst = basis(alg.n, k), basis(alg.n, k + 1)
    for r, J in enumerate(dst):
        for c, I in enumerate(src):
            if M[r][c] and _weight(alg, J) != _weight(alg, I):
                raise CohomologyError(f"differential mixes weights {_weight(alg, I)} -> {_weight(alg, J)}")
    out = {}
    for w in sorted({_weight(alg, I) for I in src}):
        cols = [c for c, I in enumerate(src) if _weight(alg, I) == w]
        rows = [r for r, J in enumerate(dst) if _weight(alg, J) == w]
        out[w] = (rows, cols, [[M[r][c] for c in cols] for r in rows])
    return out


@dataclass
class CohomologyTable:
    algebra: str
    n: int
    Q: int
    dims: dict                    # k -> dim H^k
    weight_dims: dict             # (k, w) -> dim H^{k,w} (nonzero only)
    w_min: dict                   # k -> w(k)
    w_max: dict                   # k -> W(k)
    bound: Fraction
    witness: int
    violations: list = field(default_factory=list)

    def rows(self):
        """(k, dim H^k, w(k), W(k), weights listing) per degree."""
        out = []
        for k in range(self.n + 1):
            ws = {w: d for (kk, w), d in self.weight_dims.items() if kk == k}
            out.append((k, self.dims[k], self.w_min.get(k), self.w_max.get(k),
                        " ".join(f"{w}:{d}" for w, d in sorted(ws.items()))))
        return out

    def to_record(self) -> dict:
        return {
            "algebra": self.algebra, "n": self.n, "Q": self.Q,
            "dims": [self.dims[k] for k in range(self.n + 1)],
            "weight_dims": sorted([k, w, d] for (k, w), d in self.weight_dims.items()),
            "bound": str(self.bound), "witness": self.witness,
        }

    def format(self) -> str:
        lines = [f"algebra {self.algebra}  n={self.n}  Q={self.Q}",
                 f"{'k':>3} {'dim':>5} {'w(k)':>5} {'W(k)':>5}  weights"]
        for k, d, lo, hi, ws in self.rows():
            lines.append(f"{k:>3} {d:>5} {str(lo):>5} {str(hi):>5}  {ws}")
        lines.append(f"bound {self.bound} (degree {self.witness})")
        for v in self.violations:
            lines.append(f"warning: {v}")
        return "\n".join(lines)


def hausdorff_dimension(algebra) -> int:
    return _algebra(algebra).hausdorff_dimension


def permuted(algebra, perm) -> GradedLieAlgebra:
    """The same algebra with basis vector i renamed perm[i] (layer dims kept only if layers stay sorted)."""
    alg = _algebra(algebra)
    consts = []
    for i, j, k, c in alg.constants:
        a, b = perm[i], perm[j]
        consts.append((a, b, perm[k], c) if a < b else (b, a, perm[k], -c))
    return _Relabelled(alg, tuple(perm), tuple(consts))


class _Relabelled:
    """Duck-typed algebra view with permuted basis; only what the cohomology code reads."""

    def __init__(self, alg, perm, consts):
        self.name = alg.name
        self.n = alg.n
        self.constants = consts
        w = [0] * alg.n
        for i, p in enumerate(perm):
            w[p] = alg.weights[i]
        self.weights = tuple(w)
        self.hausdorff_dimension = alg.hausdorff_dimension


def cohomology_table(algebra) -> CohomologyTable:
    alg = _algebra(algebra)
    n = alg.n
    blocks = {k: weight_blocks(alg, k) for k in range(n + 1)}
    rank_of = {(k, w): rank(m) if rows and cols else 0
               for k, bl in blocks.items() for w, (rows, cols, m) in bl.items()}
    weight_dims, dims, w_min, w_max = {}, {}, {}, {}
    for k in range(n + 1):
        total = 0
        for w, (rows, cols, _) in blocks[k].items():
            d = len(cols) - rank_of[(k, w)] - rank_of.get((k - 1, w), 0)
            if d:
                weight_dims[(k, w)] = d
                total += d
        dims[k] = total
        ws = [w for (kk, w) in weight_dims if kk == k]
        if ws:
            w_min[k], w_max[k] = min(ws), max(ws)
    Q = alg.hausdorff_dimension
    if n >= 2:
        bound, witness = min((Fraction(k, w_min[k]), k) for k in range(1, n) if k in w_min)
    else:
        bound, witness = Fraction(1), n
    violations = []
    if dims.get(0) != 1 or dims.get(n) != 1:
        violations.append("dim H^0 or dim H^n differs from 1")
    for k in range(n + 1):
        if dims[k] != dims[n - k]:
            violations.append(f"Poincare duality fails in degree {k}")
        if sum(d for (kk, _), d in weight_dims.items() if kk == k) != dims[k]:
            violations.append(f"weight dimensions do not add up in degree {k}")
    if w_max.get(n) != Q:
        violations.append(f"W(n) = {w_max.get(n)} differs from Q = {Q}")
    for k in range(n + 1):
        if k in w_min and (n - k) in w_max and w_min[k] + w_max[n - k] != Q:
            violations.append(f"w({k}) + W({n - k}) != Q")
    return CohomologyTable(alg.name, n, Q, dims, weight_dims, w_min, w_max, bound, witness, violations)


def holder_bound(algebra):
    """(bound, witness degree) = min over 1 <= k <= n-1 of k / w(k)."""
    t = cohomology_table(algebra)
    return t.bound, t.witness


def closed_form_bound(name: str):
    """Known closed-form bounds for catalog families, or None."""
    fam, _, m = name.rpartition("-")
    if not m.isdigit():
        return None
    m = int(m)
    if fam == "heisenberg":
        return Fraction(m + 1, m + 2)
    if fam == "quaternionic-heisenberg":
        return Fraction(4 * m + 1, 4 * m + 4)
    if fam == "abelian":
        return Fraction(1)
    return None


def generic_distribution_bound(n: int, h: int, k: int, hausdorff: int | None = None) -> Fraction:
    """(n-k)/(Q-k) for the nilpotentization of a generic rank-h distribution in dimension n.

    Q defaults to n + h, giving (n-k)/(n+h-k).  A step-2 nilpotentization
    actually has Hausdorff dimension 2n - h; pass ``hausdorff`` to use it.
    Refuses unless k >= 1, 0 < h < n and h - k >= (n - h) k.
    """
    if k < 1:
        raise CohomologyError("k must be at least 1")
    if not 0 < h < n:
        raise CohomologyError(f"need 0 < h < n, got h={h}, n={n}")
    if h - k < (n - h) * k:
        raise CohomologyError(f"condition h - k >= (n - h) k fails: {h - k} < {(n - h) * k}")
    Q = n + h if hausdorff is None else hausdorff
    return Fraction(n - k, Q - k)
