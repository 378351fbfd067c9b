"""Graded nilpotent Lie algebras and the associated Carnot groups.

Group elements are handled in exponential coordinates of the first kind unless
a chart says otherwise.  Coordinates may be tuples of ``Fraction`` (exact
path), numpy float arrays of shape ``(..., n)`` (vectorised path) or object
arrays holding sympy expressions (symbolic path); every operation here is
written so that the same code serves all three.
"""
from __future__ import annotations

import itertools
import json
import os
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from importlib import resources
from pathlib import Path

import numpy as np
import sympy

MAX_STEP = 3

CATALOG_ENV = "HOLDERINT_CATALOG"


class AlgebraError(ValueError):
    """Structure constants violate an invariant, or an algebra is unsupported."""


class ChartError(ValueError):
    pass


def _as_array(p):
    if isinstance(p, GroupPoint):
        p = p.coords
    if isinstance(p, np.ndarray):
        return p
    return np.array(list(p), dtype=object)


def _to_tuple(arr):
    return tuple(arr.tolist()) if isinstance(arr, np.ndarray) else tuple(arr)


@dataclass(frozen=True)
class GroupPoint:
    coords: tuple
    chart: str = "exp"

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(self.coords))

    def __len__(self):
        return len(self.coords)

    def __iter__(self):
        return iter(self.coords)


@dataclass(frozen=True)
class GradedLieAlgebra:
    name: str
    layer_dims: tuple
    # (i, j, k, c) with i < j and [e_i, e_j] = sum_k c e_k
    constants: tuple
    description: str = field(default="", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "layer_dims", tuple(int(d) for d in self.layer_dims))
        object.__setattr__(
            self, "constants",
            tuple(sorted((int(i), int(j), int(k), Fraction(c)) for i, j, k, c in self.constants)),
        )

    @property
    def n(self) -> int:
        return sum(self.layer_dims)

    @property
    def step(self) -> int:
        return len(self.layer_dims)

    @cached_property
    def weights(self) -> tuple:
        """Weight (layer index, starting at 1) of each basis coordinate."""
        return tuple(l + 1 for l, d in enumerate(self.layer_dims) for _ in range(d))

    @cached_property
    def layers(self) -> tuple:
        out, start = [], 0
        for d in self.layer_dims:
            out.append(tuple(range(start, start + d)))
            start += d
        return tuple(out)

    @property
    def hausdorff_dimension(self) -> int:
        return sum((l + 1) * d for l, d in enumerate(self.layer_dims))

    @cached_property
    def table(self) -> dict:
        """Full antisymmetric table ``{(i, j): {k: c}}``."""
        tab: dict = {}
        for i, j, k, c in self.constants:
            if c == 0:
                continue
            tab.setdefault((i, j), {})[k] = tab.get((i, j), {}).get(k, 0) + c
            tab.setdefault((j, i), {})[k] = tab.get((j, i), {}).get(k, 0) - c
        return tab

    def structure_constant(self, i: int, j: int, k: int) -> Fraction:
        return Fraction(self.table.get((i, j), {}).get(k, 0))

    def bracket(self, a, b):
        """Lie bracket of two algebra vectors (sequences or arrays with last axis n)."""
        A, B = _as_array(a), _as_array(b)
        if A.shape[-1] != self.n or B.shape[-1] != self.n:
            raise ValueError(f"expected vectors of dimension {self.n}")
        out = np.zeros(np.broadcast_shapes(A.shape, B.shape), dtype=np.result_type(A, B))
        if out.dtype == object:
            out[...] = 0
        for i, j, k, c in self.constants:
            cc = float(c) if out.dtype != object else c
            out[..., k] = out[..., k] + cc * (A[..., i] * B[..., j] - A[..., j] * B[..., i])
        return out

    def bch(self, a, b):
        """log(exp(a) exp(b)), exact for step <= 3."""
        if self.step > MAX_STEP:
            raise AlgebraError(f"step {self.step} exceeds supported BCH truncation (step <= {MAX_STEP})")
        A, B = _as_array(a), _as_array(b)
        out = A + B
        if self.step >= 2:
            ab = self.bracket(A, B)
            half = 0.5 if ab.dtype != object else Fraction(1, 2)
            out = out + half * ab
            if self.step >= 3:
                twelfth = 1 / 12 if ab.dtype != object else Fraction(1, 12)
                out = out + twelfth * (self.bracket(A, ab) - self.bracket(B, ab))
        return out

    # --- invariants -------------------------------------------------------
    def check(self) -> None:
        """Raise ``AlgebraError`` unless antisymmetry, grading, Jacobi and step hold exactly."""
        n, w = self.n, self.weights
        for i, j, k, c in self.constants:
            if not (0 <= i < n and 0 <= j < n and 0 <= k < n):
                raise AlgebraError(f"index out of range in ({i},{j},{k})")
            if i >= j:
                raise AlgebraError(f"structure constants must be listed with i < j, got ({i},{j})")
            if c != 0 and w[k] != w[i] + w[j]:
                raise AlgebraError(f"[e{i}, e{j}] has a component on e{k}, violating the grading")
        basis = [tuple(Fraction(int(r == c)) for c in range(n)) for r in range(n)]
        for a, b, c in itertools.combinations(range(n), 3):
            ea, eb, ec = (np.array(basis[x], dtype=object) for x in (a, b, c))
            jac = (self.bracket(ea, self.bracket(eb, ec)) + self.bracket(eb, self.bracket(ec, ea))
                   + self.bracket(ec, self.bracket(ea, eb)))
            if any(x != 0 for x in jac):
                raise AlgebraError(f"Jacobi identity fails on (e{a}, e{b}, e{c})")
        # layer l+1 must be spanned by [g_1, g_l]; otherwise g is not Carnot of the stated step
        for l in range(1, self.step):
            image = set()
            for i in self.layers[0]:
                for j in self.layers[l - 1]:
                    image.update(k for k, c in self.table.get((i, j), {}).items() if c != 0)
            vecs = []
            for i in self.layers[0]:
                for j in self.layers[l - 1]:
                    vecs.append([self.structure_constant(i, j, k) for k in self.layers[l]])
            from .linalg import rank
            if rank(vecs) != self.layer_dims[l]:
                raise AlgebraError(f"layer {l + 1} is not generated by brackets with the first layer")
        if self.layer_dims[-1] == 0:
            raise AlgebraError("top layer is zero")

    @classmethod
    def from_record(cls, rec: dict) -> "GradedLieAlgebra":
        consts = [(i, j, k, Fraction(num, den)) for i, j, k, num, den in rec["structure_constants"]]
        alg = cls(rec["name"], tuple(rec["layer_dims"]), tuple(consts), rec.get("description", ""))
        alg.check()
        return alg

    def to_record(self) -> dict:
        return {
            "name": self.name,
            "description": self.description,
            "layer_dims": list(self.layer_dims),
            "structure_constants": [[i, j, k, c.numerator, c.denominator] for i, j, k, c in self.constants],
        }


def abelian(n: int) -> GradedLieAlgebra:
    return GradedLieAlgebra(f"abelian-{n}", (n,), ())


def catalog_dir() -> Path:
    env = os.environ.get(CATALOG_ENV)
    if env:
        return Path(env)
    return Path(str(resources.files("holderint") / "catalog"))


def catalog_names() -> list:
    return sorted(p.stem for p in catalog_dir().glob("*.json"))


def load_algebra(name: str) -> GradedLieAlgebra:
    """Load and validate a catalog algebra by name (or a path to a JSON record)."""
    path = Path(name)
    if not path.suffix:
        path = catalog_dir() / f"{name}.json"
    if not path.exists():
        if name.startswith("abelian-") and name[8:].isdigit():
            return abelian(int(name[8:]))
        raise KeyError(f"unknown algebra {name!r}; available: {', '.join(catalog_names())}")
    with open(path) as fh:
        return GradedLieAlgebra.from_record(json.load(fh))


def save_algebra(alg: GradedLieAlgebra, path) -> None:
    with open(path, "w") as fh:
        json.dump(alg.to_record(), fh, indent=1)
        fh.write("\n")


# --- charts ---------------------------------------------------------------
# The H^1 matrix chart: (x, y, z) <-> [[1, x, z], [0, 1, y], [0, 0, 1]].
# Exponential coordinates satisfy z_exp = z - x y / 2.

def _half(arr):
    return 0.5 if arr.dtype != object else Fraction(1, 2)


def _matrix_to_exp(arr):
    out = arr.copy()
    out[..., 2] = arr[..., 2] - _half(arr) * arr[..., 0] * arr[..., 1]
    return out


def _exp_to_matrix(arr):
    out = arr.copy()
    out[..., 2] = arr[..., 2] + _half(arr) * arr[..., 0] * arr[..., 1]
    return out


class CarnotGroup:
    """The simply connected group of a graded algebra, with dilations and a homogeneous norm."""

    def __init__(self, algebra: GradedLieAlgebra):
        if algebra.step > MAX_STEP:
            raise AlgebraError(f"step {algebra.step} exceeds supported BCH truncation (step <= {MAX_STEP})")
        self.algebra = algebra
        self.charts = {"exp": (lambda a: a, lambda a: a)}
        if algebra.layer_dims == (2, 1) and algebra.table.get((0, 1)) == {2: 1}:
            self.charts["matrix"] = (_matrix_to_exp, _exp_to_matrix)

    def __repr__(self):
        return f"CarnotGroup({self.algebra.name})"

    @property
    def n(self):
        return self.algebra.n

    def identity(self, chart="exp", exact=True) -> GroupPoint:
        zero = Fraction(0) if exact else 0.0
        return GroupPoint((zero,) * self.n, chart)

    def point(self, coords, chart="exp") -> GroupPoint:
        coords = tuple(coords)
        if len(coords) != self.n:
            raise ValueError(f"expected {self.n} coordinates, got {len(coords)}")
        if chart not in self.charts:
            raise ChartError(f"chart {chart!r} not available for {self.algebra.name}")
        return GroupPoint(coords, chart)

    # array-level operations, exponential coordinates ----------------------
    def to_exp(self, arr, chart="exp"):
        try:
            return self.charts[chart][0](_as_array(arr))
        except KeyError:
            raise ChartError(f"chart {chart!r} not available for {self.algebra.name}") from None

    def from_exp(self, arr, chart="exp"):
        try:
            return self.charts[chart][1](_as_array(arr))
        except KeyError:
            raise ChartError(f"chart {chart!r} not available for {self.algebra.name}") from None

    def mul_exp(self, a, b):
        return self.algebra.bch(a, b)

    def dilate_exp(self, t, a):
        A = _as_array(a)
        w = self.algebra.weights
        out = A.copy()
        for i in range(self.n):
            out[..., i] = A[..., i] * t ** w[i]
        return out

    def norm_exp(self, a):
        """Default homogeneous norm: max over layers of (layer sup-norm)**(1/layer)."""
        A = np.asarray(_as_array(a), dtype=float)
        vals = []
        for l, idx in enumerate(self.algebra.layers):
            m = np.max(np.abs(A[..., list(idx)]), axis=-1)
            vals.append(m ** (1.0 / (l + 1)))
        return np.max(np.stack(vals, axis=0), axis=0)

    def dist_exp(self, a, b):
        return self.norm_exp(self.mul_exp(-_as_array(a), b))

    # point-level API -------------------------------------------------------
    def _same_chart(self, *pts):
        charts = {p.chart for p in pts}
        if len(charts) > 1:
            raise ChartError(f"chart mismatch: {sorted(charts)}")
        return charts.pop()

    def mul(self, p: GroupPoint, q: GroupPoint) -> GroupPoint:
        chart = self._same_chart(p, q)
        out = self.mul_exp(self.to_exp(p, chart), self.to_exp(q, chart))
        return GroupPoint(_to_tuple(self.from_exp(out, chart)), chart)

    def inv(self, p: GroupPoint) -> GroupPoint:
        a = -self.to_exp(p, p.chart)
        return GroupPoint(_to_tuple(self.from_exp(a, p.chart)), p.chart)

    def dilate(self, t, p: GroupPoint) -> GroupPoint:
        if not t > 0:
            raise ValueError(f"dilation factor must be positive, got {t}")
        a = self.dilate_exp(t, self.to_exp(p, p.chart))
        return GroupPoint(_to_tuple(self.from_exp(a, p.chart)), p.chart)

    def hom_norm(self, p: GroupPoint, exact: bool = False):
        a = self.to_exp(p, p.chart)
        if not exact:
            return float(self.norm_exp(np.array([float(x) for x in a])))
        vals = []
        for l, idx in enumerate(self.algebra.layers):
            m = max(abs(sympy.nsimplify(a[i])) for i in idx)
            vals.append(sympy.root(m, l + 1))
        return sympy.Max(*vals)

    def hom_dist(self, p: GroupPoint, q: GroupPoint, exact: bool = False):
        self._same_chart(p, q)
        return self.hom_norm(self.mul(self.inv(p), q), exact=exact)

    def convert(self, p: GroupPoint, target: str) -> GroupPoint:
        a = self.to_exp(p, p.chart)
        return GroupPoint(_to_tuple(self.from_exp(a, target)), target)

    def diameter_exp(self, pts):
        """Homogeneous diameter of point sets; ``pts`` has shape (..., m, n)."""
        pts = np.asarray(pts, dtype=float)
        m = pts.shape[-2]
        best = np.zeros(pts.shape[:-2])
        for a, b in itertools.combinations(range(m), 2):
            best = np.maximum(best, self.dist_exp(pts[..., a, :], pts[..., b, :]))
        return best


def group(name_or_algebra) -> CarnotGroup:
    alg = name_or_algebra if isinstance(name_or_algebra, GradedLieAlgebra) else load_algebra(name_or_algebra)
    return CarnotGroup(alg)
