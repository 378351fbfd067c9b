"""Maps from cubes into Carnot groups, evaluated at dyadic points.

A :class:`SampledHolderMap` wraps a vectorised evaluator ``u -> coords`` where
``u`` has shape ``(..., d)`` and the result has shape ``(..., n)`` in the map's
declared chart.  Evaluators only use ``+``, ``-``, ``*`` and integer powers
whenever possible so that object arrays of ``Fraction`` flow through them
unchanged; this is what the exact path relies on.
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .lie import CarnotGroup, group


class EvaluationError(RuntimeError):
    pass


@dataclass(frozen=True)
class Cell:
    """A parametrised k-cube in the source: ``u in [0,1]^k -> R^d``.

    ``kind`` is ``"affine"`` (origin + side * u placed on the axes ``axes``,
    other coordinates frozen at ``origin``) or ``"projective"`` (the barycentric
    cube of a simplex, see :func:`holderint.chains.pseudomanifold_from_simplex`).
    """
    k: int
    kind: str
    origin: tuple
    side: object = Fraction(1)
    axes: tuple = ()
    vertices: tuple = ()      # projective cells: embedded simplex vertices
    apex: int = 0             # projective cells: index of the dominant vertex
    parent: "Cell | None" = None   # slice cells: the cell being restricted
    fixed: tuple = ()              # slice cells: (local index, value)

    def __call__(self, u):
        u = np.asarray(u)
        if self.kind == "affine":
            d = len(self.origin)
            out = np.empty(u.shape[:-1] + (d,), dtype=np.result_type(u, np.asarray(self.origin)))
            for c in range(d):
                out[..., c] = self.origin[c]
            for a, ax in enumerate(self.axes):
                out[..., ax] = out[..., ax] + self.side * u[..., a]
            return out
        if self.kind == "projective":
            m = len(self.vertices)
            others = [i for i in range(m) if i != self.apex]
            one = Fraction(1) if u.dtype == object else 1.0
            weights = [None] * m
            weights[self.apex] = np.full(u.shape[:-1], one, dtype=u.dtype)
            for a, i in enumerate(others):
                weights[i] = u[..., a]
            total = sum(weights)
            d = len(self.vertices[0])
            out = np.empty(u.shape[:-1] + (d,), dtype=u.dtype)
            for c in range(d):
                acc = 0
                for i in range(m):
                    acc = acc + weights[i] * self.vertices[i][c]
                out[..., c] = acc / total
            return out
        if self.kind == "slice":
            i, x = self.fixed
            val = np.full(u.shape[:-1] + (1,), Fraction(x) if u.dtype == object else float(x), dtype=u.dtype)
            return self.parent(np.concatenate([u[..., :i], val, u[..., i:]], axis=-1))
        raise ValueError(f"unknown cell kind {self.kind!r}")

    @property
    def diameter(self) -> float:
        if self.kind == "affine":
            return float(self.side) * math.sqrt(self.k)
        pts = self(np.array(list(itertools.product([0.0, 1.0], repeat=self.k))))
        return max(float(np.linalg.norm(a - b)) for a, b in itertools.combinations(pts, 2)) if len(pts) > 1 else 0.0

    def face(self, i: int, x: int) -> "Cell":
        """Face where local coordinate ``i`` equals ``x``."""
        if self.kind != "affine":
            return Cell(self.k - 1, "slice", self.origin, self.side, parent=self, fixed=(i, x))
        origin = list(self.origin)
        origin[self.axes[i]] = origin[self.axes[i]] + x * self.side
        axes = tuple(a for t, a in enumerate(self.axes) if t != i)
        return Cell(self.k - 1, "affine", tuple(origin), self.side, axes)

    def child(self, corner) -> "Cell":
        """Dyadic child cube with the given 0/1 corner offsets."""
        half = self.side / 2
        origin = list(self.origin)
        for a, ax in enumerate(self.axes):
            origin[ax] = origin[ax] + corner[a] * half
        return Cell(self.k, "affine", tuple(origin), half, self.axes)


def unit_cube(k: int, d: int | None = None) -> Cell:
    d = k if d is None else d
    return Cell(k, "affine", (Fraction(0),) * d, Fraction(1), tuple(range(k)))


def sub_cube(origin, side, k: int | None = None) -> Cell:
    origin = tuple(Fraction(o) for o in origin)
    k = len(origin) if k is None else k
    return Cell(k, "affine", origin, Fraction(side), tuple(range(k)))


def cube_faces(cell: Cell):
    """Oriented boundary faces ``[(sign, face)]`` with sign (-1)**(i+1+x) (0-indexed i)."""
    return [((-1) ** (i + 1 + x), cell.face(i, x)) for i in range(cell.k) for x in (0, 1)]


def dyadic_grid(level: int, k: int, exact: bool = True):
    """All points of the level-``level`` dyadic grid of [0,1]^k, shape (N+1,)*k + (k,)."""
    N = 2 ** level
    if exact:
        ticks = np.array([Fraction(i, N) for i in range(N + 1)], dtype=object)
    else:
        ticks = np.arange(N + 1, dtype=float) / N
    mesh = np.meshgrid(*([ticks] * k), indexing="ij")
    return np.stack(mesh, axis=-1)


@dataclass
class SampledHolderMap:
    """F: [0,1]^d -> G, evaluable at dyadic points, with Hölder data in the homogeneous metric."""
    group: CarnotGroup
    dim: int
    evaluator: Callable
    chart: str = "exp"
    alpha: float = 1.0
    holder_constant: float | None = None
    provenance: str = "analytic"
    smooth: bool = False
    name: str = "map"
    params: dict = field(default_factory=dict)

    def eval_exp(self, u, exact: bool = True):
        """Exponential coordinates of F(u); ``u`` has shape (..., dim)."""
        u = np.asarray(u, dtype=object if exact else float)
        try:
            out = self.evaluator(u)
        except Exception as exc:  # noqa: BLE001 - user evaluators may fail arbitrarily
            raise EvaluationError(f"{self.name}: evaluation failed: {exc}") from exc
        out = np.asarray(out)
        if out.shape != u.shape[:-1] + (self.group.n,):
            raise EvaluationError(f"{self.name}: evaluator returned shape {out.shape}")
        out = self.group.to_exp(out, self.chart)
        if not exact:
            out = np.asarray(out, dtype=float)
            if not np.all(np.isfinite(out)):
                raise EvaluationError(f"{self.name}: non-finite values")
        return out

    def grid(self, level: int, cell: Cell | None = None, exact: bool = True):
        """Exp-coordinate values on the level-``level`` grid of ``cell``."""
        cell = unit_cube(self.dim) if cell is None else cell
        u = dyadic_grid(level, cell.k, exact=exact)
        if not exact:
            u = u.astype(float)
        x = cell(u)
        if not exact:
            x = np.asarray(x, dtype=float)
        return self.eval_exp(x, exact=exact)

    def estimate_holder_constant(self, levels: int = 8, cell: Cell | None = None) -> float:
        """Grid estimate of sup d(F(u),F(v)) / |u-v|^alpha over dyadic neighbour pairs.

        Pairs are taken along every axis and every diagonal direction at each
        level up to ``levels``.  If a declared constant is exceeded it is raised
        with a warning.
        """
        cell = unit_cube(self.dim) if cell is None else cell
        k = cell.k
        best = 0.0
        for j in range(levels + 1):
            vals = self.grid(j, cell, exact=False)
            h = float(cell.side) / 2 ** j
            for off in itertools.product((0, 1), repeat=k):
                if not any(off):
                    continue
                sl_a = tuple(slice(0, vals.shape[a] - o) for a, o in enumerate(off))
                sl_b = tuple(slice(o, None) for o in off)
                d = self.group.dist_exp(vals[sl_a], vals[sl_b])
                best = max(best, float(np.max(d)) / (h * math.sqrt(sum(off))) ** self.alpha)
        if self.holder_constant is None:
            self.holder_constant = best
        elif best > self.holder_constant * (1 + 1e-9):
            warnings.warn(
                f"{self.name}: measured Hölder constant {best:.4g} exceeds declared "
                f"{self.holder_constant:.4g}; raising it", stacklevel=2)
            self.holder_constant = best
        return self.holder_constant

    def compose(self, cell: Cell, name: str | None = None) -> "SampledHolderMap":
        """F restricted to a cell, as a map on [0,1]^cell.k."""
        def ev(u, _F=self, _c=cell):
            return _F.group.from_exp(_F.eval_exp(_c(u), exact=u.dtype == object), _F.chart)
        return SampledHolderMap(self.group, cell.k, ev, self.chart, self.alpha, None,
                                self.provenance, self.smooth, name or f"{self.name}|cell", dict(self.params))


def _one(u):
    return Fraction(1) if u.dtype == object else 1.0


def _zeros(u, n):
    out = np.empty(u.shape[:-1] + (n,), dtype=u.dtype)
    out[...] = Fraction(0) if u.dtype == object else 0.0
    return out


# --- test-map library on H^1 (matrix chart) --------------------------------

def heisenberg():
    return group("heisenberg-1")


def planar_square(scale=1):
    """(s, t) -> (c s, c t, 0) in the matrix chart; C^{1/2} in the homogeneous metric."""
    G = heisenberg()

    def ev(u):
        out = _zeros(u, 3)
        out[..., 0] = scale * u[..., 0]
        out[..., 1] = scale * u[..., 1]
        return out
    return SampledHolderMap(G, 2, ev, "matrix", 0.5, None, "analytic", True, "planar-square", {"scale": scale})


def vertical_square(scale=1):
    """(s, t) -> (0, c s, c t) in the matrix chart; C^{1/2}."""
    G = heisenberg()

    def ev(u):
        out = _zeros(u, 3)
        out[..., 1] = scale * u[..., 0]
        out[..., 2] = scale * u[..., 1]
        return out
    return SampledHolderMap(G, 2, ev, "matrix", 0.5, None, "analytic", True, "vertical-square", {"scale": scale})


def vertical_curve(scale=1):
    """t -> (0, 0, c t); C^{1/2} and everywhere tangent to the centre."""
    G = heisenberg()

    def ev(u):
        out = _zeros(u, 3)
        out[..., 2] = scale * u[..., 0]
        return out
    return SampledHolderMap(G, 1, ev, "matrix", 0.5, None, "analytic", True, "vertical-curve", {"scale": scale})


def horizontal_curve_map(dim=2, a=1, b=1):
    """Rank-1 map (s, ...) -> gamma(s) = (a s, b s^2, 2 a b s^3 / 3); gamma is horizontal."""
    G = heisenberg()
    a, b = Fraction(a), Fraction(b)

    def ev(u):
        s = u[..., 0]
        if u.dtype != object:
            A, B = float(a), float(b)
        else:
            A, B = a, b
        out = _zeros(u, 3)
        out[..., 0] = A * s
        out[..., 1] = B * s * s
        out[..., 2] = (2 * A * B / 3) * s * s * s
        return out
    return SampledHolderMap(G, dim, ev, "matrix", 1.0, None, "analytic", True, "horizontal-curve", {"a": a, "b": b})


def horizontal_boundary_square(c=(1,), mu=(0, 1), nu=1):
    """Square whose boundary is a horizontal loop (matrix chart).

    x = s(1-s) c(s), y = mu(s) + nu t, z = int_0^s x(r) mu'(r) dr, where c and mu
    are polynomials given by coefficient lists (lowest degree first).  Lines
    t = const are horizontal and x vanishes on s in {0, 1}, so the whole
    boundary is horizontal while the map has rank 2.
    """
    import sympy
    G = heisenberg()
    s = sympy.Symbol("s")
    cpoly = sum(sympy.Rational(ci) * s ** i for i, ci in enumerate(c))
    mupoly = sum(sympy.Rational(mi) * s ** i for i, mi in enumerate(mu))
    xs = sympy.expand(s * (1 - s) * cpoly)
    zs = sympy.integrate(sympy.expand(xs * sympy.diff(mupoly, s)), (s, 0, s))
    polys = [sympy.Poly(e, s) for e in (xs, mupoly, sympy.expand(zs))]
    coeffs = [[(m[0], Fraction(int(v.p), int(v.q))) for m, v in p.terms()] for p in polys]
    nuF = Fraction(nu)

    def ev(u):
        S = u[..., 0]
        out = _zeros(u, 3)
        for idx, terms in enumerate(coeffs):
            acc = 0
            for e, cf in terms:
                acc = acc + (cf if u.dtype == object else float(cf)) * S ** e
            out[..., idx] = acc
        out[..., 1] = out[..., 1] + (nuF if u.dtype == object else float(nuF)) * u[..., 1]
        return out
    return SampledHolderMap(G, 2, ev, "matrix", 0.5, None, "analytic", True, "horizontal-boundary",
                            {"c": tuple(c), "mu": tuple(mu), "nu": nu})


def polynomial_map(coeffs, dim=2, name="polynomial", chart="matrix", group_name="heisenberg-1", alpha=0.5):
    """Polynomial map given per coordinate as ``{(e_s, e_t, ...): coefficient}``."""
    G = group(group_name)
    coeffs = [{tuple(e): Fraction(c) for e, c in comp.items()} for comp in coeffs]

    def ev(u):
        out = _zeros(u, G.n)
        for idx, comp in enumerate(coeffs):
            acc = 0
            for e, c in comp.items():
                term = c if u.dtype == object else float(c)
                for a, p in enumerate(e):
                    if p:
                        term = term * u[..., a] ** p
                acc = acc + term
            out[..., idx] = acc
        return out
    return SampledHolderMap(G, dim, ev, chart, alpha, None, "analytic", True, name, {"coeffs": coeffs})


def random_polynomial_map(rng, degree=2, dim=2, max_coeff=3):
    """Random integer-coefficient polynomial map into H^1 (matrix chart)."""
    comps = []
    for _ in range(3):
        comp = {}
        for e in itertools.product(range(degree + 1), repeat=dim):
            if sum(e) <= degree and rng.random() < 0.6:
                comp[e] = int(rng.integers(-max_coeff, max_coeff + 1))
        comps.append(comp)
    return polynomial_map(comps, dim=dim, name="random-polynomial")


def takagi(x, beta, level_cap=None):
    """Takagi-Landsberg function sum_n 2^{-n beta} dist(2^n x, Z), exact at dyadic x.

    At a dyadic point of level L all terms with n >= L vanish, so the sum is
    finite there.  ``level_cap`` bounds the number of terms for non-dyadic input.
    """
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    cap = 60 if level_cap is None else level_cap
    for n in range(cap):
        y = x * 2.0 ** n
        d = np.abs(y - np.round(y))
        if not np.any(d):
            break
        out = out + 2.0 ** (-n * beta) * d
    return out


def takagi_sheet(beta=0.8, drift=0):
    """(s, t) -> (0, s, T_beta(t) + drift t); Hölder exponent beta/2 in the homogeneous metric."""
    G = heisenberg()

    def ev(u):
        u = np.asarray(u, dtype=float)
        out = np.zeros(u.shape[:-1] + (3,))
        out[..., 1] = u[..., 0]
        out[..., 2] = takagi(u[..., 1], beta) + float(drift) * u[..., 1]
        return out
    return SampledHolderMap(G, 2, ev, "matrix", beta / 2, None, "analytic", False, "takagi-sheet",
                            {"beta": beta, "drift": drift})


def tabulated_map(grp: CarnotGroup, values, chart="exp", alpha=1.0, name="tabulated"):
    """Map known only on a dyadic grid: ``values`` has shape (N+1,)*d + (n,)."""
    values = np.asarray(values, dtype=object)
    d = values.ndim - 1
    N = values.shape[0] - 1

    def ev(u):
        idx = []
        for a in range(d):
            scaled = u[..., a] * N
            flat = np.asarray(scaled, dtype=object).ravel()
            ints = [int(v) for v in flat]
            if any(Fraction(v) != i for v, i in zip(flat, ints)):
                raise EvaluationError("tabulated map evaluated off its grid")
            idx.append(np.array(ints, dtype=int).reshape(np.shape(scaled)))
        return values[tuple(idx)]
    return SampledHolderMap(grp, d, ev, chart, alpha, None, "tabulated", False, name)


def random_rational_map(grp: CarnotGroup, dim: int, level: int, rng, denom=8, spread=4):
    """Random rational values on the level-``level`` grid (exact telescope tests)."""
    N = 2 ** level
    shape = (N + 1,) * dim + (grp.n,)
    nums = rng.integers(-spread * denom, spread * denom + 1, size=shape)
    vals = np.empty(shape, dtype=object)
    for idx in np.ndindex(*shape):
        vals[idx] = Fraction(int(nums[idx]), denom)
    return tabulated_map(grp, vals, "exp", 1.0, "random-rational")


FAMILIES = {
    "planar-square": planar_square,
    "vertical-square": vertical_square,
    "horizontal-curve": horizontal_curve_map,
    "vertical-curve": vertical_curve,
    "horizontal-boundary": horizontal_boundary_square,
    "takagi-sheet": takagi_sheet,
}


def parse_map(descriptor: str) -> SampledHolderMap:
    """``"name"`` or ``"name:key=value,key=value"`` -> map from the family library."""
    name, _, rest = descriptor.partition(":")
    if name not in FAMILIES:
        raise KeyError(f"unknown map family {name!r}; available: {', '.join(sorted(FAMILIES))}")
    kwargs = {}
    for item in filter(None, rest.split(",")):
        key, _, val = item.partition("=")
        kwargs[key.strip()] = _parse_value(val.strip())
    return FAMILIES[name](**kwargs)


def _parse_value(text):
    if "/" in text:
        return Fraction(text)
    if ";" in text:
        return tuple(_parse_value(t) for t in text.split(";"))
    try:
        return int(text)
    except ValueError:
        return float(text)
