"""Integration of weighted forms over straight simplices, chains and dyadic levels.

Straight simplices of step <= 2 groups are affine in exponential coordinates,
so the pullback of a polynomial form is a polynomial in barycentric
coordinates and a Grundmann-Moeller rule of sufficient degree integrates it
exactly (in Fractions, or in floats up to rounding).  Step-3 simplices are
rational maps; there the Jacobian is obtained by complex-step differentiation
and the rule is only approximate.
"""
from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .chains import Chain, SimplexMap, _eval_straight, kuhn_simplices
from .forms import WeightedForm, compile_poly
from .lie import CarnotGroup
from .maps import Cell, SampledHolderMap, unit_cube

DEFAULT_DEGREE = 7
STRIP_SIMPLICES = 1 << 16


class IntegrationError(ValueError):
    pass


# --- Grundmann-Moeller rule -------------------------------------------------

def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


@lru_cache(maxsize=64)
def grundmann_moeller(k: int, degree: int = DEFAULT_DEGREE):
    """Rational nodes (barycentric, shape (N, k+1)) and weights of a degree >= ``degree`` rule.

    Weights sum to the volume 1/k! of the standard simplex.
    """
    if k == 0:
        return ((Fraction(1),),), (Fraction(1),)
    s = max(0, degree // 2)
    d = 2 * s + 1
    merged: dict = {}
    for i in range(s + 1):
        w = Fraction((-1) ** i * (d + k - 2 * i) ** d, 2 ** (2 * s) * math.factorial(i) * math.factorial(d + k - i))
        denom = d + k - 2 * i
        for beta in _compositions(s - i, k + 1):
            node = tuple(Fraction(2 * b + 1, denom) for b in beta)
            merged[node] = merged.get(node, 0) + w
    nodes = tuple(sorted(merged))
    return nodes, tuple(merged[n] for n in nodes)


def rule_arrays(k: int, degree: int, exact: bool):
    nodes, weights = grundmann_moeller(k, degree)
    if exact:
        return np.array(nodes, dtype=object), np.array(weights, dtype=object)
    return np.array(nodes, dtype=float), np.array([float(w) for w in weights])


# --- pullback integrands --------------------------------------------------------

def _det(M):
    """Leibniz determinant over the last two axes (works for object arrays)."""
    k = M.shape[-1]
    if k == 0:
        return np.ones(M.shape[:-2], dtype=M.dtype)
    total = 0
    for perm in itertools.permutations(range(k)):
        sign = 1
        for a in range(k):
            for b in range(a + 1, k):
                if perm[a] > perm[b]:
                    sign = -sign
        term = M[..., 0, perm[0]]
        for r in range(1, k):
            term = term * M[..., r, perm[r]]
        total = total + sign * term
    return total


@dataclass(frozen=True)
class RawIntegrand:
    """A form as raw exp-coordinate terms with compiled coefficients."""
    degree: int
    terms: tuple           # ((J indices, CompiledPoly), ...)
    poly_degree: int

    @classmethod
    def of(cls, form: WeightedForm) -> "RawIntegrand":
        f = form.to_chart("exp")
        raw = f.to_raw()
        terms = tuple((J, compile_poly(c, f.syms)) for J, c in sorted(raw.items()))
        deg = max((p.degree for _, p in terms), default=0)
        return cls(form.degree, terms, deg)

    def density(self, X, D):
        """sum_J a_J(X) * D_J where ``D`` maps J to minor determinants broadcastable with X[..., 0]."""
        out = 0
        for J, poly in self.terms:
            out = out + poly(X) * D[J]
        return out


def _integrand(form) -> RawIntegrand:
    return form if isinstance(form, RawIntegrand) else RawIntegrand.of(form)


def affine_simplex_integrals(V, form, exact: bool = False, degree: int | None = None):
    """Integrals of ``form`` over affine simplices with vertices ``V`` of shape (M, k+1, n)."""
    itg = _integrand(form)
    V = np.asarray(V)
    M, kp1, n = V.shape
    k = kp1 - 1
    if k != itg.degree:
        raise IntegrationError(f"form of degree {itg.degree} on {k}-simplices")
    if M == 0:
        return np.zeros(0, dtype=object if exact else float)
    deg = max(DEFAULT_DEGREE if degree is None else degree, itg.poly_degree)
    nodes, weights = rule_arrays(k, deg, exact)
    E = V[:, 1:, :] - V[:, :1, :]                      # (M, k, n)
    D = {J: _det(np.swapaxes(E[:, :, list(J)], 1, 2)) for J, _ in itg.terms}
    X = np.einsum("qi,min->mqn", nodes, V) if not exact else _obj_einsum(nodes, V)
    vals = 0
    for J, poly in itg.terms:
        vals = vals + poly(X) * D[J][:, None]
    return vals @ weights if not exact else np.array([sum(r * weights) for r in vals], dtype=object)


def _obj_einsum(nodes, V):
    M, kp1, n = V.shape
    X = np.empty((M, nodes.shape[0], n), dtype=object)
    for q in range(nodes.shape[0]):
        acc = 0
        for i in range(kp1):
            acc = acc + nodes[q, i] * V[:, i, :]
        X[:, q, :] = acc
    return X


def cone_coordinates(t):
    """Barycentric coordinates of nested cone coordinates ``t`` in [0,1]^k (last axis).

    lam_0 = 1 - t_1 and the remaining coordinates are t_1 times the barycentric
    coordinates of (t_2, ..., t_k) on the opposite face.  Straight simplices are
    polynomial in these coordinates and the change of variables has positive
    Jacobian.
    """
    k = t.shape[-1]
    if k == 0:
        return np.ones(t.shape[:-1] + (1,), dtype=t.dtype)
    inner = cone_coordinates(t[..., 1:])
    t1 = t[..., :1]
    return np.concatenate([1 - t1, t1 * inner], axis=-1)


@lru_cache(maxsize=32)
def _gauss_cube(k: int, m: int):
    x, w = np.polynomial.legendre.leggauss(m)
    x, w = (x + 1) / 2, w / 2
    pts = np.stack(np.meshgrid(*([x] * k), indexing="ij"), axis=-1).reshape(-1, k)
    wts = np.prod(np.stack(np.meshgrid(*([w] * k), indexing="ij"), axis=-1).reshape(-1, k), axis=-1)
    return pts, wts


def straight_simplex_integrals(G: CarnotGroup, V, form, points: int | None = None, absolute: bool = False):
    """Float integrals over general straight simplices, any step.

    Uses a tensor Gauss-Legendre rule in cone coordinates, where the simplex is
    polynomial, and a complex-step Jacobian.  With ``absolute`` the modulus of
    the pulled-back density is integrated instead.
    """
    itg = _integrand(form)
    V = np.asarray(V, dtype=float)
    M, kp1, n = V.shape
    k = kp1 - 1
    m = points or (6 + itg.poly_degree)
    T, weights = _gauss_cube(k, m)
    h = 1e-30
    bary = cone_coordinates(T.astype(complex))
    out = np.empty(M)
    for s in range(M):
        P = V[s].astype(complex)
        X = _eval_straight(G, P, bary).real
        Jac = np.empty((len(T), n, k))
        for a in range(k):
            tt = T.astype(complex)
            tt[:, a] += 1j * h
            Jac[:, :, a] = _eval_straight(G, P, cone_coordinates(tt)).imag / h
        D = {J: _det(Jac[:, list(J), :]) for J, _ in itg.terms}
        dens = itg.density(X, D) if itg.terms else np.zeros(len(T))
        out[s] = (np.abs(dens) if absolute else dens) @ weights
    return out


def _is_affine_group(G: CarnotGroup) -> bool:
    return G.algebra.step <= 2


def integrate_over_simplex(sigma: SimplexMap, form: WeightedForm, exact: bool | None = None,
                           degree: int | None = None):
    """Integral of ``form`` over a straight simplex; exact Fraction when vertices are rational."""
    if sigma.k != form.degree:
        raise IntegrationError(f"form of degree {form.degree} on a {sigma.k}-simplex")
    c = Chain.simplex(sigma.vertices, sigma.orientation)
    return integrate_over_chain(c, form, sigma.group, exact=exact, degree=degree)


def _rational(chain: Chain) -> bool:
    return all(isinstance(x, (int, Fraction)) for verts, _ in chain.items() for v in verts for x in v)


def integrate_over_chain(chain: Chain, form: WeightedForm, G: CarnotGroup | None = None,
                         exact: bool | None = None, degree: int | None = None):
    """Linear extension of simplex integration; exact whenever possible unless ``exact=False``."""
    G = form.group if G is None else G
    if chain.dim != form.degree:
        raise IntegrationError(f"form of degree {form.degree} on a {chain.dim}-chain")
    if not chain:
        return Fraction(0) if exact is not False else 0.0
    affine = _is_affine_group(G)
    if exact is None:
        exact = affine and _rational(chain)
    if exact and not affine:
        raise IntegrationError("exact integration needs a step <= 2 group")
    items = list(chain.items())
    coefs = [c for _, c in items]
    if exact:
        V = np.array([[[Fraction(x) for x in v] for v in verts] for verts, _ in items], dtype=object)
        vals = affine_simplex_integrals(V, form, exact=True, degree=degree)
        return sum((c * v for c, v in zip(coefs, vals)), Fraction(0))
    V = np.array([[[float(x) for x in v] for v in verts] for verts, _ in items], dtype=float)
    if affine:
        vals = affine_simplex_integrals(V, form, exact=False, degree=degree)
    else:
        vals = straight_simplex_integrals(G, V, form)
    return math.fsum(c * v for c, v in zip(coefs, vals))


# --- dyadic levels ------------------------------------------------------------------

def _grid_points(cell: Cell, level: int, lo: int, hi: int, exact: bool):
    """Source points of grid rows lo..hi (inclusive) along the first axis."""
    N = 2 ** level
    if exact:
        ticks = np.array([Fraction(i, N) for i in range(N + 1)], dtype=object)
    else:
        ticks = np.arange(N + 1, dtype=float) / N
    axes = [ticks[lo:hi + 1]] + [ticks] * (cell.k - 1)
    u = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    x = cell(u)
    return x if exact else np.asarray(x, dtype=float)


def _strip_simplices(vals, k: int):
    """Kuhn simplices of all cubes in a value strip: (signs, V of shape (M, k+1, n))."""
    shape = vals.shape[:k]
    blocks, signs = [], []
    for sign, corners in kuhn_simplices(k):
        verts = []
        for c in corners:
            sl = tuple(slice(ci, ci + s - 1) for ci, s in zip(c, shape))
            verts.append(vals[sl].reshape(-1, vals.shape[-1]))
        blocks.append(np.stack(verts, axis=1))
        signs.append(np.full(blocks[-1].shape[0], sign))
    return np.concatenate(signs), np.concatenate(blocks, axis=0)


def _simplex_values(G, V, itg, exact, degree):
    if degree is None:
        degree = max(itg.poly_degree, 1)
    if exact:
        return affine_simplex_integrals(V, itg, exact=True, degree=degree)
    if _is_affine_group(G):
        return affine_simplex_integrals(V, itg, exact=False, degree=degree)
    return straight_simplex_integrals(G, V, itg)


def level_integral(F: SampledHolderMap, form, j: int, cell: Cell | None = None, exact: bool = False,
                   workers: int = 1, degree: int | None = None, with_diameters: bool = False,
                   weight: int | None = None):
    """Integral of ``form`` over the level-``j`` interpolation of F on ``cell``.

    The grid is streamed in strips along the first source axis; strip sums are
    combined in strip order, so the result does not depend on ``workers``.
    With ``with_diameters`` also returns the sum over simplices of diam^w for the
    form's minimal weight (the direct-estimate quantity).  Pass ``weight`` when
    ``form`` is already a raw integrand, whose coordinate terms carry no weights.
    """
    cell = unit_cube(F.dim) if cell is None else cell
    k = cell.k
    itg = _integrand(form)
    if itg.degree != k:
        raise IntegrationError(f"form of degree {itg.degree} on a {k}-dimensional source")
    if exact and not _is_affine_group(F.group):
        raise IntegrationError("exact integration needs a step <= 2 group")
    N = 2 ** j
    if k == 0:
        x = np.array([cell.origin], dtype=object if exact else float)
        v = F.eval_exp(x, exact=exact)
        val = itg.density(v, {(): 1})[0] if itg.terms else 0
        return (val, 0.0) if with_diameters else val
    rows = max(1, STRIP_SIMPLICES // (math.factorial(k) * N ** (k - 1)))
    strips = [(lo, min(N, lo + rows)) for lo in range(0, N, rows)]
    if weight is None:
        weight = form.min_weight if isinstance(form, WeightedForm) else None
    w = k if weight is None else weight

    def work(bounds):
        lo, hi = bounds
        vals = F.eval_exp(_grid_points(cell, j, lo, hi, exact), exact=exact)
        signs, V = _strip_simplices(vals, k)
        res = _simplex_values(F.group, V, itg, exact, degree)
        if exact:
            total = sum((int(s) * r for s, r in zip(signs, res)), Fraction(0))
        else:
            total = math.fsum(signs * res)
        diam = 0.0
        if with_diameters:
            Vf = np.asarray(V, dtype=float)
            d = np.zeros(Vf.shape[0])
            for a, b in itertools.combinations(range(k + 1), 2):
                d = np.maximum(d, F.group.dist_exp(Vf[:, a], Vf[:, b]))
            diam = math.fsum(d ** w)
        return total, diam

    if workers > 1 and len(strips) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(work, strips))
    else:
        parts = [work(s) for s in strips]
    if exact:
        total = sum((p[0] for p in parts), Fraction(0))
    else:
        total = math.fsum(p[0] for p in parts)
    if with_diameters:
        return total, math.fsum(p[1] for p in parts)
    return total


def cube_integrals(F: SampledHolderMap, form, j: int, cell: Cell | None = None, degree: int | None = None):
    """Float integrals of the level-``j`` interpolation over each tiny cube, shape (2^j,)*k."""
    cell = unit_cube(F.dim) if cell is None else cell
    k = cell.k
    itg = _integrand(form)
    N = 2 ** j
    rows = max(1, STRIP_SIMPLICES // (math.factorial(k) * N ** (k - 1)))
    parts = []
    for lo in range(0, N, rows):
        hi = min(N, lo + rows)
        vals = F.eval_exp(_grid_points(cell, j, lo, hi, False), exact=False)
        signs, V = _strip_simplices(vals, k)
        res = (signs * _simplex_values(F.group, V, itg, False, degree)).reshape(math.factorial(k), -1)
        parts.append(res.sum(axis=0).reshape((hi - lo,) + (N,) * (k - 1)))
    return np.concatenate(parts, axis=0)


def aggregate(cubes, levels: int):
    """Sum tiny-cube values into cubes ``levels`` dyadic generations coarser."""
    k = cubes.ndim
    N = cubes.shape[0] >> levels
    shape = []
    for _ in range(k):
        shape += [N, 2 ** levels]
    return cubes.reshape(shape).sum(axis=tuple(range(1, 2 * k, 2)))


def complex_level_integral(F: SampledHolderMap, form, j: int, cells, exact: bool = False,
                           workers: int = 1, degree: int | None = None):
    """Sum of signed level integrals over a cube complex ``[(sign, cell), ...]``."""
    itg = _integrand(form)
    parts = [sign * level_integral(F, itg, j, cell, exact, workers, degree) for sign, cell in cells]
    return sum(parts, Fraction(0)) if exact else math.fsum(parts)


def monomial_simplex_integral(exponents) -> Fraction:
    """Integral of prod lam_i^{a_i} over the standard simplex in barycentric coordinates."""
    k = len(exponents) - 1
    num = math.prod(math.factorial(a) for a in exponents)
    return Fraction(num, math.factorial(k + sum(exponents)))


def classical_integral(form: WeightedForm, exprs, params, chart: str | None = None, domain: str = "cube"):
    """Exact integral of ``form`` pulled back by a polynomial parametrisation.

    ``exprs`` are chart coordinates as sympy polynomials in ``params``; the
    domain is the unit cube or the standard simplex with its standard
    orientation.
    """
    import sympy

    from .forms import raw_pullback

    chart = form.chart if chart is None else chart
    f = form.to_chart(chart)
    params = tuple(params)
    pulled = raw_pullback(f.to_raw(), [sympy.sympify(e) for e in exprs], f.syms, params)
    density = sympy.expand(pulled.get(tuple(range(len(params))), 0))
    if domain == "cube":
        for p in params:
            density = sympy.integrate(density, (p, 0, 1))
    elif domain == "simplex":
        for i in range(len(params) - 1, -1, -1):
            upper = 1 - sum(params[:i])
            density = sympy.integrate(density, (params[i], 0, upper))
    else:
        raise IntegrationError(f"unknown domain {domain!r}")
    return sympy.nsimplify(sympy.simplify(density))
