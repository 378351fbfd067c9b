"""First Heisenberg group specifics: Rumin differentials and horizontal PL arcs.

Coordinates are the matrix chart (x, y, z) with product
(x1, y1, z1)(x2, y2, z2) = (x1 + x2, y1 + y2, z1 + z2 + x1 y2), contact form
theta = dz - x dy and horizontal frame X = d/dx, Y = d/dy + x d/dz.

Horizontal segments either move x alone or move y with dz = x dy.  Both kinds
are left translates of one-parameter subgroups, hence straight 1-simplices,
so arcs export to ordinary chains.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import sympy

from .chains import Chain
from .forms import WeightedForm, parse_form
from .lie import CarnotGroup, GroupPoint, group
from .maps import SampledHolderMap, dyadic_grid

X_, Y_, Z_ = sympy.symbols("x y z")
DX, DY, TH = 0, 1, 2


class RuminError(ValueError):
    pass


def h1() -> CarnotGroup:
    return group("heisenberg-1")


# --- Rumin complex --------------------------------------------------------------

_ALLOWED = {0: {()}, 1: {(DX,), (DY,)}, 2: {(DX, TH), (DY, TH)}, 3: {(DX, DY, TH)}}


@dataclass(frozen=True)
class RuminForm:
    """Element of the Rumin complex: one weight per degree (0, 1, 3, 4)."""
    form: WeightedForm

    def __post_init__(self):
        f = self.form
        if f.chart != "matrix" or f.group.algebra.name != "heisenberg-1":
            raise RuminError("Rumin forms live on the first Heisenberg group, matrix chart")
        if f.degree not in _ALLOWED:
            raise RuminError(f"degree {f.degree} out of range")
        bad = set(f.terms) - _ALLOWED[f.degree]
        if bad:
            raise RuminError(f"degree-{f.degree} Rumin forms cannot contain terms {sorted(bad)}")
        for c in f.terms.values():
            if not sympy.sympify(c).is_polynomial(X_, Y_, Z_):
                raise RuminError(f"non-polynomial coefficient {c}")

    @property
    def degree(self) -> int:
        return self.form.degree

    @classmethod
    def parse(cls, text: str, degree: int | None = None) -> "RuminForm":
        f = parse_form(text, h1(), "matrix")
        if degree is not None and f.degree != degree and f.terms:
            raise RuminError(f"expected degree {degree}, got {f.degree}")
        if degree is not None and not f.terms:
            f = WeightedForm.zero(h1(), degree, "matrix")
        return cls(f)

    @classmethod
    def function(cls, f) -> "RuminForm":
        return cls(WeightedForm.function(h1(), sympy.sympify(f), "matrix"))

    def coefficient(self, idx) -> sympy.Expr:
        return self.form.terms.get(tuple(idx), sympy.Integer(0))

    def is_zero(self) -> bool:
        return self.form.is_zero()

    def __eq__(self, other):
        return isinstance(other, RuminForm) and self.form == other.form

    def __str__(self):
        return str(self.form)


def _X(f):
    return sympy.expand(sympy.diff(f, X_))


def _Y(f):
    return sympy.expand(sympy.diff(f, Y_) + X_ * sympy.diff(f, Z_))


def rumin_d0(f) -> RuminForm:
    """(Xf) dx + (Yf) dy."""
    if isinstance(f, RuminForm):
        f = f.coefficient(())
    f = sympy.sympify(f)
    return RuminForm(WeightedForm(h1(), 1, {(DX,): _X(f), (DY,): _Y(f)}, "matrix"))


def rumin_correction(omega: RuminForm):
    """The function f with d(omega + f theta) free of dx^dy."""
    if omega.degree != 1:
        raise RuminError("rumin_d1 expects a degree-1 form")
    c = omega.form.d().terms.get((DX, DY), sympy.Integer(0))
    # d(f theta) contributes -f dx^dy since d theta = -dx^dy
    return sympy.expand(c)


def rumin_d1(omega: RuminForm) -> RuminForm:
    f = rumin_correction(omega)
    theta = WeightedForm.basis(h1(), (TH,), f, "matrix")
    out = (omega.form + theta).d()
    if (DX, DY) in out.terms:
        raise AssertionError("Rumin d1 left a dx^dy component")
    return RuminForm(out)


def rumin_d2(omega: RuminForm) -> RuminForm:
    if omega.degree != 2:
        raise RuminError("rumin_d2 expects a degree-2 form")
    return RuminForm(omega.form.d())


def rumin_d(omega: RuminForm) -> RuminForm:
    if omega.degree == 0:
        return rumin_d0(omega)
    if omega.degree == 1:
        return rumin_d1(omega)
    if omega.degree == 2:
        return rumin_d2(omega)
    raise RuminError("degree 3 is the top of the Rumin complex")


def random_rumin_form(rng, degree: int, max_degree: int = 3, max_coeff: int = 4, terms: int = 4) -> RuminForm:
    """Random polynomial Rumin form with integer coefficients."""
    def poly():
        out = 0
        for _ in range(terms):
            total = int(rng.integers(0, max_degree + 1))
            cuts = sorted(int(c) for c in rng.integers(0, total + 1, size=2))
            e = (cuts[0], cuts[1] - cuts[0], total - cuts[1])
            out += int(rng.integers(-max_coeff, max_coeff + 1)) * X_ ** int(e[0]) * Y_ ** int(e[1]) * Z_ ** int(e[2])
        return sympy.expand(out)
    return RuminForm(WeightedForm(h1(), degree, {I: poly() for I in _ALLOWED[degree]}, "matrix"))


# --- horizontal arcs -------------------------------------------------------------------

def _num(v, exact):
    if exact:
        if isinstance(v, float):
            return sympy.nsimplify(v)
        return sympy.sympify(v) if not isinstance(v, (int, Fraction)) else sympy.Rational(v)
    return float(v)


def _pt(p):
    if isinstance(p, GroupPoint):
        if p.chart != "matrix":
            p = h1().convert(p, "matrix")
        return tuple(p.coords)
    return tuple(p)


def mat_mul(p, q):
    return (p[0] + q[0], p[1] + q[1], p[2] + q[2] + p[0] * q[1])


def mat_inv(p):
    return (-p[0], -p[1], -p[2] + p[0] * p[1])


def mat_dilate(t, p):
    return (t * p[0], t * p[1], t * t * p[2])


def _simplify(v):
    return sympy.nsimplify(sympy.simplify(v)) if isinstance(v, sympy.Basic) else v


@dataclass(frozen=True)
class HorizontalPLArc:
    """Horizontal piecewise linear curve given by its vertex list (matrix chart)."""
    vertices: tuple

    @property
    def start(self):
        return self.vertices[0]

    @property
    def end(self):
        return self.vertices[-1]

    @property
    def segments(self):
        return list(zip(self.vertices[:-1], self.vertices[1:]))

    def __len__(self):
        return len(self.vertices) - 1

    def theta_integrals(self):
        """Integral of theta = dz - x dy along each straight segment (exact when inputs are)."""
        out = []
        for p, q in self.segments:
            val = (q[2] - p[2]) - (p[0] + q[0]) * (q[1] - p[1]) / 2
            out.append(_simplify(val))
        return out

    def theta_pullbacks(self):
        """Coefficient of dt in theta along each segment parametrised by t in [0,1]."""
        t = sympy.Symbol("t")
        out = []
        for p, q in self.segments:
            x = p[0] + t * (q[0] - p[0])
            out.append(sympy.expand(sympy.sympify(q[2] - p[2]) - x * (q[1] - p[1])))
        return out

    def is_horizontal(self) -> bool:
        return all(sympy.simplify(c) == 0 for c in self.theta_pullbacks())

    def length(self) -> float:
        return float(sum(np.linalg.norm(np.array(q, dtype=float) - np.array(p, dtype=float)) for p, q in self.segments))

    def translate(self, g) -> "HorizontalPLArc":
        return HorizontalPLArc(tuple(mat_mul(g, v) for v in self.vertices))

    def dilate(self, t) -> "HorizontalPLArc":
        return HorizontalPLArc(tuple(mat_dilate(t, v) for v in self.vertices))

    def to_chain(self) -> Chain:
        """Chain of straight 1-simplices in exponential coordinates."""
        out = Chain(1)
        for p, q in self.segments:
            out._add((_to_exp(p), _to_exp(q)), 1)
        return out


def _to_exp(p):
    x, y, z = p
    half = Fraction(1, 2) if all(isinstance(v, (int, Fraction)) for v in p) else (
        sympy.Rational(1, 2) if any(isinstance(v, sympy.Basic) for v in p) else 0.5)
    return (x, y, _simplify(z - half * x * y) if isinstance(z, sympy.Basic) else z - half * x * y)


def _rationalize(v):
    """Return a Fraction for rational sympy numbers, leave others untouched."""
    if isinstance(v, sympy.Rational):
        return Fraction(int(v.p), int(v.q))
    return v


def horizontal_arc(p, q, exact: bool = True) -> HorizontalPLArc:
    """Horizontal arc from p to q, covariant under left translations and dilations.

    With p^{-1} q = (a, b, c) and d = c - ab: if d = 0 go along x then y;
    otherwise set r = max(|a|, |b|, |d|^{1/2}), u = a + d/r and visit
    (u, 0), (u, r), (a, r), (a, b) in the (x, y) plane, lifting z horizontally.
    Zero-length segments are dropped, leaving at most four.
    """
    p, q = _pt(p), _pt(q)
    if exact:
        p = tuple(_num(v, True) for v in p)
        q = tuple(_num(v, True) for v in q)
    else:
        p = tuple(float(v) for v in p)
        q = tuple(float(v) for v in q)
    a, b, c = mat_mul(mat_inv(p), q)
    d = c - a * b
    zero = (sympy.simplify(d) == 0) if exact else d == 0
    if zero:
        plane = [(a, 0), (a, b)]
    else:
        if exact:
            r = sympy.Max(sympy.Abs(a), sympy.Abs(b), sympy.sqrt(sympy.Abs(d)))
        else:
            r = max(abs(a), abs(b), abs(d) ** 0.5)
        u = a + d / r
        plane = [(u, 0), (u, r), (a, r), (a, b)]
    verts = [(0 * a, 0 * a, 0 * a)]
    for nx, ny in plane:
        x, y, z = verts[-1]
        if nx != x:
            nxt = (nx, y, z)
        else:
            nxt = (x, ny, z + x * (ny - y))
        if exact:
            nxt = tuple(_simplify(v) for v in nxt)
        if (sympy.simplify(nxt[0] - x) != 0 or sympy.simplify(nxt[1] - y) != 0 or sympy.simplify(nxt[2] - z) != 0) \
                if exact else nxt != (x, y, z):
            verts.append(nxt)
        if nx != x and ny != y:
            x2, y2, z2 = verts[-1]
            nxt = (x2, ny, z2 + x2 * (ny - y2))
            verts.append(tuple(_simplify(v) for v in nxt) if exact else nxt)
    arc = HorizontalPLArc(tuple(verts)).translate(p)
    if exact:
        arc = HorizontalPLArc(tuple(tuple(_rationalize(_simplify(v)) for v in vv) for vv in arc.vertices))
    return arc


def arc_length_constant(rng, samples: int = 500) -> float:
    """max Euclidean length / homogeneous distance over random unit-scale endpoint pairs."""
    G = h1()
    worst = 0.0
    for _ in range(samples):
        q = tuple(rng.uniform(-1, 1, size=3))
        arc = horizontal_arc((0.0, 0.0, 0.0), q, exact=False)
        dist = float(G.norm_exp(G.to_exp(np.array(q), "matrix")))
        if dist > 0:
            worst = max(worst, arc.length() / dist)
    return worst


# --- horizontal simplices ----------------------------------------------------------------

def _exp_of(p):
    x, y, z = p
    return (x, y, z - x * y / 2)


def _mat_of(e):
    x, y, z = e
    return (x, y, z + x * y / 2)


def cone_center(points):
    """p_0 exp(mean of log(p_0^{-1} p_i)), the equivariant barycentre."""
    p0 = points[0]
    logs = [_exp_of(mat_mul(mat_inv(p0), p)) for p in points]
    m = len(points)
    mean = tuple(sum(l[c] for l in logs) / m for c in range(3))
    return mat_mul(p0, _mat_of(mean))


def _exactify(points, exact):
    pts = [_pt(p) for p in points]
    if exact:
        return [tuple(_num(v, True) for v in p) for p in pts]
    return [tuple(float(v) for v in p) for p in pts]


def _cone_chain(apex, chain: Chain) -> Chain:
    apex_e = tuple(_rationalize(_simplify(v)) if isinstance(v, sympy.Basic) else v for v in _exp_of(apex))
    return chain.cone(apex_e)


def horizontal_boundary_chain(points, exact: bool = True) -> Chain:
    """sum_i (-1)^i of the horizontal simplices on the faces of ``points``."""
    k = len(points) - 1
    out = Chain(k - 1)
    for i in range(len(points)):
        face = points[:i] + points[i + 1:]
        out.iadd(horizontal_simplex(face, exact), (-1) ** i)
    return out


def horizontal_simplex(points, exact: bool = True) -> Chain:
    """Horizontal simplex on 2, 3 or 4 points, as a chain of straight simplices (exp coordinates).

    Two points give the horizontal arc; more points give the cone from the
    equivariant barycentre over the horizontal simplices of the faces.
    """
    pts = _exactify(points, exact)
    if len(pts) == 2:
        return horizontal_arc(pts[0], pts[1], exact).to_chain()
    if len(pts) not in (3, 4):
        raise ValueError("horizontal simplices take 2, 3 or 4 points")
    if all(p == pts[0] for p in pts):
        return Chain(len(pts) - 1)
    return _cone_chain(cone_center(pts), horizontal_boundary_chain(pts, exact))


# --- horizontal interpolation of curves ----------------------------------------------------

def _curve_values(F: SampledHolderMap, j: int, exact: bool):
    if F.dim != 1:
        raise ValueError("horizontal interpolation takes maps of [0,1]")
    vals = F.eval_exp(dyadic_grid(j, 1, exact=exact), exact=exact)
    out = []
    for v in vals:
        m = _mat_of(tuple(v))
        out.append(tuple(Fraction(x) if exact else float(x) for x in m) if exact else tuple(float(x) for x in m))
    return out


def horizontal_interpolate(F: SampledHolderMap, j: int, exact: bool = True) -> Chain:
    """F'_j: horizontal arcs between consecutive level-j values of a curve."""
    vals = _curve_values(F, j, exact)
    out = Chain(1)
    for p, q in zip(vals[:-1], vals[1:]):
        out.iadd(horizontal_arc(p, q, exact).to_chain())
    return out


def horizontal_arcs(F: SampledHolderMap, j: int, exact: bool = True):
    vals = _curve_values(F, j, exact)
    return [horizontal_arc(p, q, exact) for p, q in zip(vals[:-1], vals[1:])]


@dataclass
class HorizontalTelescope:
    level: int
    E: Chain
    F: Chain
    K: Chain

    def residual(self) -> Chain:
        return self.E - self.F - self.K.boundary()

    def identity_holds(self) -> bool:
        return self.residual().is_zero()


def horizontal_telescope(F: SampledHolderMap, j: int, exact: bool = True) -> HorizontalTelescope:
    """F'_{j+1} - F'_j = d K''_j with K''_j the horizontal triangles on (F(a), F(mid), F(b))."""
    fine = _curve_values(F, j + 1, exact)
    K = Chain(2)
    for i in range(2 ** j):
        K.iadd(horizontal_simplex([fine[2 * i], fine[2 * i + 1], fine[2 * i + 2]], exact))
    return HorizontalTelescope(j, horizontal_interpolate(F, j + 1, exact), horizontal_interpolate(F, j, exact), K)


def line_integral(arcs, form: WeightedForm):
    """Exact integral of a polynomial 1-form (matrix chart) along horizontal arcs."""
    t = sympy.Symbol("t")
    f = form.to_chart("matrix")
    total = sympy.Integer(0)
    for arc in arcs:
        for p, q in arc.segments:
            path = [sympy.sympify(p[c]) + t * (sympy.sympify(q[c]) - sympy.sympify(p[c])) for c in range(3)]
            sub = dict(zip(f.syms, path))
            for I, coef in f.terms.items():
                cf = f.coframe.coframe[I[0]]
                dens = sum(sympy.sympify(cf[c]).xreplace(sub) * sympy.diff(path[c], t) for c in range(3))
                total += sympy.integrate(sympy.expand(sympy.sympify(coef).xreplace(sub) * dens), (t, 0, 1))
    return sympy.nsimplify(sympy.simplify(total))


@dataclass
class RuminBoundaryReport:
    surface: float          # J(F(S), d_R beta)
    boundary: float         # J(F(dS), beta)
    residual: float
    bound: float
    passed: bool


def rumin_boundary_check(F: SampledHolderMap, beta: RuminForm, tol: float = 1e-8,
                         max_level: int | None = None) -> RuminBoundaryReport:
    """Compare the Rumin boundary of the current F(S) with F(dS) on a Rumin 1-form.

    d_R beta = d(beta + f theta), and f theta integrates to zero along the
    boundary when the boundary curves are horizontal.
    """
    from .holder import estimate_J
    from .maps import cube_faces, unit_cube
    if beta.degree != 1:
        raise RuminError("the boundary check takes a Rumin 1-form")
    surf = estimate_J(F, rumin_d1(beta).form, tol=tol, max_level=max_level)
    parts = [(s, estimate_J(F, beta.form, face, tol=tol, max_level=max_level)) for s, face in cube_faces(unit_cube(2))]
    bval = float(sum(s * r.value for s, r in parts))
    bound = min(surf.error, surf.empirical_error) + sum(min(r.error, r.empirical_error) for _, r in parts)
    residual = abs(surf.value - bval)
    return RuminBoundaryReport(surf.value, bval, residual, bound, residual <= max(bound, 1e-9))
