"""Differential forms on Carnot groups, written in the left-invariant coframe.

A :class:`WeightedForm` is ``sum_I f_I theta^I`` where ``theta^I`` is a wedge of
left-invariant coframe elements and ``f_I`` are polynomials in the chart
coordinates.  The pointwise weight of a term is the sum of the layer weights of
its coframe elements; coefficients never affect it.

Raw forms (dicts ``{increasing coordinate indices: coefficient}``) are the
coordinate-differential representation used for pullbacks and integration.
"""
from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
import sympy

from .lie import CarnotGroup, group


class FormError(ValueError):
    pass


# --- raw forms -------------------------------------------------------------

def _sort_sign(idx):
    """Sort a multi-index; return (sign, sorted tuple) or (0, None) on repeats."""
    idx = list(idx)
    if len(set(idx)) < len(idx):
        return 0, None
    sign = 1
    for i in range(len(idx)):
        for j in range(len(idx) - 1 - i):
            if idx[j] > idx[j + 1]:
                idx[j], idx[j + 1] = idx[j + 1], idx[j]
                sign = -sign
    return sign, tuple(idx)


def _clean(terms):
    out = {}
    for k, v in terms.items():
        v = sympy.expand(v)
        if v != 0:
            out[k] = v
    return out


def wedge_terms(a: dict, b: dict) -> dict:
    out: dict = {}
    for I, f in a.items():
        for J, g in b.items():
            s, K = _sort_sign(I + J)
            if s:
                out[K] = out.get(K, 0) + s * f * g
    return _clean(out)


def raw_d(terms: dict, syms) -> dict:
    out: dict = {}
    for I, f in terms.items():
        for j, x in enumerate(syms):
            df = sympy.diff(f, x)
            if df == 0:
                continue
            s, K = _sort_sign((j,) + I)
            if s:
                out[K] = out.get(K, 0) + s * df
    return _clean(out)


def raw_pullback(terms: dict, exprs, old_syms, new_syms) -> dict:
    """Pull back a raw form along x_old = exprs(new coordinates)."""
    sub = dict(zip(old_syms, exprs))
    jac = [[sympy.diff(e, y) for y in new_syms] for e in exprs]
    out: dict = {}
    for I, f in terms.items():
        g = sympy.sympify(f).xreplace(sub)
        k = len(I)
        for J in itertools.combinations(range(len(new_syms)), k):
            minor = sympy.Matrix([[jac[i][j] for j in J] for i in I]).det() if k else sympy.Integer(1)
            if minor != 0:
                out[J] = out.get(J, 0) + g * minor
    return _clean(out)


# --- coordinate names ---------------------------------------------------------

def is_heisenberg1(G: CarnotGroup) -> bool:
    return "matrix" in G.charts


def coordinate_symbols(G: CarnotGroup):
    if is_heisenberg1(G):
        return sympy.symbols("x y z")
    return sympy.symbols(f"x1:{G.n + 1}")


def coframe_names(G: CarnotGroup):
    if is_heisenberg1(G):
        return ("dx", "dy", "theta")
    if G.algebra.step == 1:
        return tuple(f"dx{i + 1}" for i in range(G.n))
    return tuple(f"th{i + 1}" for i in range(G.n))


# --- coframe -------------------------------------------------------------------

@dataclass(frozen=True)
class InvariantCoframe:
    group: CarnotGroup
    chart: str
    syms: tuple
    frame: tuple       # frame[i][j]: component of X_i along d/dx_j
    coframe: tuple     # coframe[i][j]: coefficient of dx_j in theta^i
    weights: tuple
    names: tuple

    def raw(self, i: int) -> dict:
        return _clean({(j,): c for j, c in enumerate(self.coframe[i])})

    def vector_field(self, i: int, f):
        """X_i f."""
        return sympy.expand(sum(c * sympy.diff(f, x) for c, x in zip(self.frame[i], self.syms)))

    def check_left_invariance(self) -> bool:
        """Pull each theta^i back by a symbolic left translation and compare."""
        G, syms = self.group, self.syms
        gs = sympy.symbols(f"g0:{G.n}")
        law = _chart_law(G, self.chart, gs, syms)
        for i in range(G.n):
            pulled = raw_pullback(self.raw(i), law, syms, syms)
            if _clean({K: v - self.raw(i).get(K, 0) for K, v in
                       {**{K: 0 for K in self.raw(i)}, **pulled}.items()}):
                return False
        return True


def _chart_law(G: CarnotGroup, chart, p_syms, q_syms):
    P = G.to_exp(np.array(p_syms, dtype=object), chart)
    Q = G.to_exp(np.array(q_syms, dtype=object), chart)
    M = G.from_exp(G.mul_exp(P, Q), chart)
    return [sympy.expand(e) for e in M]


_COFRAMES: dict = {}


def build_coframe(G: CarnotGroup, chart: str = "exp") -> InvariantCoframe:
    key = (G.algebra, chart)
    if key in _COFRAMES:
        return _COFRAMES[key]
    if chart not in G.charts:
        raise FormError(f"chart {chart!r} not available for {G.algebra.name}")
    syms = coordinate_symbols(G)
    qs = sympy.symbols(f"q0:{G.n}")
    law = _chart_law(G, chart, syms, qs)
    zero = {q: 0 for q in qs}
    J = sympy.Matrix([[sympy.diff(law[j], qs[i]).xreplace(zero) for i in range(G.n)] for j in range(G.n)])
    J = J.applyfunc(sympy.expand)
    Jinv = J.inv().applyfunc(sympy.expand)
    frame = tuple(tuple(J[j, i] for j in range(G.n)) for i in range(G.n))
    coframe = tuple(tuple(Jinv[i, j] for j in range(G.n)) for i in range(G.n))
    cf = InvariantCoframe(G, chart, tuple(syms), frame, coframe, G.algebra.weights, coframe_names(G))
    _COFRAMES[key] = cf
    return cf


# --- weighted forms --------------------------------------------------------------

class WeightedForm:
    """Polynomial-coefficient form ``sum_I f_I theta^I`` in a fixed chart."""

    def __init__(self, group_: CarnotGroup, degree: int, terms: dict, chart: str = "exp"):
        self.group = group_
        self.degree = degree
        self.chart = chart
        self.coframe = build_coframe(group_, chart)
        clean = {}
        for I, f in terms.items():
            s, K = _sort_sign(I)
            if len(I) != degree:
                raise FormError(f"term {I} has degree {len(I)}, expected {degree}")
            if s:
                clean[K] = clean.get(K, 0) + s * sympy.sympify(f)
        self.terms = _clean(clean)

    # construction -----------------------------------------------------------
    @classmethod
    def zero(cls, G, degree, chart="exp"):
        return cls(G, degree, {}, chart)

    @classmethod
    def function(cls, G, f, chart="exp"):
        return cls(G, 0, {(): f}, chart)

    @classmethod
    def basis(cls, G, idx, coef=1, chart="exp"):
        idx = tuple(idx)
        return cls(G, len(idx), {idx: coef}, chart)

    @property
    def syms(self):
        return self.coframe.syms

    def _like(self, degree, terms):
        return WeightedForm(self.group, degree, terms, self.chart)

    def __add__(self, other):
        self._check(other)
        t = dict(self.terms)
        for k, v in other.terms.items():
            t[k] = t.get(k, 0) + v
        return self._like(self.degree, t)

    def __neg__(self):
        return self._like(self.degree, {k: -v for k, v in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, f):
        return self._like(self.degree, {k: v * sympy.sympify(f) for k, v in self.terms.items()})

    def __mul__(self, f):
        return self.scale(f)

    __rmul__ = __mul__

    def wedge(self, other):
        self._check(other, degree=False)
        return self._like(self.degree + other.degree, wedge_terms(self.terms, other.terms))

    __xor__ = wedge

    def _check(self, other, degree=True):
        if other.group.algebra != self.group.algebra or other.chart != self.chart:
            raise FormError("forms live on different groups or charts")
        if degree and other.degree != self.degree:
            raise FormError(f"degree mismatch: {self.degree} vs {other.degree}")

    def __eq__(self, other):
        if not isinstance(other, WeightedForm):
            return NotImplemented
        if self.degree != other.degree:
            return False
        return not (self - other).terms

    def is_zero(self):
        return not self.terms

    # weights ------------------------------------------------------------------
    def term_weight(self, I) -> int:
        return sum(self.coframe.weights[i] for i in I)

    def weight_decompose(self) -> dict:
        out: dict = {}
        for I, f in self.terms.items():
            out.setdefault(self.term_weight(I), {})[I] = f
        return {w: self._like(self.degree, t) for w, t in sorted(out.items())}

    @property
    def min_weight(self):
        return min((self.term_weight(I) for I in self.terms), default=None)

    @property
    def max_weight(self):
        return max((self.term_weight(I) for I in self.terms), default=None)

    def is_invariant(self) -> bool:
        return all(not (sympy.sympify(f).free_symbols & set(self.syms)) for f in self.terms.values())

    # calculus -------------------------------------------------------------------
    def d(self) -> "WeightedForm":
        """Exterior differential via d theta^i = -sum_{j<l} c^i_{jl} theta^j ^ theta^l."""
        cf = self.coframe
        out: dict = {}
        dtheta = self._dtheta()
        for I, f in self.terms.items():
            for i in range(self.group.n):
                xf = cf.vector_field(i, f)
                if xf != 0:
                    s, K = _sort_sign((i,) + I)
                    if s:
                        out[K] = out.get(K, 0) + s * xf
            for pos, i in enumerate(I):
                sign = (-1) ** pos
                for (j, l), c in dtheta[i].items():
                    s, K = _sort_sign(I[:pos] + (j, l) + I[pos + 1:])
                    if s:
                        out[K] = out.get(K, 0) + sign * s * c * f
        return self._like(self.degree + 1, out)

    def _dtheta(self):
        alg = self.group.algebra
        res = [dict() for _ in range(alg.n)]
        for j, l, i, c in alg.constants:
            res[i][(j, l)] = res[i].get((j, l), 0) - sympy.Rational(c.numerator, c.denominator)
        return res

    def to_raw(self) -> dict:
        """Coordinate-differential representation in this form's chart."""
        cf = self.coframe
        out: dict = {}
        for I, f in self.terms.items():
            piece = {(): f}
            for i in I:
                piece = wedge_terms(piece, cf.raw(i))
            for K, v in piece.items():
                out[K] = out.get(K, 0) + v
        return _clean(out)

    @classmethod
    def from_raw(cls, G, degree, raw: dict, chart="exp") -> "WeightedForm":
        cf = build_coframe(G, chart)
        out: dict = {}
        for I in itertools.combinations(range(G.n), degree):
            acc = 0
            for J, a in raw.items():
                M = sympy.Matrix([[cf.frame[i][j] for i in I] for j in J]) if degree else None
                acc += a * (M.det() if degree else 1)
            out[I] = acc
        return cls(G, degree, out, chart)

    def to_chart(self, chart: str) -> "WeightedForm":
        """Same form expressed with coefficients in another chart."""
        if chart == self.chart:
            return self
        syms = self.syms
        # coefficient f(src) with src = from_exp(to_exp_target(y))
        target_to_exp = self.group.to_exp(np.array(syms, dtype=object), chart)
        src_exprs = self.group.from_exp(target_to_exp, self.chart)
        sub = {s: sympy.expand(e) for s, e in zip(syms, src_exprs)}
        return WeightedForm(self.group, self.degree,
                            {I: sympy.expand(sympy.sympify(f).xreplace(sub)) for I, f in self.terms.items()}, chart)

    def coefficient_degree(self) -> int:
        degs = [sympy.Poly(f, *self.syms).total_degree() for f in self.terms.values()]
        return max(degs, default=0)

    def sup_norm(self, lo, hi, density: int = 9) -> float:
        """Grid estimate of sum_I sup |f_I| over the box [lo, hi] (chart coordinates)."""
        if not self.terms:
            return 0.0
        axes = [np.linspace(float(a), float(b), density) for a, b in zip(lo, hi)]
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(axes))
        total = 0.0
        for f in self.terms.values():
            total += float(np.max(np.abs(compile_poly(f, self.syms)(pts))))
        return total

    # text -----------------------------------------------------------------------
    def __str__(self):
        return format_form(self)

    def __repr__(self):
        return f"WeightedForm({self.group.algebra.name}, degree={self.degree}, '{format_form(self)}')"


def format_form(form: WeightedForm) -> str:
    if not form.terms:
        return "0"
    names = form.coframe.names
    parts = []
    for I in sorted(form.terms):
        coef = sympy.sstr(form.terms[I])
        wedge = "^".join(names[i] for i in I)
        parts.append(f"({coef}) {wedge}".rstrip() if wedge else f"({coef})")
    return " + ".join(parts)


def _split_top(text):
    parts, depth, cur = [], 0, ""
    prev = ""
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch in "+-" and depth == 0 and prev not in ("", "*", "/", "^", "(", "e"):
            parts.append(cur)
            cur = ch
        else:
            cur += ch
        if not ch.isspace():
            prev = ch
    parts.append(cur)
    return [p.strip() for p in parts if p.strip()]


def parse_form(text: str, G: CarnotGroup | str, chart: str = "exp") -> WeightedForm:
    """Parse e.g. ``"x dx^theta + (x+y) dy^theta - 3 dx^dy"``."""
    if isinstance(G, str):
        G = group(G)
    cf = build_coframe(G, chart)
    names = cf.names
    local = {str(s): s for s in cf.syms}
    name_re = "|".join(sorted(map(re.escape, names), key=len, reverse=True))
    wedge_re = re.compile(rf"(?:^|[\s*])((?:{name_re})(?:\s*[\^∧]\s*(?:{name_re}))*)\s*$")
    terms, degree = {}, None
    for part in _split_top(text.replace("∧", "^")):
        m = wedge_re.search(part)
        if m:
            wedge = [w.strip() for w in m.group(1).split("^")]
            coef_txt = part[:m.start(1)].strip().rstrip("*").strip()
        else:
            wedge, coef_txt = [], part
        if coef_txt in ("", "+"):
            coef_txt = "1"
        elif coef_txt == "-":
            coef_txt = "-1"
        try:
            coef = sympy.sympify(coef_txt, locals=local)
        except (sympy.SympifyError, SyntaxError) as exc:
            raise FormError(f"cannot parse coefficient {coef_txt!r}") from exc
        extra = coef.free_symbols - set(cf.syms)
        if extra:
            raise FormError(f"unknown symbols {sorted(map(str, extra))} in {part!r}")
        idx = tuple(names.index(w) for w in wedge)
        if degree is None:
            degree = len(idx)
        elif degree != len(idx):
            raise FormError(f"mixed degrees in {text!r}")
        s, K = _sort_sign(idx)
        if s:
            terms[K] = terms.get(K, 0) + s * coef
    return WeightedForm(G, degree or 0, terms, chart)


# --- polynomial evaluation ------------------------------------------------------

class CompiledPoly:
    """Polynomial evaluated on float arrays or object arrays of Fractions exactly."""

    def __init__(self, expr, syms):
        poly = sympy.Poly(sympy.expand(expr), *syms)
        self.terms = []
        for exps, c in poly.terms():
            c = sympy.Rational(c)
            self.terms.append((exps, Fraction(int(c.p), int(c.q))))
        self.n = len(syms)
        self.degree = poly.total_degree() if self.terms else 0

    def __call__(self, X):
        X = np.asarray(X)
        exact = X.dtype == object
        out = np.zeros(X.shape[:-1], dtype=object if exact else float)
        if exact:
            out[...] = Fraction(0)
        for exps, c in self.terms:
            term = np.full(X.shape[:-1], c if exact else float(c), dtype=out.dtype)
            for i, e in enumerate(exps):
                if e:
                    term = term * X[..., i] ** e
            out = out + term
        return out


@lru_cache(maxsize=4096)
def _compile_cached(expr, syms):
    return CompiledPoly(expr, syms)


def compile_poly(expr, syms) -> CompiledPoly:
    return _compile_cached(sympy.sympify(expr), tuple(syms))


def invariant_basis(G: CarnotGroup, degree: int, chart: str = "exp"):
    """All basis forms theta^I of the given degree."""
    return [WeightedForm.basis(G, I, 1, chart) for I in itertools.combinations(range(G.n), degree)]
