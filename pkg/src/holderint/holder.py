"""Dyadic-limit integrals J(F(Q), omega) of forms along Hölder maps.

``estimate_J`` integrates the form over the dyadic interpolations F_j and
stops once an error bound drops below the tolerance.  Two bounds are kept:

* the certified tail, the geometric remainder sum_{i >= j} T_i of the
  per-level increment bound built from the simplex constant (fitted by
  Monte Carlo), the face/cube counts of the telescope construction, sup norms
  of the form and its differential, and the measured Hölder constant;
* for polynomial maps, the spread of Richardson extrapolants in h^2 = 4^{-j}
  (the level integrals of a polynomial map expand in even powers of h).

Maps flagged ``smooth`` may be integrated below the Hölder exponent threshold;
the limit is then the classical integral and only the extrapolation estimate
is available.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np
import sympy

from .chains import _block_telescope
from .forms import WeightedForm, compile_poly, invariant_basis
from .integrate import (_integrand, aggregate, complex_level_integral, cube_integrals, level_integral,
                        straight_simplex_integrals)
from .lie import CarnotGroup, group
from .maps import Cell, SampledHolderMap, cube_faces, unit_cube

DEFAULT_CAP = {1: 16, 2: 12, 3: 6, 4: 4}
DIAMETER_CAP = {1: 18, 2: 10, 3: 5, 4: 3}
SAFETY = 1.5
BOX_PAD = 0.05


class ExponentConditionError(ValueError):
    pass


class ToleranceExhausted(RuntimeError):
    def __init__(self, result):
        super().__init__(f"tolerance not reached by level {result.level}: error {result.error:.3g}")
        self.result = result


# --- exponents -------------------------------------------------------------------

def form_weights(form: WeightedForm):
    """(w, w') = min weight of the form and of its differential (inf when closed)."""
    w = form.min_weight
    dw = form.d()
    wp = dw.min_weight if not dw.is_zero() else math.inf
    return (math.inf if w is None else w), wp


def exponent_threshold(form: WeightedForm, k: int, closed_source: bool = False) -> float:
    """max{(k-1)/w, k/w'}, or k/w' alone on closed sources."""
    w, wp = form_weights(form)
    t = 0.0 if wp == math.inf else k / wp
    if not closed_source and w != math.inf:
        t = max(t, (k - 1) / w)
    return t


def vanishing_threshold(form: WeightedForm, k: int) -> float:
    w, wp = form_weights(form)
    return max(0.0 if w == math.inf else k / w, 0.0 if wp == math.inf else k / wp)


def _check_exponent(F: SampledHolderMap, form, k, closed_source=False):
    thr = exponent_threshold(form, k, closed_source)
    if F.alpha > thr:
        return thr, "telescoping"
    if F.smooth:
        return thr, "classical"
    raise ExponentConditionError(
        f"exponent condition fails: alpha = {F.alpha:g} <= {thr:g} "
        f"(k = {k}, weights (w, w') = {form_weights(form)})")


# --- fitted constants ----------------------------------------------------------------

def _random_tuples(G: CarnotGroup, k: int, count: int, rng):
    scale = np.array([1.0 if w == 1 else 0.5 for w in G.algebra.weights])
    return rng.normal(size=(count, k + 1, G.n)) * scale


def _vertex_diameters(G: CarnotGroup, V):
    d = np.zeros(V.shape[0])
    for a, b in itertools.combinations(range(V.shape[1]), 2):
        d = np.maximum(d, G.dist_exp(V[:, a], V[:, b]))
    return d


@lru_cache(maxsize=256)
def simplex_constant(algebra_name: str, k: int, w: int, samples: int = 300, seed: int = 0) -> float:
    """Fitted C with int_sigma |theta^I| <= C diam^w over straight k-simplices, all weight-w theta^I.

    The ratio is invariant under translations and dilations, so random tuples
    cover all shapes.  Returns the sample maximum times a safety factor.
    """
    G = group(algebra_name)
    forms = [f for f in invariant_basis(G, k) if f.min_weight == w]
    if not forms:
        return 0.0
    rng = np.random.default_rng(seed)
    V = _random_tuples(G, k, samples, rng)
    diam = _vertex_diameters(G, V)
    best = 0.0
    for f in forms:
        vals = straight_simplex_integrals(G, V, f, points=8, absolute=True)
        best = max(best, float(np.max(vals / diam ** w)))
    return SAFETY * best


@lru_cache(maxsize=8)
def telescope_counts(k: int):
    """(simplices per outer face in H', simplices per cube in K') for generic values."""
    rng = np.random.default_rng(12345)

    def block(dim):
        vals = np.empty((3,) * dim + (3,), dtype=object)
        for idx in np.ndindex(*vals.shape):
            vals[idx] = Fraction(int(rng.integers(-1000, 1000)), 7)
        return vals
    n_K = len(_block_telescope(block(k), k)[1])
    n_H = len(_block_telescope(block(k - 1), k - 1)[1]) if k >= 2 else 0
    return n_H, n_K


# --- tail model --------------------------------------------------------------------

@dataclass
class TailModel:
    """Per-level increment bound T_j and its geometric remainder."""
    k: int
    alpha: float
    holder: float
    h_terms: list        # [(C * n_H * norm, w)] for the form
    k_terms: list        # [(C * n_K * norm, w')] for its differential
    faces: int           # outer faces at level 0 (2k for a cube, 0 for closed sources)
    cubes: int           # cubes at level 0
    first: list          # [(C * k! * norm, w)] for the level-0 integral

    def _face_diam(self, j):
        return self.holder * (math.sqrt(max(self.k - 1, 0)) * 2.0 ** -j) ** self.alpha

    def _cube_diam(self, j):
        return self.holder * (math.sqrt(self.k) * 2.0 ** -j) ** self.alpha

    def increment_bound(self, j: int) -> float:
        t = sum(c * self.faces * 2.0 ** (j * (self.k - 1)) * self._face_diam(j) ** w for c, w in self.h_terms)
        t += sum(c * self.cubes * 2.0 ** (j * self.k) * self._cube_diam(j) ** w for c, w in self.k_terms)
        return t

    def ratios(self):
        r = [2.0 ** ((self.k - 1) - w * self.alpha) for c, w in self.h_terms if c and self.faces]
        r += [2.0 ** (self.k - w * self.alpha) for c, w in self.k_terms if c]
        return r

    def tail(self, j: int) -> float:
        """sum_{i >= j} T_i."""
        total = 0.0
        for c, w in self.h_terms:
            if not c or not self.faces:
                continue
            rho = 2.0 ** ((self.k - 1) - w * self.alpha)
            if rho >= 1:
                return math.inf
            total += c * self.faces * 2.0 ** (j * (self.k - 1)) * self._face_diam(j) ** w / (1 - rho)
        for c, w in self.k_terms:
            if not c:
                continue
            rho = 2.0 ** (self.k - w * self.alpha)
            if rho >= 1:
                return math.inf
            total += c * self.cubes * 2.0 ** (j * self.k) * self._cube_diam(j) ** w / (1 - rho)
        return total

    def direct_bound(self) -> float:
        """Bound on |J| itself: level-0 estimate plus the full tail."""
        first = sum(c * self.cubes * self._cube_diam(0) ** w for c, w in self.first)
        return first + self.tail(0)


def _image_box(F: SampledHolderMap, cells, level: int):
    lo, hi = None, None
    for cell in cells:
        v = F.grid(level, cell, exact=False).reshape(-1, F.group.n)
        a, b = v.min(axis=0), v.max(axis=0)
        lo = a if lo is None else np.minimum(lo, a)
        hi = b if hi is None else np.maximum(hi, b)
    pad = BOX_PAD * np.maximum(hi - lo, 1e-12)
    return lo - pad, hi + pad


def _term_norms(form: WeightedForm, box, density=9):
    f = form.to_chart("exp")
    out = []
    for I, c in f.terms.items():
        single = WeightedForm(f.group, f.degree, {I: c}, "exp")
        out.append((single.sup_norm(box[0], box[1], density), f.term_weight(I)))
    return out


def build_tail_model(F: SampledHolderMap, form: WeightedForm, cells, closed_source: bool,
                     holder_levels: int = 7) -> TailModel:
    """Tail model on a list of cells, each treated as a unit cube through composition."""
    k = form.degree
    name = F.group.algebra.name
    holder = max(F.compose(c).estimate_holder_constant(holder_levels) for c in cells)
    box = _image_box(F, cells, holder_levels)
    n_H, n_K = telescope_counts(k)
    norms = _term_norms(form, box)
    dnorms = _term_norms(form.d(), box) if k + 1 <= F.group.n else []
    h_terms = [(simplex_constant(name, k, w) * n_H * nrm, w) for nrm, w in norms]
    k_terms = [(simplex_constant(name, k + 1, w) * n_K * nrm, w) for nrm, w in dnorms]
    first = [(simplex_constant(name, k, w) * math.factorial(k) * nrm, w) for nrm, w in norms]
    faces = 0 if closed_source else 2 * k * len(cells)
    return TailModel(k, F.alpha, holder, h_terms, k_terms, faces, len(cells), first)


# --- measured telescope bounds ----------------------------------------------------------

def _block_diameters(G, vals, k):
    """Homogeneous diameters of the 3^k blocks (stride 2) of a value grid."""
    N = vals.shape[0] - 1
    n_blocks = N // 2
    offsets = list(itertools.product(range(3), repeat=k))

    def sl(off):
        return tuple(slice(o, o + 2 * n_blocks - 1, 2) if n_blocks else slice(o, o + 1) for o in off)
    out = np.zeros((max(n_blocks, 1),) * k)
    for a, b in itertools.combinations(offsets, 2):
        out = np.maximum(out, G.dist_exp(vals[sl(a)], vals[sl(b)]))
    return out


def measured_bounds(F: SampledHolderMap, form: WeightedForm, j: int, cell: Cell | None = None,
                    closed_source: bool = False):
    """(B_H, B_K): the level-j increment bound evaluated with actual block diameters.

    B_H sums C n_H |f_I| D^{w_I} over outer faces (D = diameter of the face's
    level-(j+1) values) and B_K sums C n_K |g_I| D^{w_I} over cubes.
    """
    cell = unit_cube(F.dim) if cell is None else cell
    k = cell.k
    G = F.group
    name = G.algebra.name
    vals = np.asarray(F.grid(j + 1, cell, exact=False), dtype=float)
    box = _image_box(F, [cell], j + 1)
    n_H, n_K = telescope_counts(k)
    BH = 0.0
    if not closed_source and k >= 2:
        face_d = []
        for i in range(k):
            for pos in (0, -1):
                face_d.append(_block_diameters(G, np.take(vals, pos, axis=i), k - 1).ravel())
        face_d = np.concatenate(face_d)
        for nrm, w in _term_norms(form, box):
            BH += simplex_constant(name, k, w) * n_H * nrm * float(np.sum(face_d ** w))
    BK = 0.0
    if k + 1 <= G.n:
        dnorms = _term_norms(form.d(), box)
        if dnorms:
            cube_d = _block_diameters(G, vals, k).ravel()
            for nrm, w in dnorms:
                BK += simplex_constant(name, k + 1, w) * n_K * nrm * float(np.sum(cube_d ** w))
    return BH, BK


# --- results -----------------------------------------------------------------------------

@dataclass
class JResult:
    value: float
    raw_value: object
    level: int
    integrals: list
    increments: list
    tail: float
    empirical_error: float
    error: float
    direct_bound: float
    converged: bool
    certificate: str
    threshold: float
    alpha: float
    holder_constant: float
    increment_bounds: list = field(default_factory=list)
    measured: list = field(default_factory=list)

    def rows(self):
        """Per-level records (j, integral, increment, increment bound, measured bound)."""
        out = []
        for j, I in enumerate(self.integrals):
            inc = self.increments[j - 1] if j >= 1 else math.nan
            tb = self.increment_bounds[j] if j < len(self.increment_bounds) else math.nan
            mb = sum(self.measured[j]) if j < len(self.measured) else math.nan
            out.append((j, float(I), inc, tb, mb))
        return out


def neville(hs, vals):
    """Value at h = 0 of the interpolating polynomial through (hs, vals)."""
    p = [float(v) for v in vals]
    x = [float(h) for h in hs]
    n = len(p)
    for m in range(1, n):
        for i in range(n - m):
            p[i] = (x[i + m] * p[i] - x[i] * p[i + 1]) / (x[i + m] - x[i])
    return p[0]


def _extrapolate(integrals, depth=4):
    """(extrapolated value, error estimate) from the last levels.

    Level integrals of polynomial maps expand in even powers of the mesh, so the
    extrapolation variable is h^2 = 4^-j; odd terms would show up in the estimate.
    """
    n = len(integrals)
    if n < 2:
        return float(integrals[-1]), math.inf
    m = min(depth, n)
    hs = [4.0 ** -j for j in range(n - m, n)]
    best = neville(hs, integrals[n - m:])
    prev = neville(hs[1:], integrals[n - m + 1:]) if m >= 2 else float(integrals[-2])
    lower = neville(hs[:-1], integrals[n - m:n - 1]) if m >= 3 else float(integrals[-2])
    return best, max(abs(best - prev), abs(best - lower))


def _geometric_error(increments):
    if len(increments) < 2:
        return math.inf
    a, b = abs(increments[-2]), abs(increments[-1])
    if b == 0:
        return 0.0
    if a == 0 or b >= a:
        return math.inf
    r = b / a
    return b * r / (1 - r)


def _run(levels_fn, model: TailModel, smooth: bool, certificate: str, threshold: float, alpha: float,
         tol: float, cap: int, min_level: int, measure_fn=None, diam_cap=None, strict=False):
    integrals, increments, bounds, measured = [], [], [], []
    value, tail, emp, error = math.nan, math.inf, math.inf, math.inf
    for j in range(cap + 1):
        I = levels_fn(j)
        integrals.append(I)
        bounds.append(model.increment_bound(j))
        if measure_fn is not None and j <= (diam_cap if diam_cap is not None else cap):
            measured.append(measure_fn(j))
        if j >= 1:
            increments.append(float(I) - float(integrals[-2]))
        tail = model.tail(j)
        if smooth:
            value, emp = _extrapolate(integrals)
            if all(float(x) == float(integrals[0]) for x in integrals) and j >= 1:
                emp = 0.0
        else:
            value, emp = float(I), _geometric_error(increments)
        if tail <= tol and certificate == "telescoping":
            value = float(I) if not smooth else value
        error = tail if certificate == "telescoping" else emp
        if certificate == "telescoping" and smooth:
            error = min(tail, emp)
        if j >= min_level and error <= tol:
            break
    res = JResult(value if certificate != "telescoping" or smooth else float(integrals[-1]),
                  integrals[-1], len(integrals) - 1, integrals, increments, tail, emp, error,
                  model.direct_bound(), error <= tol, certificate, threshold, alpha, model.holder, bounds, measured)
    if strict and not res.converged:
        raise ToleranceExhausted(res)
    return res


def estimate_J(F: SampledHolderMap, form: WeightedForm, cell: Cell | None = None, tol: float = 1e-6,
               max_level: int | None = None, min_level: int = 2, exact: bool = False, workers: int = 1,
               measure: bool = False, strict: bool = False) -> JResult:
    """J(F(Q), omega) as the limit of integrals over dyadic interpolations."""
    cell = unit_cube(F.dim) if cell is None else cell
    k = cell.k
    if form.degree != k:
        raise ValueError(f"form of degree {form.degree} on a {k}-dimensional cube")
    if form.group.algebra != F.group.algebra:
        raise ValueError("form and map live on different groups")
    threshold, certificate = _check_exponent(F, form, k)
    cap = DEFAULT_CAP.get(k, 4) if max_level is None else max_level
    itg = _integrand(form)
    model = build_tail_model(F, form, [cell], False)
    if form.is_zero():
        return JResult(0.0, 0, 0, [0], [], 0.0, 0.0, 0.0, 0.0, True, certificate, threshold, F.alpha, model.holder)
    measure_fn = (lambda j: measured_bounds(F, form, j, cell)) if measure else None
    return _run(lambda j: level_integral(F, itg, j, cell, exact, workers), model, F.smooth, certificate,
                threshold, F.alpha, tol, cap, min_level, measure_fn, DIAMETER_CAP.get(k), strict)


def closed_cycle_J(F: SampledHolderMap, cells, form: WeightedForm, tol: float = 1e-6,
                   max_level: int | None = None, min_level: int = 2, exact: bool = False,
                   strict: bool = False) -> JResult:
    """J over a closed cube complex ``[(sign, cell)]``; only alpha > k/w' is required."""
    k = cells[0][1].k
    if form.degree != k:
        raise ValueError(f"form of degree {form.degree} on a {k}-dimensional complex")
    threshold, certificate = _check_exponent(F, form, k, closed_source=True)
    cap = DEFAULT_CAP.get(k, 4) if max_level is None else max_level
    itg = _integrand(form)
    model = build_tail_model(F, form, [c for _, c in cells], True)
    return _run(lambda j: complex_level_integral(F, itg, j, cells, exact), model, F.smooth, certificate,
                threshold, F.alpha, tol, cap, min_level, None, None, strict)


# --- Stokes ---------------------------------------------------------------------------

@dataclass
class StokesReport:
    interior: JResult
    boundary: list            # [(sign, JResult)]
    boundary_value: float
    residual: float
    bound: float              # combined error estimates of all pieces
    tail_bound: float         # combined certified tails (inf if any piece is only classical)
    level_residuals: list     # per level: exact (or float) PL Stokes residual
    passed: bool


def _boundary_faces(omega):
    if isinstance(omega, Cell):
        return cube_faces(omega)
    out = []
    for sign, cell in omega:
        out += [(sign * s, f) for s, f in cube_faces(cell)]
    return out


def stokes_check(F: SampledHolderMap, form: WeightedForm, omega=None, tol: float = 1e-6,
                 max_level: int | None = None, min_level: int = 2, exact_levels: int = 2) -> StokesReport:
    """Compare J(F(Omega), d omega) with J(F(dOmega), omega).

    ``omega`` is a cube (Cell) or a cube complex [(sign, cell)].  Per-level PL
    Stokes residuals are recorded for the first ``exact_levels`` levels, in
    rational arithmetic when the group allows it.
    """
    omega = unit_cube(F.dim) if omega is None else omega
    cells = [(1, omega)] if isinstance(omega, Cell) else list(omega)
    dform = form.d()
    faces = _boundary_faces(omega)
    exact = F.group.algebra.step <= 2 and F.provenance != "tabulated"
    level_res = []
    for j in range(exact_levels):
        try:
            lhs = complex_level_integral(F, dform, j, cells, exact=exact)
            rhs = complex_level_integral(F, form, j, faces, exact=exact)
        except Exception:  # noqa: BLE001 - non-rational evaluators fall back to floats
            lhs = complex_level_integral(F, dform, j, cells)
            rhs = complex_level_integral(F, form, j, faces)
        level_res.append(lhs - rhs)
    if len(cells) == 1:
        inner = estimate_J(F, dform, cells[0][1], tol, max_level, min_level)
    else:
        inner = _complex_J(F, dform, cells, tol, max_level, min_level)
    parts = [(s, estimate_J(F, form, face, tol, max_level, min_level)) for s, face in faces]
    bval = math.fsum(s * r.value for s, r in parts)
    residual = abs(inner.value - bval)
    bound = inner.error + sum(r.error for _, r in parts)
    tails = [inner] + [r for _, r in parts]
    tail_bound = math.inf if any(r.certificate != "telescoping" for r in tails) else sum(r.tail for r in tails)
    passed = residual <= max(min(bound, tail_bound), 1e-9)
    return StokesReport(inner, parts, bval, residual, bound, tail_bound, level_res, passed)


def _complex_J(F, form, cells, tol, max_level, min_level):
    results = [(s, estimate_J(F, form, c, tol, max_level, min_level)) for s, c in cells]
    first = results[0][1]
    val = math.fsum(s * r.value for s, r in results)
    err = sum(r.error for _, r in results)
    return JResult(val, val, first.level, [], [], sum(r.tail for _, r in results), err, err,
                   sum(r.direct_bound for _, r in results), all(r.converged for _, r in results),
                   first.certificate, first.threshold, first.alpha, max(r.holder_constant for _, r in results))


# --- vanishing and rates -------------------------------------------------------------------

def fit_slope(js, vals):
    """Least-squares slope of log2 |vals| against j (zeros dropped)."""
    pts = [(j, math.log2(abs(v))) for j, v in zip(js, vals) if v and math.isfinite(v)]
    if len(pts) < 2:
        return math.nan
    x, y = zip(*pts)
    return float(np.polyfit(x, y, 1)[0])


@dataclass
class VanishingReport:
    levels: list
    integrals: list
    direct_sums: list          # sum over F_j simplices of diam^w
    fitted: float
    predicted: float
    precondition: bool
    value: float
    passed: bool


def vanishing_check(F: SampledHolderMap, form: WeightedForm, cell: Cell | None = None, levels: int = 7,
                    tol: float = 1e-8, fit_from: int = 2) -> VanishingReport:
    """Measure |int_{F_j} omega| and the direct estimate sum diam^w; fit its exponent against k - w alpha."""
    cell = unit_cube(F.dim) if cell is None else cell
    k = cell.k
    w, wp = form_weights(form)
    itg = _integrand(form)
    ints, sums = [], []
    for j in range(levels + 1):
        I, D = level_integral(F, itg, j, cell, with_diameters=True, weight=w)
        ints.append(float(I))
        sums.append(D)
    js = list(range(levels + 1))
    fitted = fit_slope(js[fit_from:], sums[fit_from:])
    predicted = k - w * F.alpha
    pre = F.alpha > vanishing_threshold(form, k)
    value = ints[-1]
    passed = abs(value) < tol if pre else True
    return VanishingReport(js, ints, sums, fitted, predicted, pre, value, passed)


def telescoping_rate(F: SampledHolderMap, form: WeightedForm, levels: int = 8, cell: Cell | None = None,
                     fit_from: int = 2):
    """(levels, measured increment bounds B_H + B_K, fitted log2 slope)."""
    vals = [sum(measured_bounds(F, form, j, cell)) for j in range(levels + 1)]
    js = list(range(levels + 1))
    return js, vals, fit_slope(js[fit_from:], vals[fit_from:])


def interpolation_rate(F: SampledHolderMap, levels: int = 8, fit_from: int = 2):
    """Max homogeneous distance between F at level-(j+1) edge midpoints and the straight level-j edges.

    Returns (levels, deviations, fitted exponent); the deviation should decay like 2^{-j alpha}.
    """
    G = F.group
    k = F.dim
    devs = []
    for j in range(levels + 1):
        fine = np.asarray(F.grid(j + 1, exact=False), dtype=float)
        worst = 0.0
        for axis in range(k):
            sl = [slice(None, None, 2)] * k
            sa, sm, sb = list(sl), list(sl), list(sl)
            sa[axis] = slice(0, -1, 2)
            sm[axis] = slice(1, None, 2)
            sb[axis] = slice(2, None, 2)
            a, m, b = fine[tuple(sa)], fine[tuple(sm)], fine[tuple(sb)]
            mid = G.mul_exp(a, 0.5 * G.mul_exp(-a, b))
            worst = max(worst, float(np.max(G.dist_exp(mid, m))))
        devs.append(worst)
    js = list(range(levels + 1))
    return js, devs, -fit_slope(js[fit_from:], devs[fit_from:])


# --- Towghi sums and variations -------------------------------------------------------------

class VariationFunction:
    """Rectangle function g(s, t) on the unit square, known on a dyadic grid or by a formula."""

    def __init__(self, level: int | None = None, grid=None, func=None, errors=None, definition: str = ""):
        self.level = level
        self.grid = grid
        self.func = func
        self.errors = errors
        self.definition = definition

    @classmethod
    def from_callable(cls, g, definition: str = "") -> "VariationFunction":
        return cls(func=g, definition=definition)

    @classmethod
    def from_cells(cls, cells, errors=None, definition: str = "") -> "VariationFunction":
        """g from per-cell masses (2^L, 2^L): g(s_i, t_j) = sum of cells below-left."""
        N = cells.shape[0]
        grid = np.zeros((N + 1, N + 1))
        grid[1:, 1:] = np.cumsum(np.cumsum(cells, axis=0), axis=1)
        return cls(int(round(math.log2(N))), grid, None, errors, definition)

    @classmethod
    def from_integral(cls, F: SampledHolderMap, form: WeightedForm, level: int, fine_level: int,
                      extrapolate: bool | None = None) -> "VariationFunction":
        """g(s, t) = J(F([0,s] x [0,t]), omega) on the level-``level`` grid.

        Cell masses come from the level-``fine_level`` interpolation; for smooth
        maps they are extrapolated from the last three fine levels.
        """
        extrapolate = F.smooth if extrapolate is None else extrapolate
        itg = _integrand(form)
        fines = [fine_level - 2, fine_level - 1, fine_level] if extrapolate else [fine_level - 1, fine_level]
        fines = [m for m in fines if m >= level]
        masses = [aggregate(cube_integrals(F, itg, m), m - level) for m in fines]
        if extrapolate and len(masses) >= 2:
            hs = [2.0 ** -m for m in fines]
            stack = np.stack(masses)
            cells = np.zeros(masses[0].shape)
            prev = np.zeros(masses[0].shape)
            for idx in np.ndindex(*cells.shape):
                cells[idx] = neville(hs, stack[(slice(None),) + idx])
                prev[idx] = neville(hs[1:], stack[(slice(None),) + idx][1:])
            errors = np.abs(cells - prev)
        else:
            cells = masses[-1]
            errors = np.abs(masses[-1] - masses[-2]) if len(masses) >= 2 else np.zeros(cells.shape)
        return cls.from_cells(cells, errors, f"J(F(S(s,t)), {form})")

    def values(self, level: int):
        N = 2 ** level
        if self.grid is not None:
            if level > self.level:
                raise ValueError(f"variation function known up to level {self.level}")
            step = 2 ** (self.level - level)
            return self.grid[::step, ::step]
        ticks = np.arange(N + 1) / N
        S, T = np.meshgrid(ticks, ticks, indexing="ij")
        return np.asarray(self.func(S, T), dtype=float) * np.ones_like(S)

    def increments(self, level: int):
        g = self.values(level)
        return g[1:, 1:] - g[:-1, 1:] - g[1:, :-1] + g[:-1, :-1]

    def error_mass(self) -> float:
        return 0.0 if self.errors is None else float(np.sum(self.errors))

    def additivity_defect(self, level: int) -> float:
        """max |increment of a parent cell - sum of its four children|."""
        if level < 1:
            return 0.0
        parent = self.increments(level - 1)
        child = self.increments(level)
        summed = child[0::2, 0::2] + child[1::2, 0::2] + child[0::2, 1::2] + child[1::2, 1::2]
        return float(np.max(np.abs(parent - summed)))


_SAMPLES = {"lower-left": (0, 0), "upper-right": (1, 1), "lower-right": (1, 0), "upper-left": (0, 1)}


def towghi_sum(f_vals, g: VariationFunction, level: int, sample: str = "lower-left") -> float:
    """L(f, g, pi) = sum_ij f(eta_i, nu_j) times the rectangle increment of g, dyadic pi.

    ``f_vals`` is a callable f(s, t) on arrays or a grid array of shape (2^level + 1,)*2.
    """
    N = 2 ** level
    if sample not in _SAMPLES:
        raise ValueError(f"unknown sample choice {sample!r}")
    a, b = _SAMPLES[sample]
    if callable(f_vals):
        ticks = np.arange(N + 1) / N
        S, T = np.meshgrid(ticks, ticks, indexing="ij")
        fv = np.asarray(f_vals(S, T), dtype=float) * np.ones_like(S)
    else:
        fv = np.asarray(f_vals, dtype=float)
    f_s = fv[a:a + N, b:b + N]
    return math.fsum((f_s * g.increments(level)).ravel())


def compose_function(F: SampledHolderMap, f, chart: str = "exp"):
    """(s, t) -> f(F(s, t)) for a polynomial f given in the chart coordinates."""
    from .forms import coordinate_symbols
    G = F.group
    f = sympy.sympify(f)
    syms = coordinate_symbols(G)
    if chart != "exp":
        sub = dict(zip(syms, G.from_exp(np.array(syms, dtype=object), chart)))
        f = sympy.expand(f.xreplace(sub))
    poly = compile_poly(f, syms)

    def fn(S, T):
        u = np.stack([S, T], axis=-1)
        return poly(F.eval_exp(u, exact=False))
    return fn


@dataclass
class PPVariation:
    p: float
    level_sums: list
    value: float
    slope: float
    monotone: bool


def dyadic_pp_variation(g: VariationFunction, p: float, j_max: int) -> PPVariation:
    """max over dyadic levels j <= j_max of sum |rectangle increment|^p."""
    sums = [math.fsum((np.abs(g.increments(j)) ** p).ravel()) for j in range(j_max + 1)]
    js = list(range(j_max + 1))
    tail = js[max(1, j_max // 2):]
    slope = fit_slope(tail, [sums[j] for j in tail]) if any(sums) else 0.0
    monotone = all(b <= a * (1 + 1e-9) + 1e-300 for a, b in zip(sums, sums[1:]))
    return PPVariation(p, sums, max(sums), slope, monotone)


@dataclass
class TowghiReport:
    direct: float
    direct_error: float
    sums: dict             # sample choice -> Towghi sum
    tolerance: float
    passed: bool
    variation: PPVariation


def _practical_error(r: JResult) -> float:
    """The smaller of the certified tail and the empirical level-difference estimate."""
    return min(r.error, r.empirical_error)


def towghi_check(F: SampledHolderMap, f, form: WeightedForm, level: int = 5, fine_level: int = 8,
                 chart: str = "exp", tol: float = 1e-6) -> TowghiReport:
    """Compare J(F(S), f omega) with dyadic Towghi sums of f o F against g_omega."""
    fs = sympy.sympify(f)
    fform = form.to_chart(chart).scale(fs).to_chart(form.chart)
    direct = estimate_J(F, fform, tol=tol, max_level=fine_level, min_level=min(3, fine_level))
    g = VariationFunction.from_integral(F, form, level, fine_level)
    fn = compose_function(F, fs, chart)
    sums = {s: towghi_sum(fn, g, level, s) for s in ("lower-left", "upper-right")}
    spread = abs(sums["lower-left"] - sums["upper-right"])
    ticks = np.arange(2 ** level + 1) / 2 ** level
    S, T = np.meshgrid(ticks, ticks, indexing="ij")
    fmax = float(np.max(np.abs(fn(S, T))))
    tolerance = spread + _practical_error(direct) + fmax * g.error_mass() + 1e-12
    mid = 0.5 * (sums["lower-left"] + sums["upper-right"])
    passed = abs(mid - direct.value) <= tolerance
    p = 2 / (3 * F.alpha)
    var = dyadic_pp_variation(g, p, level)
    return TowghiReport(direct.value, direct.error, sums, tolerance, passed, var)


# --- weight 2 ---------------------------------------------------------------------------

@dataclass
class Weight2Report:
    direct: float
    hk_sum: float          # int (Xa o F) dh + int (Ya o F) dk
    correction: float         # int ((a - x Xa - y Ya) o F) dA, zero when J(F(B), dx^dy) = 0
    total: float
    tolerance: float
    passed: bool


def weight2_towghi_decomposition(F: SampledHolderMap, a, level: int = 5, fine_level: int = 8,
                                 tol: float = 1e-6) -> Weight2Report:
    """Towghi decomposition of J(F(S), a dx^dy) on the first Heisenberg group (matrix chart)."""
    from .forms import parse_form
    G = F.group
    x, y, z = sympy.symbols("x y z")
    a = sympy.sympify(a)
    Xa = sympy.diff(a, x)
    Ya = sympy.expand(sympy.diff(a, y) + x * sympy.diff(a, z))
    h = VariationFunction.from_integral(F, parse_form("x dx^dy", G, "matrix"), level, fine_level)
    kf = VariationFunction.from_integral(F, parse_form("y dx^dy", G, "matrix"), level, fine_level)
    A = VariationFunction.from_integral(F, parse_form("dx^dy", G, "matrix"), level, fine_level)
    sums, spreads = {}, 0.0
    for name, fexpr, gfun in (("h", Xa, h), ("k", Ya, kf), ("A", sympy.expand(a - x * Xa - y * Ya), A)):
        fn = compose_function(F, fexpr, "matrix")
        ll = towghi_sum(fn, gfun, level, "lower-left")
        ur = towghi_sum(fn, gfun, level, "upper-right")
        sums[name] = 0.5 * (ll + ur)
        spreads += abs(ll - ur)
    direct = estimate_J(F, parse_form("dx^dy", G, "matrix").scale(a), tol=tol, max_level=fine_level,
                        min_level=min(3, fine_level))
    hk = sums["h"] + sums["k"]
    total = hk + sums["A"]
    errs = h.error_mass() + kf.error_mass() + A.error_mass()
    tolerance = spreads + _practical_error(direct) + 10 * errs + 1e-12
    return Weight2Report(direct.value, hk, sums["A"], total, tolerance, abs(total - direct.value) <= tolerance)


def _line_cumulative(F, form1, axis, level, fine_level):
    """For every grid line orthogonal to ``1 - axis``: cumulative line integrals along ``axis``."""
    N = 2 ** level
    itg = _integrand(form1)
    out = np.zeros((N + 1, N + 1))
    for idx in range(N + 1):
        origin = [Fraction(0), Fraction(0)]
        origin[1 - axis] = Fraction(idx, N)
        cell = Cell(1, "affine", tuple(origin), Fraction(1), (axis,))
        masses = aggregate(cube_integrals(F, itg, fine_level, cell), fine_level - level)
        cum = np.concatenate([[0.0], np.cumsum(masses)])
        if axis == 0:
            out[:, idx] = cum
        else:
            out[idx, :] = cum
    return out


@dataclass
class HIdentityReport:
    max_defect: float
    max_boundary_term: float
    tolerance: float
    passed: bool


def h_identity_check(F: SampledHolderMap, level: int = 4, fine_level: int = 8) -> HIdentityReport:
    """Check J(S(s,t), dx^theta) - J(S(s,t), x dx^dy) = J(boundary of S(s,t), x theta) on the grid.

    The boundary term vanishes when the boundary curves have exponent > 1/2; for
    smooth test squares it is generally nonzero and is measured directly.
    """
    from .forms import parse_form
    G = F.group
    hp = VariationFunction.from_integral(F, parse_form("dx^theta", G, "matrix"), level, fine_level)
    h = VariationFunction.from_integral(F, parse_form("x dx^dy", G, "matrix"), level, fine_level)
    xth = parse_form("x theta", G, "matrix")
    along_s = _line_cumulative(F, xth, 0, level, fine_level)    # [i, j]: int from (0, t_j) to (s_i, t_j)
    along_t = _line_cumulative(F, xth, 1, level, fine_level)    # [i, j]: int from (s_i, 0) to (s_i, t_j)
    B = along_s[:, :1] + along_t - along_s - along_t[:1, :]
    defect = hp.values(level) - h.values(level) - B
    tolerance = 10 * (hp.error_mass() + h.error_mass()) + 1e-9
    return HIdentityReport(float(np.max(np.abs(defect))), float(np.max(np.abs(B))), tolerance,
                           float(np.max(np.abs(defect))) <= tolerance)


def additivity_check(F: SampledHolderMap, form: WeightedForm, tol: float = 1e-6, max_level: int | None = None):
    """(parent J, sum of children J, allowed defect)."""
    parent = estimate_J(F, form, tol=tol, max_level=max_level)
    k = F.dim
    kids = [estimate_J(F, form, unit_cube(k).child(c), tol, max_level)
            for c in itertools.product((0, 1), repeat=k)]
    total = math.fsum(r.value for r in kids)
    allowed = parent.error + sum(r.error for r in kids) + 1e-12
    return parent.value, total, allowed
