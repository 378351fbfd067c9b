"""Acceptance suite: one PASS/FAIL line per criterion, printed in the terminal summary.

Each criterion records its outcome before asserting, so a failing criterion
still reports its measured values.
"""
import math
import time
from fractions import Fraction

import numpy as np
import pytest
import sympy

from conftest import ACCEPTANCE
from holderint.chains import cube_boundary_complex, telescope, telescope_complex
from holderint.cohomology import cohomology_table, generic_distribution_bound, holder_bound
from holderint.forms import parse_form
from holderint.heisenberg import (h1, horizontal_arc, random_rumin_form, rumin_boundary_check, rumin_d)
from holderint.holder import (closed_cycle_J, estimate_J, stokes_check, telescoping_rate, towghi_check,
                              vanishing_check)
from holderint.integrate import classical_integral
from holderint.lie import group
from holderint.maps import (cube_faces, horizontal_boundary_square, horizontal_curve_map, planar_square,
                            random_polynomial_map, random_rational_map, takagi_sheet, unit_cube, vertical_square)

G = h1()
X, Y, Z = sympy.symbols("x y z")


def form(text):
    return parse_form(text, G, "matrix")


def record(n, title, ok, detail, sub=None):
    line = f"{'PASS' if ok else 'FAIL'}  criterion {n}: {title}  [{detail}]"
    ACCEPTANCE.setdefault((n, sub or ""), []).append(line)
    print(line)
    return ok


# --- 1: exact exponent bounds ------------------------------------------------------------

def test_criterion_1_exact_bounds():
    t0 = time.perf_counter()
    checks = {"heisenberg-1": Fraction(2, 3), "heisenberg-2": Fraction(3, 4), "heisenberg-3": Fraction(4, 5)}
    got = {name: holder_bound(name)[0] for name in checks}
    generic = generic_distribution_bound(6, 4, 1)
    slowest = 0.0
    for name in ("heisenberg-3", "quaternionic-heisenberg-1", "free-2-step-3"):
        t = time.perf_counter()
        cohomology_table(name)
        slowest = max(slowest, time.perf_counter() - t)
    ok = got == checks and generic == Fraction(5, 9) and slowest < 10
    detail = ", ".join(f"{k} {v}" for k, v in got.items()) + \
        f", generic (6,4,1) {generic}, slowest algebra {slowest:.2f}s, total {time.perf_counter() - t0:.2f}s"
    record(1, "Heisenberg bounds, generic formula, runtime", ok, detail, "a")
    assert ok


@pytest.mark.xfail(strict=True, reason="exact cohomology gives w(5) = 7 and bound 2/3, not 8 and 5/8")
def test_criterion_1_quaternionic_m1():
    t = cohomology_table("quaternionic-heisenberg-1")
    ok = t.Q == 10 and t.w_min[5] == 8 and t.bound == Fraction(5, 8)
    record(1, "quaternionic Heisenberg m=1 bound 5/8 via w(5)=8", ok,
           f"Q = {t.Q}, w(5) = {t.w_min[5]}, bound {t.bound}", "b")
    assert ok


# --- 2: telescope identity ----------------------------------------------------------------

def test_criterion_2_telescope_identity():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    bad, counts_ok = 0, True
    for k, top in ((1, 3), (2, 2), (3, 1)):
        for _ in range(100):
            F = random_rational_map(G, k, top + 1, rng)
            for j in range(top + 1):
                tel = telescope(F, j)
                bad += not tel.identity_holds()
                counts_ok &= tel.n_face_terms == 2 ** (j * (k - 1) + 1) * k
    closed_ok = True
    for seed in range(3):
        F = random_polynomial_map(np.random.default_rng(seed), degree=2, dim=3)
        for j in range(2):
            tel = telescope_complex(F, cube_boundary_complex(3), j)
            closed_ok &= tel.H_prime.is_zero() and tel.identity_holds()
    elapsed = time.perf_counter() - t0
    ok = bad == 0 and counts_ok and closed_ok and elapsed < 60
    record(2, "E'-F'-H'-dK' = 0 exactly, face counts, closed sources", ok,
           f"300 maps, {bad} nonzero residuals, face counts {'ok' if counts_ok else 'wrong'}, "
           f"closed H' = 0 {'ok' if closed_ok else 'wrong'}, {elapsed:.1f}s")
    assert ok


# --- 3: smooth maps -----------------------------------------------------------------------

def _exprs(F, s, t):
    return [sum(c * s ** e[0] * t ** e[1] for e, c in comp.items()) for comp in F.params["coeffs"]]


def test_criterion_3_smooth_agreement():
    s, t = sympy.symbols("s t")
    rng = np.random.default_rng(3)
    maps = [random_polynomial_map(rng, degree=int(rng.integers(1, 4))) for _ in range(20)]
    worst = 0.0
    for F in maps:
        for text in ("dx^dy", "dx^theta", "dy^theta"):
            om = form(text)
            exact = classical_integral(om, _exprs(F, s, t), [s, t], chart="matrix")
            worst = max(worst, abs(estimate_J(F, om, tol=1e-9).value - float(exact)))
    example = estimate_J(planar_square(), form("dx^theta")).value
    ok = worst < 1e-6 and abs(example + 0.5) < 1e-6
    record(3, "J matches classical pullback integral", ok,
           f"20 maps x 3 invariant forms, max error {worst:.2e}; planar square dx^theta = {example:.12g}")
    assert ok


# --- 4: Stokes ----------------------------------------------------------------------------

def test_criterion_4_stokes():
    rng = np.random.default_rng(4)
    worst, pl_exact, all_ok, n = 0.0, True, True, 0
    for F, base in ((vertical_square(), "z dy"), (planar_square(), "z dx + x*x/2 dy")):
        for _ in range(5):
            h = sum(int(rng.integers(-3, 4)) * X ** int(rng.integers(0, 3)) * Y ** int(rng.integers(0, 3))
                    * Z ** int(rng.integers(0, 2)) for _ in range(3))
            om = form(base) + form(str(h)).d()
            rep = stokes_check(F, om)
            n += 1
            all_ok &= math.isfinite(rep.tail_bound) and rep.residual <= rep.tail_bound
            pl_exact &= all(isinstance(r, Fraction) and r == 0 for r in rep.level_residuals)
            worst = max(worst, rep.residual / rep.tail_bound)
    ok = all_ok and pl_exact
    record(4, "Stokes residual below certified tails; PL Stokes exact", ok,
           f"{n} forms on vertical and planar squares, max residual/tail {worst:.2e}, "
           f"rational PL residuals {'all zero' if pl_exact else 'nonzero'}")
    assert ok


# --- 5: convergence rate ------------------------------------------------------------------

def test_criterion_5_rate():
    _, _, slope = telescoping_rate(vertical_square(), form("dy^theta"), levels=9)
    # closed cycles: only alpha > k/w' is needed
    cycle = cube_faces(unit_cube(2))
    F = takagi_sheet(0.9, 1)
    cyc = closed_cycle_J(F, cycle, form("z dy"), max_level=7)
    inner = estimate_J(F, form("z dy").d(), max_level=7)
    exact_form = closed_cycle_J(F, cycle, form("y*z").d(), max_level=6)
    ok = abs(slope + 0.5) <= 0.1 and abs(cyc.value - inner.value) < 1e-9 and cyc.certificate == "telescoping" \
        and abs(exact_form.value) < 1e-12
    record(5, "telescoping decay exponent, closed-cycle convergence", ok,
           f"fitted slope {slope:.3f} (predicted -0.5); Takagi cycle J = {cyc.value:.12g} vs interior "
           f"{inner.value:.12g}; exact form on cycle {exact_form.value:.1e}")
    assert ok


# --- 6: vanishing -------------------------------------------------------------------------

def test_criterion_6_vanishing():
    rng = np.random.default_rng(6)
    coef = lambda: sympy.expand(sum(int(rng.integers(-3, 4)) * X ** int(rng.integers(0, 3))
                                    * Y ** int(rng.integers(0, 3)) * Z ** int(rng.integers(0, 2)) for _ in range(3)))
    forms = [form("dx^theta"), form("dy^theta")]
    forms += [form(f"({coef()}) dx^theta + ({coef()}) dy^theta") for _ in range(6)]
    worst = 0.0
    for a, b in ((1, 1), (2, -1), (Fraction(1, 2), 3)):
        F = horizontal_curve_map(2, a, b)
        for om in forms:
            worst = max(worst, abs(estimate_J(F, om, tol=1e-10).value))
    sweep = [(f"takagi beta={beta}", takagi_sheet(beta)) for beta in (0.3, 0.4, 0.5, 0.6, 0.7)]
    sweep.append(("horizontal curve", horizontal_curve_map()))
    devs = []
    for label, F in sweep:
        rep = vanishing_check(F, form("dy^theta") if label.startswith("takagi") else form("dx^theta"), levels=9,
                              fit_from=4)
        devs.append((label, rep.fitted - rep.predicted))
    worst_dev = max(abs(d) for _, d in devs)
    ok = worst < 1e-8 and worst_dev <= 0.1
    record(6, "J = 0 on horizontal curves, decay exponent k - w alpha", ok,
           f"max |J| {worst:.1e} over {3 * len(forms)} curve/form pairs; sweep deviations "
           + ", ".join(f"{label} {d:+.3f}" for label, d in devs))
    assert ok


# --- 7: Towghi consistency ----------------------------------------------------------------

def _towghi_configs():
    rng = np.random.default_rng(2024)
    cfgs = [("planar square", planar_square(), "dx^theta", "1 + y*y"),
            ("vertical square", vertical_square(), "dy^theta", "1 + y*y"),
            ("vertical square", vertical_square(), "dy^theta", "z"),
            ("horizontal boundary", horizontal_boundary_square(), "dy^theta", "1 + x*y"),
            ("horizontal boundary", horizontal_boundary_square((1, 2), (0, 1, 1), 2), "dx^theta", "1 + y*y"),
            ("takagi beta=0.8", takagi_sheet(0.8, 1), "dy^theta", "z"),
            ("takagi beta=0.9", takagi_sheet(0.9, 1), "dy^theta", "1 + y*y")]
    for i, (om, f) in enumerate((("dx^theta", "1 + x*y"), ("dx^theta", "1 + x*x"), ("dx^theta", "1 + y*y"))):
        cfgs.append((f"polynomial {i}", random_polynomial_map(rng), om, f))
    return cfgs


def test_criterion_7_towghi():
    rows, ok = [], True
    for label, F, om, f in _towghi_configs():
        rep = towghi_check(F, f, form(om), chart="matrix")
        var = rep.variation
        # bounded: finite supremum and non-increasing on the fine levels
        finite = math.isfinite(var.value) and var.slope <= 0
        ok &= rep.passed and finite and var.value > 0
        mid = 0.5 * (rep.sums["lower-left"] + rep.sums["upper-right"])
        rows.append(f"{label}: |sum - J| {abs(mid - rep.direct):.1e} <= {rep.tolerance:.1e}, "
                    f"V_p {var.value:.3g}")
    record(7, "Towghi sums match J, (p,p)-variation finite at p = 2/(3 alpha)", ok,
           f"{len(rows)} configurations; " + "; ".join(rows))
    assert ok
    assert len(rows) == 10


# --- 8: Rumin complex ---------------------------------------------------------------------

def test_criterion_8_rumin():
    rng = np.random.default_rng(8)
    nonzero = 0
    for degree in (0, 1):
        for _ in range(100):
            nonzero += not rumin_d(rumin_d(random_rumin_form(rng, degree))).is_zero()
    arcs_ok, segments = True, 0
    for _ in range(40):
        p, q = (tuple(Fraction(int(v), int(d)) for v, d in zip(rng.integers(-6, 7, 3), rng.integers(1, 5, 3)))
                for _ in range(2))
        arc = horizontal_arc(p, q)
        segments += len(arc)
        arcs_ok &= all(v == 0 for v in arc.theta_integrals())
        arcs_ok &= all(sympy.simplify(sympy.sympify(a) - sympy.Rational(b)) == 0 for a, b in zip(arc.start, p))
        arcs_ok &= all(abs(sympy.N(sympy.sympify(a) - sympy.Rational(b), 60)) < 1e-40 for a, b in zip(arc.end, q))
    worst, bnd_ok, n = 0.0, True, 0
    for params in (((1,), (0, 1), 1), ((1, 2), (0, 1, 1), 2), ((2,), (0, 0, 1), 1), ((1, -1), (0, 2), 1)):
        F = horizontal_boundary_square(*params)
        for _ in range(3):
            rep = rumin_boundary_check(F, random_rumin_form(rng, 1, max_degree=2))
            bnd_ok &= rep.passed
            worst = max(worst, rep.residual)
            n += 1
    ok = nonzero == 0 and arcs_ok and bnd_ok
    record(8, "d_R d_R = 0, exact horizontal arcs, Rumin boundary", ok,
           f"200 random forms, {nonzero} nonzero; 40 arcs ({segments} segments) "
           f"{'exact' if arcs_ok else 'inexact'}; {n} boundary checks, max residual {worst:.1e}")
    assert ok
