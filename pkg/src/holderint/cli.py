"""Command-line front end: ``holderint <command> [flags]``.

Every command validates its inputs before computing, writes CSV files (and
SVG figures where useful) into ``--out``, and prints a short summary.

Exit codes: 0 success, 1 a reported check failed, 2 invalid experiment
specification, 3 Hölder exponent precondition violated, 4 tolerance not
reached within the level cap.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import report
from .lie import catalog_names, group, load_algebra
from .maps import FAMILIES, parse_map, random_polynomial_map, random_rational_map

EXIT_FAIL, EXIT_SPEC, EXIT_PRECONDITION, EXIT_TOLERANCE = 1, 2, 3, 4


class SpecError(ValueError):
    pass


# --- experiment specification ------------------------------------------------------------

def _common(p, *, form=True, map_=True):
    p.add_argument("--config", help="JSON file whose keys mirror the long flags; flags take precedence")
    p.add_argument("--algebra", default=None, help="catalog algebra (default heisenberg-1)")
    if map_:
        p.add_argument("--map", default=None,
                       help="map family, e.g. 'takagi-sheet:beta=0.8' or 'random-polynomial:degree=2'")
        p.add_argument("--alpha", type=float, default=None, help="override the declared Hölder exponent")
    if form:
        p.add_argument("--form", default=None, help="form expression, e.g. 'x dx^theta + dy^theta'")
        p.add_argument("--chart", default=None, help="chart of the form coefficients (default: matrix on heisenberg-1)")
    p.add_argument("--levels", type=int, default=None, help="level cap")
    p.add_argument("--tol", type=float, default=None, help="target error")
    p.add_argument("--exact", action="store_true", default=None, help="rational arithmetic where available")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None, help="output directory (default: out)")
    p.add_argument("--workers", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="holderint", description="Integrals of forms along Hölder maps into Carnot groups.")
    sub = ap.add_subparsers(dest="command")

    p = sub.add_parser("triangulate", help="Kuhn triangulation of the unit cube")
    p.add_argument("--k", type=int, default=None)
    _common(p, form=False, map_=False)

    p = sub.add_parser("telescope", help="check F_{j+1} - F_j = H'_j + dK'_j level by level")
    p.add_argument("--k", type=int, default=None, help="source dimension for random rational maps")
    p.add_argument("--source", choices=["cube", "closed"], default=None)
    _common(p, form=False)

    p = sub.add_parser("integrate", help="estimate J(F(Q), omega)")
    _common(p)

    p = sub.add_parser("stokes", help="compare J(F(Q), d omega) with J(F(dQ), omega)")
    _common(p)

    p = sub.add_parser("vanish-sweep", help="direct-estimate decay exponents over a family sweep")
    p.add_argument("--betas", default=None, help="comma-separated Takagi exponents (default 0.3..0.7)")
    _common(p, map_=False)

    p = sub.add_parser("cohomology", help="weight-graded Lie algebra cohomology and the Hölder bound")
    p.add_argument("name", nargs="?", help="algebra name (or use --algebra)")
    p.add_argument("--list", action="store_true", help="list catalog algebras")
    _common(p, form=False, map_=False)

    p = sub.add_parser("variation", help="variation function g(s,t) and its dyadic (p,p)-variation")
    p.add_argument("--fine", type=int, default=None, help="interpolation level for cell masses")
    p.add_argument("--p", type=float, default=None, help="variation exponent (default 2/(3 alpha))")
    _common(p)

    p = sub.add_parser("towghi", help="compare J(F(S), f omega) with dyadic Towghi sums")
    p.add_argument("--f", default=None, help="function f, in the chart of the form")
    p.add_argument("--fine", type=int, default=None)
    _common(p)

    p = sub.add_parser("horizontal", help="horizontal interpolation of a curve into the first Heisenberg group")
    _common(p)
    return ap


DEFAULTS = {
    "algebra": "heisenberg-1", "map": None, "form": None, "chart": None, "alpha": None, "levels": None,
    "tol": 1e-6, "exact": False, "seed": 0, "out": "out", "workers": 1, "k": 2, "source": "cube",
    "betas": "0.3,0.4,0.5,0.6,0.7", "fine": None, "p": None, "f": "1", "name": None, "list": False,
}


def resolve(args: argparse.Namespace) -> argparse.Namespace:
    """Merge defaults, the JSON config and the flags (in increasing priority)."""
    merged = dict(DEFAULTS)
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise SpecError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(cfg, dict):
            raise SpecError("config must be a JSON object")
        unknown = set(cfg) - set(DEFAULTS) - {"command"}
        if unknown:
            raise SpecError(f"unknown config keys: {', '.join(sorted(unknown))}")
        merged.update(cfg)
    for key, val in vars(args).items():
        if val is not None:
            merged[key] = val
    return argparse.Namespace(**merged)


def _algebra_group(spec):
    try:
        return group(load_algebra(spec.algebra))
    except KeyError as exc:
        raise SpecError(str(exc.args[0])) from exc


def build_map(spec, G=None):
    if not spec.map:
        raise SpecError("--map is required")
    name, _, rest = spec.map.partition(":")
    rng = np.random.default_rng(spec.seed)
    try:
        if name in ("random-polynomial", "random-rational"):
            kw = {}
            for item in filter(None, rest.split(",")):
                key, _, val = item.partition("=")
                kw[key.strip()] = int(val)
            if name == "random-polynomial":
                F = random_polynomial_map(rng, **kw)
            else:
                G = G or _algebra_group(spec)
                kw.setdefault("dim", spec.k)
                kw.setdefault("level", 2)
                F = random_rational_map(G, kw.pop("dim"), kw.pop("level"), rng, **kw)
        else:
            F = parse_map(spec.map)
    except (KeyError, TypeError, ValueError) as exc:
        msg = exc.args[0] if exc.args else repr(exc)
        raise SpecError(f"bad map {spec.map!r}: {msg}; families: "
                        f"{', '.join(sorted(FAMILIES) + ['random-polynomial', 'random-rational'])}") from exc
    if spec.alpha is not None:
        if not 0 < spec.alpha <= 1:
            raise SpecError("--alpha must lie in (0, 1]")
        F.alpha = spec.alpha
    if G is not None and F.group.algebra != G.algebra:
        raise SpecError(f"map {name!r} takes values in {F.group.algebra.name}, not {G.algebra.name}")
    return F


def build_form(spec, G, text=None):
    from .forms import parse_form
    text = spec.form if text is None else text
    if not text:
        raise SpecError("--form is required")
    chart = spec.chart or ("matrix" if "matrix" in G.charts else "exp")
    try:
        return parse_form(text, G, chart)
    except Exception as exc:  # noqa: BLE001 - parser errors come in several types
        raise SpecError(f"cannot parse form {text!r}: {exc}") from exc


def _out(spec) -> Path:
    p = Path(spec.out)
    p.mkdir(parents=True, exist_ok=True)
    return p


# --- commands ----------------------------------------------------------------------------------

def cmd_triangulate(spec):
    from .chains import cube_boundary_chain, triangulate_cube
    k = spec.k
    if not 1 <= k <= 6:
        raise SpecError("--k must be in [1, 6]")
    T = triangulate_cube(k)
    ok = T.boundary() == cube_boundary_chain(k)
    out = _out(spec)
    (out / f"triangulation_k{k}.txt").write_text(T.dumps())
    rows = [(i, c, " ".join("(" + ",".join(str(x) for x in v) + ")" for v in verts))
            for i, (verts, c) in enumerate(sorted(T.items()))]
    report.write_csv(out / f"triangulation_k{k}.csv", ["simplex", "orientation", "vertices"], rows)
    print(f"{len(T)} simplices, boundary check {'pass' if ok else 'FAIL'}")
    return 0 if ok else EXIT_FAIL


def cmd_telescope(spec):
    from .chains import cube_boundary_complex, telescope, telescope_complex
    G = _algebra_group(spec)
    levels = 3 if spec.levels is None else spec.levels
    if not spec.map:
        spec.map = f"random-rational:dim={spec.k},level={levels}"
    F = build_map(spec, G)
    exact = F.group.algebra.step <= 2 or spec.exact
    rows, ok = [], True
    for j in range(levels):
        if spec.source == "closed":
            if F.dim < 2:
                raise SpecError("closed sources need a map of dimension >= 2")
            cells = cube_boundary_complex(F.dim)
            tel = telescope_complex(F, cells, j, exact)
        else:
            tel = telescope(F, j, exact=exact)
        good = tel.identity_holds()
        ok &= good
        rows.append((j, tel.k, len(tel.E), len(tel.F), len(tel.H_prime), len(tel.K_prime),
                     tel.n_face_terms, len(tel.residual()), "pass" if good else "FAIL"))
    report.write_csv(_out(spec) / "telescope.csv",
                     ["j", "k", "simplices_F_j+1", "simplices_F_j", "simplices_H'_j", "simplices_K'_j",
                      "outer_faces", "residual_terms", "identity"], rows)
    for r in rows:
        print(f"j={r[0]}  |H'|={r[4]}  |K'|={r[5]}  faces={r[6]}  identity {r[8]}")
    return 0 if ok else EXIT_FAIL


def _check_degree(form, k, what="map"):
    if form.degree != k:
        raise SpecError(f"form degree {form.degree} does not match the {what} dimension {k}")


def _jresult_rows(res):
    rows = []
    for j, I, inc, tb, mb in res.rows():
        rows.append((j, I, inc, tb, mb))
    return rows


J_HEADER = ["j", "integral_F_j", "increment", "increment_bound", "measured_increment_bound"]


def _summary(res):
    return {
        "value": res.value, "level": res.level, "error": res.error, "certified_tail": res.tail,
        "empirical_error": res.empirical_error, "direct_bound": res.direct_bound,
        "converged": res.converged, "certificate": res.certificate, "threshold": res.threshold,
        "alpha": res.alpha, "holder_constant": res.holder_constant,
    }


def _dump_json(path, obj):
    def clean(v):
        if isinstance(v, float) and not math.isfinite(v):
            return str(v)
        return v
    Path(path).write_text(json.dumps({k: clean(v) for k, v in obj.items()}, indent=2, sort_keys=True) + "\n")


def cmd_integrate(spec):
    from .holder import estimate_J, fit_slope
    G = _algebra_group(spec)
    F = build_map(spec, G)
    form = build_form(spec, G)
    _check_degree(form, F.dim)
    res = estimate_J(F, form, tol=spec.tol, max_level=spec.levels, exact=spec.exact,
                     workers=spec.workers, measure=True)
    out = _out(spec)
    rows = _jresult_rows(res)
    report.write_csv(out / "integrate.csv", J_HEADER, rows)
    js = [r[0] for r in rows[1:]]
    slope = fit_slope(js, [r[2] for r in rows[1:]])
    summary = _summary(res) | {"fitted_exponent": slope}
    report.write_csv(out / "integrate_summary.csv", ["quantity", "value"], sorted(summary.items()))
    report.convergence_plot(out / "integrate.svg",
                            {"|increment|": (js, [r[2] for r in rows[1:]]),
                             "increment bound": ([r[0] for r in rows], [r[3] for r in rows]),
                             "measured bound": ([r[0] for r in rows], [r[4] for r in rows])},
                            f"{F.name}: {spec.form}")
    print(f"J = {res.value!r}  level {res.level}  error {res.error:.3g}  ({res.certificate})")
    if not res.converged:
        print(f"tolerance: {spec.tol:g} not reached by level {res.level}", file=sys.stderr)
        return EXIT_TOLERANCE
    return 0


def cmd_stokes(spec):
    from .holder import stokes_check
    G = _algebra_group(spec)
    F = build_map(spec, G)
    form = build_form(spec, G)
    _check_degree(form, F.dim - 1, "boundary")
    rep = stokes_check(F, form, tol=spec.tol, max_level=spec.levels)
    out = _out(spec)
    report.write_csv(out / "stokes_levels.csv", ["j", "pl_stokes_residual"],
                     list(enumerate(rep.level_residuals)))
    rows = [("interior", rep.interior.value, rep.interior.error, rep.interior.certificate)]
    rows += [(f"face{i}", s * r.value, r.error, r.certificate) for i, (s, r) in enumerate(rep.boundary)]
    report.write_csv(out / "stokes.csv", ["piece", "integral", "error", "certificate"], rows)
    print(f"J(dQ-side) = {rep.interior.value!r}  J(boundary) = {rep.boundary_value!r}  "
          f"residual {rep.residual:.3g}  bound {rep.bound:.3g}  certified tails {rep.tail_bound:.3g}  "
          f"{'pass' if rep.passed else 'FAIL'}")
    return 0 if rep.passed else EXIT_FAIL


def cmd_vanish_sweep(spec):
    from .holder import vanishing_check
    from .maps import horizontal_curve_map, takagi_sheet
    G = _algebra_group(spec)
    form = build_form(spec, G)
    _check_degree(form, 2)
    try:
        betas = [float(b) for b in str(spec.betas).split(",")]
    except ValueError as exc:
        raise SpecError(f"bad --betas {spec.betas!r}") from exc
    levels = 8 if spec.levels is None else spec.levels
    maps = [(f"takagi beta={b:g}", takagi_sheet(b)) for b in betas]
    maps.append(("horizontal-curve", horizontal_curve_map()))
    rows, summary = [], []
    for label, F in maps:
        rep = vanishing_check(F, form, levels=levels, fit_from=min(4, levels - 2))
        for j, I, D in zip(rep.levels, rep.integrals, rep.direct_sums):
            rows.append((label, F.alpha, j, I, D))
        summary.append((label, F.alpha, rep.predicted, rep.fitted, rep.fitted - rep.predicted, rep.precondition,
                        rep.value))
    out = _out(spec)
    report.write_csv(out / "vanish_levels.csv", ["map", "alpha", "j", "integral_F_j", "direct_sum_diam_w"], rows)
    report.write_csv(out / "vanish_sweep.csv", ["map", "alpha", "predicted_exponent", "fitted_exponent",
                                                "deviation", "vanishing_precondition", "integral_last_level"],
                     summary)
    report.slope_plot(out / "vanish_sweep.svg", [(s[0], s[2], s[3]) for s in summary],
                      f"direct-estimate decay for {spec.form}")
    for s in summary:
        print(f"{s[0]:<22} alpha={s[1]:.3f}  predicted {s[2]:+.3f}  fitted {s[3]:+.3f}")
    return 0


def cmd_cohomology(spec):
    from .cohomology import cohomology_table
    if spec.list:
        print("\n".join(catalog_names()))
        return 0
    name = spec.name or spec.algebra
    try:
        alg = load_algebra(name)
    except KeyError as exc:
        raise SpecError(str(exc.args[0])) from exc
    table = cohomology_table(alg)
    print(table.format())
    out = _out(spec)
    report.write_csv(out / f"cohomology_{alg.name}.csv", ["k", "dim_H_k", "w_k", "W_k", "weights"],
                     table.rows())
    report.write_csv(out / f"cohomology_{alg.name}_bound.csv", ["algebra", "Q", "bound", "witness_degree"],
                     [(alg.name, table.Q, table.bound, table.witness)])
    return 0 if not table.violations else EXIT_FAIL


def cmd_variation(spec):
    from .holder import VariationFunction, dyadic_pp_variation
    G = _algebra_group(spec)
    F = build_map(spec, G)
    form = build_form(spec, G)
    _check_degree(form, 2)
    if F.dim != 2:
        raise SpecError("variation functions need a map of the unit square")
    level = 5 if spec.levels is None else spec.levels
    fine = level + 3 if spec.fine is None else spec.fine
    if fine < level + 1:
        raise SpecError("--fine must exceed --levels")
    p = 2 / (3 * F.alpha) if spec.p is None else spec.p
    g = VariationFunction.from_integral(F, form, level, fine)
    var = dyadic_pp_variation(g, p, level)
    out = _out(spec)
    report.write_csv(out / "variation.csv", ["j", f"sum_abs_increment_pow_p (p={p:.6g})"],
                     list(enumerate(var.level_sums)))
    vals = g.values(level)
    n = vals.shape[0] - 1
    report.write_csv(out / "variation_grid.csv", ["s", "t", "g"],
                     [(i / n, j / n, float(vals[i, j])) for i in range(n + 1) for j in range(n + 1)])
    report.heatmap(out / "variation.svg", vals, f"g(s,t) for {spec.form}")
    print(f"(p,p)-variation p={p:.4g}: max level sum {var.value:.6g}, tail slope {var.slope:.3g}")
    return 0


def cmd_towghi(spec):
    from .holder import towghi_check
    G = _algebra_group(spec)
    F = build_map(spec, G)
    form = build_form(spec, G)
    _check_degree(form, 2)
    level = 4 if spec.levels is None else spec.levels
    fine = level + 4 if spec.fine is None else spec.fine
    chart = spec.chart or ("matrix" if "matrix" in G.charts else "exp")
    rep = towghi_check(F, spec.f, form, level, fine, chart=chart, tol=spec.tol)
    out = _out(spec)
    rows = [("direct", rep.direct), ("direct_error", rep.direct_error)]
    rows += [(f"towghi_{k}", v) for k, v in rep.sums.items()]
    rows += [("tolerance", rep.tolerance), ("variation_p", rep.variation.p),
             ("variation_max_level_sum", rep.variation.value)]
    report.write_csv(out / "towghi.csv", ["quantity", "value"], rows)
    print(f"direct {rep.direct!r}  Towghi {rep.sums}  tolerance {rep.tolerance:.3g}  "
          f"{'pass' if rep.passed else 'FAIL'}")
    return 0 if rep.passed else EXIT_FAIL


def cmd_horizontal(spec):
    from .heisenberg import horizontal_arcs, horizontal_telescope
    G = _algebra_group(spec)
    if G.algebra.name != "heisenberg-1":
        raise SpecError("horizontal interpolation is implemented on heisenberg-1 only")
    if not spec.map:
        spec.map = "vertical-curve"
    F = build_map(spec, G)
    if F.dim != 1:
        raise SpecError("horizontal interpolation takes curves (maps of [0,1])")
    levels = 4 if spec.levels is None else spec.levels
    out = _out(spec)
    rows, arcs_last = [], []
    for j in range(levels + 1):
        arcs = horizontal_arcs(F, j, exact=True)
        ok = all(a.is_horizontal() for a in arcs)
        tel = horizontal_telescope(F, j, exact=True) if j < levels else None
        rows.append((j, len(arcs), sum(len(a.segments) for a in arcs), sum(float(a.length()) for a in arcs),
                     "pass" if ok else "FAIL", "" if tel is None else ("pass" if tel.identity_holds() else "FAIL")))
        arcs_last = arcs
    report.write_csv(out / "horizontal.csv", ["j", "arcs", "segments", "euclidean_length", "theta_zero",
                                              "telescope_identity"], rows)
    report.arcs_plot(out / "horizontal_arcs.svg", arcs_last, f"{F.name}, level {levels}")
    chain = arcs_last[0].to_chain()
    for a in arcs_last[1:]:
        chain = chain + a.to_chain()
    (out / "horizontal_chain.txt").write_text(chain.dumps())
    for r in rows:
        print(f"j={r[0]}  arcs={r[1]}  segments={r[2]}  theta-free {r[4]}  telescope {r[5] or '-'}")
    ok = all(r[4] == "pass" and r[5] in ("pass", "") for r in rows)
    return 0 if ok else EXIT_FAIL


COMMANDS = {
    "triangulate": cmd_triangulate, "telescope": cmd_telescope, "integrate": cmd_integrate,
    "stokes": cmd_stokes, "vanish-sweep": cmd_vanish_sweep, "cohomology": cmd_cohomology,
    "variation": cmd_variation, "towghi": cmd_towghi, "horizontal": cmd_horizontal,
}


def main(argv=None) -> int:
    from .holder import ExponentConditionError, ToleranceExhausted
    ap = build_parser()
    argv = sys.argv[1:] if argv is None else argv
    if not argv:
        ap.print_usage(sys.stderr)
        return EXIT_SPEC
    args = ap.parse_args(argv)
    if not args.command:
        ap.print_usage(sys.stderr)
        return EXIT_SPEC
    try:
        spec = resolve(args)
        return COMMANDS[args.command](spec)
    except SpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SPEC
    except ExponentConditionError as exc:
        print(f"precondition: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except ToleranceExhausted as exc:
        print(f"tolerance: {exc}", file=sys.stderr)
        return EXIT_TOLERANCE


if __name__ == "__main__":
    sys.exit(main())
