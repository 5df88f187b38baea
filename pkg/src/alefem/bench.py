"""Benchmark experiments, CSV/SVG emission, and the command-line front end.

Experiments:
  stability    decaying bubble on the oscillating-scale domain, norm series
  convergence  manufactured bubble on the breathing square, error at t = 0.3
  accuracy     fixed-square pulse on deforming interior grids vs fixed grid
  scl-check    per-interval conservation residuals over maps and steps
  verify       full verification report

Every run is deterministic; CSV floats carry 17 significant digits so reruns
are byte-identical. SVG plots are static polyline drawings, no scripting.
"""

from __future__ import annotations

import argparse
import math
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import ale, verify
from .manufactured import ring_pulse, scaled_bubble_referent
from .mesh import build_unit_square_mesh
from .schemes import MODIFIED, SCHEMES, SchemeConfig, run_simulation

STABILITY_ALPHA = 0.01
STABILITY_T = 0.4
CONVERGENCE_T = 0.3
ACCURACY_ALPHA = 0.1
ACCURACY_T = 2.0

_CLASSICAL_OF = {"mIE": "cIE", "mCN": "cCN", "mBDF2": "cBDF2"}


# ---------------------------------------------------------------------------
# CSV / SVG emission


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def write_csv(path, header, rows) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd",
            "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
            "#bcbd22", "#e377c2", "#393b79", "#637939")


def emit_svg(path, series, title="", xlabel="", ylabel="", loglog=False,
             width=720, height=480) -> None:
    """Static plot: one polyline per (label, xs, ys) series. loglog applies
    log10 to both axes (all data must then be positive)."""
    ml, mr, mt, mb = 64, 180, 36, 48
    pw, ph = width - ml - mr, height - mt - mb

    def tr(vals):
        a = np.asarray(vals, dtype=float)
        if loglog:
            if np.any(a <= 0.0):
                raise ValueError("loglog requires positive data")
            a = np.log10(a)
        return a

    data = [(label, tr(xs), tr(ys)) for label, xs, ys in series if len(xs)]
    if data:
        xmin = min(a.min() for _, a, _ in data)
        xmax = max(a.max() for _, a, _ in data)
        ymin = min(b.min() for _, _, b in data)
        ymax = max(b.max() for _, _, b in data)
    else:
        xmin, xmax, ymin, ymax = 0.0, 1.0, 0.0, 1.0
    if xmax - xmin < 1e-300:
        xmin, xmax = xmin - 0.5, xmax + 0.5
    if ymax - ymin < 1e-300:
        ymin, ymax = ymin - 0.5, ymax + 0.5

    def px(x):
        return ml + (x - xmin) / (xmax - xmin) * pw

    def py(y):
        return mt + (ymax - y) / (ymax - ymin) * ph

    def tick_label(v):
        return f"{10.0 ** v:.3g}" if loglog else f"{v:.4g}"

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="14">{title}</text>',
        f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for i in range(5):
        xv = xmin + i * (xmax - xmin) / 4
        yv = ymin + i * (ymax - ymin) / 4
        out.append(f'<line x1="{px(xv):.2f}" y1="{mt + ph}" x2="{px(xv):.2f}" '
                   f'y2="{mt + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{px(xv):.2f}" y="{mt + ph + 18}" text-anchor="middle">'
                   f'{tick_label(xv)}</text>')
        out.append(f'<line x1="{ml - 5}" y1="{py(yv):.2f}" x2="{ml}" '
                   f'y2="{py(yv):.2f}" stroke="black"/>')
        out.append(f'<text x="{ml - 8}" y="{py(yv) + 4:.2f}" text-anchor="end">'
                   f'{tick_label(yv)}</text>')
    out.append(f'<text x="{ml + pw / 2:.1f}" y="{height - 8}" text-anchor="middle">{xlabel}</text>')
    out.append(f'<text x="16" y="{mt + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {mt + ph / 2:.1f})">{ylabel}</text>')

    for k, (label, xs, ys) in enumerate(data):
        color = _PALETTE[k % len(_PALETTE)]
        pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xs, ys))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        ly = mt + 14 + 16 * k
        out.append(f'<line x1="{ml + pw + 8}" y1="{ly - 4}" x2="{ml + pw + 28}" '
                   f'y2="{ly - 4}" stroke="{color}" stroke-width="1.5"/>')
        out.append(f'<text x="{ml + pw + 32}" y="{ly}">{label}</text>')

    out.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")


# ---------------------------------------------------------------------------
# experiment workers (top level so a process pool can pickle them)


def _stability_rows(spec):
    scheme, strategy, dt, nx, ny, degree = spec
    mesh = build_unit_square_mesh(nx, ny)
    config = SchemeConfig(scheme, dt, STABILITY_T, alpha=STABILITY_ALPHA,
                          strategy=strategy, degree=degree)
    rec = run_simulation(config, mesh, ale.UniformScaleMap(),
                         ic=lambda x, y: 1600.0 * x * (1 - x) * y * (1 - y), bc=0.0)
    return [(scheme, strategy, dt, float(t), float(v), float(s))
            for t, v, s in zip(rec.times, rec.norms, rec.scl_inf)]


def _convergence_row(spec):
    scheme, strategy, dt, nx, ny, degree = spec
    mesh = build_unit_square_mesh(nx, ny)
    _, motion, u_hat, f_hat = scaled_bubble_referent(ACCURACY_ALPHA)
    config = SchemeConfig(scheme, dt, CONVERGENCE_T, alpha=ACCURACY_ALPHA,
                          strategy=strategy, degree=degree)
    rec = run_simulation(config, mesh, motion, ic=lambda x, y: u_hat(x, y, 0.0),
                         bc=0.0, forcing=f_hat, exact=u_hat)
    return (scheme, strategy, dt, float(rec.errors[-1]), float(np.max(rec.scl_inf)))


def _accuracy_rows(spec):
    scheme, map_id, variant, strategy, dt, nx, ny, degree = spec
    mesh = build_unit_square_mesh(nx, ny)
    man = ring_pulse(ACCURACY_ALPHA)
    motion = ale.prescribed_map(map_id)

    def pushforward(fn):
        def hat(x, y, t):
            d = motion.displacement(np.stack([x, y], axis=-1), t)
            return fn(x + d[..., 0], y + d[..., 1], t)
        return hat

    u_hat = pushforward(man.u)
    config = SchemeConfig(scheme, dt, ACCURACY_T, alpha=ACCURACY_ALPHA,
                          strategy=strategy, degree=degree)
    rec = run_simulation(config, mesh, motion, ic=lambda x, y: u_hat(x, y, 0.0),
                         bc=man.u, forcing=pushforward(man.f), exact=u_hat)
    return [(scheme, map_id, variant, float(t), float(e), float(s))
            for t, e, s in zip(rec.times, rec.errors, rec.scl_inf)]


def _run_specs(worker, specs, jobs):
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(worker, specs))
    return [worker(s) for s in specs]


# ---------------------------------------------------------------------------
# experiments


def run_stability(opts) -> list[Path]:
    specs = [(s, strat, dt, opts["nx"], opts["ny"], opts["degree"])
             for s in opts["schemes"] for strat in opts["strategies"]
             for dt in opts["dts"]]
    rows = [r for chunk in _run_specs(_stability_rows, specs, opts["jobs"]) for r in chunk]
    rows.sort(key=lambda r: (r[0], r[1], r[2], r[3]))
    out = opts["out"] / "stability.csv"
    write_csv(out, ("scheme", "strategy", "dt", "t", "l2_norm", "scl_residual"), rows)
    written = [out]
    if opts["svg"]:
        for dt in opts["dts"]:
            series = []
            for s in opts["schemes"]:
                for strat in opts["strategies"]:
                    pts = [(r[3], r[4]) for r in rows
                           if r[0] == s and r[1] == strat and r[2] == dt]
                    series.append((f"{s} {strat}", [p[0] for p in pts], [p[1] for p in pts]))
            svg = opts["out"] / f"stability_dt{dt:g}.svg"
            emit_svg(svg, series, title=f"norm decay, dt = {dt:g}",
                     xlabel="t", ylabel="L2 norm")
            written.append(svg)
    return written


def run_convergence(opts) -> list[Path]:
    specs = [(s, strat, dt, opts["nx"], opts["ny"], opts["degree"])
             for s in opts["schemes"] for strat in opts["strategies"]
             for dt in opts["dts"]]
    results = _run_specs(_convergence_row, specs, opts["jobs"])
    slopes = {}
    for s in opts["schemes"]:
        for strat in opts["strategies"]:
            pts = sorted((r[2], r[3]) for r in results if r[0] == s and r[1] == strat)
            if len(pts) >= 3:
                slopes[s, strat] = verify.convergence_rate([p[0] for p in pts],
                                                           [p[1] for p in pts])
            else:
                slopes[s, strat] = math.nan
    rows = sorted((s, strat, dt, err, scl, slopes[s, strat])
                  for s, strat, dt, err, scl in results)
    out = opts["out"] / "convergence.csv"
    write_csv(out, ("scheme", "strategy", "dt", "error_t03", "max_scl_residual", "slope"), rows)
    written = [out]
    if opts["svg"]:
        series = []
        for s in opts["schemes"]:
            for strat in opts["strategies"]:
                pts = sorted((r[2], r[3]) for r in results if r[0] == s and r[1] == strat)
                label = f"{s} {strat} (slope {slopes[s, strat]:.2f})"
                series.append((label, [p[0] for p in pts], [p[1] for p in pts]))
        svg = opts["out"] / "convergence.svg"
        emit_svg(svg, series, title="error at t = 0.3", xlabel="dt",
                 ylabel="L2 error", loglog=True)
        written.append(svg)
    return written


def run_accuracy(opts) -> list[Path]:
    specs = []
    for s in opts["schemes"]:
        if s not in MODIFIED:
            continue
        specs.append((s, "identity", "fixed", "dc",
                      opts["dts"][0], opts["nx"], opts["ny"], opts["degree"]))
        for map_id in ("map-a", "map-b"):
            for strat in opts["strategies"]:
                specs.append((s, map_id, f"mov-nSCL({strat})", strat,
                              opts["dts"][0], opts["nx"], opts["ny"], opts["degree"]))
    # The endpoint-rule comparator runs with the continuous velocity: under
    # the piecewise-constant one its conservation defect is dt^2 det(grad w)
    # per element, which vanishes identically on map-b (equal displacement
    # components), hiding the very violation the comparison illustrates.
    for s in opts["schemes"]:
        comparator = _CLASSICAL_OF.get(s)
        if comparator:
            for map_id in ("map-a", "map-b"):
                specs.append((comparator, map_id, "mov-wSCL", "c",
                              opts["dts"][0], opts["nx"], opts["ny"], opts["degree"]))
    rows = [r for chunk in _run_specs(_accuracy_rows, specs, opts["jobs"]) for r in chunk]
    rows.sort(key=lambda r: (r[0], r[1], r[2], r[3]))
    out = opts["out"] / "accuracy.csv"
    write_csv(out, ("scheme", "map", "variant", "t", "l2_error", "scl_residual"), rows)
    written = [out]
    if opts["svg"]:
        for map_id in ("map-a", "map-b"):
            series = []
            for key in sorted({(r[0], r[2]) for r in rows if r[1] in (map_id, "identity")}):
                pts = [(r[3], r[4]) for r in rows
                       if (r[0], r[2]) == key and r[1] in (map_id, "identity")]
                series.append((f"{key[0]} {key[1]}", [p[0] for p in pts], [p[1] for p in pts]))
            svg = opts["out"] / f"accuracy_{map_id}.svg"
            emit_svg(svg, series, title=f"error history, {map_id}",
                     xlabel="t", ylabel="L2 error")
            written.append(svg)
    return written


def run_scl_check(opts) -> list[Path]:
    sizes = (opts["nx"],) if opts["nx_given"] else (20, 40)
    rows = verify.scl_identity_suite(mesh_sizes=sizes, strategies=opts["strategies"],
                                     dts=opts["dts"])
    out = opts["out"] / "scl_check.csv"
    with open(out, "w") as fh:
        verify.write_report(rows, fh)
    return [out]


def run_verify(opts) -> list[Path]:
    rows = []
    rows += verify.scl_identity_suite(mesh_sizes=(12,), dts=(0.05, 0.01),
                                      strategies=opts["strategies"], max_intervals=40)
    rows += verify.constant_preservation_suite(strategies=opts["strategies"], nx=12)
    mesh = build_unit_square_mesh(12, 12)
    for map_id in ("uniform-scale", "map-a", "map-b"):
        for degree in (1, 2):
            for t in (0.25, 0.5):
                gap = verify.change_of_variables_oracle(mesh, degree, ale.prescribed_map(map_id), t)
                rows.append(verify.CheckRow("change-of-variables",
                                            f"{map_id}/p{degree}/t{t:g}",
                                            "max_entry_gap", gap, gap <= 1e-12))
    worst = verify.cofactor_fuzz()
    rows.append(verify.CheckRow("cofactor-fuzz", "n1000", "max_defect", worst, worst <= 1e-12))
    out = opts["out"] / "verify.csv"
    with open(out, "w") as fh:
        verify.write_report(rows, fh)
    return [out]


_EXPERIMENTS = {
    "stability": run_stability,
    "convergence": run_convergence,
    "accuracy": run_accuracy,
    "scl-check": run_scl_check,
    "verify": run_verify,
}

_DEFAULTS = {
    "stability": {"scheme": "mIE,mCN,mBDF2,mBDF3", "dt": "0.01,0.005,0.001,0.0005",
                  "strategy": "dc,c", "nx": "40", "degree": "1"},
    "convergence": {"scheme": "mIE,mCN,mBDF2,mBDF3", "dt": "0.05,0.01,0.005,0.001",
                    "strategy": "dc,c", "nx": "40", "degree": "2"},
    "accuracy": {"scheme": "mIE,mCN,mBDF2,mBDF3", "dt": "0.05",
                 "strategy": "dc,c", "nx": "40", "degree": "1"},
    "scl-check": {"scheme": "", "dt": "0.05,0.01,0.001", "strategy": "dc,c",
                  "nx": "40", "degree": "1"},
    "verify": {"scheme": "", "dt": "0.05,0.01", "strategy": "dc,c",
               "nx": "12", "degree": "1"},
}


def parse_config(path) -> dict:
    """Flat key = value file; blank lines and # comments ignored."""
    opts = {}
    for ln, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{ln}: expected key = value, got {raw!r}")
        key, val = (part.strip() for part in line.split("=", 1))
        opts[key] = val
    return opts


def main(argv=None) -> int:
    p = argparse.ArgumentParser(
        prog="bench", description="moving-grid heat equation benchmarks")
    p.add_argument("--experiment", choices=sorted(_EXPERIMENTS))
    p.add_argument("--config", help="flat key = value file; CLI flags override it")
    p.add_argument("--scheme", help="comma list from " + ",".join(SCHEMES))
    p.add_argument("--dt", help="comma list of step sizes")
    p.add_argument("--strategy", help="comma list from dc,c")
    p.add_argument("--nx", type=int, help="cells per side (ny defaults to nx)")
    p.add_argument("--ny", type=int)
    p.add_argument("--degree", type=int, choices=(1, 2))
    p.add_argument("--out", help="output directory (default results/)")
    p.add_argument("--svg", action="store_true", default=None,
                   help="also write SVG plots")
    p.add_argument("--jobs", type=int, help="parallel worker processes")
    args = p.parse_args(argv)

    merged: dict = {}
    if args.config:
        merged.update(parse_config(args.config))
    for key in ("experiment", "scheme", "dt", "strategy", "nx", "ny",
                "degree", "out", "svg", "jobs"):
        val = getattr(args, key)
        if val is not None:
            merged[key] = val

    experiment = merged.get("experiment")
    if experiment not in _EXPERIMENTS:
        p.error(f"--experiment is required, one of {sorted(_EXPERIMENTS)}")
    defaults = _DEFAULTS[experiment]

    def opt(key):
        return merged.get(key, defaults.get(key))

    schemes_list = [s for s in str(opt("scheme")).split(",") if s]
    for s in schemes_list:
        if s not in SCHEMES:
            p.error(f"unknown scheme {s!r}")
    strategies = [s for s in str(opt("strategy")).split(",") if s]
    for s in strategies:
        if s not in ("dc", "c"):
            p.error(f"unknown strategy {s!r}")
    dts = [float(v) for v in str(opt("dt")).split(",") if v]
    nx = int(opt("nx"))
    ny = int(merged.get("ny", nx))
    out_dir = Path(merged.get("out", "results"))
    out_dir.mkdir(parents=True, exist_ok=True)
    svg = merged.get("svg", False)
    if isinstance(svg, str):
        svg = svg.lower() in ("1", "true", "yes", "on")

    opts = {
        "schemes": schemes_list,
        "strategies": strategies,
        "dts": dts,
        "nx": nx,
        "ny": ny,
        "nx_given": "nx" in merged,
        "degree": int(opt("degree")),
        "out": out_dir,
        "svg": bool(svg),
        "jobs": int(merged.get("jobs", 1)),
    }
    for path in _EXPERIMENTS[experiment](opts):
        print(path)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
