"""Command line front end: analyze, bounds, validate, robustness.

Exit codes
    0  success (certified, property holds, no violations)
    1  usage, configuration or numerical error
    2  nominal trajectory already violates the specification
    3  nonlinear proviso failed (eps_lin <= delta_bar)
    4  analysis finished but no positive level was certified
    5  validation found violations / signal does not satisfy the formula
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import stl
from .config import AnalysisConfig, load_config
from .dynamics import LinearSystem, monte_carlo_validate
from .envelope import EnvelopeFamily, nominal_trajectory
from .errors import MissingCertificate, ResilienceError
from .linalg import GAIN_KINDS, decompose, gain_curve
from .resilience import linearize, nonlinear_lower_bound, resilience_lower_bound
from .signals import Signal
from .svg import PALETTE, Curve, Panel, render

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOMINAL = 2
EXIT_PROVISO = 3
EXIT_NOT_CERTIFIED = 4
EXIT_VIOLATED = 5

STATUS_EXIT = {"certified": EXIT_OK, "nominal_violation": EXIT_NOMINAL,
               "proviso_failed": EXIT_PROVISO, "not_certified": EXIT_NOT_CERTIFIED}

# overlay plots are thinned so the SVG stays a reasonable size
OVERLAY_MAX_TRAJ = 200
OVERLAY_MAX_POINTS = 400


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def run_analysis(cfg: AnalysisConfig, method: str | None = None):
    system = cfg.build_system()
    scenario = cfg.scenario(method)
    if isinstance(system, LinearSystem):
        return resilience_lower_bound(cfg.formula, system, cfg.x0, cfg.grid, scenario)
    return nonlinear_lower_bound(cfg.formula, system, cfg.x0, cfg.grid, scenario)


def cmd_analyze(args) -> int:
    cfg = load_config(args.config)
    out = _out_dir(args)
    start = time.perf_counter()
    cert = run_analysis(cfg, args.method)
    elapsed = time.perf_counter() - start
    data = cert.to_json()
    data["name"] = cfg.name
    data["spec"] = cfg.spec
    _write_json(out / "certificate.json", data)
    print(f"case        {cfg.name or Path(args.config).stem}")
    print(f"status      {cert.status}")
    print(f"eps*        {cert.eps_star:.6g}")
    print(f"eta*        {cert.eta_star:.6g}")
    print(f"L_omega     {cert.l_omega:.6g}")
    print(f"delta       {cert.delta:.6g}")
    print(f"samples M   {cert.samples_used}")
    print(f"rho nominal {cert.rho_nominal:.6g}")
    if "delta_bar" in cert.extras:
        print(f"eps_linear  {cert.extras['eps_linear']:.6g}")
        print(f"delta_bar   {cert.extras['delta_bar']:.6g}")
    print(f"time        {elapsed:.2f} s")
    return STATUS_EXIT[cert.status]


def _linear_view(cfg: AnalysisConfig) -> LinearSystem:
    system = cfg.build_system()
    return system if isinstance(system, LinearSystem) else linearize(system)


def bounds_tables(cfg: AnalysisConfig, methods, eps: float) -> dict:
    """{method: (K, 1 + 3n) array of t, lo_i, nominal_i, hi_i}."""
    lin = _linear_view(cfg)
    grid = cfg.grid
    dec = None
    nominal = nominal_trajectory(lin.A, cfg.x0, grid, lin.equilibrium)
    tables = {}
    for method in methods:
        if method != "gronwall" and dec is None:
            dec = decompose(lin.A)
        gain = gain_curve(method, lin.A, grid, dec)
        fam = EnvelopeFamily(nominal, gain, lin.input_map)
        lo, hi = fam.bounds(eps)
        cols = [grid[:, None]]
        for i in range(lin.n):
            cols += [lo[:, i:i + 1], nominal.values[:, i:i + 1], hi[:, i:i + 1]]
        tables[method] = np.hstack(cols)
    return tables


def _table_csv(table: np.ndarray, n: int) -> str:
    header = ["t"]
    for i in range(1, n + 1):
        header += [f"lo_{i}", f"nominal_{i}", f"hi_{i}"]
    lines = [",".join(header)]
    lines += [",".join(format(v, ".17g") for v in row) for row in table]
    return "\n".join(lines) + "\n"


def _clip_range(tables, methods, n):
    """Plot limits from the tightest method so looser bounds do not flatten the view."""
    ref = tables[methods[0]]
    lims = []
    for i in range(n):
        block = ref[:, 1 + 3 * i: 4 + 3 * i]
        lo, hi = float(block.min()), float(block.max())
        pad = max(hi - lo, 1e-9)
        lims.append((lo - pad, hi + pad))
    return lims


def cmd_bounds(args) -> int:
    cfg = load_config(args.config)
    out = _out_dir(args)
    methods = list(GAIN_KINDS) if args.method in (None, "all") else [args.method]
    eps = cfg.eps_hi if args.eps is None else float(args.eps)
    if eps < 0:
        raise ValueError("--eps must be nonnegative")
    tables = bounds_tables(cfg, methods, eps)
    n = cfg.n
    for method, table in tables.items():
        (out / f"bounds_{method}.csv").write_text(_table_csv(table, n))
    lims = _clip_range(tables, methods, n)
    panels = []
    for i in range(n):
        curves = []
        nominal = tables[methods[0]][:, 2 + 3 * i]
        t = tables[methods[0]][:, 0]
        curves.append(Curve("nominal", t, nominal, "#000000", 1.5))
        for j, method in enumerate(methods):
            tab = tables[method]
            lo, hi = lims[i]
            color = PALETTE[j % len(PALETTE)]
            for col in (1, 3):
                y = np.clip(tab[:, col + 3 * i], lo, hi)
                curves.append(Curve(method, t, y, color, 1.2, "5,3"))
        panels.append(Panel(f"x{i + 1}  (eps = {eps:g})", tuple(curves)))
    (out / "bounds.svg").write_text(render(panels, title=cfg.name or "envelope bounds"))
    for method, table in tables.items():
        final = table[-1]
        widths = [final[3 + 3 * i] - final[1 + 3 * i] for i in range(n)]
        print(f"{method:9s} width at t={final[0]:g}: " + " ".join(f"{w:.6g}" for w in widths))
    return EXIT_OK


def _spec_levels(phi, n):
    """Horizontal boundary lines for single-variable predicates, per state."""
    levels = [set() for _ in range(n)]
    for p in stl.predicates(phi):
        nz = [i for i, c in enumerate(p.coeffs) if c != 0]
        if len(nz) == 1:
            i = nz[0]
            levels[i].add(p.bound / p.coeffs[i])
    return [sorted(s) for s in levels]


def cmd_validate(args) -> int:
    cfg = load_config(args.config)
    out = _out_dir(args)
    if args.eps is None:
        cert_path = out / "certificate.json"
        if not cert_path.exists():
            raise MissingCertificate(f"no {cert_path}; run analyze first or pass --eps")
        eps = float(json.loads(cert_path.read_text())["eps_star"])
    else:
        eps = float(args.eps)
    if eps < 0:
        raise ValueError("--eps must be nonnegative")
    trials = cfg.trials if args.trials is None else args.trials
    seed = cfg.seed if args.seed is None else args.seed
    phi = cfg.formula
    report, X = monte_carlo_validate(cfg.build_system(), phi, cfg.x0, cfg.grid, eps,
                                     trials=trials, seed=seed, keep_trajectories=True)
    data = report.to_json()
    data["name"] = cfg.name
    _write_json(out / "report.json", data)

    if not args.no_svg:
        step = max(1, int(np.ceil(X.shape[1] / OVERLAY_MAX_POINTS)))
        keep = X[:OVERLAY_MAX_TRAJ, ::step]
        t = cfg.grid[::step]
        levels = _spec_levels(phi, cfg.n)
        panels = []
        for i in range(cfg.n):
            curves = [Curve("", t, keep[s, :, i], "#1f77b4", 0.6, None, 0.35)
                      for s in range(keep.shape[0])]
            curves += [Curve("predicate bound", np.array([t[0], t[-1]]), np.array([v, v]),
                             "#d62728", 1.2, "6,3") for v in levels[i]]
            panels.append(Panel(f"x{i + 1}", tuple(curves)))
        title = f"{cfg.name or 'validation'}: {keep.shape[0]} of {trials} trajectories, eps = {eps:g}"
        (out / "validate.svg").write_text(render(panels, title=title))

    print(f"eps         {eps:.6g}")
    print(f"trials      {report.trials}")
    print(f"violations  {report.violations}")
    print(f"worst rho   {report.worst_robustness:.6g} (trial {report.worst_trial}, "
          f"{report.worst_kind}, seed {report.worst_seed})")
    return EXIT_OK if report.violations == 0 else EXIT_VIOLATED


def cmd_robustness(args) -> int:
    cfg = load_config(args.config)
    sig = Signal.from_csv(Path(args.signal).read_text())
    if sig.dim != cfg.n:
        raise ValueError(f"signal has {sig.dim} states, config expects {cfg.n}")
    if not np.isclose(sig.dt, cfg.dt, rtol=1e-9, atol=0):
        raise ValueError(f"signal dt {sig.dt:g} differs from config dt {cfg.dt:g}")
    rho = stl.robustness(cfg.formula, sig, 0.0)
    print(f"rho {rho:.17g}")
    print("SAT" if rho > 0 else "UNSAT")
    return EXIT_OK if rho > 0 else EXIT_VIOLATED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stl-resilience",
                                     description="Certified STL resilience lower bounds.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out=True):
        p.add_argument("--config", required=True, help="analysis config (JSON)")
        if out:
            p.add_argument("--out", default=".", help="output directory (default: .)")

    p = sub.add_parser("analyze", help="compute the certified resilience lower bound")
    common(p)
    p.add_argument("--method", choices=("jordan", "absolute"), default=None)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("bounds", help="write envelope bounds as CSV and SVG")
    common(p)
    p.add_argument("--method", choices=GAIN_KINDS + ("all",), default="all")
    p.add_argument("--eps", type=float, default=None,
                   help="disturbance level for the envelope (default: scenario.eps_hi)")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("validate", help="Monte-Carlo validation at a disturbance level")
    common(p)
    p.add_argument("--eps", type=float, default=None,
                   help="disturbance level (default: eps_star from OUT/certificate.json)")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--no-svg", action="store_true", help="skip the overlay plot")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("robustness", help="robustness of a CSV signal")
    common(p, out=False)
    p.add_argument("signal", help="CSV with header t,x1,...,xn")
    p.set_defaults(func=cmd_robustness)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ResilienceError, ValueError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
