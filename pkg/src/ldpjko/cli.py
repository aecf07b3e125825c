"""Batch experiment driver.

Each command reads a flat ``key = value`` config file (``#`` comments),
applies ``--set key=value`` overrides, writes its CSVs into ``--out`` and
returns an exit code: 0 pass, 1 check failure, 2 solver failure, 3 config
error.  Every CSV starts with a comment line naming the tool version and
the SHA-256 of the fully resolved config.
"""
from __future__ import annotations

import argparse
import hashlib
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .bridge import DELTA_CEILING, MIN_CELLS_PER_EPSILON, gamma_point, solve_bridge, write_solution_csv
from .errors import ConfigError, SolverError
from .grid import ADeltaSpec, GridDensity, _fmt, in_A_delta, read_grid_csv
from .heat import KernelParams

EXIT_PASS, EXIT_CHECK, EXIT_SOLVER, EXIT_CONFIG = 0, 1, 2, 3

_PAIR = {"L": "1.0", "n_cells": "1024", "rho0": "uniform", "rho1": "cosine",
         "amplitude0": "0.2", "amplitude1": "0.2", "delta": "0.25"}

DEFAULTS = {
    "gamma-sweep": {**_PAIR, "eps_ladder": "0.4,0.2,0.1,0.05", "tol": "1e-9", "max_iter": "200000",
                    "threshold": "0.02", "workers": "4", "plot": "0"},
    "bridge-solve": {**_PAIR, "epsilon": "0.1", "tol": "1e-9", "max_iter": "200000",
                     "write_coupling": "0"},
    "tildeq-report": {**_PAIR, "rho0": "linear-tilt", "amplitude0": "0.15", "amplitude1": "0.15",
                      "delta": "0.2", "eps_ladder": "0.2,0.1,0.05", "chi_bound": "3.0", "workers": "4"},
    "jko-run": {"h": "1e-3", "steps": "50", "m": "4000", "variance0": "0.04", "L": "2.0", "origin": "-1.0",
                "n_cells": "4096", "var_tol": "1e-3", "newton_tol": "1e-10", "plot": "0"},
    "particles-run": {"L": "1.0", "n_cells": "256", "rho0": "uniform", "amplitude0": "0.2", "n": "100000",
                      "h": "0.01", "seeds": "0,1,2,3,4", "c1": "1.0", "c2": "1.0", "workers": "4",
                      "write_ensemble": "0"},
    "seminorm-check": {"seed": "0", "n_random": "50", "n_modes": "64", "max_mode": "8"},
}


# --- configuration ----------------------------------------------------------

def parse_config_text(text: str) -> dict:
    cfg = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected key = value, got {raw!r}")
        k, v = line.split("=", 1)
        cfg[k.strip()] = v.strip()
    return cfg


def resolve_config(command: str, path=None, overrides=(), seed=None) -> dict:
    cfg = dict(DEFAULTS[command])
    updates = {}
    if path is not None:
        try:
            updates.update(parse_config_text(Path(path).read_text(encoding="utf-8")))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        updates[k.strip()] = v.strip()
    if seed is not None:
        updates["seeds" if command == "particles-run" else "seed"] = str(seed)
    unknown = sorted(set(updates) - set(cfg))
    if unknown:
        raise ConfigError(f"unknown key(s) for {command}: {', '.join(unknown)}")
    cfg.update(updates)
    return cfg


def config_hash(command: str, cfg: dict) -> str:
    text = f"command={command}\n" + "".join(f"{k}={cfg[k]}\n" for k in sorted(cfg))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _get(cfg, key, conv, what):
    try:
        return conv(cfg[key])
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{key}={cfg[key]!r} is not a valid {what}") from exc


def _float(cfg, key):
    v = _get(cfg, key, float, "number")
    if not math.isfinite(v):
        raise ConfigError(f"{key} must be finite")
    return v


def _int(cfg, key):
    return _get(cfg, key, int, "integer")


def _floats(cfg, key):
    return _get(cfg, key, lambda s: [float(t) for t in s.split(",") if t.strip()], "comma-separated list")


def _ints(cfg, key):
    return _get(cfg, key, lambda s: [int(t) for t in s.split(",") if t.strip()], "comma-separated list")


def _flag(cfg, key):
    return cfg[key].lower() in ("1", "true", "yes", "on")


# --- density catalog ----------------------------------------------------------

CATALOG = ("uniform", "cosine", "linear-tilt")


def make_density(name: str, L: float, n_cells: int, amplitude: float) -> GridDensity:
    if name.endswith(".csv"):
        try:
            rho = read_grid_csv(name)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot load density {name}: {exc}") from exc
        if rho.n_cells != n_cells or not np.isclose(rho.L, L):
            raise ConfigError(f"density {name} has {rho.n_cells} cells on length {rho.L:g}; "
                              f"config asks for {n_cells} on {L:g}")
        return rho
    if name == "uniform":
        return GridDensity.uniform(L, n_cells)
    if name == "cosine":
        return GridDensity.from_function(lambda x: 1 + amplitude * np.cos(2 * np.pi * x / L), L, n_cells)
    if name == "linear-tilt":
        return GridDensity.from_function(lambda x: 1 + amplitude * (2 * x / L - 1), L, n_cells)
    raise ConfigError(f"unknown density {name!r}; choose from {', '.join(CATALOG)} or a .csv path")


def _pair(cfg):
    L, n = _float(cfg, "L"), _int(cfg, "n_cells")
    if not L > 0 or n < 2:
        raise ConfigError("need L > 0 and n_cells >= 2")
    rho0 = make_density(cfg["rho0"], L, n, _float(cfg, "amplitude0"))
    rho1 = make_density(cfg["rho1"], L, n, _float(cfg, "amplitude1"))
    delta = _float(cfg, "delta")
    if not 0 < delta <= DELTA_CEILING:
        raise ConfigError(f"delta={delta:g} must lie in (0, 1/3]")
    spec = ADeltaSpec(delta, L)
    for name, r in (("rho0", rho0), ("rho1", rho1)):
        if not in_A_delta(r, spec):
            dev = float(np.max(np.abs(r.values - 1 / L)))
            raise ConfigError(f"{name} deviates from uniform by {dev:g}, not below delta={delta:g}")
    return rho0, rho1, delta


def _ladder(cfg, dx):
    ladder = _floats(cfg, "eps_ladder")
    if not ladder:
        raise ConfigError("eps_ladder is empty")
    if any(e <= 0 for e in ladder):
        raise ConfigError("eps_ladder entries must be positive")
    if any(b >= a for a, b in zip(ladder, ladder[1:])):
        raise ConfigError(f"eps_ladder must be strictly decreasing, got {ladder}")
    low = [e for e in ladder if e < MIN_CELLS_PER_EPSILON * dx * (1 - 1e-12)]
    if low:
        raise ConfigError(f"eps {low} below {MIN_CELLS_PER_EPSILON:g}*dx = {MIN_CELLS_PER_EPSILON * dx:g}; "
                          "refine n_cells or drop these entries")
    return ladder


def _fail(msg):
    print(f"FAIL {msg}", file=sys.stderr)


def _maybe_plot(path, x, series, xlabel, ylabel, log=False):
    """Line chart; any failure is reported and ignored."""
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        fig, ax = plt.subplots(figsize=(5, 3.5))
        for label, y in series.items():
            ax.plot(x, y, marker="o", label=label)
        if log:
            ax.set_xscale("log")
            ax.set_yscale("log")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.legend()
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    except Exception as exc:  # noqa: BLE001 - plotting never changes the outcome
        print(f"warning: plot skipped ({exc})", file=sys.stderr)


# --- commands -----------------------------------------------------------------

def cmd_gamma_sweep(cfg, out: Path, header: str) -> int:
    rho0, rho1, delta = _pair(cfg)
    ladder = _ladder(cfg, rho0.dx)
    tol, threshold, max_iter = _float(cfg, "tol"), _float(cfg, "threshold"), _int(cfg, "max_iter")
    with ThreadPoolExecutor(max_workers=max(1, _int(cfg, "workers"))) as ex:
        points = list(ex.map(lambda e: gamma_point(rho0, rho1, KernelParams(e), tol=tol, delta=delta,
                                                   max_iter=max_iter), ladder))
    path = out / "gamma_sweep.csv"
    with path.open("w", encoding="utf-8", newline="") as fh:
        fh.write(f"# {header}\n")
        fh.write("epsilon,F_eps,target,abs_gap\n")
        for g in points:
            fh.write(",".join(_fmt(v) for v in (g.epsilon, g.F_eps, g.target, g.abs_gap)) + "\n")
    write_solution_csv(out / "bridge_solutions.csv", points, header)
    if _flag(cfg, "plot"):
        _maybe_plot(out / "gamma_sweep.png", ladder, {"|F_eps - target|": [g.abs_gap for g in points]},
                    "epsilon", "abs gap", log=True)
    gaps = [g.abs_gap for g in points]
    code = EXIT_PASS
    if gaps[-1] > threshold:
        _fail(f"final gap: abs_gap={gaps[-1]:.6g} at epsilon={ladder[-1]:g} exceeds threshold={threshold:g}")
        code = EXIT_CHECK
    tail = gaps[-3:]
    if any(b > a for a, b in zip(tail, tail[1:])):
        _fail(f"gap monotonicity: last gaps {[f'{g:.6g}' for g in tail]} are not nonincreasing")
        code = EXIT_CHECK
    return code


def cmd_bridge_solve(cfg, out: Path, header: str) -> int:
    from .grid import write_pair_csv
    from .wasserstein import potentials

    rho0, rho1, delta = _pair(cfg)
    eps = _ladder({"eps_ladder": cfg["epsilon"]}, rho0.dx)[0]
    tol, max_iter = _float(cfg, "tol"), _int(cfg, "max_iter")
    g = gamma_point(rho0, rho1, KernelParams(eps), tol=tol, delta=delta, max_iter=max_iter)
    write_solution_csv(out / "bridge_solution.csv", [g], header)
    potentials(rho0, rho1).write_csv(out / "phi.csv", out / "phi_star.csv")
    if _flag(cfg, "write_coupling"):
        write_pair_csv(out / "coupling.csv", solve_bridge(rho0, rho1, KernelParams(eps), tol=tol, max_iter=max_iter).q)
    if g.marginal_error > tol:
        _fail(f"marginal constraint: marginal_error={g.marginal_error:.3e} exceeds tol={tol:g}")
        return EXIT_CHECK
    return EXIT_PASS


def cmd_tildeq_report(cfg, out: Path, header: str) -> int:
    from .tildeq import build_tilde_q, exponent_bound_residual, marginal_convergence_report, write_report_csv
    from .wasserstein import potentials

    rho0, rho1, _ = _pair(cfg)
    ladder = _ladder(cfg, rho0.dx)
    c = _float(cfg, "chi_bound")
    pot = potentials(rho0, rho1)

    def one(eps):
        bundle = build_tilde_q(rho0, rho1, pot, KernelParams(eps), chi_bound=c)
        return marginal_convergence_report(bundle, rho0, rho1)

    with ThreadPoolExecutor(max_workers=max(1, _int(cfg, "workers"))) as ex:
        reports = list(ex.map(one, ladder))
    write_report_csv(out / "tildeq_report.csv", reports, header)
    code = EXIT_PASS
    for r in reports:
        if not (1 / c <= r.chi_min and r.chi_max <= c):
            _fail(f"chi bound: interior chi in [{r.chi_min:.4g}, {r.chi_max:.4g}] at epsilon={r.epsilon:g} "
                  f"leaves [1/{c:g}, {c:g}]")
            code = EXIT_CHECK
    for name in ("l1_pi0", "l1_pi1"):
        vals = [getattr(r, name) for r in reports]
        if any(b >= a for a, b in zip(vals, vals[1:])):
            _fail(f"{name} trend: {[f'{v:.4g}' for v in vals]} not decreasing along the ladder")
            code = EXIT_CHECK
    resid = exponent_bound_residual(pot)
    if resid > 1e-12:
        _fail(f"exponent bound: max of xy - phi - phi* + (y - T(x))^2/6 is {resid:.3e} > 0")
        code = EXIT_CHECK
    return code


def cmd_jko_run(cfg, out: Path, header: str) -> int:
    from .jko import JkoConfig, gaussian_density, jko_run, write_snapshots_csv

    h, steps, v0 = _float(cfg, "h"), _int(cfg, "steps"), _float(cfg, "variance0")
    if steps < 1 or not v0 > 0:
        raise ConfigError("need steps >= 1 and variance0 > 0")
    try:
        jcfg = JkoConfig(h, m=_int(cfg, "m"), newton_tol=_float(cfg, "newton_tol"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    rho0 = gaussian_density(0.0, v0, _float(cfg, "L"), _int(cfg, "n_cells"), _float(cfg, "origin"))
    run = jko_run(rho0, jcfg, steps)
    write_snapshots_csv(out / "jko_snapshots.csv", run.snapshots, header)
    if _flag(cfg, "plot"):
        snaps = run.snapshots
        _maybe_plot(out / "jko_variance.png", [s.t for s in snaps],
                    {"scheme": [s.variance for s in snaps], "heat": [v0 + 2 * s.t for s in snaps]}, "t", "variance")
    code = EXIT_PASS
    final = run.snapshots[-1]
    expected = v0 + 2 * final.t
    if abs(final.variance - expected) > _float(cfg, "var_tol"):
        _fail(f"variance law: variance={final.variance:.6g} vs {expected:.6g} at t={final.t:g}")
        code = EXIT_CHECK
    bad = [s.step for s in run.snapshots[1:] if s.dissipation_slack > 1e-12]
    if bad:
        _fail(f"energy dissipation violated at steps {bad[:10]}")
        code = EXIT_CHECK
    return code


def cmd_particles_run(cfg, out: Path, header: str) -> int:
    from .particles import hydrodynamic_check, simulate, write_ensemble_csv, write_report_csv

    L, n_cells, n, h = _float(cfg, "L"), _int(cfg, "n_cells"), _int(cfg, "n"), _float(cfg, "h")
    if n < 1 or not h > 0:
        raise ConfigError("need n >= 1 and h > 0")
    seeds = _ints(cfg, "seeds")
    if not seeds:
        raise ConfigError("seeds is empty")
    rho0 = make_density(cfg["rho0"], L, n_cells, _float(cfg, "amplitude0"))
    c1, c2 = _float(cfg, "c1"), _float(cfg, "c2")
    with ThreadPoolExecutor(max_workers=max(1, _int(cfg, "workers"))) as ex:
        reports = list(ex.map(lambda s: hydrodynamic_check(rho0, n, h, s, n_cells, c1, c2), seeds))
    write_report_csv(out / "particles_report.csv", reports, header)
    if _flag(cfg, "write_ensemble"):
        write_ensemble_csv(out / "ensemble.csv", simulate(rho0, n, h, seeds[0]), header)
    if reports[0].skipped:
        print(f"warning: statistical check skipped, n={n} is below one particle per cell ({n_cells} cells)",
              file=sys.stderr)
        return EXIT_PASS
    mean_l1 = float(np.mean([r.l1_error for r in reports]))
    if mean_l1 > reports[0].threshold:
        _fail(f"hydrodynamic limit: mean L1={mean_l1:.4g} over seeds {seeds} exceeds {reports[0].threshold:.4g}")
        return EXIT_CHECK
    return EXIT_PASS


def cmd_seminorm_check(cfg, out: Path, header: str) -> int:
    from .seminorm import run_checks, write_checks_csv

    rows = run_checks(seed=_int(cfg, "seed"), n_random=_int(cfg, "n_random"), n_modes=_int(cfg, "n_modes"),
                      max_mode=_int(cfg, "max_mode"))
    write_checks_csv(out / "seminorm_checks.csv", rows, header)
    bad = [r for r in rows if not r.passed]
    for r in bad:
        _fail(f"{r.case}: lhs={r.lhs:.12g} rhs={r.rhs:.12g}")
    return EXIT_CHECK if bad else EXIT_PASS


COMMANDS = {
    "gamma-sweep": cmd_gamma_sweep,
    "jko-run": cmd_jko_run,
    "particles-run": cmd_particles_run,
    "bridge-solve": cmd_bridge_solve,
    "seminorm-check": cmd_seminorm_check,
    "tildeq-report": cmd_tildeq_report,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ldpjko", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"ldpjko {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=Path, help="flat key = value file")
        sp.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        sp.add_argument("--seed", type=int, help="RNG seed (overrides the config)")
        sp.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args.command, args.config, args.overrides, args.seed)
        header = f"ldpjko {__version__} config_sha256={config_hash(args.command, cfg)}"
        args.out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, args.out, header)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
