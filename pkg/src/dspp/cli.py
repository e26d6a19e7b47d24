"""Command-line front end.

Usage::

    dspp {generate,solve,sweep,spectrum,condition,perturb} --config cfg.json --out DIR

Exit status is 0 when every cell converged and every certification passed,
1 when some cell failed and 2 for configuration errors.  The config schema
is documented in the README.
"""
import argparse
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from .errors import ConfigError, DsppError
from .model import load_bundle, save_bundle
from .preconditioners import Kind, ds_alpha, params_from_dict, phi, prepare
from .problems import PerturbationSpec, PoissonControlSpec, perturb, poisson_control, random_dspp, toy_111
from .reporting import BenchRow, write_json, write_rows
from .solvers import SolverConfig, gmres, stationary_gss
from .spectral import (preconditioned_condition_number, preconditioned_spectrum, rgss1_bound_check,
                       rgss2_interval_check, write_scatter_csv)

log = logging.getLogger("dspp")

RDF_ALPHA_GRID = np.round(np.arange(1, 100) * 0.01, 2)


# --------------------------------------------------------------------------
# config parsing
# --------------------------------------------------------------------------

def load_config(path):
    path = Path(path)
    try:
        cfg = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: top level must be an object")
    cfg["_base_dir"] = str(path.parent)
    return cfg


def build_problem(cfg):
    """``(blocks, b)`` for the ``problem`` section."""
    spec = dict(cfg.get("problem", {"type": "toy"}))
    kind = spec.pop("type", None)
    try:
        if kind == "toy":
            blocks, rhs = toy_111()
            return blocks, rhs.vector
        if kind == "poisson":
            blocks, rhs = poisson_control(PoissonControlSpec(**spec))
            return blocks, rhs.vector
        if kind == "random":
            rhs_seed = spec.pop("rhs_seed", None)
            blocks = random_dspp(**spec)
            rng = np.random.default_rng(spec.get("seed", 0) if rhs_seed is None else rhs_seed)
            return blocks, rng.standard_normal(blocks.order)
        if kind == "bundle":
            path = Path(spec.pop("path"))
            if not path.is_absolute():
                path = Path(cfg.get("_base_dir", ".")) / path
            blocks, b = load_bundle(path)
            return blocks, (np.ones(blocks.order) if b is None else b)
    except (TypeError, KeyError) as exc:
        raise ConfigError(f"problem section: {exc}") from None
    except ValueError as exc:
        if isinstance(exc, DsppError) and not isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"problem section: {exc}") from None
    raise ConfigError(f"unknown problem type {kind!r}; expected toy, poisson, random or bundle")


def solver_config(cfg):
    try:
        return SolverConfig(**cfg.get("solver", {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"solver section: {exc}") from None


def expand_grid(value, name):
    """A list of numbers, a scalar, or ``{"start", "stop", "step"}`` (inclusive)."""
    if isinstance(value, dict):
        try:
            start, stop, step = float(value["start"]), float(value["stop"]), float(value.get("step", 1.0))
        except KeyError as exc:
            raise ConfigError(f"grid {name}: missing {exc}") from None
        if step <= 0 or stop < start:
            raise ConfigError(f"grid {name}: need step > 0 and stop >= start")
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        values = [round(start + k * step, 12) for k in range(count)]
    elif isinstance(value, (int, float)):
        values = [float(value)]
    else:
        values = [float(v) for v in value]
    if not values:
        raise ConfigError(f"grid {name} is empty")
    return values


def _cell_params(cell, base_dir, defaults=None):
    d = dict(defaults or {})
    d.update({k: v for k, v in cell.items() if k not in ("method",)})
    return params_from_dict(d, base_dir=base_dir)


def parse_cells(cfg):
    """``[(kind, params, method, alpha_given)]`` from the ``cells`` section."""
    cells = cfg.get("cells", [{"kind": "GSS"}])
    if not cells:
        raise ConfigError("cells list is empty")
    out = []
    defaults = cfg.get("params", {})
    for cell in cells:
        if isinstance(cell, str):
            cell = {"kind": cell}
        method = cell.get("method", "gmres")
        if method not in ("gmres", "stationary"):
            raise ConfigError(f"unknown method {method!r}")
        kind, params = _cell_params(cell, cfg.get("_base_dir"), defaults)
        if method == "stationary" and kind is not Kind.GSS:
            raise ConfigError("the stationary iteration is defined for kind GSS only")
        out.append((kind, params, method, "alpha" in cell or "alpha" in defaults))
    return out


# --------------------------------------------------------------------------
# cells
# --------------------------------------------------------------------------

def _param_record(kind, params):
    if kind in (Kind.NONE, Kind.EXACT):
        return {}
    if kind in (Kind.DS, Kind.RDF):
        return {"alpha": params.alpha}
    return params.describe()


def run_cell(blocks, b, kind, params, scfg, method="gmres", with_phi=False):
    """Solve one cell; returns ``(BenchRow, SolveReport)``.  Failures become rows."""
    try:
        if method == "stationary":
            prep = prepare(blocks, params, Kind.GSS)
            _, rep = stationary_gss(blocks, params, b, tol=scfg.tol, max_iter=scfg.max_iter, prep=prep)
        else:
            prep = prepare(blocks, params, kind)
            _, rep = gmres(blocks, b, prep, scfg)
        status, iters, conv, res = rep.status, rep.iterations, rep.converged, rep.final_res
        t_setup, t_iter = rep.setup_seconds, rep.iterate_seconds
    except DsppError as exc:
        log.warning("cell %s failed: %s", kind, exc)
        rep, status, iters, conv, res, t_setup, t_iter = None, f"error: {exc}", 0, False, float("nan"), 0.0, 0.0
    value = phi(blocks, params) if with_phi and kind.shift_family else None
    row = BenchRow(kind.value, _param_record(kind, params), blocks.order, iters, conv, status,
                   t_setup, t_iter, res, value)
    return row, rep


def _best_rdf(blocks, b, params, scfg):
    best = None
    for a in RDF_ALPHA_GRID:
        row, rep = run_cell(blocks, b, Kind.RDF, params.replace(alpha=float(a)), scfg)
        key = (not row.converged, row.iterations, row.final_res)
        if best is None or key < best[0]:
            best = (key, row, rep)
    return best[1], best[2]


def solve_cells(blocks, b, cells, scfg):
    results = []
    for kind, params, method, alpha_given in cells:
        if kind is Kind.DS and not alpha_given:
            params = params.replace(alpha=ds_alpha(blocks))
        if kind is Kind.RDF and not alpha_given:
            row, rep = _best_rdf(blocks, b, params, scfg)
        else:
            row, rep = run_cell(blocks, b, kind, params, scfg, method)
        results.append((row, rep))
    return results


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def cmd_generate(cfg, out):
    blocks, b = build_problem(cfg)
    save_bundle(out, blocks, b)
    log.info("wrote bundle of order %d to %s", blocks.order, out)
    return 0


def cmd_solve(cfg, out):
    blocks, b = build_problem(cfg)
    scfg = solver_config(cfg)
    results = solve_cells(blocks, b, parse_cells(cfg), scfg)
    rows = [r for r, _ in results]
    write_rows(out / "results.csv", rows)
    for idx, (row, rep) in enumerate(results):
        if rep is not None:
            rep.write_history_csv(out / f"history_{idx:02d}_{row.kind}.csv")
    write_json(out / "summary.json", {
        "size": blocks.order,
        "cells": [{"row": row, "report": rep.to_dict() if rep is not None else None} for row, rep in results],
    })
    return 0 if all(r.converged for r in rows) else 1


def _grid_cells(cfg, section):
    """``[(kind, params)]`` over the Cartesian product of a grid section."""
    grid = cfg.get(section)
    if not isinstance(grid, dict):
        raise ConfigError(f"missing {section} section")
    kinds = [Kind.parse(k) for k in grid.get("kinds", ["GSS"])]
    if not kinds:
        raise ConfigError(f"{section}: kinds list is empty")
    base = dict(cfg.get("params", {}))
    base.update(grid.get("params", {}))
    omegas = expand_grid(grid.get("omega", base.get("omega", 30.0)), "omega")
    if any(w <= 0 for w in omegas):
        raise ConfigError(f"{section}: omega values must be positive")
    tied = bool(grid.get("alpha_equals_beta", False))
    alphas = expand_grid(grid["alpha"], "alpha") if "alpha" in grid else [None]
    betas = [None] if tied or "beta" not in grid else expand_grid(grid["beta"], "beta")
    taus = expand_grid(grid["tau"], "tau") if "tau" in grid else [None]
    points = []
    for kind in kinds:
        for w in omegas:
            for a in alphas:
                for bt in betas:
                    for t in taus:
                        d = dict(base, kind=kind.value, omega=w)
                        if a is not None:
                            d["alpha"] = a
                            if tied:
                                d["beta"] = a
                        if bt is not None:
                            d["beta"] = bt
                        if t is not None:
                            d["tau"] = t
                        points.append(params_from_dict(d, base_dir=cfg.get("_base_dir")))
    return points


def cmd_sweep(cfg, out):
    blocks, b = build_problem(cfg)
    scfg = solver_config(cfg)
    rows = [run_cell(blocks, b, kind, params, scfg, with_phi=True)[0] for kind, params in _grid_cells(cfg, "sweep")]
    write_rows(out / "sweep.csv", rows)
    best = {}
    for row in rows:
        if row.converged and (row.kind not in best or row.iterations < best[row.kind].iterations):
            best[row.kind] = row
    write_json(out / "sweep_best.json", {k: v for k, v in best.items()})
    return 0 if all(r.converged for r in rows) else 1


def _certify(blocks, kind, params):
    prep = prepare(blocks, params, kind)
    rep = preconditioned_spectrum(blocks, prep)
    checks = list(rep.bound_checks)
    if kind is Kind.RGSS_I:
        checks += rgss1_bound_check(blocks, params, rep)
    elif kind is Kind.RGSS_II:
        checks += rgss2_interval_check(blocks, params, rep, sharp=True)
        # the stated interval is informational only; it is not a valid enclosure for every tau
        info = rgss2_interval_check(blocks, params, rep, sharp=False)
        return rep, checks, info
    return rep, checks, []


def cmd_spectrum(cfg, out):
    blocks, _ = build_problem(cfg)
    cells = parse_cells(cfg)
    summary, ok = [], True
    for idx, (kind, params, _, _) in enumerate(cells):
        rep, checks, info = _certify(blocks, kind, params)
        write_scatter_csv(out / f"scatter_{idx:02d}_{kind.value}.csv", rep)
        passed = all(c.passed for c in checks)
        ok &= passed
        summary.append({
            "kind": kind.value, "parameters": _param_record(kind, params), "omega": rep.omega,
            "cluster_radius": rep.cluster_radius,
            "one_over_omega_multiplicity": rep.one_over_omega_multiplicity, "passed": passed,
            "checks": [{"name": c.name, "passed": c.passed, "value": c.value, "lower": c.lower,
                        "upper": c.upper, "margin": c.margin} for c in checks],
            "informational": [{"name": c.name, "passed": c.passed, "value": c.value, "lower": c.lower,
                               "upper": c.upper} for c in info],
        })
    write_json(out / "certification.json", {"size": blocks.order, "spectra": summary})
    return 0 if ok else 1


def cmd_condition(cfg, out):
    blocks, _ = build_problem(cfg)
    lines = ["omega,kind,kappa"]
    ok = True
    for kind, params in _grid_cells(cfg, "condition"):
        try:
            kappa = preconditioned_condition_number(blocks, prepare(blocks, params, kind))
        except DsppError as exc:
            log.warning("condition number failed for %s at omega=%g: %s", kind, params.omega, exc)
            kappa, ok = float("nan"), False
        lines.append(f"{params.omega!r},{kind.value},{kappa!r}")
    (out / "condition.csv").write_text("\n".join(lines) + "\n")
    return 0 if ok else 1


def cmd_perturb(cfg, out):
    blocks, b = build_problem(cfg)
    scfg = solver_config(cfg)
    sec = dict(cfg.get("perturbation", {}))
    levels = expand_grid(sec.pop("noise_percent", {"start": 5, "stop": 40, "step": 5}), "noise_percent")
    eps = float(sec.pop("epsilon", 1e-6))
    seed = int(sec.pop("seed", 0))
    kind, params = params_from_dict(dict(cfg.get("params", {}), **sec), base_dir=cfg.get("_base_dir"))
    u, rep = gmres(blocks, b, prepare(blocks, params, kind), scfg)
    ok = rep.converged
    lines = ["noise_percent,rel_error,iterations,converged"]
    nu = np.linalg.norm(u)
    for level in levels:
        try:
            pert = perturb(blocks, PerturbationSpec(level, eps, seed))
        except ValueError as exc:
            raise ConfigError(f"perturbation: {exc}") from None
        up, rp = gmres(pert, b, prepare(pert, params, kind), scfg)
        err = float(np.linalg.norm(up - u) / nu)
        ok &= rp.converged
        lines.append(f"{level!r},{err!r},{rp.iterations},{'true' if rp.converged else 'false'}")
    (out / "perturb.csv").write_text("\n".join(lines) + "\n")
    return 0 if ok else 1


COMMANDS = {
    "generate": cmd_generate,
    "solve": cmd_solve,
    "sweep": cmd_sweep,
    "spectrum": cmd_spectrum,
    "condition": cmd_condition,
    "perturb": cmd_perturb,
}


def build_parser():
    p = argparse.ArgumentParser(prog="dspp", description="Shift-splitting preconditioned double saddle point solves")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="experiment config (JSON)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out = Path(args.out)
    try:
        cfg = load_config(args.config)
        out.mkdir(parents=True, exist_ok=True)
        with warnings.catch_warnings():
            if not args.verbose:
                warnings.simplefilter("ignore", RuntimeWarning)
            return COMMANDS[args.command](cfg, out)
    except ConfigError as exc:
        print(f"dspp: config error: {exc}", file=sys.stderr)
        return 2
    except DsppError as exc:
        print(f"dspp: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
