"""``lz`` command-line front end.

Each run reads one JSON config, applies flag overrides and echoes the
effective config into ``<out>.config.json``. Exit status: 0 success,
1 verify residual above ``--tol``, 2 usage or input error, 3 propagation
did not converge, 4 fit did not converge.

Config layout::

    {"params": {"b1": 1, "b2": 1.732, "g12": ..., "g13": ..., "g14": ..., "beta": 1},
     "solver": {"rel_tol": 1e-10, "t_window": "AUTO", ...},
     "grid": {"beta_min": 1e-3, "beta_max": 1e3, "n_points": 61},
     "output_path": "sweep.csv"}

``params`` may also be a preset name (``ssh``, ``second``, ``wide``,
``degenerate``).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import analysis, model, ssh
from .analysis import FitModel, SweepGrid, Target
from .errors import InsufficientDataError, IntegrationError, LZError, ParameterError
from .propagator import SolverSettings

EXIT_OK = 0
EXIT_RESIDUAL = 1
EXIT_USAGE = 2
EXIT_NONCONVERGED = 3
EXIT_FIT = 4

PRESETS = {
    "ssh": model.SSH_PARAMS,
    "second": model.SECOND_PARAMS,
    "wide": model.WIDE_PARAMS,
    "degenerate": model.DEGENERATE_PARAMS,
}

SSH_HEADER = ["beta", "re_s11", "im_s11", "re_s15", "im_s15", "p_stay", "p_transfer", "s33_five_state"]
SERIES_HEADER = ["beta", "s11_series", "s33_series", "abs_s32_series",
                 "s11_numeric", "s33_numeric", "abs_s32_numeric"]
SSH_GRID = SweepGrid(1e-2, 1e1, 31)


class UsageError(Exception):
    pass


# --- config handling ----------------------------------------------------------


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise UsageError(f"config {path} must hold a JSON object")
    return cfg


def _params(cfg: dict, args) -> model.FiveStateParams:
    block = cfg.get("params", "ssh")
    if args.preset:
        block = args.preset
    if isinstance(block, str):
        if block not in PRESETS:
            raise UsageError(f"unknown preset {block!r}; choose from {sorted(PRESETS)}")
        values = model.dump_params(PRESETS[block])
    else:
        values = dict(block)
    for key in ("b1", "b2", "g12", "g13", "g14", "beta"):
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    return model.load_params(values)


def _solver(cfg: dict, args) -> SolverSettings:
    values = dict(cfg.get("solver", {}))
    if args.t_window is not None:
        values["t_window"] = None if args.t_window.upper() == "AUTO" else float(args.t_window)
    for flag, key in (("max_doublings", "max_doublings"), ("rel_tol", "rel_tol"),
                      ("abs_tol", "abs_tol"), ("window_tol", "window_tol")):
        v = getattr(args, flag)
        if v is not None:
            values[key] = v
    return SolverSettings.from_dict(values)


def _grid(cfg: dict, args, default: SweepGrid) -> SweepGrid:
    values = {"beta_min": default.beta_min, "beta_max": default.beta_max,
              "n_points": default.n_points}
    values.update(cfg.get("grid", {}))
    for key in ("beta_min", "beta_max", "n_points"):
        v = getattr(args, key)
        if v is not None:
            values[key] = v
    return SweepGrid(**values)


def _grid_dict(g: SweepGrid) -> dict:
    return {"beta_min": g.beta_min, "beta_max": g.beta_max, "n_points": int(g.n_points),
            "spacing": g.spacing}


def _out_path(cfg: dict, args):
    out = args.out or cfg.get("output_path")
    return Path(out) if out else None


def sidecar_path(out) -> Path:
    return Path(str(out) + ".config.json")


def _write_sidecar(out, effective: dict) -> None:
    if out is not None:
        sidecar_path(out).write_text(json.dumps(effective, indent=2) + "\n")


def _pool_map(fn, items, threads):
    if threads > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _fmt(x) -> str:
    return format(float(x), ".17g")


# --- commands -------------------------------------------------------------------


def cmd_sweep(args) -> int:
    cfg = _load_config(args.config)
    p = _params(cfg, args)
    settings = _solver(cfg, args)
    grid = _grid(cfg, args, SweepGrid())
    out = _out_path(cfg, args)
    if out is None:
        raise UsageError("sweep needs --out or output_path in the config")
    rows = analysis.run_sweep(p, grid, settings, workers=args.threads)
    try:
        analysis.write_sweep_csv(rows, out)
    except OSError as exc:
        raise UsageError(f"cannot write {out}: {exc}") from exc
    _write_sidecar(out, {"command": "sweep", "params": model.dump_params(p),
                         "solver": settings.to_dict(), "grid": _grid_dict(grid),
                         "output_path": str(out)})
    bad = [r for r in rows if not r.converged]
    resid = max((r.constraint_max_residual for r in rows if r.converged), default=math.nan)
    print(f"rows: {len(rows)}  max constraint residual: {resid:.3e}  non-converged: {len(bad)}")
    return EXIT_NONCONVERGED if bad else EXIT_OK


def _data_params(data: Path):
    side = sidecar_path(data)
    if not side.exists():
        return None
    try:
        return model.load_params(json.loads(side.read_text())["params"])
    except (KeyError, TypeError, json.JSONDecodeError, LZError):
        return None


def cmd_fit(args) -> int:
    cfg = _load_config(args.config)
    if not args.model:
        raise UsageError("fit needs --model")
    if not args.data:
        raise UsageError("fit needs --data")
    fm = FitModel.from_label(args.model)
    target = Target(args.target) if args.target else fm.default_target
    data = Path(args.data)
    try:
        rows = analysis.read_sweep_csv(data)
    except (OSError, ValueError) as exc:
        raise UsageError(str(exc)) from exc
    # parameters come from the sweep's own sidecar, else from the config
    params = _data_params(data)
    if params is None and ("params" in cfg or args.preset):
        params = _params(cfg, args)
    result = analysis.fit(fm, rows, target, params=params)
    report = json.dumps(result.to_dict(), indent=2)
    out = _out_path(cfg, args)
    if out is not None:
        Path(out).write_text(report + "\n")
        _write_sidecar(out, {"command": "fit", "model": fm.label, "data": str(data),
                             "target": target.value, "output_path": str(out)})
    else:
        print(report)
    print(f"{fm.label} on {target.value}: "
          + ", ".join(f"{x:.3g}" for x in result.params)
          + f"  (residual_max {result.residual_max:.3g})")
    return EXIT_OK if result.converged else EXIT_FIT


def cmd_verify(args) -> int:
    cfg = _load_config(args.config)
    p = _params(cfg, args)
    settings = _solver(cfg, args)
    sol = analysis.solve_point(p, settings)
    res = sol.result
    report = {
        "beta": p.beta,
        "converged": res.converged,
        "t_window_used": res.t_window_used,
        "window_change": None if math.isnan(res.window_change) else res.window_change,
        "unitarity_residual": res.unitarity_residual,
        "tol": args.tol,
        "residuals": sol.report.to_dict(),
        "max_residual": sol.report.max_residual,
    }
    text = json.dumps(report, indent=2)
    out = _out_path(cfg, args)
    if out is not None:
        Path(out).write_text(text + "\n")
        _write_sidecar(out, {"command": "verify", "params": model.dump_params(p),
                             "solver": settings.to_dict(), "tol": args.tol,
                             "output_path": str(out)})
    print(text)
    if not res.converged:
        return EXIT_NONCONVERGED
    return EXIT_OK if sol.report.max_residual < args.tol else EXIT_RESIDUAL


def _parse_betas(text: str):
    try:
        betas = [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise UsageError(f"bad --betas list {text!r}") from exc
    if not betas or any(not b > 0 for b in betas):
        raise UsageError("--betas needs positive values")
    return betas


def _series_row(job):
    p, settings = job
    ex = model.compute_exponents(p)
    b = p.beta
    try:
        sol = analysis.solve_point(p, settings)
        f = sol.form
        numeric = (float(np.real(f.s11)), float(f.s33), abs(f.s32))
        ok = sol.result.converged
    except LZError:
        numeric, ok = (math.nan,) * 3, False
    series = (analysis.series_s11(ex, b), analysis.series_s33(ex, b), analysis.series_s32(ex, b))
    return [b, *series, *numeric], ok


def cmd_series(args) -> int:
    cfg = _load_config(args.config)
    p = _params(cfg, args)
    settings = _solver(cfg, args)
    out = _out_path(cfg, args)
    if out is None:
        raise UsageError("series needs --out or output_path in the config")
    betas = _parse_betas(args.betas) if args.betas else list(cfg.get("betas", [50, 100, 200, 400]))
    results = _pool_map(_series_row, [(p.with_beta(b), settings) for b in betas], args.threads)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SERIES_HEADER)
        for values, _ in results:
            w.writerow([_fmt(v) for v in values])
    _write_sidecar(out, {"command": "series", "params": model.dump_params(p),
                         "solver": settings.to_dict(), "betas": betas, "output_path": str(out)})
    bad = sum(not ok for _, ok in results)
    print(f"rows: {len(results)}  non-converged: {bad}")
    return EXIT_NONCONVERGED if bad else EXIT_OK


def _ssh_row(job):
    beta, settings = job
    chain = ssh.SSHChainSpec(3, beta)
    s11, s15 = ssh.edge_transfer(chain, settings)
    try:
        sol = analysis.solve_point(ssh.to_five_state(chain), settings)
        s33, ok = sol.form.s33, sol.result.converged
    except LZError:
        s33, ok = math.nan, False
    return [beta, s11.real, s11.imag, s15.real, s15.imag, abs(s11) ** 2, abs(s15) ** 2, s33], ok


def cmd_ssh(args) -> int:
    cfg = _load_config(args.config)
    sites = args.sites if args.sites is not None else cfg.get("ssh", {}).get("sites", 5)
    if sites != 5:
        raise UsageError(f"--sites {sites} is not supported; only the 5-site chain (N=3) maps "
                         "onto the five-state model")
    settings = _solver(cfg, args)
    grid = _grid(cfg, args, SSH_GRID)
    out = _out_path(cfg, args)
    if out is None:
        raise UsageError("ssh needs --out or output_path in the config")
    results = _pool_map(_ssh_row, [(float(b), settings) for b in grid.points()], args.threads)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SSH_HEADER)
        for values, _ in results:
            w.writerow([_fmt(v) for v in values])
    _write_sidecar(out, {"command": "ssh", "ssh": {"sites": sites}, "solver": settings.to_dict(),
                         "grid": _grid_dict(grid), "output_path": str(out)})
    bad = sum(not ok for _, ok in results)
    print(f"rows: {len(results)}  non-converged: {bad}")
    return EXIT_NONCONVERGED if bad else EXIT_OK


# --- parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("global")
    g.add_argument("--config", help="JSON run config")
    g.add_argument("--out", help="output file (sidecar written to <out>.config.json)")
    g.add_argument("--tol", type=float, default=1e-3, help="verify threshold (default 1e-3)")
    g.add_argument("--threads", type=int, default=1, help="worker processes across grid points")

    m = common.add_argument_group("model overrides")
    m.add_argument("--preset", choices=sorted(PRESETS))
    for key in ("b1", "b2", "g12", "g13", "g14", "beta"):
        m.add_argument(f"--{key}", type=float)

    s = common.add_argument_group("solver overrides")
    s.add_argument("--t-window", help="half-window T or AUTO")
    s.add_argument("--max-doublings", type=int)
    s.add_argument("--rel-tol", type=float)
    s.add_argument("--abs-tol", type=float)
    s.add_argument("--window-tol", type=float)

    gr = common.add_argument_group("grid overrides")
    gr.add_argument("--beta-min", type=float)
    gr.add_argument("--beta-max", type=float)
    gr.add_argument("--n-points", type=int)

    parser = argparse.ArgumentParser(prog="lz", description="Five-state bipartite LZ experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("sweep", parents=[common], help="scan beta and write the sweep CSV")
    pf = sub.add_parser("fit", parents=[common], help="fit an analytic form to sweep data")
    pf.add_argument("--model", choices=[fm.label for fm in FitModel])
    pf.add_argument("--data", help="sweep CSV")
    pf.add_argument("--target", choices=[t.value for t in Target])
    sub.add_parser("verify", parents=[common], help="constraint report at one beta")
    ps = sub.add_parser("series", parents=[common], help="diabatic series against numerics")
    ps.add_argument("--betas", help="comma-separated beta values")
    pssh = sub.add_parser("ssh", parents=[common], help="edge-transfer sweep of the SSH chain")
    pssh.add_argument("--sites", type=int)
    return parser


COMMANDS = {"sweep": cmd_sweep, "fit": cmd_fit, "verify": cmd_verify,
            "series": cmd_series, "ssh": cmd_ssh}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    try:
        return COMMANDS[args.command](args)
    except IntegrationError as exc:
        print(f"lz {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except (UsageError, ParameterError, InsufficientDataError, LZError, ValueError, OSError) as exc:
        print(f"lz {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
