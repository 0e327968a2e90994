"""Command-line interface: fit, correct, mc, and ns-demo.

Runs are config-file driven (JSON) with flag overrides; flags mirror
config keys one-to-one.  Every output file embeds the package version,
the seed, and the resolved config, and contains no timestamps, so
re-running the same config reproduces outputs byte-for-byte.

Exit codes: 0 success, 2 input error, 3 numerical failure.  A matching
solver that stops above tolerance is not a failure: the best iterate is
reported with ``converged=false`` in the metadata.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .families import DomainError, get_family
from .fe import FitError, fit_fe
from .indirect import inflated_standard_errors, solve_indirect
from .jackknife import half_panel, leave_one_out
from .montecarlo import (
    CALIBRATED_DYNAMIC,
    CALIBRATED_STATIC,
    DESIGN_KINDS,
    VARYING_T,
    Design,
    calibrate,
    calibrated_design,
    result_rows,
    run_design,
)
from .neymanscott import VarianceDesign, run_variance_experiment
from .panel import PanelDataError, PanelSchema, load_panel
from .shocks import draw_shocks

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERICAL = 3

OUTDIR_ENV = "IFEPANEL_OUTDIR"

CONFIG_KEYS = {
    "data": str, "schema": str, "family": str, "method": str, "H": int,
    "seed": int, "R": int, "design": str, "out": str, "format": str,
    "threads": int, "n": int, "T": int, "theta0": float, "tol_match": float,
}


def _sig6(x: float) -> str:
    return format(float(x), ".6g")


def _two_dec(x: float) -> str:
    return format(float(x), ".2f")


def _resolve_out(path: str) -> str:
    outdir = os.environ.get(OUTDIR_ENV)
    if outdir:
        return os.path.join(outdir, os.path.basename(path))
    return path


def _load_config(args: argparse.Namespace) -> dict:
    """Merge config-file values with CLI flags; flags win."""
    config: dict = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise PanelDataError(f"config {args.config}: invalid JSON ({exc})") from exc
        unknown = set(raw) - set(CONFIG_KEYS)
        if unknown:
            raise PanelDataError(f"config {args.config}: unknown keys {sorted(unknown)}")
        for key, value in raw.items():
            config[key] = CONFIG_KEYS[key](value)
    for key in CONFIG_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            config[key] = flag
    return config


def _write_csv(path: str, header: list[str], rows: list[list]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(str(cell) for cell in row) + "\n")


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _metadata(config: dict, **extra) -> dict:
    meta = {"version": __version__, "config": dict(sorted(config.items()))}
    meta.update(extra)
    return meta


def _load_inputs(config: dict):
    if "data" not in config or "schema" not in config:
        raise PanelDataError("command requires --data and --schema")
    schema = PanelSchema.from_json(config["schema"])
    if "family" in config:
        schema = PanelSchema(get_family(config["family"]), schema.lag_column, schema.alpha_bound)
    panel = load_panel(config["data"], schema)
    return panel, schema


def _coefficient_table(fits: list[tuple[str, np.ndarray, np.ndarray]], names) -> str:
    """Presentation table, methods as rows and coefficients as columns."""
    width = max(12, *(len(n) + 2 for n in names))
    label_w = max(len(label) for label, _, _ in fits) + 2
    lines = [" " * label_w + "".join(f"{n:>{width}}" for n in names)]
    for label, est, se in fits:
        lines.append(f"{label:<{label_w}}" + "".join(f"{_two_dec(v):>{width}}" for v in est))
        lines.append(" " * label_w + "".join(f"{'(' + _two_dec(v) + ')':>{width}}" for v in se))
    return "\n".join(lines)


def cmd_fit(config: dict) -> int:
    panel, schema = _load_inputs(config)
    try:
        fit = fit_fe(panel, schema.family)
    except FitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    out = _resolve_out(config.get("out", "fit"))
    rows = [[name, _sig6(est), _sig6(se)]
            for name, est, se in zip(fit.names, fit.theta, fit.se)]
    _write_csv(out + ".csv", ["name", "estimate", "se"], rows)
    _write_json(out + ".json", _metadata(
        config,
        n=panel.n, T=panel.T, p=panel.p,
        family=schema.family.kind,
        dropped=len(fit.dropped),
        loglik=fit.loglik,
        converged=fit.trace.converged,
        iterations=fit.trace.iterations,
    ))
    print(_coefficient_table([("FE", fit.theta, fit.se)], fit.names))
    print(f"n={panel.n} T={panel.T} dropped={len(fit.dropped)} loglik={_sig6(fit.loglik)}")
    return EXIT_OK


def cmd_correct(config: dict) -> int:
    panel, schema = _load_inputs(config)
    method = config.get("method")
    if method not in ("ife", "hbc", "bc_hn"):
        raise PanelDataError(f"--method must be one of ife, hbc, bc_hn (got {method!r})")
    seed = int(config.get("seed", 0))
    n_paths = int(config.get("H", 10))
    try:
        if method == "ife":
            base = fit_fe(panel, schema.family)
            shocks = draw_shocks(seed, n_paths, panel.n, panel.T)
            fit = solve_indirect(base, shocks, panel, schema.family)
            corrected, corrected_se = fit.theta, fit.se
            extra = {
                "H": n_paths, "seed": seed,
                "residual": fit.residual, "converged": fit.converged,
            }
            label = f"IFE-{n_paths}"
        else:
            runner = half_panel if method == "hbc" else leave_one_out
            try:
                jk = runner(panel, schema.family)
            except ValueError as exc:
                raise PanelDataError(str(exc)) from exc
            base = jk.subfits[0]
            corrected, corrected_se = jk.theta, jk.se
            extra = {"subfits": len(jk.subfits)}
            label = method.upper().replace("_", "-")
    except FitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL

    out = _resolve_out(config.get("out", "correct"))
    rows = []
    for name, est, se in zip(base.names, base.theta, base.se):
        rows.append(["FE", name, _sig6(est), _sig6(se)])
    for name, est, se in zip(base.names, corrected, corrected_se):
        rows.append([label, name, _sig6(est), _sig6(se)])
    _write_csv(out + ".csv", ["method", "name", "estimate", "se"], rows)
    _write_json(out + ".json", _metadata(
        config,
        n=panel.n, T=panel.T, method=method,
        family=schema.family.kind,
        dropped=len(base.dropped),
        **extra,
    ))
    print(_coefficient_table(
        [("FE", base.theta, base.se), (label, corrected, corrected_se)], base.names,
    ))
    return EXIT_OK


def _mc_design(config: dict) -> Design:
    kind = config.get("design")
    if kind not in DESIGN_KINDS:
        raise PanelDataError(f"--design must be one of {DESIGN_KINDS} (got {kind!r})")
    methods_raw = config.get("method", "fe,ife")
    methods = tuple(m.strip() for m in methods_raw.split(",") if m.strip())
    R = int(config.get("R", 200))
    n_paths = int(config.get("H", 10))
    seed = int(config.get("seed", 0))
    if kind == VARYING_T:
        if "n" not in config or "T" not in config:
            raise PanelDataError("varying_T design requires --n and --T")
        theta0 = float(config.get("theta0", 1.0))
        return Design(kind=VARYING_T, family=get_family("probit"),
                      n=int(config["n"]), T=int(config["T"]),
                      theta0=np.array([theta0]), R=R, n_paths=n_paths,
                      seed=seed, methods=methods)
    panel, schema = _load_inputs(config)
    truth = calibrate(panel, schema.family)
    design = calibrated_design(truth, R=R, n_paths=n_paths, seed=seed,
                               methods=methods, family=schema.family)
    if kind != design.kind:
        raise PanelDataError(
            f"--design {kind} does not match the data (lag column implies {design.kind})"
        )
    return design


def cmd_mc(config: dict) -> int:
    design = _mc_design(config)
    workers = int(config.get("threads", 1))
    result = run_design(design, workers=max(1, workers))
    out = _resolve_out(config.get("out", "mc"))
    rows = result_rows(result)
    _write_csv(
        out + ".csv",
        ["method", "coefficient", "bias", "stddev", "coverage", "R_effective"],
        [[r["method"], r["coefficient"], _sig6(r["bias"]), _sig6(r["stddev"]),
          _sig6(r["coverage"]), r["R_effective"]] for r in rows],
    )
    _write_json(out + ".json", _metadata(
        config,
        design={
            "kind": design.kind, "family": design.family.kind,
            "n": design.n, "T": design.T, "R": design.R, "H": design.n_paths,
            "seed": design.seed, "methods": list(design.methods),
            "theta0": [float(v) for v in design.theta0],
        },
        unreliable=result.unreliable,
        failures=len(result.failures),
        rows=rows,
    ))
    print(f"{'method':<10}{'coef':<12}{'bias':>10}{'std':>10}{'cvge':>8}{'R_eff':>8}")
    for r in rows:
        print(f"{r['method']:<10}{r['coefficient']:<12}{_two_dec(r['bias']):>10}"
              f"{_two_dec(r['stddev']):>10}{_two_dec(r['coverage']):>8}{r['R_effective']:>8}")
    print(f"wall time: {result.wall_time:.1f}s", file=sys.stderr)
    if result.unreliable:
        print("error: result flagged unreliable (>20% replications failed)", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_ns_demo(config: dict) -> int:
    design = VarianceDesign(
        theta0=float(config.get("theta0", 2.0)),
        n=int(config.get("n", 2500)),
        T=int(config.get("T", 5)),
        R=int(config.get("R", 1000)),
        n_paths=int(config.get("H", 1)),
        seed=int(config.get("seed", 0)),
    )
    experiment = run_variance_experiment(design)
    out = _resolve_out(config.get("out", "ns_demo"))
    _write_csv(
        out + ".csv",
        ["estimator", "bin_left", "bin_right", "density"],
        [[label, _sig6(lo), _sig6(hi), _sig6(d)]
         for label, lo, hi, d in experiment.histogram_rows()],
    )
    _write_json(out + ".json", _metadata(
        config,
        theta0=design.theta0, n=design.n, T=design.T, R=design.R, H=design.n_paths,
        seed=design.seed,
        fe_mean=experiment.fe_mean, fe_std=experiment.fe_std,
        ife_mean=experiment.ife_mean, ife_std=experiment.ife_std,
    ))
    print(f"FE   mean {_two_dec(experiment.fe_mean)}  std {_two_dec(experiment.fe_std)}")
    print(f"IFE  mean {_two_dec(experiment.ife_mean)}  std {_two_dec(experiment.ife_std)}")
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ifepanel",
        description="Fixed-effect estimation with simulation-based bias correction",
    )
    parser.add_argument("--version", action="version", version=f"ifepanel {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    specs = {
        "fit": "fixed-effect fit on a CSV panel",
        "correct": "bias-corrected fit (ife, hbc, or bc_hn)",
        "mc": "Monte Carlo experiment",
        "ns-demo": "normal-variance benchmark experiment",
    }
    for name, help_text in specs.items():
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", help="JSON config file; flags override its keys")
        cmd.add_argument("--data", help="panel CSV path")
        cmd.add_argument("--schema", help="schema JSON path")
        cmd.add_argument("--family", help="family kind override")
        cmd.add_argument("--method", help="correction method(s): ife, hbc, bc_hn")
        cmd.add_argument("--H", type=int, help="simulation path count")
        cmd.add_argument("--seed", type=int, help="random seed")
        cmd.add_argument("--R", type=int, help="replication count")
        cmd.add_argument("--design", help=f"design kind: {', '.join(DESIGN_KINDS)}")
        cmd.add_argument("--out", help="output base path (writes .csv and .json)")
        cmd.add_argument("--format", choices=("csv", "json"), help="kept for config mirroring")
        cmd.add_argument("--threads", type=int, help="worker cap for replications")
        cmd.add_argument("--n", type=int, help="cross-section size (mc/ns-demo)")
        cmd.add_argument("--T", type=int, help="period count (mc/ns-demo)")
        cmd.add_argument("--theta0", type=float, help="true coefficient (mc/ns-demo)")
        cmd.add_argument("--tol_match", type=float, help="matching tolerance")
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "fit": cmd_fit,
        "correct": cmd_correct,
        "mc": cmd_mc,
        "ns-demo": cmd_ns_demo,
    }
    try:
        config = _load_config(args)
        return handlers[args.command](config)
    except (PanelDataError, DomainError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except FitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
