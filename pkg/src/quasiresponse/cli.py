"""Command line entry point: ``quasiresponse <subcommand> --config run.ini --out DIR``.

Exit status: 0 success, 1 solver failure (report still written), 2 bad
configuration or usage, 3 a structural hypothesis (H2, H2', BCD, BCN) fails.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

from .config import ConfigError, RunConfig, load_config
from .explorer import ResidualUnderflow, fit_residual_order, prepare, scan_epsilon
from .fixedpoint import DomainError, PicardFailure, picard_solve
from .io import save_series, write_field_csv, write_json, write_table_csv
from .lindstedt import evaluate, nonresonance_order
from .operators import (
    APRIME,
    A,
    DomainSpec,
    gamma_lower_bound,
    operator_for,
    resonance_locations,
)
from .spectral import ConvergenceError, HypothesisError, SpectralError, SpectralField
from .zeroth_order import multistart_c0, select_c0, solve_c0

log = logging.getLogger("quasiresponse")

COMMANDS = ("solve", "lindstedt", "scan", "resonances", "omega-diag", "gamma")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="quasiresponse", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="INI run configuration")
    p.add_argument("--out", default="run", help="output directory (created if missing)")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--strict", dest="strict", action="store_true", default=True,
                      help="refuse eps outside the configured domain (default)")
    mode.add_argument("--explore", dest="strict", action="store_false",
                      help="warn and proceed outside the configured domain")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _prepare(cfg: RunConfig, seed: int):
    return prepare(cfg.model, cfg.M, rho=cfg.params.rho, c0_starts=cfg.c0_starts, seed=seed,
                   c0_rule=cfg.c0_rule, alpha0=cfg.alpha0_u0, tol=cfg.fixedpoint.tol,
                   params=cfg.params, enforce_nonresonance=cfg.enforce_nonresonance)


def _operator(cfg: RunConfig, seed: int):
    m = cfg.model
    if m.variant in (A, APRIME):
        if cfg.c0_starts > 1:
            sol = select_c0(multistart_c0(m, n_starts=cfg.c0_starts, seed=seed), cfg.c0_rule)
        else:
            sol = solve_c0(m)
        return operator_for(m, sol.c0)
    return operator_for(m)


def cmd_solve(cfg: RunConfig, out: Path, args) -> int:
    if cfg.eps is None:
        raise ConfigError("[fixedpoint] eps is required for solve")
    prep = _prepare(cfg, args.seed)
    save_series(prep.series, out / "series.json")
    start = prep.series if cfg.M_start is None else prep.series.truncated(cfg.M_start)
    U_init = evaluate(start, cfg.eps)
    payload = {"command": "solve", "eps": cfg.eps, "M": cfg.M, "zeroth": prep.zeroth_report,
               "nonresonance": prep.series.nonresonance.as_record()}
    if cfg.domain is not None:
        payload["domain"] = {"kind": cfg.domain.kind, "sigma": cfg.domain.sigma, "B": cfg.domain.B,
                             "delta": cfg.domain.delta}
    try:
        U, rep = picard_solve(cfg.model, prep.op, cfg.eps, U_init, cfg.fixedpoint)
    except PicardFailure as exc:
        payload["picard"] = exc.report.as_record() if exc.report else {}
        payload["error"] = str(exc)
        write_json(out / "report.json", payload)
        print(f"solve: FAILED ({exc.kind}): {exc}")
        return 1
    payload["picard"] = rep.as_record()
    write_json(out / "report.json", payload)
    write_field_csv(U, out / "solution.csv")
    print(f"solve: converged in {rep.iterations} iterations, residual {rep.residual:.3e}")
    return 0


def cmd_lindstedt(cfg: RunConfig, out: Path, args) -> int:
    prep = _prepare(cfg, args.seed)
    save_series(prep.series, out / "series.json")
    payload = {"command": "lindstedt", "M": cfg.M, "zeroth": prep.zeroth_report,
               "order_checks": list(prep.series.order_checks),
               "nonresonance": prep.series.nonresonance.as_record()}
    fits = []
    for M in range(1, cfg.M + 1):
        try:
            f = fit_residual_order(prep.series.truncated(M), cfg.model, prep.op, cfg.ladder, cfg.params)
            fits.append({"M": M, **f.as_record()})
        except ResidualUnderflow as exc:
            fits.append({"M": M, "error": str(exc), "usable": list(exc.usable)})
    payload["residual_fits"] = fits
    write_json(out / "report.json", payload)
    for f in fits:
        if "slope" in f:
            print(f"M={f['M']}: slope {f['slope']:.4f} (R^2 {f['r2']:.6f})")
        else:
            print(f"M={f['M']}: {f['error']}")
    return 0


def cmd_scan(cfg: RunConfig, out: Path, args) -> int:
    if cfg.scan is None:
        raise ConfigError("[scan] re_min/re_max/im_min/im_max are required for scan")
    prep = _prepare(cfg, args.seed)
    parabolic = cfg.domain if cfg.domain and cfg.domain.kind == "parabolic" else None
    sector = cfg.domain if cfg.domain and cfg.domain.kind == "sector" else None
    recs = scan_epsilon(prep, cfg.scan, cfg.fixedpoint, parabolic=parabolic, sector=sector,
                        threads=args.threads, k_range=cfg.k_range, M_start=cfg.M_start)
    cols = ["re", "im", "in_parabolic", "in_sector", "out_of_domain", "perturbed", "attempted",
            "converged", "iterations", "residual", "contraction_ratio", "nearest_resonance", "failure"]
    write_table_csv(out / "scan.csv", recs, cols)
    n_ok = sum(r["converged"] for r in recs)
    n_try = sum(r["attempted"] for r in recs)
    write_json(out / "report.json", {"command": "scan", "points": len(recs), "attempted": n_try,
                                     "converged": n_ok, "strict": cfg.fixedpoint.strict})
    print(f"scan: {n_ok}/{n_try} attempted points converged ({len(recs)} total)")
    return 0


def cmd_resonances(cfg: RunConfig, out: Path, args) -> int:
    op = _operator(cfg, args.seed)
    res, skipped = resonance_locations(cfg.model, op, cfg.k_range, cfg.n_max)
    d = cfg.model.trunc.d
    kcols = ["k"] if d == 1 else [f"k{i + 1}" for i in range(d)]
    rows = []
    for r in res:
        row = {"re": r.eps.real, "im": r.eps.imag, "n": r.n}
        row.update(dict(zip(kcols, r.k)))
        rows.append(row)
    write_table_csv(out / "resonances.csv", rows, ["re", "im"] + kcols + ["n"])
    write_json(out / "report.json", {"command": "resonances", "count": len(res),
                                     "skipped": [{"k": list(k), "n": n} for k, n in skipped]})
    for r in res[:10]:
        print(f"eps* = {r.eps.real:+.6f}{r.eps.imag:+.6f}i  k={r.k} n={r.n}")
    if len(res) > 10:
        print(f"... {len(res) - 10} more in resonances.csv")
    return 0


def cmd_omega_diag(cfg: RunConfig, out: Path, args) -> int:
    rep = nonresonance_order(cfg.model.omega, cfg.params.rho, cfg.K_scan)
    write_json(out / "report.json", {"command": "omega-diag", **rep.as_record()})
    M = "unbounded" if rep.unbounded else str(int(rep.M))
    print(f"sup = {rep.sup:.10f}  M = {M}  (worst k = {rep.k})")
    return 0


def cmd_gamma(cfg: RunConfig, out: Path, args) -> int:
    if not cfg.gamma_eps:
        raise ConfigError("[gamma] eps (comma separated) is required for gamma")
    op = _operator(cfg, args.seed)
    rows = []
    for e in cfg.gamma_eps:
        val, tau, n = gamma_lower_bound(cfg.model, op, e, cfg.tau_samples)
        xi2 = e.real ** 2
        rows.append({"re": e.real, "im": e.imag, "inf_gamma": val, "tau": tau, "n": n,
                     "ratio_xi2": val / xi2 if xi2 > 0 else math.inf})
    write_table_csv(out / "gamma.csv", rows, ["re", "im", "inf_gamma", "tau", "n", "ratio_xi2"])
    write_json(out / "report.json", {"command": "gamma", "rows": rows})
    for r in rows:
        print(f"eps = {r['re']:+.5f}{r['im']:+.5f}i  inf Gamma = {r['inf_gamma']:.6e} at tau={r['tau']:.4f}, n={r['n']}")
    return 0


HANDLERS = {"solve": cmd_solve, "lindstedt": cmd_lindstedt, "scan": cmd_scan,
            "resonances": cmd_resonances, "omega-diag": cmd_omega_diag, "gamma": cmd_gamma}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 2
    try:
        cfg = load_config(args.config, strict=args.strict)
    except HypothesisError as exc:
        print(f"hypothesis violated: {exc}", file=sys.stderr)
        return 3
    except SpectralError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.ini").write_text(cfg.text)
    try:
        return HANDLERS[args.command](cfg, out, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except HypothesisError as exc:
        print(f"hypothesis violated: {exc}", file=sys.stderr)
        return 3
    except DomainError as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return 1
    except (ConvergenceError, SpectralError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
