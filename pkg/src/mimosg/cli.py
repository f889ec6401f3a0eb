"""Command-line interface: configuration ingestion, subcommand
orchestration and result persistence for external plotting.

dB/dBm values are accepted only here and converted once to the internal
linear-watt/km convention. Threshold grids are specified in dB for
convenience and converted to linear SINR.

Exit codes: 0 ok, 2 configuration error, 3 numerical error,
4 validation-gate failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys

import numpy as np

from . import __version__
from .analytic import (CoverageCurve, RateResult, coverage,
                       coverage_fullpc_async, coverage_infinite_m,
                       coverage_no_pc, ergodic_rate)
from .errors import ConfigError, DomainError, MimosgError, NumericalError
from .geometry import (serving_cdf, serving_given_bs_cdf,
                       serving_given_bs_sample, serving_given_user_pair_cdf,
                       serving_given_user_pair_sample, serving_sample)
from .montecarlo import McConfig, run_coverage_mc, run_rate_mc, validate
from .params import (SystemParams, attenuation_db_to_linear, dbm_to_watt,
                     default_gamma_shape, make_params)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_GATE = 4

# Human-unit defaults of the validation suite's reference setting.
DEFAULT_CONFIG = {
    "p_d_dbm": 45.0,
    "p_u_dbm": 23.0,
    "sigma2_dbm": -200.0,
    "omega_db": 130.0,
    "alpha": 4.0,
    "m": 64,
    "n_tot": 40,
    "n_p": 10,
    "z": 2.0,
    "eps": 0.0,
    "r_e_km": 0.5,
    "r0_km": 0.05,
    "mode": "async",
    "n_gamma": None,          # Gamma shape; None = mode default
    "thresholds_db": "-10:20:1",
    "trials": 10000,
    "seed": 1,
    "window_km": 4.0,
    "margin_km": 1.0,
    "users_per_trial_cap": 10000,
    "workers": 1,
    "output": None,
    "format": "csv",
}


def load_config(path: str | None, overrides: dict) -> dict:
    cfg = dict(DEFAULT_CONFIG)
    if path is not None:
        with open(path, "r", encoding="utf-8") as fh:
            loaded = json.load(fh)
        unknown = set(loaded) - set(DEFAULT_CONFIG)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(loaded)
    cfg.update({k: v for k, v in overrides.items() if v is not None})
    return cfg


def build_params(cfg: dict, strict_frame: bool = True) -> SystemParams:
    return make_params(
        p_d=dbm_to_watt(float(cfg["p_d_dbm"])),
        p_u=dbm_to_watt(float(cfg["p_u_dbm"])),
        sigma2=dbm_to_watt(float(cfg["sigma2_dbm"])),
        omega=attenuation_db_to_linear(float(cfg["omega_db"])),
        alpha=float(cfg["alpha"]), m=int(cfg["m"]),
        n_tot=int(cfg["n_tot"]), n_p=int(cfg["n_p"]), z=float(cfg["z"]),
        eps=float(cfg["eps"]), r_e=float(cfg["r_e_km"]),
        r0=float(cfg["r0_km"]), mode=str(cfg["mode"]),
        strict_frame=strict_frame)


def build_mc_config(cfg: dict, thresholds) -> McConfig:
    return McConfig(trials=int(cfg["trials"]), seed=int(cfg["seed"]),
                    window=float(cfg["window_km"]),
                    margin=float(cfg["margin_km"]),
                    thresholds=tuple(np.asarray(thresholds, dtype=float)),
                    users_per_trial_cap=int(cfg["users_per_trial_cap"]),
                    workers=int(cfg["workers"]))


def parse_threshold_grid(grid: str) -> np.ndarray:
    """'a:b:step' in dB -> inclusive linear grid."""
    try:
        a, b, step = (float(tok) for tok in str(grid).split(":"))
    except ValueError:
        raise ConfigError(
            f"threshold grid must be 'a:b:step' in dB, got {grid!r}") from None
    if step <= 0 or b < a:
        raise ConfigError(f"bad threshold grid {grid!r}")
    n = int(math.floor((b - a) / step + 0.5)) + 1
    db = a + step * np.arange(n)
    return 10.0 ** (db / 10.0)


def _params_snapshot(params: SystemParams) -> dict:
    return {
        "p_d_w": params.p_d, "p_u_w": params.p_u, "sigma2_w": params.sigma2,
        "omega_linear": params.omega, "alpha": params.alpha, "m": params.m,
        "n_tot": params.n_tot, "n_p": params.n_p, "n_u": params.n_u,
        "n_d": params.n_d, "eps": params.eps, "lambda_km2": params.lam,
        "r0_km": params.r0, "r_e_km": params.r_e, "mode": params.mode,
    }


def format_csv(header: list[str], rows) -> str:
    """RFC-4180-style CSV with 12 significant digits."""
    out = [",".join(header)]
    for row in rows:
        out.append(",".join(
            f"{v:.12g}" if isinstance(v, float) else str(v) for v in row))
    return "\r\n".join(out) + "\r\n"


def write_results(record: dict, path: str | None, fmt: str) -> None:
    """Persist one result record as CSV or JSON (stdout when path is None)."""
    if fmt == "csv":
        text = format_csv(record["header"], record["rows"])
    elif fmt == "json":
        doc = {k: v for k, v in record.items() if k not in ("header", "rows")}
        doc["columns"] = record["header"]
        doc["values"] = [list(r) for r in record["rows"]]
        text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    else:
        raise ConfigError(f"unknown output format {fmt!r}")
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _curve_record(curve: CoverageCurve, cfg: dict, seed=None) -> dict:
    rows = [(10.0 * math.log10(t), float(c))
            for t, c in zip(curve.thresholds, curve.coverage)]
    header = ["threshold_db", "coverage"]
    if curve.ci_half_width is not None:
        header.append("ci95_half_width")
        rows = [r + (float(h),) for r, h in zip(rows, curve.ci_half_width)]
    return {
        "header": header, "rows": rows, "kind": "coverage",
        "method": curve.method, "mode": curve.mode,
        "n_shape": curve.n_shape, "seed": seed,
        "version": f"mimosg-{__version__}",
        "params": _params_snapshot(curve.params),
        "effective_config": {k: cfg[k] for k in sorted(cfg)},
    }


def _rate_record(res: RateResult, label, value, params, cfg, seed=None) -> dict:
    rows = [(float(value), res.rate)
            + ((res.ci_half_width,) if res.ci_half_width is not None else ())]
    header = [label, "rate_bps_hz"] + (
        ["ci95_half_width"] if res.ci_half_width is not None else [])
    return {
        "header": header, "rows": rows, "kind": "rate", "method": res.method,
        "mode": params.mode, "seed": seed, "version": f"mimosg-{__version__}",
        "params": _params_snapshot(params),
        "effective_config": {k: cfg[k] for k in sorted(cfg)},
    }


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_coverage(cfg: dict) -> int:
    params = build_params(cfg)
    thr = parse_threshold_grid(cfg["thresholds_db"])
    n_shape = cfg["n_gamma"] or default_gamma_shape(params.mode)
    curve = coverage(thr, params, int(n_shape))
    write_results(_curve_record(curve, cfg), cfg["output"], cfg["format"])
    return EXIT_OK


def cmd_coverage_mc(cfg: dict) -> int:
    params = build_params(cfg)
    thr = parse_threshold_grid(cfg["thresholds_db"])
    curve = run_coverage_mc(params, build_mc_config(cfg, thr))
    write_results(_curve_record(curve, cfg, seed=cfg["seed"]),
                  cfg["output"], cfg["format"])
    return EXIT_OK


def cmd_rate(cfg: dict) -> int:
    params = build_params(cfg)
    n_shape = cfg["n_gamma"] or default_gamma_shape(params.mode)
    res = ergodic_rate(params, int(n_shape))
    write_results(_rate_record(res, "eps", params.eps, params, cfg),
                  cfg["output"], cfg["format"])
    return EXIT_OK


def cmd_rate_mc(cfg: dict) -> int:
    params = build_params(cfg)
    res = run_rate_mc(params, build_mc_config(cfg, ()))
    write_results(_rate_record(res, "eps", params.eps, params, cfg,
                               seed=cfg["seed"]), cfg["output"], cfg["format"])
    return EXIT_OK


def cmd_sweep(cfg: dict, param: str, values: list[float]) -> int:
    rows = []
    base = dict(cfg)
    for v in values:
        if param == "np":
            base["n_p"] = int(v)
        elif param == "eps":
            base["eps"] = float(v)
        else:
            raise ConfigError(f"sweep parameter must be np or eps, got {param!r}")
        params = build_params(base, strict_frame=False)
        n_shape = cfg["n_gamma"] or default_gamma_shape(params.mode)
        res = ergodic_rate(params, int(n_shape))
        rows.append((float(v), res.rate))
    params = build_params(cfg, strict_frame=False)
    record = {
        "header": [param, "rate_bps_hz"], "rows": rows, "kind": "sweep",
        "method": "analytic", "mode": params.mode, "seed": None,
        "version": f"mimosg-{__version__}",
        "params": _params_snapshot(params),
        "effective_config": {k: cfg[k] for k in sorted(cfg)},
    }
    write_results(record, cfg["output"], cfg["format"])
    return EXIT_OK


def cmd_validate(cfg: dict, gate: float) -> int:
    params = build_params(cfg)
    thr = parse_threshold_grid(cfg["thresholds_db"])
    n_shape = cfg["n_gamma"] or default_gamma_shape(params.mode)
    report = validate(params, build_mc_config(cfg, thr), gate, int(n_shape))
    sys.stderr.write(report.format_table() + "\n")
    record = dict(report.to_json_dict())
    record["header"] = ["threshold_db", "analytic", "monte_carlo",
                        "mc_ci95_half_width", "abs_deviation"]
    record["rows"] = [
        (10.0 * math.log10(t), float(a), float(m), float(h), float(d))
        for t, a, m, h, d in zip(report.thresholds, report.analytic,
                                 report.mc, report.mc_half_width,
                                 report.abs_dev)]
    record["params"] = _params_snapshot(params)
    record["version"] = f"mimosg-{__version__}"
    record["effective_config"] = {k: cfg[k] for k in sorted(cfg)}
    write_results(record, cfg["output"], cfg["format"])
    return EXIT_OK if report.passed else EXIT_GATE


def cmd_special(cfg: dict, case: str) -> int:
    params = build_params(cfg)
    thr = parse_threshold_grid(cfg["thresholds_db"])
    n_shape = cfg["n_gamma"] or default_gamma_shape(params.mode)
    if case == "full-pc":
        curve = coverage_fullpc_async(thr, params, int(n_shape))
    elif case == "infinite-m":
        curve = coverage_infinite_m(thr, params, int(n_shape))
    elif case == "no-pc":
        curve = coverage_no_pc(thr, params, int(n_shape))
    else:
        raise ConfigError(f"unknown special case {case!r}")
    write_results(_curve_record(curve, cfg), cfg["output"], cfg["format"])
    return EXIT_OK


def cmd_pdf_check(cfg: dict, samples: int) -> int:
    """Kolmogorov-Smirnov suite for the three conditional distance laws."""
    params = build_params(cfg)
    rng = np.random.default_rng(int(cfg["seed"]))
    lam, r0 = params.lam, params.r0

    def ks(sample, cdf) -> float:
        sample = np.sort(sample)
        grid = cdf(sample)
        n = sample.size
        up = np.max(np.arange(1, n + 1) / n - grid)
        dn = np.max(grid - np.arange(0, n) / n)
        return float(max(up, dn))

    rows = []
    s1 = serving_sample(lam, r0, rng, size=samples)
    rows.append(("serving", ks(s1, lambda r: serving_cdf(r, lam, r0))))
    r2 = 0.8
    s2 = serving_given_bs_sample(r2, lam, r0, rng, size=samples)
    rows.append(("serving_given_station",
                 ks(s2, lambda r: serving_given_bs_cdf(r, r2, lam, r0))))
    r_uu, x_tag = 0.2, 1.0
    s3 = serving_given_user_pair_sample(r_uu, x_tag, lam, r0, rng, size=samples)
    rows.append(("serving_given_user_pair",
                 ks(s3, lambda s: serving_given_user_pair_cdf(
                     s, r_uu, x_tag, lam, r0))))
    record = {
        "header": ["law", "ks_distance"], "rows": rows, "kind": "pdf-check",
        "method": "inverse-cdf-sampler", "mode": params.mode,
        "seed": cfg["seed"], "version": f"mimosg-{__version__}",
        "params": _params_snapshot(params),
        "effective_config": {k: cfg[k] for k in sorted(cfg)},
    }
    write_results(record, cfg["output"], cfg["format"])
    worst = max(v for _, v in rows)
    sys.stderr.write(f"worst KS distance: {worst:.5f} (gate 0.02)\n")
    return EXIT_OK if worst < 0.02 else EXIT_GATE


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--verbose", "-v", action="store_true",
                     help="progress and diagnostics on standard error")
    sub.add_argument("--config", help="JSON config file; flags override it")
    sub.add_argument("--mode", choices=["sync", "async", "synchronous",
                                        "asynchronous"])
    sub.add_argument("--m", type=int, help="antennas per station")
    sub.add_argument("--eps", type=float, help="power-control parameter")
    sub.add_argument("--np", dest="n_p", type=int, help="pilot length / users per cell")
    sub.add_argument("--n-gamma", dest="n_gamma", type=int,
                     help="Gamma shape of the coverage expansion")
    sub.add_argument("--thresholds-db", dest="thresholds_db",
                     help="a:b:step grid in dB")
    sub.add_argument("--trials", type=int)
    sub.add_argument("--seed", type=int)
    sub.add_argument("--window-km", dest="window_km", type=float)
    sub.add_argument("--margin-km", dest="margin_km", type=float)
    sub.add_argument("--workers", type=int)
    sub.add_argument("--output", "-o", help="output path (default stdout)")
    sub.add_argument("--format", choices=["csv", "json"])


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mimosg",
        description="Coverage and ergodic rate of (a)synchronous massive "
                    "MIMO networks: analytic quadrature and Monte Carlo.")
    parser.add_argument("--version", action="version",
                        version=f"mimosg {__version__}")
    parser.add_argument("--verbose", "-v", action="store_true",
                        help="progress and diagnostics on standard error")
    subs = parser.add_subparsers(dest="command", required=True)

    for name, hlp in [
            ("coverage", "analytic coverage curve"),
            ("coverage-mc", "Monte Carlo coverage curve"),
            ("rate", "analytic ergodic rate"),
            ("rate-mc", "Monte Carlo ergodic rate"),
            ("validate", "compare analytic vs Monte Carlo coverage"),
            ("special", "special-case analytic curves"),
            ("sweep", "rate sweep over a parameter"),
            ("pdf-check", "KS suite for the distance-law samplers")]:
        sub = subs.add_parser(name, help=hlp)
        _add_common(sub)
        if name == "validate":
            sub.add_argument("--gate", type=float, required=True,
                             help="max |analytic - MC| allowed")
        if name == "special":
            sub.add_argument("--case", required=True,
                             choices=["full-pc", "infinite-m", "no-pc"])
        if name == "sweep":
            sub.add_argument("--param", required=True, choices=["np", "eps"])
            sub.add_argument("--values", required=True,
                             help="comma-separated sweep values")
        if name == "pdf-check":
            sub.add_argument("--samples", type=int, default=100_000)
    return parser


_OVERRIDE_KEYS = ("mode", "m", "eps", "n_p", "n_gamma", "thresholds_db",
                  "trials", "seed", "window_km", "margin_km", "workers",
                  "output", "format")


def _merge_negative_values(argv):
    """Let '--thresholds-db -10:20:1' parse even though the value starts
    with a dash (argparse would read it as an option otherwise)."""
    if argv is None:
        argv = sys.argv[1:]
    out = []
    skip = False
    for i, tok in enumerate(argv):
        if skip:
            skip = False
            continue
        if (tok in ("--thresholds-db", "--values") and i + 1 < len(argv)
                and argv[i + 1].startswith("-")):
            out.append(f"{tok}={argv[i + 1]}")
            skip = True
        else:
            out.append(tok)
    return out


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(_merge_negative_values(argv))
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s")
    try:
        overrides = {k: getattr(args, k, None) for k in _OVERRIDE_KEYS}
        cfg = load_config(args.config, overrides)
        if args.command == "coverage":
            return cmd_coverage(cfg)
        if args.command == "coverage-mc":
            return cmd_coverage_mc(cfg)
        if args.command == "rate":
            return cmd_rate(cfg)
        if args.command == "rate-mc":
            return cmd_rate_mc(cfg)
        if args.command == "validate":
            return cmd_validate(cfg, args.gate)
        if args.command == "special":
            return cmd_special(cfg, args.case)
        if args.command == "sweep":
            values = [float(v) for v in args.values.split(",") if v.strip()]
            if not values:
                raise ConfigError("sweep needs at least one value")
            return cmd_sweep(cfg, args.param, values)
        if args.command == "pdf-check":
            return cmd_pdf_check(cfg, args.samples)
        raise ConfigError(f"unknown command {args.command!r}")
    except (ConfigError, DomainError, OSError, json.JSONDecodeError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_CONFIG
    except NumericalError as exc:
        sys.stderr.write(f"numerical error: {exc}\n")
        return EXIT_NUMERICAL
    except MimosgError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
