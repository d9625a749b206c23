"""Command-line front end: ``azema {simulate,marginal,verify,converge,plot}``."""

import argparse
import json
import sys

from . import driver
from .io import _g, read_paths, write_paths_csv, write_paths_json
from .paths import JumpLaw
from .renewal import RenewalParams
from .rng import SeedSpec
from .sampler import AzemaParams
from .structure import GeneralParams, parse_structure_fn, warn_if_violated

DEFAULTS = {
    "beta": None,
    "f": None,
    "renewal": None,
    "jump_law": "bernoulli",
    "n": 100,
    "x0": 0.0,
    "tmax": 1.0,
    "t": None,
    "paths": 1,
    "seed": 42,
    "workers": None,
    "out": None,
    "format": "csv",
    "ode_tol": 1e-8,
    "only": None,
    "negative_controls": False,
    "n_list": "100,1000,10000",
    "input": None,
    "width": 800,
    "height": 500,
    "samples_per_segment": 50,
    "envelope": None,
}


class ConfigError(ValueError):
    pass


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("process")
    g.add_argument("--beta", type=float, help="linear structure coefficient (closed-form engine)")
    g.add_argument("--f", help="structure function: zero, cubic, linear:b, asymmetric:a,b, poly:c0,c1,...")
    g.add_argument("--renewal", choices=["first", "second"], help="renewal martingale variant")
    g.add_argument("--jump-law", dest="jump_law", help="bernoulli, three-atom or discrete:v:p;...")
    g.add_argument("--n", type=int, help="scaling parameter n")
    g.add_argument("--x0", type=float, help="starting point")
    g.add_argument("--tmax", type=float, help="horizon")
    g.add_argument("--ode-tol", dest="ode_tol", type=float, help="ODE tolerance (general f)")
    r = common.add_argument_group("run")
    r.add_argument("--paths", type=int, help="number of paths M")
    r.add_argument("--seed", type=int, help="master seed")
    r.add_argument("--workers", type=int, help="worker threads (default: $AZEMA_WORKERS or CPU count)")
    r.add_argument("--out", help="output file (default: stdout)")
    r.add_argument("--format", choices=["csv", "json"], help="data output format")
    r.add_argument("--config", help="JSON config file; command-line flags override it")

    parser = argparse.ArgumentParser(prog="azema", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="simulate full paths")
    m = sub.add_parser("marginal", parents=[common], help="values at a fixed time across paths")
    m.add_argument("--t", type=float, help="evaluation time (default: horizon)")
    v = sub.add_parser("verify", parents=[common], help="run the statistical test battery")
    v.add_argument("--only", action="append", help="run only this test (repeatable)")
    v.add_argument("--negative-controls", dest="negative_controls", action="store_true",
                   default=None, help="also run designed-to-fail controls (they must fail)")
    c = sub.add_parser("converge", parents=[common], help="convergence trend table")
    c.add_argument("--n-list", dest="n_list", help="comma-separated increasing n values")
    c.add_argument("--t", type=float, help="evaluation time (default: horizon)")
    p = sub.add_parser("plot", parents=[common], help="render paths as SVG")
    p.add_argument("--input", help="path file (JSON, or CSV for closed-form paths)")
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    p.add_argument("--samples-per-segment", dest="samples_per_segment", type=int)
    p.add_argument("--envelope", dest="envelope", action="store_true", default=None,
                   help="overlay +-sqrt(t)")
    p.add_argument("--no-envelope", dest="envelope", action="store_false")
    return parser


def resolve_config(args):
    """Defaults, then the JSON config file, then explicit flags."""
    cfg = dict(DEFAULTS)
    if args.config:
        with open(args.config) as fh:
            file_cfg = json.load(fh)
        unknown = set(file_cfg) - set(DEFAULTS) - {"command", "battery"}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(file_cfg)
    for k, v in vars(args).items():
        if k in DEFAULTS and v is not None:
            cfg[k] = v
    cfg["command"] = args.command
    if cfg["workers"] is None:
        cfg["workers"] = driver.default_workers()
    if cfg["workers"] < 1:
        raise ConfigError("--workers must be >= 1")
    if cfg["paths"] < 1:
        raise ConfigError("--paths must be >= 1")
    chosen = [k for k in ("beta", "f", "renewal") if cfg[k] is not None]
    if len(chosen) > 1:
        raise ConfigError(f"choose one of --beta, --f, --renewal (got {', '.join(chosen)})")
    return cfg


def make_params(cfg):
    seed = SeedSpec(cfg["seed"], 0)
    if cfg["renewal"] is not None:
        return RenewalParams(cfg["renewal"], cfg["tmax"], seed)
    law = JumpLaw.parse(cfg["jump_law"])
    if cfg["f"] is not None:
        f = parse_structure_fn(cfg["f"])
        warn_if_violated(f)
        return GeneralParams(f, cfg["n"], cfg["x0"], cfg["tmax"], law, cfg["ode_tol"], seed)
    beta = -1.0 if cfg["beta"] is None else cfg["beta"]
    return AzemaParams(beta, cfg["n"], cfg["x0"], cfg["tmax"], seed, law)


def embedded_config(cfg, params=None):
    """The effective config stored in outputs; excludes settings that cannot change the data."""
    keep = {k: v for k, v in cfg.items() if k not in ("workers", "out", "config", "input")}
    if params is not None:
        keep["params"] = params.as_dict()
    return keep


def _open_out(cfg):
    if cfg["out"] in (None, "-"):
        return sys.stdout, False
    return open(cfg["out"], "w"), True


def run_simulate(cfg):
    params = make_params(cfg)
    paths = driver.simulate_many(params, cfg["paths"], cfg["workers"])
    fh, close = _open_out(cfg)
    try:
        if cfg["format"] == "json":
            write_paths_json(paths, fh, embedded_config(cfg, params))
        else:
            write_paths_csv(paths, fh, embedded_config(cfg, params))
    finally:
        if close:
            fh.close()
    return 0


def run_marginal(cfg):
    params = make_params(cfg)
    t = cfg["t"] if cfg["t"] is not None else cfg["tmax"]
    z = driver.marginal(params, cfg["paths"], cfg["workers"], t)
    fh, close = _open_out(cfg)
    try:
        meta = embedded_config(cfg, params)
        if cfg["format"] == "json":
            json.dump({"config": meta, "t": t, "values": z.tolist()}, fh, sort_keys=True)
            fh.write("\n")
        else:
            fh.write(f"# azema marginal v1; config={json.dumps(meta, sort_keys=True)}\n")
            fh.write("path,t,z\n")
            for k, v in enumerate(z):
                fh.write(f"{k},{_g(t)},{_g(v)}\n")
    finally:
        if close:
            fh.close()
    return 0


def run_verify(cfg, battery=None):
    from .stats import battery_passed, run_battery, summary_table

    only = None
    if cfg["only"]:
        only = [x for item in cfg["only"] for x in str(item).split(",") if x]
    reports = run_battery(only, bool(cfg["negative_controls"]), battery, cfg["seed"], cfg["workers"])
    fh, close = _open_out(cfg)
    try:
        for r in reports:
            fh.write(r.to_json() + "\n")
    finally:
        if close:
            fh.close()
    print(summary_table(reports), file=sys.stderr)
    return 0 if battery_passed(reports) else 1


def run_converge(cfg):
    from .stats import convergence_report

    params = make_params(cfg)
    if not isinstance(params, AzemaParams):
        raise ConfigError("converge supports the linear family (--beta) only")
    n_list = [int(x) for x in str(cfg["n_list"]).split(",")]
    t = cfg["t"] if cfg["t"] is not None else cfg["tmax"]
    rep = convergence_report(params.beta, n_list, t, cfg["paths"], SeedSpec(cfg["seed"]),
                             cfg["workers"])
    fh, close = _open_out(cfg)
    try:
        if cfg["format"] == "json":
            fh.write(rep.to_report(SeedSpec(cfg["seed"])).to_json() + "\n")
        else:
            fh.write(rep.table() + "\n")
    finally:
        if close:
            fh.close()
    print(f"{'PASS' if rep.passed else 'FAIL'} convergence trends", file=sys.stderr)
    return 0 if rep.passed else 1


def run_plot(cfg):
    from .plot import render_svg

    if cfg["input"]:
        paths = read_paths(cfg["input"])
    else:
        paths = driver.simulate_many(make_params(cfg), cfg["paths"], cfg["workers"])
    if not paths:
        raise ConfigError("empty path file")
    svg = render_svg(paths, cfg["width"], cfg["height"], cfg["samples_per_segment"], cfg["envelope"])
    fh, close = _open_out(cfg)
    try:
        fh.write(svg)
    finally:
        if close:
            fh.close()
    return 0


COMMANDS = {
    "simulate": run_simulate,
    "marginal": run_marginal,
    "verify": run_verify,
    "converge": run_converge,
    "plot": run_plot,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        if args.command == "verify":
            battery = None
            if args.config:
                with open(args.config) as fh:
                    battery = json.load(fh).get("battery")
            return run_verify(cfg, battery)
        return COMMANDS[args.command](cfg)
    except (ValueError, OSError) as exc:
        print(f"azema: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
