"""Command-line drivers: simulate, zmatrix, optimize, pattern.

Exit codes: 0 success, 2 configuration/input error, 3 numerical error.
"""
from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from .farfield import write_pattern_csv
from .geometry import GeometryError
from .io import (
    ConfigError,
    RunReport,
    load_config,
    read_loads_csv,
    write_currents_csv,
    write_loads_csv,
    write_trace_csv,
)
from .mna import NumericalError, write_zmatrix_csv
from .optimize import OptParams, achievable_rate, channel_from_scratch
from .pipeline import Model

log = logging.getLogger("peecris")


def _model(args, require_link=True):
    cfg = load_config(args.scenario, require_link)
    return cfg, Model.build(cfg.scenario)


def _report(command, cfg, model, **kw) -> RunReport:
    return RunReport(
        command=command,
        scenario_digest=cfg.digest,
        frequency_hz=cfg.scenario.frequency,
        num_branches=model.mesh.num_segments,
        num_nodes=model.mesh.num_nodes,
        timings_s=model.timings,
        **kw,
    )


def _loads(args, model):
    if not getattr(args, "loads", None):
        return None
    return read_loads_csv(args.loads, expected=model.num_ris)


def cmd_simulate(args) -> int:
    cfg, model = _model(args)
    loads = _loads(args, model)
    sol = model.simulate(loads, cfg.zg, cfg.zr)
    write_currents_csv(sol.I, args.out)
    h = model.link_gain(sol, cfg.zr)
    rep = _report("simulate", cfg, model, objective_after=abs(h) ** 2,
                  extra={"h_re": h.real, "h_im": h.imag, "max_residual": float(sol.residual.max())})
    if args.report:
        rep.write(args.report)
    log.info("wrote %d currents to %s", len(sol.I), args.out)
    return 0


def cmd_zmatrix(args) -> int:
    cfg, model = _model(args, require_link=False)
    net = model.network
    write_zmatrix_csv(net, args.out)
    if args.report:
        _report("zmatrix", cfg, model).write(args.report)
    log.info("wrote %dx%d Zsys to %s", net.num_ports, net.num_ports, args.out)
    return 0


def cmd_optimize(args) -> int:
    cfg, model = _model(args)
    params = OptParams(constraint=args.constraint, tol=args.tol, max_sweeps=args.max_sweeps,
                       Zg=cfg.zg, Zr=cfg.zr, noise_power_ratio=args.noise_power_ratio,
                       init=args.init, seed=args.seed)
    res = model.optimize(params)
    write_loads_csv(res.loads, args.out)
    if args.trace:
        write_trace_csv(res.trace, args.trace)
    extra = {"h_re": res.h.real, "h_im": res.h.imag, "init": res.init,
             "max_rank1_drift": res.max_drift, "constraint": args.constraint}
    if args.baseline:
        rng = np.random.default_rng(args.seed)
        best = max(
            abs(channel_from_scratch(model.network, 1j * rng.uniform(-500, 500, model.num_ris),
                                     cfg.zg, cfg.zr)) ** 2
            for _ in range(args.baseline)
        )
        extra["random_baseline_best"] = best
        extra["random_baseline_count"] = args.baseline
    rep = _report("optimize", cfg, model, objective_before=res.objective_before,
                  objective_after=res.objective, rate_after=res.rate, sweeps=res.sweeps,
                  extra=extra)
    rep.extra["rate_before"] = achievable_rate(np.sqrt(res.objective_before), args.noise_power_ratio)
    if args.report:
        rep.write(args.report)
    log.info("objective %.6e -> %.6e in %d sweeps", res.objective_before, res.objective, res.sweeps)
    return 0


def cmd_pattern(args) -> int:
    cfg, model = _model(args)
    sol = model.simulate(_loads(args, model), cfg.zg, cfg.zr)
    cut = model.pattern(sol, args.plane, args.fixed_angle, args.points)
    write_pattern_csv(cut, args.out)
    log.info("%s-cut peak at %.2f deg", args.plane, cut.peak)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="peecris", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help):
        sp = sub.add_parser(name, help=help)
        sp.add_argument("scenario", help="scenario file, or 'reference' for the bundled one")
        sp.set_defaults(func=fn)
        return sp

    sp = add("simulate", cmd_simulate, "solve the circuit and write segment currents")
    sp.add_argument("--loads", help="RIS loads CSV (default: all short)")
    sp.add_argument("--out", default="currents.csv")
    sp.add_argument("--report")

    sp = add("zmatrix", cmd_zmatrix, "write the system impedance matrix")
    sp.add_argument("--out", default="zmatrix.csv")
    sp.add_argument("--report")

    sp = add("optimize", cmd_optimize, "optimize RIS loads one at a time")
    sp.add_argument("--constraint", choices=["reactive", "passive"], default="reactive")
    sp.add_argument("--tol", type=float, default=1e-6)
    sp.add_argument("--max-sweeps", type=int, default=20)
    sp.add_argument("--init", choices=["short", "open", "random"], default="short")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--baseline", type=int, default=0,
                    help="number of random reactive configurations to compare against")
    sp.add_argument("--noise-power-ratio", type=float, default=1.0)
    sp.add_argument("--out", default="loads.csv")
    sp.add_argument("--trace")
    sp.add_argument("--report")

    sp = add("pattern", cmd_pattern, "write a normalized RIS pattern cut")
    sp.add_argument("--loads")
    sp.add_argument("--plane", choices=["phi", "theta"], default="phi")
    sp.add_argument("--fixed-angle", type=float)
    sp.add_argument("--points", type=int, default=361)
    sp.add_argument("--out", default="pattern.csv")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, GeometryError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
