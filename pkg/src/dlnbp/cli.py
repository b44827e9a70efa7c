"""Command line interface: ``dlnbp <command> [options]``.

Commands
--------
sweep      error ||psi_alpha(inf) - W_p|| over an alpha grid, with slope fits
shift      the same for the 1 x 2 systems [1, 1 - eps] z = 1
flow       gradient flow trace
gd         gradient descent trace
bp         basis pursuit solution and solution face
wp         selected minimizer W_p (and q*, m*, g* when --alpha is given)
constants  every explicit constant for one configuration

Exit status is 0 on success, 2 on invalid input and 3 on numerical failure.
"""

import argparse
import json
import logging
import sys

import numpy as np

from .bounds import gd_step_bound
from .bp import minimizer_set, optimal_face, solve_bp, wp_select
from .dynamics import flow_run, gd_run
from .errors import ConvergenceError, IntegrationError, InvalidInputError
from .experiments import (DEFAULT_DPS, SweepConfig, alpha_grid, report_constants,
                          shift_csv, shift_example_sweep, sweep_alpha, sweep_csv)
from .instances import parse_instance
from .potentials import Hyperparams
from .simplex import InfeasibleError, UnboundedError

log = logging.getLogger("dlnbp")

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 2, 3

# Defaults live here rather than in argparse so that a --config file can fill
# any option the command line leaves unset.
DEFAULTS = {
    "instance": "a2",
    "p": "4",
    "alpha": 0.1,
    "alpha_start": 1e-1,
    "alpha_stop": 10 ** -2.5,
    "alpha_count": 7,
    "fit_skip": 1,
    "t": 10.0,
    "eps": 1e-3,
    "eps_list": "0.5,0.1,0.02",
    "rtol": 1e-10,
    "atol": None,
    "samples": 50,
    "eta": None,
    "steps": None,
    "C1": 1.0,
    "C2": 1.0,
    "dps": DEFAULT_DPS,
    "cross_validate": False,
    "out": None,
    "format": None,
    "jobs": 1,
    "seed": 0,
}


def _floats(text):
    if isinstance(text, (int, float)):
        return [float(text)]
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError as exc:
        raise InvalidInputError(f"expected a comma separated list of numbers, got {text!r}") from exc


def build_parser():
    parser = argparse.ArgumentParser(prog="dlnbp", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, *extra):
        sp.add_argument("--config", help="JSON file with option values (flags take precedence)")
        sp.add_argument("--instance", help="a1 | a2 | a3 | shift:EPS | file:PATH | random:MxN")
        sp.add_argument("--seed", type=int, help="seed for random:MxN instances")
        sp.add_argument("--out", help="output path (default: stdout)")
        sp.add_argument("--format", choices=["csv", "json"])
        for name in extra:
            OPTIONS[name](sp)
        return sp

    common(sub.add_parser("sweep", help="alpha sweep with slope fit"),
           "p", "grid", "fit_skip", "dps", "jobs", "cross_validate", "rtol")
    shift = common(sub.add_parser("shift", help="sweep over the shifted 1 x 2 family"),
                   "p", "grid", "fit_skip", "dps", "jobs")
    shift.add_argument("--eps-list", dest="eps_list", help="comma separated eps values")
    common(sub.add_parser("flow", help="gradient flow trace"),
           "p", "alpha", "t", "rtol", "atol", "samples")
    gd = common(sub.add_parser("gd", help="gradient descent trace"), "p", "alpha", "t", "eps", "samples")
    gd.add_argument("--eta", type=float, help="step length (default: the guaranteed bound)")
    gd.add_argument("--steps", type=int, help="number of steps (default: floor(t / eta))")
    common(sub.add_parser("bp", help="basis pursuit solution and face"))
    common(sub.add_parser("wp", help="selected minimizer"), "p", "alpha", "dps")
    const = common(sub.add_parser("constants", help="explicit constants"), "p", "alpha", "t", "eps")
    const.add_argument("--C1", type=float, dest="C1", help="assumed rate constant C1")
    const.add_argument("--C2", type=float, dest="C2", help="assumed rate exponent C2")
    return parser


OPTIONS = {
    "p": lambda sp: sp.add_argument("--p", help="p value, or comma separated list for sweeps"),
    "alpha": lambda sp: sp.add_argument("--alpha", type=float, help="initialization scale"),
    "grid": lambda sp: (
        sp.add_argument("--alpha-start", dest="alpha_start", type=float),
        sp.add_argument("--alpha-stop", dest="alpha_stop", type=float),
        sp.add_argument("--alpha-count", dest="alpha_count", type=int),
    ),
    "fit_skip": lambda sp: sp.add_argument("--fit-skip", dest="fit_skip", type=int,
                                           help="largest alphas excluded from the fit"),
    "dps": lambda sp: sp.add_argument("--dps", type=int, help="digits for the q* refinement"),
    "jobs": lambda sp: sp.add_argument("--jobs", type=int, help="parallel worker processes"),
    "cross_validate": lambda sp: sp.add_argument(
        "--cross-validate", dest="cross_validate", action="store_const", const=True,
        help="integrate the flow at the extreme alphas as a check"),
    "rtol": lambda sp: sp.add_argument("--rtol", type=float, help="integrator relative tolerance"),
    "atol": lambda sp: sp.add_argument("--atol", type=float, help="integrator absolute tolerance"),
    "t": lambda sp: sp.add_argument("--t", type=float, help="time horizon"),
    "eps": lambda sp: sp.add_argument("--eps", type=float, help="target accuracy"),
    "samples": lambda sp: sp.add_argument("--samples", type=int, help="number of trace samples"),
}


def resolve(args, no_default=()):
    """Merge command line values over config-file values over defaults.

    Keys in ``no_default`` stay None unless given on the command line or in
    the config file.
    """
    config = {}
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                config = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidInputError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(config, dict):
            raise InvalidInputError("config file must hold a JSON object")
        config = {k.replace("-", "_"): v for k, v in config.items()}
    for key, default in DEFAULTS.items():
        if getattr(args, key, None) is None:
            setattr(args, key, config.get(key, None if key in no_default else default))
    return args


def _emit(text, out):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json(obj):
    def default(o):
        if isinstance(o, np.generic):
            return o.item()
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, tuple):
            return list(o)
        raise TypeError(type(o).__name__)

    return json.dumps(obj, indent=2, default=default, allow_nan=True) + "\n"


def _single_p(args):
    ps = _floats(args.p)
    if len(ps) != 1:
        raise InvalidInputError("this command takes a single --p value")
    return ps[0]


def cmd_sweep(args):
    inst = parse_instance(args.instance, args.seed)
    cfg = SweepConfig(inst, p_list=_floats(args.p),
                      alphas=alpha_grid(args.alpha_start, args.alpha_stop, args.alpha_count),
                      fit_skip=args.fit_skip, dps=args.dps, cross_validate=bool(args.cross_validate),
                      flow_rtol=args.rtol, jobs=args.jobs)
    reports = sweep_alpha(cfg)
    for r in reports:
        log.info("p=%g slope=%.4f r2=%.6f", r.p, r.slope, r.r_squared)
    if (args.format or "csv") == "csv":
        return sweep_csv(reports)
    return _json({"instance": inst.name, "reports": [r.to_dict() for r in reports]})


def cmd_shift(args):
    alphas = alpha_grid(args.alpha_start, args.alpha_stop, args.alpha_count)
    res = shift_example_sweep(_floats(args.eps_list), _floats(args.p), alphas, dps=args.dps,
                              fit_skip=args.fit_skip, jobs=args.jobs)
    if (args.format or "csv") == "csv":
        return shift_csv(res)
    return _json([{"eps": e, **r.to_dict()} for (e, _), r in sorted(res.items())])


def cmd_flow(args):
    inst = parse_instance(args.instance, args.seed)
    hp = Hyperparams(_single_p(args), args.alpha)
    trace = flow_run(inst, hp, args.t, rtol=args.rtol, atol=args.atol, n_samples=args.samples)
    if trace.status != "ok":
        log.warning("flow run ended with status %s", trace.status)
    return trace.to_csv() if (args.format or "csv") == "csv" else trace.to_json() + "\n"


def cmd_gd(args):
    inst = parse_instance(args.instance, args.seed)
    hp = Hyperparams(_single_p(args), args.alpha)
    if args.eta is None:
        bound, _ = gd_step_bound(inst, hp, args.t, args.eps)
        eta = bound
    else:
        eta = float(args.eta)
        try:
            bound, _ = gd_step_bound(inst, hp, args.t, args.eps)
        except InvalidInputError:
            bound = 0.0
    if bound == 0.0:
        log.warning("the guaranteed step bound underflows for t=%g; no accuracy guarantee "
                    "applies", args.t)
    elif eta > bound:
        log.warning("eta=%g exceeds the guaranteed step bound %g; the accuracy guarantee "
                    "does not apply", eta, bound)
    J = int(np.floor(args.t / eta)) if args.steps is None else int(args.steps)
    trace = gd_run(inst, hp, eta, J, record=args.samples)
    if trace.status != "ok":
        log.warning("gradient descent %s", trace.status)
    return trace.to_csv() if (args.format or "csv") == "csv" else trace.to_json() + "\n"


def cmd_bp(args):
    inst = parse_instance(args.instance, args.seed)
    x, R = solve_bp(inst)
    face = optimal_face(inst)
    return _json({"instance": inst.name, "x": x, "R": R, "face": face.to_dict()})


def cmd_wp(args):
    inst = parse_instance(args.instance, args.seed)
    p = _single_p(args)
    out = {"instance": inst.name, "p": p, "w_p": wp_select(inst, p)}
    if args.alpha is not None:
        ms = minimizer_set(inst, Hyperparams(p, args.alpha), dps=args.dps)
        out.update({"alpha": args.alpha, **ms.to_dict()})
    return _json(out)


def cmd_constants(args):
    inst = parse_instance(args.instance, args.seed)
    hp = Hyperparams(_single_p(args), args.alpha)
    return _json(report_constants(inst, hp, args.t, args.eps, args.C1, args.C2,
                                  with_c_A=inst.N <= 20))


COMMANDS = {"sweep": cmd_sweep, "shift": cmd_shift, "flow": cmd_flow, "gd": cmd_gd,
            "bp": cmd_bp, "wp": cmd_wp, "constants": cmd_constants}
JSON_ONLY = {"bp", "wp", "constants"}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        # For wp an absent alpha means "W_p only".
        resolve(args, no_default=("alpha",) if args.command == "wp" else ())
        if args.command in JSON_ONLY and args.format == "csv":
            raise InvalidInputError(f"{args.command} only supports JSON output")
        text = COMMANDS[args.command](args)
        _emit(text, args.out)
    # LinAlgError and the LP errors subclass ValueError, so test them first.
    except (ConvergenceError, IntegrationError, ArithmeticError, np.linalg.LinAlgError,
            InfeasibleError, UnboundedError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InvalidInputError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
