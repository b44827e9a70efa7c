"""Alpha sweeps, the shifted 1 x 2 example and constant reports.

The limit psi_alpha(inf) of the flow equals q* (the minimizer of Q_p over
A z = y), so sweeps evaluate it with :func:`dlnbp.bp.solve_qstar` and only
use the integrator to cross-check selected points.
"""

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bounds import FORMULAS, bounds as bound_bundle, flow_rate, log_step_bounds
from .bp import optimal_face, solve_qstar, wp_select
from .conditioning import condition_report, gm_constant, qm_bound
from .dynamics import flow_run
from .errors import IntegrationError, InvalidInputError
from .instances import shift_instance
from .linalg import svd_summary
from .potentials import Hyperparams

CSV_HEADER = ["alpha", "p", "error_l2", "resid", "slope_window"]
DEFAULT_DPS = 40


def fmt(x):
    """17 significant digits: enough to round-trip any double."""
    return format(float(x), ".17g")


def alpha_grid(start, stop, count):
    """Geometric grid from ``start`` down to ``stop`` (strictly decreasing)."""
    start, stop, count = float(start), float(stop), int(count)
    if not (start > stop > 0):
        raise InvalidInputError("alpha grid needs start > stop > 0")
    if count < 2:
        raise InvalidInputError("alpha grid needs at least 2 points")
    return np.geomspace(start, stop, count)


@dataclass
class SweepConfig:
    instance: object
    p_list: tuple = (3.0, 4.0, 5.0)
    alphas: np.ndarray = field(default_factory=lambda: alpha_grid(1e-1, 10 ** -2.5, 7))
    fit_skip: int = 1
    dps: int = DEFAULT_DPS
    cross_validate: bool = False
    flow_rtol: float = 1e-10
    jobs: int = 1

    def __post_init__(self):
        self.alphas = np.asarray(self.alphas, dtype=float)
        if np.any(self.alphas <= 0) or np.any(np.diff(self.alphas) >= 0):
            raise InvalidInputError("alpha grid must be strictly positive and decreasing")
        if len(self.alphas) < 4:
            raise InvalidInputError("slope fits need an alpha grid of at least 4 points")
        if not (0 <= self.fit_skip <= len(self.alphas) - 2):
            raise InvalidInputError("slope fit needs at least 2 points after fit_skip")
        self.p_list = tuple(float(p) for p in self.p_list)
        for p in self.p_list:
            Hyperparams(p, 1.0)


@dataclass
class SweepPoint:
    alpha: float
    p: float
    error: float
    resid: float
    in_window: bool
    psi_inf: np.ndarray
    flow_gap: float = float("nan")
    status: str = "ok"


@dataclass
class SlopeReport:
    """Least-squares fit of log(error) against log(alpha)."""

    p: float
    slope: float
    intercept: float
    r_squared: float
    alphas: np.ndarray
    errors: np.ndarray
    window: np.ndarray
    points: list = field(default_factory=list)

    def to_dict(self):
        return {
            "p": self.p, "slope": self.slope, "intercept": self.intercept,
            "r_squared": self.r_squared, "alphas": self.alphas.tolist(),
            "errors": self.errors.tolist(), "window": self.window.tolist(),
            "flow_gaps": [pt.flow_gap for pt in self.points],
            "status": [pt.status for pt in self.points],
        }


def fit_slope(alphas, errors, window=None):
    """(slope, intercept, r^2) of log(errors) ~ slope * log(alphas) + intercept."""
    alphas = np.asarray(alphas, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if window is None:
        window = np.ones(len(alphas), bool)
    ok = window & (errors > 0) & np.isfinite(errors)
    if ok.sum() < 2:
        return float("nan"), float("nan"), float("nan")
    x, yv = np.log(alphas[ok]), np.log(errors[ok])
    slope, intercept = np.polyfit(x, yv, 1)
    fitted = slope * x + intercept
    ss_res = float(np.sum((yv - fitted) ** 2))
    ss_tot = float(np.sum((yv - yv.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


def _flow_limit_check(inst, hp, q, rtol, horizon=40.0):
    """Integrate to horizon / K2 and return ||psi(t) - q||."""
    _, K2 = flow_rate(inst, hp)
    tr = flow_run(inst, hp, horizon / K2, rtol=rtol, n_samples=20)
    if tr.status != "ok":
        raise IntegrationError(f"flow {tr.status}", tr)
    return float(np.linalg.norm(tr.final_psi - q))


def _sweep_point(args):
    inst, p, alpha, target, dps, check, rtol = args
    hp = Hyperparams(p, alpha)
    q = solve_qstar(inst, hp, dps=dps)
    err = float(np.linalg.norm(q - target))
    resid = float(np.linalg.norm(inst.A @ q - inst.y))
    gap, status = float("nan"), "ok"
    if check:
        try:
            gap = _flow_limit_check(inst, hp, q, rtol)
        except IntegrationError as exc:
            status = f"flow-failed: {exc}"
    return p, alpha, err, resid, q, gap, status


def _map(fn, tasks, jobs):
    if jobs and jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(fn, tasks))
    return [fn(t) for t in tasks]


def sweep_alpha(cfg):
    """Error ||psi_alpha(inf) - W_p|| over the alpha grid for each p, with slope fits.

    Returns a list of :class:`SlopeReport`, one per p in ascending order.  With
    ``cfg.cross_validate`` the two extreme alphas are also integrated with
    :func:`flow_run`; integration failures are recorded per point.
    """
    inst = cfg.instance
    face = optimal_face(inst)
    targets = {p: wp_select(inst, p, face) for p in cfg.p_list}
    n = len(cfg.alphas)
    tasks = []
    for p in sorted(cfg.p_list):
        for i, a in enumerate(cfg.alphas):
            check = cfg.cross_validate and i in (0, n - 1)
            tasks.append((inst, p, float(a), targets[p], cfg.dps, check, cfg.flow_rtol))
    results = _map(_sweep_point, tasks, cfg.jobs)
    window = np.arange(n) >= cfg.fit_skip
    reports = []
    for p in sorted(cfg.p_list):
        rows = sorted((r for r in results if r[0] == p), key=lambda r: -r[1])
        pts = [SweepPoint(a, p, e, res, bool(window[i]), q, gap, st)
               for i, (_, a, e, res, q, gap, st) in enumerate(rows)]
        errs = np.array([pt.error for pt in pts])
        al = np.array([pt.alpha for pt in pts])
        slope, icpt, r2 = fit_slope(al, errs, window)
        reports.append(SlopeReport(p, slope, icpt, r2, al, errs, window.copy(), pts))
    return reports


def sweep_csv(reports):
    """CSV text: one row per (p, alpha), sorted by p then alpha ascending."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for rep in sorted(reports, key=lambda r: r.p):
        for pt in sorted(rep.points, key=lambda pt: pt.alpha):
            w.writerow([fmt(pt.alpha), fmt(pt.p), fmt(pt.error), fmt(pt.resid), int(pt.in_window)])
    return buf.getvalue()


def shift_example_sweep(eps_list, p_list, alphas, dps=DEFAULT_DPS, fit_skip=1, jobs=1):
    """Errors ||psi_alpha(inf) - (1, 0)|| for the systems [1, 1 - eps] z = 1.

    Returns a dict mapping (eps, p) to a :class:`SlopeReport`.  With a single
    alpha the slope fields are NaN.
    """
    alphas = np.atleast_1d(np.asarray(alphas, dtype=float))
    out = {}
    target = np.array([1.0, 0.0])
    for eps in eps_list:
        inst = shift_instance(eps)
        tasks = [(inst, float(p), float(a), target, dps, False, 1e-10)
                 for p in p_list for a in alphas]
        results = _map(_sweep_point, tasks, jobs)
        for p in p_list:
            rows = sorted((r for r in results if r[0] == float(p)), key=lambda r: -r[1])
            window = np.arange(len(rows)) >= (fit_skip if len(rows) > fit_skip + 1 else 0)
            pts = [SweepPoint(a, float(p), e, res, bool(window[i]), q)
                   for i, (_, a, e, res, q, _, _) in enumerate(rows)]
            al = np.array([pt.alpha for pt in pts])
            errs = np.array([pt.error for pt in pts])
            if len(pts) >= 2:
                slope, icpt, r2 = fit_slope(al, errs, window)
            else:
                slope = icpt = r2 = float("nan")
            out[(float(eps), float(p))] = SlopeReport(float(p), slope, icpt, r2, al, errs, window, pts)
    return out


def shift_csv(results):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["eps"] + CSV_HEADER)
    for (eps, p) in sorted(results):
        rep = results[(eps, p)]
        for pt in sorted(rep.points, key=lambda pt: pt.alpha):
            w.writerow([fmt(eps), fmt(pt.alpha), fmt(pt.p), fmt(pt.error), fmt(pt.resid),
                        int(pt.in_window)])
    return buf.getvalue()


def report_constants(inst, hp, t, eps, C1=1.0, C2=1.0, with_c_A=True):
    """Every explicit constant for one configuration, with formula strings."""
    hp = hp if isinstance(hp, Hyperparams) else Hyperparams(*hp)
    sv = svd_summary(inst.A)
    bundle = bound_bundle(inst, hp, t, eps, C1, C2)
    log_eta, log_U_eta = log_step_bounds(inst, hp, t, eps)
    cond = condition_report(inst.A, with_c_A=with_c_A)
    out = {
        "instance": inst.name,
        "p": hp.p,
        "alpha": hp.alpha,
        "t": float(t),
        "eps": float(eps),
        "sigma_min": sv.sigma_min,
        "op_norm": sv.sigma_max,
        "bounds": {k: {"value": v, "formula": FORMULAS[k]} for k, v in bundle.to_dict().items()},
        "log_bounds": {"eta_max": log_eta, "U_eta": log_U_eta},
        "conditioning": {
            "chi": cond.chi,
            "script_K": cond.script_K,
            "c_A": cond.c_A,
            "certificate": cond.to_dict()["certificate"],
        },
    }
    if with_c_A and inst.N <= 20:
        out["conditioning"]["gm_constant"] = gm_constant(inst.A)
        out["conditioning"]["qm_bound"] = qm_bound(inst.A, inst.y, hp.p, hp.alpha, cond.c_A)
    return out

