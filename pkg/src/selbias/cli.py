"""Command-line front end: ``selbias <subcommand> [flags]``.

Every subcommand writes long-format records (see :mod:`selbias.io`). Exit
status is 0 on success, 2 on invalid input (including a missing input
file) and 1 on any other failure.
"""

from __future__ import annotations

import argparse
import math
import platform
import sys
import time
from typing import List

import numpy as np

from . import __version__, _backend
from . import io as sio
from .decomposition import (EnsembleConfig, bias_concentration, decay_time, envelope_sweep,
                            gaussian_psi, premium_profile, smoothed_psi)
from .hetero import winners_curse
from .increments import FAMILIES, IncrementModel, SeedSpec
from .io import Record
from .premium import g_normal, premium_exact_2, premium_mc
from .sequential import StoppingRule, exact_stopped_forward, simulate_stopped

T5_NOTE = "student_t5 increments are rescaled to unit variance"
EXCHANGEABLE_NOTE = ("non-gaussian exchangeable correlation uses sqrt(rho)*W + sqrt(1-rho)*V_k, "
                     "which is not itself a member of the family")
NAN_NOTE = "value nan marks a decay time not reached within the horizon"


def _floats(text: str) -> tuple:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of numbers, got {text!r}") from None


def _ints(text: str) -> tuple:
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of integers, got {text!r}") from None


def _names(text: str) -> tuple:
    return tuple(x.strip() for x in text.split(",") if x.strip())


def _shared() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("shared")
    g.add_argument("--dist", default="gaussian", choices=FAMILIES, help="increment family")
    g.add_argument("--k", type=int, default=2, help="number of models (arms)")
    g.add_argument("--n", type=int, default=100, help="horizon (observations)")
    g.add_argument("--paths", type=int, default=10_000, help="Monte Carlo paths")
    g.add_argument("--seed", type=int, default=0, help="root seed")
    g.add_argument("--sigma", type=_floats, default=(1.0,), help="scale, or one scale per arm")
    g.add_argument("--rho", type=float, default=None, help="exchangeable correlation in [0, 1]")
    g.add_argument("--cov", metavar="FILE", default=None, help="K x K covariance CSV (gaussian only)")
    g.add_argument("--format", dest="fmt", choices=("csv", "json"), default="csv")
    g.add_argument("--out", default="-", help="output path, - for stdout")
    g.add_argument("--workers", type=int, default=1, help="threads for the path loop")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="selbias", description="Selection-bias simulation and audit.")
    parser.add_argument("--version", action="version", version=f"selbias {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    shared = _shared()

    p = sub.add_parser("premium", parents=[shared], help="selection premium at one state")
    p.add_argument("--u", type=_floats, default=None, help="state vector (default zeros)")
    p.add_argument("--replicas", type=int, default=100_000)

    p = sub.add_parser("profile", parents=[shared], help="per-step premium profile and decay times")
    p.add_argument("--nested", type=int, default=None, metavar="R", help="inner replicas for the nested estimator")
    p.add_argument("--alpha", type=_floats, default=(0.1,), help="decay thresholds")

    p = sub.add_parser("concentration", parents=[shared], help="bias concentration ratios")
    p.add_argument("--alpha", type=_floats, default=(0.01, 0.04, 0.25, 1.0))

    p = sub.add_parser("bounds", parents=[shared], help="sub-Gaussian envelope sweep")
    p.add_argument("--n-grid", type=_ints, default=(50, 100, 200, 500, 1000))
    p.add_argument("--k-grid", type=_ints, default=(2, 10, 50, 200))
    p.add_argument("--families", type=_names, default=("uniform_centered", "rademacher"))
    p.add_argument("--crude-replicas", type=int, default=100_000)

    p = sub.add_parser("stopping", parents=[shared], help="stopped decomposition")
    p.add_argument("--rule", choices=("fixed", "threshold", "leader-gap"), default="threshold")
    p.add_argument("--c", type=float, default=3.0, help="threshold level")
    p.add_argument("--gamma", type=float, default=2.0, help="leader gap")
    p.add_argument("--cap", type=int, default=100)
    p.add_argument("--inner", type=int, default=500, help="inner replicas (>= 100)")

    p = sub.add_parser("curse", parents=[shared], help="winner's curse with unequal means")
    p.add_argument("--means", type=_floats, required=True, help="true means, one per arm")

    p = sub.add_parser("audit", parents=[shared], help="plug-in audit of a score matrix")
    p.add_argument("--input", required=True, metavar="FILE")
    p.add_argument("--header", choices=("auto", "yes", "no"), default="auto")
    p.add_argument("--replicas", type=int, default=100_000)

    p = sub.add_parser("gtable", parents=[shared], help="table of g(K) by quadrature")
    p.add_argument("--k-max", type=int, default=20)
    return parser


def model_from_args(args) -> IncrementModel:
    if args.cov is not None:
        cov = np.loadtxt(args.cov, delimiter=",", ndmin=2)
        return IncrementModel(args.dist, args.k, cov=tuple(map(tuple, cov)))
    return IncrementModel(args.dist, args.k, tuple(args.sigma), args.rho)


def run_config(args) -> sio.RunConfig:
    skip = {"command", "dist", "k", "n", "paths", "seed", "sigma", "rho", "cov", "fmt", "out",
            "workers", "alpha", "means"}
    opts = tuple(sorted((k, v) for k, v in vars(args).items() if k not in skip))
    cov = None
    if args.cov is not None:
        cov = tuple(map(tuple, np.loadtxt(args.cov, delimiter=",", ndmin=2).tolist()))
    return sio.RunConfig(command=args.command, dist=args.dist, k=args.k, n=args.n, paths=args.paths,
                         seed=args.seed, sigma=tuple(args.sigma), rho=args.rho, cov=cov,
                         alphas=tuple(getattr(args, "alpha", ()) or ()),
                         means=tuple(getattr(args, "means", ()) or ()), fmt=args.fmt, out=args.out,
                         workers=args.workers, options=opts)


def _ensemble(args, model, inner=None) -> EnsembleConfig:
    return EnsembleConfig(model, args.n, args.paths, SeedSpec(args.seed), inner, args.workers)


def cmd_premium(args) -> List[Record]:
    model = model_from_args(args)
    u = np.zeros(model.k) if args.u is None else np.array(args.u)
    est = premium_mc(u, model, args.replicas, SeedSpec(args.seed))
    recs = [Record("premium", model.family, model.k, None, None, est.value, est.std_error)]
    if model.family == "gaussian" and model.k == 2:
        ex = premium_exact_2(u, model.covariance())
        recs.append(Record("premium_exact", model.family, model.k, None, None, ex.value, 0.0))
    return recs


def profile_records(rep) -> List[Record]:
    fam, k, n = rep.family, rep.k, rep.horizon
    recs = []
    for i in range(n):
        recs.append(Record("premium", fam, k, n, i + 1, rep.premium[i], rep.premium_se[i]))
    for i in range(n):
        recs.append(Record("expected_max", fam, k, n, i + 1, rep.expected_max[i], rep.expected_max_se[i]))
    if rep.nested is not None:
        for i in range(n):
            recs.append(Record("nested", fam, k, n, i + 1, rep.nested[i], rep.nested_se[i]))
        for i in range(n):
            recs.append(Record("nested_diff", fam, k, n, i + 1, rep.nested_diff[i], rep.nested_diff_se[i]))
        recs.append(Record("total_gap", fam, k, n, None, rep.total_gap, rep.total_gap_se))
    if rep.psi is not None:
        for i in range(n):
            recs.append(Record("psi", fam, k, n, i + 1, rep.psi[i], rep.psi_se[i]))
        iso = smoothed_psi(rep)
        for i in range(n):
            recs.append(Record("psi_smoothed", fam, k, n, i + 1, iso[i], None))
        ref = gaussian_psi(rep.steps)
        for i in range(n):
            recs.append(Record("psi_gaussian", fam, k, n, i + 1, ref[i], None))
        for a, t in sorted(rep.decay.items()):
            recs.append(Record("decay_time", fam, k, n, a, math.nan if t is None else t, None))
            g = decay_time("analytic_gaussian", a)
            recs.append(Record("decay_time_gaussian", fam, k, n, a, math.nan if g is None else g, None))
    return recs


def cmd_profile(args) -> List[Record]:
    model = model_from_args(args)
    rep = premium_profile(_ensemble(args, model, args.nested), alphas=args.alpha)
    return profile_records(rep)


def cmd_concentration(args) -> List[Record]:
    model = model_from_args(args)
    pts = bias_concentration(_ensemble(args, model), args.alpha)
    recs = []
    for p in pts:
        recs.append(Record("ratio", model.family, model.k, args.n, p.alpha, p.ratio, p.std_error))
        recs.append(Record("sqrt_alpha", model.family, model.k, args.n, p.alpha, math.sqrt(p.alpha), None))
    return recs


def bound_records(report) -> List[Record]:
    recs = []
    for p in report.points:
        recs.append(Record("empirical", p.family, p.k, p.n, None, p.mean, p.std_error))
        recs.append(Record("envelope", p.family, p.k, p.n, None, p.envelope, None))
        recs.append(Record("crude", p.family, p.k, p.n, None, p.crude, p.crude_se))
    return recs


def cmd_bounds(args) -> List[Record]:
    rep = envelope_sweep(args.n_grid, args.k_grid, args.families, args.paths, SeedSpec(args.seed),
                         args.crude_replicas, args.workers)
    return bound_records(rep)


def _rule(args) -> StoppingRule:
    if args.rule == "fixed":
        return StoppingRule.fixed(args.cap)
    if args.rule == "threshold":
        return StoppingRule.threshold(args.c, args.cap)
    return StoppingRule.leader_gap(args.gamma, args.cap)


def cmd_stopping(args) -> List[Record]:
    model = model_from_args(args)
    rule = _rule(args)
    s = simulate_stopped(model, rule, args.paths, SeedSpec(args.seed), args.inner, args.workers)
    fam, k, cap = model.family, model.k, rule.cap
    recs = [
        Record("lhs", fam, k, cap, None, s.lhs.value, s.lhs.std_error),
        Record("rhs", fam, k, cap, None, s.rhs.value, s.rhs.std_error),
        Record("gap", fam, k, cap, None, s.gap, s.gap_se),
        Record("mean_t", fam, k, cap, None, s.mean_t, s.mean_t_se),
    ]
    recs += [Record("term", fam, k, cap, i + 1, s.terms[i], s.terms_se[i]) for i in range(cap)]
    if fam == "rademacher" and k <= 2 and cap <= 20 and model.correlation_mode == 0 \
            and model.scales == (1.0,) * k:
        ex = exact_stopped_forward(rule, k)
        recs += [Record("exact_lhs", fam, k, cap, None, ex.lhs, 0.0),
                 Record("exact_rhs", fam, k, cap, None, ex.rhs, 0.0),
                 Record("exact_mean_t", fam, k, cap, None, ex.mean_t, 0.0)]
    return recs


def cmd_curse(args) -> List[Record]:
    model = model_from_args(args)
    rep = winners_curse(_ensemble(args, model), args.means)
    fam, k, n = model.family, model.k, args.n
    recs = [
        Record("expected_max_bar", fam, k, n, None, rep.expected_max_bar.value, rep.expected_max_bar.std_error),
        Record("drift", fam, k, n, None, rep.drift, 0.0),
        Record("expected_max_r", fam, k, n, None, rep.expected_max_r.value, rep.expected_max_r.std_error),
        Record("optimism", fam, k, n, None, rep.optimism.value, rep.optimism.std_error),
    ]
    recs += [Record("selected_freq", fam, k, n, j + 1, f, None) for j, f in enumerate(rep.selected_freq)]
    p = rep.profile
    recs += [Record("drifted_premium", fam, k, n, i + 1, p.premium[i], p.premium_se[i]) for i in range(n)]
    return recs


def audit_records(rep: sio.AuditReport) -> List[Record]:
    k, n = rep.k, rep.n
    recs = [Record("model_mean", "data", k, n, j + 1, m, None) for j, m in enumerate(rep.model_means)]
    recs += [
        Record("winner", "data", k, n, None, rep.winner + 1, None),
        Record("winner_mean", "data", k, n, None, rep.winner_mean, None),
        Record("c_hat", "data", k, n, None, rep.c_hat, rep.c_raw.std_error),
        Record("optimism", "data", k, n, None, rep.optimism, rep.c_raw.std_error / math.sqrt(n)),
        Record("debiased_mean", "data", k, n, None, rep.debiased_mean, None),
        Record("leader_changes", "data", k, n, None, rep.leader_changes, None),
    ]
    return recs


def cmd_audit(args) -> List[Record]:
    scores = sio.load_scores(args.input, args.header)
    return audit_records(sio.audit(scores, args.replicas, SeedSpec(args.seed)))


def cmd_gtable(args) -> List[Record]:
    if args.k_max < 1:
        raise ValueError("--k-max must be at least 1")
    return [Record("g", "gaussian", k, None, None, g_normal(k).value, 0.0) for k in range(1, args.k_max + 1)]


COMMANDS = {
    "premium": cmd_premium, "profile": cmd_profile, "concentration": cmd_concentration,
    "bounds": cmd_bounds, "stopping": cmd_stopping, "curse": cmd_curse, "audit": cmd_audit,
    "gtable": cmd_gtable,
}


def metadata(args, cfg: sio.RunConfig, wall: float) -> dict:
    import scipy

    versions = {"selbias": __version__, "python": platform.python_version(),
                "numpy": np.__version__, "scipy": scipy.__version__}
    if _backend.HAS_NUMBA:
        import numba
        versions["numba"] = numba.__version__
    notes = [NAN_NOTE]
    if args.dist == "student_t5" or "student_t5" in getattr(args, "families", ()):
        notes.append(T5_NOTE)
    if args.rho is not None and args.dist != "gaussian":
        notes.append(EXCHANGEABLE_NOTE)
    if args.command == "audit":
        notes.append(sio.AUDIT_NOTE)
    return {"root_seed": args.seed, "versions": versions, "backend": _backend.active(),
            "wall_time_s": wall, "config": cfg.to_dict(), "notes": notes}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    t0 = time.perf_counter()
    try:
        if args.workers < 1:
            raise ValueError("--workers must be at least 1")
        cfg = run_config(args)
        recs = COMMANDS[args.command](args)
        sio.emit(recs, args.fmt, args.out, metadata(args, cfg, time.perf_counter() - t0))
    except (ValueError, FileNotFoundError) as exc:
        print(f"selbias: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        print(f"selbias: runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
