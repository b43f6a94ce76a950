"""
Command-line front end: ``fit`` runs the operator-regression solver on a CSV
dataset; ``bench lasso`` / ``bench phase`` run the online experiments and
write per-solver traces plus a summary.

Options may also come from a plain ``key=value`` config file (``--config``);
explicit flags override file entries. Exit codes: 0 success, 1 I/O or config
error, 2 solver failure.
"""

import argparse
import sys

import numpy as np

from . import bench
from .boost import BoostConfig
from .core import CurvatureBounds
from .opreg import StopRule, opreg_fit, read_regression_csv, write_solution_csv

LASSO_SOLVERS = ("fb", "fista", "fista_bt", "anderson", "opreg_boost",
                 "opreg_boost_interp", "cvxreg_boost")
PHASE_SOLVERS = ("prox_linear", "opreg_boost")

_FIT_SCHEMA = {"zeta": float, "rho": float, "max_iter": int, "tol": float,
               "out": str}
_LASSO_SCHEMA = {"n": int, "L": float, "mu": float, "w": float, "zeta": float,
                 "rho": float, "ell": int, "tau": int, "sigma": float,
                 "horizon": int, "seed": int, "solvers": str, "out": str,
                 "timing": bool}
_PHASE_SCHEMA = {"pieces": int, "horizon": int, "seed": int, "alpha": float,
                 "boost_alpha": float,
                 "zeta": float, "rho": float, "ell": int, "sigma": float,
                 "linear_measurements": bool, "solvers": str, "out": str,
                 "timing": bool}


class ConfigError(ValueError):
    pass


def _read_config(path, schema) -> dict:
    """Parse a key=value file against the command's option schema."""
    out = {}
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, _, raw = line.partition("=")
        key, raw = key.strip(), raw.strip()
        if key not in schema:
            raise ConfigError(f"{path}:{lineno}: unknown option {key!r}")
        conv = schema[key]
        try:
            if conv is bool:
                if raw.lower() not in ("true", "false", "0", "1"):
                    raise ValueError(raw)
                out[key] = raw.lower() in ("true", "1")
            else:
                out[key] = conv(raw)
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {raw!r}") from exc
    return out


def _merged(args, schema, defaults) -> dict:
    """Layer option sources: defaults, then config file, then explicit flags."""
    opts = dict(defaults)
    if getattr(args, "config", None):
        opts.update(_read_config(args.config, schema))
    for key in schema:
        val = getattr(args, key, None)
        if val is not None:
            opts[key] = val
    return opts


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="opregboost")
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="operator regression on a dataset CSV")
    fit.add_argument("dataset")
    fit.add_argument("--config")
    fit.add_argument("--zeta", type=float)
    fit.add_argument("--rho", type=float)
    fit.add_argument("--max-iter", dest="max_iter", type=int)
    fit.add_argument("--tol", type=float)
    fit.add_argument("--out")

    bench_p = sub.add_parser("bench", help="run an online experiment")
    bsub = bench_p.add_subparsers(dest="experiment", required=True)

    lasso = bsub.add_parser("lasso", help="ill-conditioned online sparse regression")
    lasso.add_argument("--config")
    lasso.add_argument("--n", type=int)
    lasso.add_argument("--L", type=float)
    lasso.add_argument("--mu", type=float)
    lasso.add_argument("--w", type=float, help="l1 weight")
    lasso.add_argument("--zeta", type=float)
    lasso.add_argument("--rho", type=float)
    lasso.add_argument("--ell", type=int)
    lasso.add_argument("--tau", type=int, help="refresh period of the interpolated variant")
    lasso.add_argument("--sigma", type=float, help="anchor sampling scale")
    lasso.add_argument("--horizon", type=int)
    lasso.add_argument("--seed", type=int)
    lasso.add_argument("--solvers", help="comma-separated subset of: " + ",".join(LASSO_SOLVERS))
    lasso.add_argument("--no-timing", dest="timing", action="store_const", const=False,
                       help="zero the wall-time column for byte-reproducible traces")
    lasso.add_argument("--out", required=False)

    phase = bsub.add_parser("phase", help="online phase retrieval")
    phase.add_argument("--config")
    phase.add_argument("--pieces", type=int)
    phase.add_argument("--horizon", type=int)
    phase.add_argument("--seed", type=int)
    phase.add_argument("--alpha", type=float, help="prox-linear step size")
    phase.add_argument("--boost-alpha", dest="boost_alpha", type=float,
                       help="step size of the boosted operator (the regularized "
                            "map stays stable at much larger steps than the raw one)")
    phase.add_argument("--zeta", type=float)
    phase.add_argument("--rho", type=float)
    phase.add_argument("--ell", type=int)
    phase.add_argument("--sigma", type=float, help="anchor sampling scale")
    phase.add_argument("--linear-measurements", dest="linear_measurements",
                       action="store_const", const=True,
                       help="measure <a_i, y> instead of <a_i, y>^2")
    phase.add_argument("--solvers", help="comma-separated subset of: " + ",".join(PHASE_SOLVERS))
    phase.add_argument("--no-timing", dest="timing", action="store_const", const=False)
    phase.add_argument("--out", required=False)
    return parser


def _cmd_fit(args) -> int:
    opts = _merged(args, _FIT_SCHEMA,
                   {"zeta": 0.9, "rho": 1.0, "max_iter": 100, "tol": 1e-8,
                    "out": "solution.csv"})
    data = read_regression_csv(args.dataset)
    sol, diag, _ = opreg_fit(data, opts["zeta"], opts["rho"],
                             StopRule(max_iter=opts["max_iter"], tol=opts["tol"]))
    write_solution_csv(opts["out"], sol, diag)
    print(f"fitted {data.ell} evaluations in {diag.iterations} iterations, "
          f"residual {diag.residual:.3e}, max violation {diag.max_violation:.3e}")
    return 0


def _lasso_solvers(names, spec: bench.LassoStreamSpec, opts) -> dict:
    alpha = 2.0 / (spec.L + spec.mu)
    cfg = BoostConfig(alpha=alpha, ell=opts["ell"], zeta=opts["zeta"],
                      rho=opts["rho"], sample_sigma=opts["sigma"],
                      tau=opts["tau"], rng_seed=opts["seed"])
    factory = {
        "fb": lambda: bench.FbSolver(alpha),
        # the momentum scheme needs the conservative 1/L step to converge
        "fista": lambda: bench.FistaSolver(alpha=1.0 / spec.L),
        "fista_bt": lambda: bench.FistaSolver(backtracking=True),
        "anderson": lambda: bench.AndersonSolver(alpha),
        "opreg_boost": lambda: bench.OpRegBoostSolver(cfg),
        "opreg_boost_interp": lambda: bench.OpRegBoostInterpSolver(cfg),
        "cvxreg_boost": lambda: bench.CvxRegBoostSolver(
            cfg, CurvatureBounds(mu=spec.mu, L=spec.L)),
    }
    return {name: factory[name]() for name in names}


def _phase_solvers(names, spec: bench.PhaseStreamSpec, opts) -> dict:
    cfg = BoostConfig(alpha=opts["boost_alpha"], ell=opts["ell"], zeta=opts["zeta"],
                      rho=opts["rho"], sample_sigma=opts["sigma"],
                      rng_seed=opts["seed"])
    factory = {
        "prox_linear": lambda: bench.ProxLinearSolver(spec.alpha),
        "opreg_boost": lambda: bench.OpRegBoostSolver(cfg),
    }
    return {name: factory[name]() for name in names}


def _parse_solver_list(raw, allowed) -> list:
    names = [s.strip() for s in raw.split(",") if s.strip()]
    bad = [s for s in names if s not in allowed]
    if bad:
        raise ConfigError(f"unknown solver(s): {', '.join(bad)}")
    if not names:
        raise ConfigError("empty solver list")
    return names


def _run_bench(stream, solvers, budget, opts, x0) -> int:
    traces = bench.run_experiment(stream, solvers, budget, out_dir=opts["out"],
                                  x0=x0, timing=opts["timing"])
    failed = False
    for name, trace in traces.items():
        line = (f"{name}: asymptotic error {trace.asymptotic_error():.4f}, "
                f"mean step time {trace.mean_step_time_s():.4f} s")
        if trace.failures:
            k, msg = trace.failures[0]
            line += f"  [{len(trace.failures)} failed steps, first at k={k}: {msg}]"
            failed = True
        print(line)
    return 2 if failed else 0


def _cmd_bench_lasso(args) -> int:
    opts = _merged(args, _LASSO_SCHEMA,
                   {"n": 1000, "L": 1e8, "mu": 1.0, "w": 1000.0, "zeta": 0.9,
                    "rho": 1e-6, "ell": 3, "tau": 2, "sigma": 0.1,
                    "horizon": 500, "seed": 0,
                    "solvers": "fb,fista,fista_bt,anderson,opreg_boost,opreg_boost_interp",
                    "out": "lasso_out", "timing": True})
    names = _parse_solver_list(opts["solvers"], LASSO_SOLVERS)
    spec = bench.LassoStreamSpec(n=opts["n"], l1_weight=opts["w"], L=opts["L"],
                                 mu=opts["mu"], horizon=opts["horizon"],
                                 seed=opts["seed"])
    stream = bench.generate_lasso_stream(spec)
    solvers = _lasso_solvers(names, spec, opts)
    return _run_bench(stream, solvers, bench.lasso_budget(opts["ell"]), opts,
                      x0=np.zeros(spec.n))


def _cmd_bench_phase(args) -> int:
    opts = _merged(args, _PHASE_SCHEMA,
                   {"pieces": 1, "horizon": 100, "seed": 0, "alpha": 1e-3,
                    "boost_alpha": 0.1,
                    "zeta": 0.9, "rho": 1e-4, "ell": 3, "sigma": 0.1,
                    "linear_measurements": False,
                    "solvers": "prox_linear,opreg_boost",
                    "out": "phase_out", "timing": True})
    names = _parse_solver_list(opts["solvers"], PHASE_SOLVERS)
    spec = bench.PhaseStreamSpec(pieces=opts["pieces"], horizon=opts["horizon"],
                                 seed=opts["seed"], alpha=opts["alpha"],
                                 linear_measurements=opts["linear_measurements"])
    stream = bench.generate_phase_stream(spec)
    solvers = _phase_solvers(names, spec, opts)
    # the origin is a degenerate start for sphere-constrained iterations
    x0 = np.random.default_rng([opts["seed"], 2]).standard_normal(spec.n)
    x0 /= np.linalg.norm(x0)
    return _run_bench(stream, solvers, bench.phase_budget(), opts, x0=x0)


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors; remap to config-error code
        return 0 if exc.code in (0, None) else 1
    try:
        if args.command == "fit":
            return _cmd_fit(args)
        if args.experiment == "lasso":
            return _cmd_bench_lasso(args)
        return _cmd_bench_phase(args)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
