"""Command-line entry point.

Exit status: 0 on success, 1 on computation errors (JSON on stderr),
2 on usage errors, 3 when a sweep or self-test violates a configured threshold.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import replace

import numpy as np
import scipy

from . import __version__
from .asymptotics import (bernoulli_gauss_decomposition, mgf_theorem, overlap_moments,
                          replica_bias, replica_mgf_theorem)
from .contour import (ContourSpec, MgfResult, bessel_identity, contour_rows, log_partition,
                      mgf_exact)
from .disorder import check_event
from .experiments import (SweepConfig, event_probability_study, run_sweep_to_files,
                          sum_scaling_study, write_json)
from .mc import McConfig, mc_mgf, mc_replica_mgf
from .rmt import DisorderSample, sample_goe_dense, sample_spectrum_fast
from .saddle import ModelParams, solve_critical

EXIT_COMPUTE = 1
EXIT_THRESHOLD = 3

BESSEL_A = (0.1, 0.5, 1.0, 2.0 + 1.0j, 10.0)
BESSEL_B = (-10.0, -1.0, 0.0, 1.0 + 1.0j, 10.0)
BESSEL_TOL = 1e-8


class _VersionAction(argparse.Action):
    def __init__(self, option_strings, dest, **kw):
        super().__init__(option_strings, dest, nargs=0, default=argparse.SUPPRESS, **kw)

    def __call__(self, parser, namespace, values, option_string=None):
        print(json.dumps(version_info(), indent=2))
        parser.exit(0)


def version_info() -> dict:
    return {"package": "sskoverlap", "version": __version__, "numpy": np.__version__,
            "scipy": scipy.__version__, "default_contour_spec": ContourSpec().to_dict()}


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _positive_float(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return v


def _nonneg_float(text: str) -> float:
    v = float(text)
    if not v >= 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative number, got {text}")
    return v


def _int_list(text: str) -> list[int]:
    return [_positive_int(t) for t in text.split(",") if t]


# ---------------------------------------------------------------- shared option groups


def _add_sample_source(p: argparse.ArgumentParser) -> None:
    p.add_argument("--sample", help="DisorderSample JSON file (overrides --n/--seed)")
    p.add_argument("--n", type=_positive_int, help="dimension N")
    p.add_argument("--seed", type=int, help="disorder seed (required unless --sample is given)")
    p.add_argument("--sampler", choices=("dense", "fast"), default="dense")


def _add_params(p: argparse.ArgumentParser) -> None:
    temp = p.add_mutually_exclusive_group(required=True)
    temp.add_argument("--beta", type=_positive_float)
    temp.add_argument("--t", type=_positive_float, help="temperature T = 1/beta")
    field = p.add_mutually_exclusive_group()
    field.add_argument("--bigH", type=_nonneg_float, help="microscopic field scale H (h = H / sqrt(N))")
    field.add_argument("--h-abs", type=_nonneg_float, dest="h_abs", help="raw field strength h")
    p.add_argument("--xi", type=float, default=0.0, help="MGF argument")


def _add_contour(p: argparse.ArgumentParser) -> None:
    d = ContourSpec()
    p.add_argument("--e-hat", type=float, default=d.e_hat, dest="e_hat")
    p.add_argument("--delta", type=float, default=d.delta)
    p.add_argument("--t-max", type=_positive_float, default=None, dest="t_max")
    p.add_argument("--quad-tol", type=_positive_float, default=d.quad_tol, dest="quad_tol")
    p.add_argument("--arc-points", type=_positive_int, default=d.arc_points, dest="arc_points")
    p.add_argument("--truncate", action="store_true",
                   help="stop the tails at t_max instead of closing them with a horizontal ray")


def _load_sample(args, parser) -> DisorderSample:
    if args.sample:
        with open(args.sample) as fh:
            return DisorderSample.from_json(fh.read())
    if args.n is None or args.seed is None:
        parser.error("give --sample, or both --n and --seed")
    sampler = sample_goe_dense if args.sampler == "dense" else sample_spectrum_fast
    return sampler(args.n, args.seed)


def _params(args, parser, N: int) -> ModelParams:
    beta = args.beta if args.beta is not None else 1.0 / args.t
    if args.h_abs is not None:
        H = args.h_abs * math.sqrt(N)
    else:
        H = args.bigH if args.bigH is not None else 0.0
    return ModelParams(N, beta, H, getattr(args, "xi", 0.0))


def _spec(args) -> ContourSpec:
    return ContourSpec(e_hat=args.e_hat, delta=args.delta, t_max=args.t_max,
                       quad_tol=args.quad_tol, arc_points=args.arc_points,
                       close_tail=not args.truncate)


def _emit(obj: dict, output: str | None) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True)
    if output:
        with open(output, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


# ---------------------------------------------------------------- subcommands


def cmd_sample(args, parser):
    sampler = sample_goe_dense if args.sampler == "dense" else sample_spectrum_fast
    _emit(sampler(args.n, args.seed).to_dict(), args.output)


def cmd_check_event(args, parser):
    s = _load_sample(args, parser)
    _emit(check_event(s, args.epsilon, args.o_constant).to_dict(), args.output)


def cmd_solve(args, parser):
    s = _load_sample(args, parser)
    p = _params(args, parser, s.dim)
    out = solve_critical(s, p).to_dict()
    if args.log_partition:
        out["log_partition"] = log_partition(s, p)
    _emit(out, args.output)


def cmd_mgf(args, parser):
    if args.method == "theorem" and args.n1 is not None and args.sample is None and args.n is None:
        # closed form only needs |n_1|; N is irrelevant, use 1 as placeholder
        p = _params(args, parser, 1)
        res = MgfResult(mgf_theorem(p, abs(args.n1)), "closed-form", 0.0, {})
        _emit(res.to_dict(), args.output)
        return
    s = _load_sample(args, parser)
    p = _params(args, parser, s.dim)
    if args.method == "contour":
        spec = _spec(args)
        points = solve_critical(s, p)
        res = mgf_exact(s, p, spec, points)
        if args.dump_contour:
            rows = contour_rows(s, p, points, spec)
            with open(args.dump_contour, "w", newline="") as fh:
                w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
                w.writeheader()
                w.writerows(rows)
    elif args.method == "theorem":
        n1 = abs(args.n1) if args.n1 is not None else abs(float(s.projections[0]))
        res = MgfResult(mgf_theorem(p, n1), "closed-form", 0.0, {"n1_abs": n1})
    else:
        res = mc_mgf(s, p, McConfig(args.n_samples, args.seed if args.seed is not None else s.seed,
                                    args.batch))
    _emit(res.to_dict(), args.output)


def cmd_formulas(args, parser):
    T = args.t if args.t is not None else 1.0 / args.beta
    if args.h_abs is not None:
        if args.n is None:
            parser.error("--h-abs needs --n to convert h into H")
        H = args.h_abs * math.sqrt(args.n)
    else:
        H = args.bigH if args.bigH is not None else 0.0
    p = ModelParams.from_temperature(args.n or 1, T, H, args.xi)
    law = bernoulli_gauss_decomposition(p, args.n1)
    mean, var, chi = overlap_moments(p, args.n1)
    out = {
        "T": T, "H": H, "xi": args.xi, "n1_abs": args.n1,
        "mgf_theorem": mgf_theorem(p, args.n1),
        "mean": mean, "variance": var, "susceptibility": chi,
        "bernoulli_p": law.p_plus, "atom": law.atom,
        "replica_mgf": replica_mgf_theorem(p, args.n1),
        "replica_p": replica_bias(T, H, args.n1),
    }
    _emit(out, args.output)


def cmd_oracle(args, parser):
    s = _load_sample(args, parser)
    p = _params(args, parser, s.dim)
    cfg = McConfig(args.n_samples, args.seed if args.seed is not None else s.seed, args.batch)
    if args.replica:
        res = mc_replica_mgf(s, p, cfg, args.xi if args.xi_r is None else args.xi_r)
    else:
        res = mc_mgf(s, p, cfg)
    d = res.diagnostics
    out = {"value": res.value, "std_error": d["std_error"], "ess": d["ess"],
           "n_samples": int(d["n_samples"]), "seed": int(d["seed"])}
    out.update({k: v for k, v in d.items() if k not in out})
    _emit(out, args.output)


def _study_config(args, parser) -> SweepConfig:
    if args.config:
        cfg = SweepConfig.from_json_file(args.config)
        if args.seed is not None:
            cfg = replace(cfg, master_seed=args.seed)
    else:
        if args.seed is None:
            parser.error("--seed is required when no --config is given")
        if not args.n_grid:
            parser.error("--n-grid is required when no --config is given")
        cfg = SweepConfig(n_grid=tuple(args.n_grid), seeds=args.seeds, epsilon=args.epsilon,
                          master_seed=args.seed)
    if args.output:
        cfg = replace(cfg, output_path=args.output)
    return cfg


def cmd_sweep(args, parser):
    cfg = _study_config(args, parser)
    if args.workers:
        cfg = replace(cfg, workers=args.workers)
    summary, violations = run_sweep_to_files(cfg)
    if not cfg.output_path:
        _emit(summary, None)
    return EXIT_THRESHOLD if violations else 0


def cmd_event_study(args, parser):
    cfg = _study_config(args, parser)
    res = event_probability_study(cfg)
    if cfg.output_path:
        write_json(res, cfg.output_path)
    else:
        _emit(res, None)
    return 0 if all(r["passes"] for r in res["rows"]) else EXIT_THRESHOLD


def cmd_scaling_study(args, parser):
    cfg = _study_config(args, parser)
    res = sum_scaling_study(cfg)
    if cfg.output_path:
        write_json(res, cfg.output_path)
    else:
        _emit(res, None)
    return 0


def bessel_table() -> list[dict]:
    rows = []
    for a in BESSEL_A:
        for b in BESSEL_B:
            q, c = bessel_identity(a, b)
            rel = abs(q - c) / abs(c)
            rows.append({"a": str(a), "b": str(b), "quadrature": [q.real, q.imag],
                         "closed_form": [c.real, c.imag], "rel_error": rel,
                         "pass": rel <= BESSEL_TOL})
    return rows


def cmd_bessel_selftest(args, parser):
    rows = bessel_table()
    worst = max(r["rel_error"] for r in rows)
    ok = all(r["pass"] for r in rows)
    _emit({"rows": rows, "max_rel_error": worst, "tolerance": BESSEL_TOL, "pass": ok}, args.output)
    return 0 if ok else EXIT_THRESHOLD


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sskoverlap", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action=_VersionAction, help="print build metadata as JSON")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="draw a disorder sample")
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--sampler", choices=("dense", "fast"), default="dense")
    p.add_argument("--output")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("check-event", help="clause-by-clause membership in E_eps")
    _add_sample_source(p)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--o-constant", type=_positive_float, default=1.0, dest="o_constant")
    p.add_argument("--output")
    p.set_defaults(func=cmd_check_event)

    p = sub.add_parser("solve", help="critical points of G and G_M")
    _add_sample_source(p)
    _add_params(p)
    p.add_argument("--log-partition", action="store_true", dest="log_partition")
    p.add_argument("--output")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("mgf", help="<exp(xi sqrt(N) M)> by contour, closed form or Monte Carlo")
    _add_sample_source(p)
    _add_params(p)
    _add_contour(p)
    p.add_argument("--method", choices=("contour", "theorem", "mc"), default="contour")
    p.add_argument("--n1", type=float, help="|n_1| for --method theorem without a sample")
    p.add_argument("--n-samples", type=_positive_int, default=10 ** 6, dest="n_samples")
    p.add_argument("--batch", type=_positive_int, default=100_000)
    p.add_argument("--dump-contour", dest="dump_contour", help="write the sampled path as CSV")
    p.add_argument("--output")
    p.set_defaults(func=cmd_mgf)

    p = sub.add_parser("formulas", help="closed-form limits for given (T, H, xi, |n_1|)")
    temp = p.add_mutually_exclusive_group(required=True)
    temp.add_argument("--t", type=_positive_float)
    temp.add_argument("--beta", type=_positive_float)
    field = p.add_mutually_exclusive_group()
    field.add_argument("--bigH", type=_nonneg_float)
    field.add_argument("--h-abs", type=_nonneg_float, dest="h_abs")
    p.add_argument("--n", type=_positive_int, help="only needed with --h-abs")
    p.add_argument("--xi", type=float, default=0.0)
    p.add_argument("--n1", type=_nonneg_float, required=True)
    p.add_argument("--output")
    p.set_defaults(func=cmd_formulas)

    p = sub.add_parser("oracle", help="Monte Carlo Gibbs oracle (field or replica overlap)")
    _add_sample_source(p)
    _add_params(p)
    p.add_argument("--replica", action="store_true")
    p.add_argument("--xi-r", type=float, dest="xi_r", help="replica MGF argument (defaults to --xi)")
    p.add_argument("--n-samples", type=_positive_int, default=10 ** 6, dest="n_samples")
    p.add_argument("--batch", type=_positive_int, default=100_000)
    p.add_argument("--output")
    p.set_defaults(func=cmd_oracle)

    for name, func, helptext in (
            ("sweep", cmd_sweep, "convergence sweep to CSV + JSON"),
            ("event-study", cmd_event_study, "empirical P(E_eps) with Wilson intervals"),
            ("scaling-study", cmd_scaling_study, "scaling of the m = 1 resolvent sums")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", help="SweepConfig JSON file")
        p.add_argument("--seed", type=int, help="master seed (overrides the config)")
        p.add_argument("--n-grid", type=_int_list, dest="n_grid")
        p.add_argument("--seeds", type=_positive_int, default=200)
        p.add_argument("--epsilon", type=float, default=0.25)
        p.add_argument("--output", help="output path (sweep appends .csv and .json)")
        if name == "sweep":
            p.add_argument("--workers", type=_positive_int)
        p.set_defaults(func=func)

    p = sub.add_parser("bessel-selftest", help="quadrature vs closed form on a 5x5 (a, b) grid")
    p.add_argument("--output")
    p.set_defaults(func=cmd_bessel_selftest)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "oracle" and args.seed is None:
        parser.error("--seed is required for the Monte Carlo oracle")
    if args.command == "mgf" and args.method == "mc" and args.seed is None:
        parser.error("--seed is required for --method mc")
    try:
        code = args.func(args, parser)
    except (ArithmeticError, ValueError, RuntimeError, OSError) as exc:
        json.dump({"error": type(exc).__name__, "message": str(exc), "command": args.command},
                  sys.stderr)
        sys.stderr.write("\n")
        return EXIT_COMPUTE
    return code or 0


if __name__ == "__main__":
    sys.exit(main())
