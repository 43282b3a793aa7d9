"""Command-line interface: run, sweep, selftest, constants."""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys

from .config import RunConfig, make_config
from .errors import EXIT_CONFIG, ParameterError, exit_code_for


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat KEY=VALUE config file")
    p.add_argument("--n", type=int)
    p.add_argument("--rho", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--strategy")
    p.add_argument("--k0", type=int)
    p.add_argument("--gamma", type=float)
    p.add_argument("--min-rounds", dest="min_rounds", type=int)
    p.add_argument("--xi-factor", dest="xi_factor", type=int)
    p.add_argument("--denoiser-b", dest="denoiser_b", type=float)
    p.add_argument("--master-seed", dest="master_seed", type=int)
    p.add_argument("--mode", choices=["oracle-seed", "tiny-enumeration"])
    p.add_argument("--spectral-mode", dest="spectral_mode", choices=["record", "strict"])
    p.add_argument("--selection-rule", dest="selection_rule",
                   choices=["scan-order", "max-stat"])
    p.add_argument("--trials", type=int)
    p.add_argument("--threshold-mult", dest="threshold_mult", type=float)
    p.add_argument("--clique-weight", dest="clique_weight", type=float)
    p.add_argument("--spike-scale", dest="spike_scale", type=float)
    p.add_argument("--max-resamples", dest="max_resamples", type=int)
    p.add_argument("--max-swaps", dest="max_swaps", type=int)
    p.add_argument("--bad-seed-candidates", dest="bad_seed_candidates", type=int)
    p.add_argument("--random-candidates", dest="random_candidates", type=int)
    p.add_argument("--output")
    p.add_argument("--dump-dir", dest="dump_dir")
    p.add_argument("--trace-cleaning", dest="trace_cleaning", action="store_true",
                   default=None)
    p.add_argument("--verbose", action="store_true", default=None)


_CONFIG_KEYS = [f.name for f in dataclasses.fields(RunConfig)]


def _config_from_args(args) -> RunConfig:
    overrides = {k: getattr(args, k, None) for k in _CONFIG_KEYS}
    return make_config(args.config, overrides)


def _cmd_run(args) -> int:
    from .pipeline import run_pipeline
    from .rng import child

    cfg = _config_from_args(args)
    worst = 0
    for trial in range(cfg.trials):
        trial_cfg = cfg
        if cfg.trials > 1:
            kw = cfg.as_dict()
            kw.update(master_seed=child(cfg.master_seed, trial), trials=1,
                      output=(f"{cfg.output}.{trial}" if cfg.output else None))
            trial_cfg = RunConfig(**kw).validate()
        record = run_pipeline(trial_cfg)
        line = {"trial": trial, "status": record["status"]}
        if record["status"] == "ok":
            line.update(overlap_final=record["final"]["overlap_final"],
                        selected=record["final"]["selected_label"])
            for cand in record["candidates"]:
                if cand["label"] == "oracle":
                    line.update(overlap_lap=cand["overlap_lap"],
                                overlap_refine=cand["overlap_refine"])
        else:
            line["error"] = record["error"]
        print(json.dumps(line))
        worst = max(worst, record["exit_code"])
    return worst


def _parse_list(text, cast):
    return [cast(x) for x in text.split(",") if x.strip() != ""]


def _cmd_sweep(args) -> int:
    from .pipeline import sweep

    cfg = _config_from_args(args)
    ns = _parse_list(args.ns, int) if args.ns else [cfg.n]
    rhos = _parse_list(args.rhos, float) if args.rhos else [cfg.rho]
    epsilons = _parse_list(args.epsilons, float) if args.epsilons else [cfg.epsilon]
    strategies = _parse_list(args.strategies, str) if args.strategies else [cfg.strategy]
    rows = sweep(cfg, ns, rhos, epsilons, strategies, trials=cfg.trials,
                 csv_path=args.csv, summary_path=args.summary,
                 workers=args.workers)
    failed = [r for r in rows if r["status"] != "ok"]
    print(f"sweep: {len(rows)} rows, {len(failed)} failed")
    return 0 if not failed else 1


def _cmd_constants(args) -> int:
    from .denoiser import (build_schedule, growth_ratio_condition, lambda_bound,
                           make_denoiser, reference_k0_bound, phi_map,
                           phi_second_deriv_at_zero)
    from .refine import compute_alpha, compute_psi

    cfg = _config_from_args(args)
    d = make_denoiser(cfg.denoiser_b)
    out = {
        "denoiser_b": cfg.denoiser_b,
        "a1": d.a1,
        "phi_second_deriv_at_zero": phi_second_deriv_at_zero(d),
        "c2": phi_second_deriv_at_zero(d) / 2.0,
        "lambda_cap": lambda_bound(d),
        "eps0": phi_map(d, cfg.rho / 2.0),
        "reference_k0_bound": reference_k0_bound(cfg.rho, d),
        "eq25_ratio_at_k0": growth_ratio_condition(cfg.rho, d, cfg.k0),
        "alpha": compute_alpha(),
        "psi_rho": compute_psi(cfg.rho),
        "delta": compute_psi(cfg.rho) * cfg.n / 10.0,
        "t_star": build_schedule(cfg.rho, cfg.n, cfg.k0, "practical", d,
                                 gamma=cfg.gamma, min_rounds=cfg.min_rounds).t_star,
    }
    print(json.dumps(out, indent=2))
    return 0


def _cmd_selftest(args) -> int:
    """Fast property checks runnable without pytest."""
    import numpy as np

    from .assign import AssignmentProblem, solve_lap
    from .denoiser import make_denoiser, phi_map, phi_second_deriv_at_zero
    from .model import generate, overlap
    from .preprocess import leading_singular_triple, spectral_clean
    from .refine import compute_alpha, compute_psi

    checks = []

    d = make_denoiser()
    nodes, weights = np.polynomial.hermite.hermgauss(200)
    x = math.sqrt(2.0) * nodes
    w = weights / math.sqrt(math.pi)
    checks.append(("denoiser mean zero", abs(float(w @ d(x))) < 1e-10))
    checks.append(("denoiser unit variance", abs(float(w @ (d(x) ** 2)) - 1.0) < 1e-10))
    checks.append(("phi(1) = 1", abs(phi_map(d, 1.0) - 1.0) < 1e-10))
    checks.append(("phi''(0) > 0", phi_second_deriv_at_zero(d) > 0))

    rng = np.random.default_rng(0)
    m = rng.standard_normal((40, 40))
    sig, _, _, _ = leading_singular_triple(m, method="power")
    sig_ref = float(np.linalg.svd(m, compute_uv=False)[0])
    checks.append(("power iteration vs dense SVD", abs(sig - sig_ref) / sig_ref < 1e-8))

    inst = generate(200, 0.9, "uniform-random", 7)
    checks.append(("instance symmetric", bool(np.allclose(inst.a, inst.a.T))))
    checks.append(("zero diagonal", float(np.abs(np.diag(inst.a)).max()) == 0.0))
    checks.append(("overlap of truth", overlap(inst.pi_star, inst.pi_star) == 1.0))

    cleaned, zeroed = spectral_clean(np.array([[0.0, 20 * math.sqrt(2)],
                                               [20 * math.sqrt(2), 0.0]]), seed=3)
    checks.append(("cleaning 2x2 example", len(zeroed) == 1
                   and float(np.abs(cleaned).max()) == 0.0))

    import itertools
    score = rng.standard_normal((6, 6))
    sigma = solve_lap(AssignmentProblem(score, np.arange(6), np.arange(6)))
    best = max(sum(score[i, p[i]] for i in range(6))
               for p in itertools.permutations(range(6)))
    checks.append(("LAP matches brute force", abs(score[np.arange(6), sigma].sum() - best) < 1e-9))

    a = compute_alpha()
    checks.append(("alpha value", abs(a - 0.15865525393145707) < 1e-12))
    checks.append(("psi(0) = alpha^2", abs(compute_psi(0.0) - a * a) < 1e-10))
    checks.append(("psi(1) = alpha", abs(compute_psi(1.0) - a) < 1e-12))

    failed = 0
    for name, ok in checks:
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
        failed += 0 if ok else 1
    return 0 if failed == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wigmatch",
        description="Robust matching of correlated Gaussian Wigner matrices")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one pipeline run (or --trials repeats)")
    _add_config_flags(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="grid experiment over rho/epsilon/n/strategy")
    _add_config_flags(p_sweep)
    p_sweep.add_argument("--ns", help="comma-separated n values")
    p_sweep.add_argument("--rhos", help="comma-separated rho values")
    p_sweep.add_argument("--epsilons", help="comma-separated epsilon values")
    p_sweep.add_argument("--strategies", help="comma-separated strategy names")
    p_sweep.add_argument("--csv", help="per-row CSV output path")
    p_sweep.add_argument("--summary", help="JSON summary output path")
    p_sweep.add_argument("--workers", type=int, default=None,
                         help="worker processes (default WIGMATCH_WORKERS or 1)")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_const = sub.add_parser("constants", help="print derived constants incl. the "
                                               "reference seed-size bound")
    _add_config_flags(p_const)
    p_const.set_defaults(func=_cmd_constants)

    p_self = sub.add_parser("selftest", help="fast built-in property checks")
    _add_config_flags(p_self)
    p_self.set_defaults(func=_cmd_selftest)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ParameterError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # map numeric/spectral failures to exit codes
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exit_code_for(exc)


if __name__ == "__main__":
    sys.exit(main())
