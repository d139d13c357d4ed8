"""Command line front end.

    sbc-opinion simulate --config cfg.json [--reps N] [--out DIR]
    sbc-opinion bound --regime bounded --B 1 --D 1 --delta 0.5 --beta 0.125 \\
        --c 1 --t-grid 1e2:1e40:log10
    sbc-opinion compare --config cfg.json [--t-grid 256,1024] [--budget W]
    sbc-opinion verify --check {ordering,mgf,cond-mgf,all}
    sbc-opinion preset NAME [--root DIR]

Exit codes: 0 ok, 1 a verification check failed, 2 bad configuration or
arguments, 3 parameters outside the regime of a bound, 4 simulation budget
exceeded, 5 verification inconclusive.  SBC_SEED overrides the master seed.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import warnings

from .bounds import (
    BoundedRegime,
    BoundParams,
    SubGaussianRegime,
    TailQuery,
    bound_sweep,
    parse_t_grid,
    write_sweep_csv,
)
from .config import SEED_ENV, ExperimentConfig
from .dynamics import (
    simulate_diff_trajectory,
    simulate_multi_agent,
    write_diff_csv,
    write_opinions_csv,
)
from .errors import (
    BudgetExceededError,
    ConfigurationError,
    InsufficientSamplesError,
    RegimeError,
)
from .experiments import (
    PRESET_CONFIGS,
    compare_from_config,
    run_preset,
    write_compare_csv,
)
from .model import (
    Gaussian,
    NoiseLevel,
    NoiseSpec,
    PowerLaw,
    Rademacher,
    TruncatedGaussian,
    TwoAgentConfig,
    UniformBounded,
)
from .montecarlo import (
    check_conditional_mgf,
    check_mgf_envelope,
    check_stochastic_ordering,
)
from .rng import SeedPolicy

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_SCHEMA = 2
EXIT_REGIME = 3
EXIT_BUDGET = 4
EXIT_INCONCLUSIVE = 5

# fixed seeds of the verification checks (overridden by SBC_SEED)
VERIFY_SEEDS = {"ordering": 1001, "mgf": 1002, "cond-mgf": 1003}

log = logging.getLogger("sbc_opinion")


class UsageError(Exception):
    pass


def _env_seed() -> int | None:
    raw = os.environ.get(SEED_ENV)
    if not raw:
        return None
    try:
        return int(raw, 0)
    except ValueError:
        raise ConfigurationError(f"{SEED_ENV} must be an integer, got {raw!r}")


def _load(args) -> ExperimentConfig:
    return ExperimentConfig.from_file(args.config, getattr(args, "seed", None))


def _override(cfg: ExperimentConfig, **changes) -> ExperimentConfig:
    """Re-resolve the document with some run/query/output fields replaced."""
    doc = json.loads(json.dumps(cfg.doc))
    for dotted, value in changes.items():
        if value is None:
            continue
        section, key = dotted.split(".")
        doc.setdefault(section, {})[key] = value
    return ExperimentConfig.from_dict(doc, cfg.run["master_seed"])


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    cfg = _override(_load(args), **{"run.n_replicates": args.reps,
                                    "output.directory": args.out})
    cfg.check_regime()
    outdir = cfg.output["directory"]
    os.makedirs(outdir, exist_ok=True)
    reps = cfg.run["n_replicates"]
    width = max(5, len(str(reps - 1)))
    if cfg.is_multi_agent:
        mc = cfg.multi_agent()
        for r in range(reps):
            traj = simulate_multi_agent(mc, cfg.seed, r)
            write_opinions_csv(traj, os.path.join(outdir, f"opinions_{r:0{width}d}.csv"))
    else:
        tc = cfg.two_agent()
        for r in range(reps):
            traj = simulate_diff_trajectory(tc, cfg.seed, r)
            write_diff_csv(traj, os.path.join(outdir, f"trajectory_{r:0{width}d}.csv"))
    cfg.dump(os.path.join(outdir, "resolved_config.json"))
    print(f"wrote {reps} trajectories to {outdir}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# bound
# ---------------------------------------------------------------------------

def _require(args, *names):
    missing = [n for n in names if getattr(args, n.replace("-", "_")) is None]
    if missing:
        raise UsageError("missing " + ", ".join("--" + n for n in missing))


def cmd_bound(args) -> int:
    _require(args, "delta", "beta", "t-grid")
    if args.regime == "bounded":
        regime = BoundedRegime(args.delta)
        params = BoundParams(args.B, args.D)
    else:
        _require(args, "sigma", "beta-prime", "zeta")
        regime = SubGaussianRegime(args.delta, args.beta_prime, args.zeta)
        params = BoundParams(args.B, args.D, args.sigma)
    query = TailQuery(1, args.c, args.beta, regime)
    query.check_regime()
    rows = bound_sweep(query, params, parse_t_grid(args.t_grid), args.rigorous)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            write_sweep_csv(rows, fh)
    else:
        write_sweep_csv(rows, sys.stdout)
    return EXIT_OK


# ---------------------------------------------------------------------------
# compare
# ---------------------------------------------------------------------------

def cmd_compare(args) -> int:
    cfg = _override(_load(args), **{"run.n_replicates": args.reps,
                                    "run.budget": args.budget,
                                    "run.worker_count": args.workers,
                                    "query.t": args.t_grid,
                                    "output.directory": args.out})
    rows = compare_from_config(cfg)
    outdir = cfg.output["directory"]
    os.makedirs(outdir, exist_ok=True)
    with open(os.path.join(outdir, "compare.csv"), "w", newline="") as fh:
        write_compare_csv(rows, fh)
    cfg.dump(os.path.join(outdir, "resolved_config.json"))
    bad = [r.t for r in rows if r.violation]
    if bad:
        log.warning("confidence limit above the bound at t=%s", bad)
    print(f"wrote {len(rows)} rows to {os.path.join(outdir, 'compare.csv')}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

DEFAULT_ORDERING_CONFIG = TwoAgentConfig(
    PowerLaw(1.0, 1.5), NoiseSpec(UniformBounded(0.5)))
DEFAULT_COND_CONFIG = TwoAgentConfig(
    PowerLaw(1.0, 0.5), NoiseSpec(UniformBounded(0.5)))
MGF_FAMILIES = {
    "uniform": NoiseSpec(UniformBounded(1.0), NoiseLevel.DIFFERENCE),
    "gaussian": NoiseSpec(Gaussian(1.0), NoiseLevel.DIFFERENCE),
    "truncated_gaussian": NoiseSpec(TruncatedGaussian(1.0, 1.5), NoiseLevel.DIFFERENCE),
    "rademacher": NoiseSpec(Rademacher(1.0), NoiseLevel.DIFFERENCE),
}


def _seed_for(check: str, override: int | None) -> SeedPolicy:
    return SeedPolicy(VERIFY_SEEDS[check] if override is None else override)


def _verify_ordering(args, cfg, override):
    config = cfg.two_agent() if cfg else DEFAULT_ORDERING_CONFIG
    t = args.t or 256
    seed = _seed_for("ordering", override)
    rep = check_stochastic_ordering(config, t, args.reps or 20000, seed,
                                    workers=args.workers)
    worst = float((rep.freq_y - rep.freq_walk - rep.margin).max())
    return {"check": "ordering", "status": "pass" if rep.passed else "fail",
            "t": t, "n_replicates": rep.n_replicates,
            "master_seed": seed.master_seed, "levels": len(rep.levels),
            "worst_excess": worst}


def _verify_mgf(args, cfg, override):
    seed = _seed_for("mgf", override)
    lambdas = args.lam or [0.25, 0.5, 1.0, 2.0]
    families = {"config": cfg.noise} if cfg else MGF_FAMILIES
    results, status = {}, "pass"
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for name, noise in families.items():
            checks = check_mgf_envelope(noise, lambdas, args.draws, seed)
            results[name] = [{"lambda": c.lam, "estimate": c.estimate,
                              "bound": c.bound, "status": c.status} for c in checks]
            if not all(c.passed for c in checks):
                status = "fail"
    return {"check": "mgf", "status": status, "master_seed": seed.master_seed,
            "n_draws": args.draws, "families": results}


def _verify_cond_mgf(args, cfg, override):
    config = cfg.two_agent() if cfg else DEFAULT_COND_CONFIG
    seed = _seed_for("cond-mgf", override)
    t = args.t or 8
    lambdas = args.lam or [0.0, 0.1, 0.5]
    out, status = [], "pass"
    for lam in lambdas:
        try:
            res = check_conditional_mgf(config, t, lam, args.beta_prime, args.burn_in,
                                        args.reps or 20000, seed, workers=args.workers)
        except InsufficientSamplesError as exc:
            out.append({"lambda": lam, "status": "inconclusive", "reason": str(exc)})
            if status == "pass":
                status = "inconclusive"
            continue
        out.append({"lambda": lam, "status": "pass" if res.passed else "fail",
                    "mgf_current": res.mgf_current, "mgf_previous": res.mgf_previous,
                    "acceptance": list(res.acceptance_rates)})
        if not res.passed:
            status = "fail"
    return {"check": "cond-mgf", "status": status, "t": t, "burn_in": args.burn_in,
            "master_seed": seed.master_seed, "results": out}


_CHECKS = {"ordering": _verify_ordering, "mgf": _verify_mgf,
           "cond-mgf": _verify_cond_mgf}


def cmd_verify(args) -> int:
    cfg = _load(args) if args.config else None
    override = _env_seed() if args.seed is None else args.seed
    names = list(_CHECKS) if args.check == "all" else [args.check]
    reports = [_CHECKS[n](args, cfg, override) for n in names]
    statuses = {r["status"] for r in reports}
    overall = ("fail" if "fail" in statuses else
               "inconclusive" if "inconclusive" in statuses else "pass")
    report = {"status": overall, "checks": reports}
    text = json.dumps(report, indent=2, sort_keys=True, default=_json_default)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    print(text)
    return {"pass": EXIT_OK, "fail": EXIT_FAILED,
            "inconclusive": EXIT_INCONCLUSIVE}[overall]


def _json_default(v):
    if isinstance(v, float) and math.isnan(v):
        return None
    return float(v)


# ---------------------------------------------------------------------------
# preset
# ---------------------------------------------------------------------------

def cmd_preset(args) -> int:
    if args.name not in PRESET_CONFIGS:
        raise UsageError(f"unknown preset {args.name!r}; choose from: "
                         + ", ".join(sorted(PRESET_CONFIGS)))
    summary = run_preset(args.name, args.root, args.seed, args.reps, args.workers)
    print(json.dumps(summary, indent=2, sort_keys=True))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="sbc-opinion",
        description="Simulate stochastic bounded confidence dynamics and "
                    "evaluate their tail bounds.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="write trajectory CSVs")
    s.add_argument("--config", required=True)
    s.add_argument("--reps", type=int)
    s.add_argument("--out", help="output directory (overrides output.directory)")
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_simulate)

    b = sub.add_parser("bound", help="sweep the analytic tail bound over t")
    b.add_argument("--regime", choices=["bounded", "subgauss"], required=True)
    b.add_argument("--B", type=float, default=1.0)
    b.add_argument("--D", type=float, default=1.0)
    b.add_argument("--sigma", type=float)
    b.add_argument("--delta", type=float)
    b.add_argument("--beta", type=float)
    b.add_argument("--beta-prime", type=float)
    b.add_argument("--zeta", type=float)
    b.add_argument("--c", type=float, default=1.0)
    b.add_argument("--t-grid")
    b.add_argument("--rigorous", action="store_true",
                   help="use the full exponential MGF proxy")
    b.add_argument("--out", help="CSV path (default stdout)")
    b.set_defaults(func=cmd_bound)

    c = sub.add_parser("compare", help="simulation vs bound vs walk")
    c.add_argument("--config", required=True)
    c.add_argument("--t-grid", type=lambda s: [int(t) for t in parse_t_grid(s)])
    c.add_argument("--reps", type=int)
    c.add_argument("--budget", type=float, help="max replicate-steps")
    c.add_argument("--workers", type=int)
    c.add_argument("--out")
    c.add_argument("--seed", type=int)
    c.set_defaults(func=cmd_compare)

    v = sub.add_parser("verify", help="statistical checks of proof ingredients")
    v.add_argument("--check", choices=["ordering", "mgf", "cond-mgf", "all"],
                   default="all")
    v.add_argument("--config", help="two-agent config to check instead of the defaults")
    v.add_argument("--lambda", dest="lam", type=float, action="append")
    v.add_argument("--t", type=int)
    v.add_argument("--reps", type=int)
    v.add_argument("--draws", type=int, default=10 ** 6)
    v.add_argument("--beta-prime", type=float, default=0.1)
    v.add_argument("--burn-in", type=int, default=2)
    v.add_argument("--workers", type=int, default=1)
    v.add_argument("--seed", type=int)
    v.add_argument("--out", help="also write the JSON report here")
    v.set_defaults(func=cmd_verify)

    r = sub.add_parser("preset", help="run a named experiment bundle")
    r.add_argument("name")
    r.add_argument("--root", default="presets")
    r.add_argument("--reps", type=int)
    r.add_argument("--workers", type=int)
    r.add_argument("--seed", type=int)
    r.set_defaults(func=cmd_preset)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except RegimeError as exc:
        print(f"regime error: {exc}", file=sys.stderr)
        return EXIT_REGIME
    except BudgetExceededError as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (ConfigurationError, UsageError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA


if __name__ == "__main__":
    sys.exit(main())
