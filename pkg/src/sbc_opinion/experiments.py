"""Experiment drivers shared by the command line and the demo scripts.

``compare`` joins, on a grid of horizons, the Monte Carlo tail of Y(t), the
tail of the zero-influence walk driven by the same noise, the analytic
bound and the plain sub-Gaussian tail of the noise sum.  Presets bundle a
config with a fixed seed and write their outputs to one directory.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .bounds import (
    BoundParams,
    TailQuery,
    baseline_walk_tail,
    bound_sweep,
    parse_t_grid,
    tail_bound,
    write_sweep_csv,
)
from .config import ExperimentConfig
from .dynamics import (
    simulate_diff_batch,
    simulate_multi_agent,
    write_opinions_csv,
)
from .errors import BudgetExceededError, RegimeError
from .montecarlo import estimate_tail_with_walk, fmt_value, replicate_chunks
from .model import HardThreshold, TwoAgentConfig
from .rng import SeedPolicy

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# analytic bound vs simulation
# ---------------------------------------------------------------------------

COMPARE_COLUMNS = [
    "t", "k", "n_replicates", "n_exceed", "p_hat", "ci_low", "ci_high",
    "walk_p_hat", "walk_ci_low", "walk_ci_high", "log_bound", "bound",
    "vacuous", "baseline_tail", "violation", "master_seed",
]


@dataclass(frozen=True)
class CompareRow:
    t: int
    k: float
    n_replicates: int
    n_exceed: int
    p_hat: float
    ci_low: float
    ci_high: float
    walk_p_hat: float
    walk_ci_low: float
    walk_ci_high: float
    log_bound: float | None
    bound: float | None
    vacuous: bool | None
    baseline_tail: float
    violation: bool
    master_seed: int


def check_budget(t_values: Sequence[int], n_replicates: int, budget: float) -> None:
    work = sum(int(t) for t in t_values) * n_replicates
    if work > budget:
        # largest prefix of the grid that fits
        fit, total = [], 0
        for t in sorted(int(t) for t in t_values):
            if (total + t) * n_replicates > budget:
                break
            total += t
            fit.append(t)
        hint = ",".join(map(str, fit)) if fit else "none (lower n_replicates)"
        raise BudgetExceededError(
            f"simulation work {work:.3g} replicate-steps exceeds budget "
            f"{budget:.3g}; try t grid {hint}")


def compare(config: TwoAgentConfig, query: TailQuery | None,
            params: BoundParams | None, t_values: Sequence[int],
            n_replicates: int, seed: SeedPolicy, workers: int = 1,
            level: float = 0.99, budget: float = math.inf,
            rigorous: bool = False) -> list[CompareRow]:
    """Empirical tail, walk tail, analytic bound and baseline per t.

    ``violation`` is set when the bound is informative and the upper
    confidence limit of the empirical tail exceeds it.  Vacuous bounds can
    not be violated.
    """
    t_values = [int(t) for t in t_values]
    check_budget(t_values, n_replicates, budget)
    if query is not None and query.regime is not None:
        query.check_regime()
    rows = []
    for t in t_values:
        q = query.at(t) if query is not None else None
        if q is None:
            raise ValueError("compare needs a query to define the threshold")
        k = q.k
        est, walk = estimate_tail_with_walk(config, t, k, n_replicates, seed,
                                            workers, level, q)
        log_b = bound = vac = None
        if q.regime is not None and params is not None:
            try:
                ev = tail_bound(q, params, rigorous, check_regime=False)
                log_b, bound, vac = ev.log_bound, ev.probability, ev.vacuous
            except RegimeError as exc:
                log.warning("bound undefined at t=%d: %s", t, exc)
        violation = bool(vac is False and est.ci_high > bound)
        rows.append(CompareRow(
            t, k, n_replicates, est.n_exceed, est.p_hat, est.ci_low, est.ci_high,
            walk.p_hat, walk.ci_low, walk.ci_high, log_b, bound, vac,
            min(1.0, baseline_walk_tail(config.noise, t, k)), violation,
            seed.master_seed))
    return rows


def write_compare_csv(rows: Sequence[CompareRow], fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(COMPARE_COLUMNS)
    for r in rows:
        w.writerow([fmt_value(getattr(r, c)) for c in COMPARE_COLUMNS])


def compare_from_config(cfg: ExperimentConfig) -> list[CompareRow]:
    cfg.check_regime()
    params = cfg.bound_params() if cfg.has_bound_query() else None
    run = cfg.run
    return compare(cfg.two_agent(), cfg.tail_query(), params, cfg.t_values(),
                   run["n_replicates"], cfg.seed, run["worker_count"],
                   run["level"], run["budget"], cfg.query["rigorous"])


# ---------------------------------------------------------------------------
# growth of |Y(t)| in the unstable regime
# ---------------------------------------------------------------------------

def mean_abs_difference(config: TwoAgentConfig, times: Sequence[int],
                        n_replicates: int, seed: SeedPolicy) -> np.ndarray:
    """Average of |Y(t)| over replicates at each t in ``times``."""
    total = np.zeros(len(times))
    for reps in replicate_chunks(n_replicates):
        y = simulate_diff_batch(config, seed, reps, times)
        total += np.abs(y).sum(axis=0)
    return total / n_replicates


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------

PRESET_SEED = 20240601

_UNIFORM_HALF = {"family": "uniform", "half_width": 0.5, "level": "per_agent"}

PRESET_CONFIGS = {
    # p = 1/2, bounded noise: sublinear decay, both bounds apply
    "bounded-noise-regime": {
        "model": {"influence": {"family": "power_law", "scale": 1.0, "exponent": 0.5},
                  "noise": _UNIFORM_HALF},
        "query": {"t": [256, 1024, 4096], "c": 1.0, "beta": 0.125,
                  "regime": "bounded"},
        "run": {"n_replicates": 20000, "master_seed": PRESET_SEED},
    },
    # p = 0.8 read as 2 - 1.2, Gaussian difference noise; the bound turns
    # informative near t = 1e17
    "subgaussian-regime": {
        "model": {"influence": {"family": "power_law", "scale": 1.0, "exponent": 0.8},
                  "noise": {"family": "gaussian", "sigma": 1.0, "level": "difference"}},
        "query": {"t": [256, 1024, 4096], "c": 1.0, "beta": 0.05,
                  "regime": "subgauss", "beta_prime": 0.4, "zeta": 0.35},
        "run": {"n_replicates": 20000, "master_seed": PRESET_SEED},
    },
    "unstable-demo": {
        "model": {"influence": {"family": "power_law", "scale": 1.0, "exponent": 2.5},
                  "noise": _UNIFORM_HALF},
        "query": {"t": [256, 1024, 4096]},
        "run": {"n_replicates": 4000, "master_seed": PRESET_SEED},
    },
    "linear-special-case": {
        "model": {"influence": {"family": "constant", "value": 1.0},
                  "noise": {"family": "uniform", "half_width": 0.01},
                  "graph": {"random": {"n_vertices": 16, "edge_probability": 0.3}},
                  "initial": {"uniform": [-10.0, 10.0]},
                  "pairing": "random_maximal_matching",
                  "horizon": 400},
        "run": {"master_seed": PRESET_SEED},
    },
    "bounded-confidence-special-case": {
        "model": {"influence": {"family": "hard_threshold", "radius": 1.0},
                  "noise": {"family": "uniform", "half_width": 0.0},
                  "graph": {"random": {"n_vertices": 32, "edge_probability": 0.5}},
                  "initial": {"uniform": [0.0, 10.0]},
                  "pairing": "random_maximal_matching",
                  "horizon": 2000},
        "run": {"master_seed": PRESET_SEED},
    },
}

BOUND_SWEEP_GRID = "1e2:1e40:log10"


def _write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _regime_preset(cfg: ExperimentConfig, outdir: str) -> dict:
    rows = compare_from_config(cfg)
    with open(os.path.join(outdir, "compare.csv"), "w", newline="") as fh:
        write_compare_csv(rows, fh)
    sweep = bound_sweep(cfg.tail_query(), cfg.bound_params(),
                        parse_t_grid(BOUND_SWEEP_GRID), cfg.query["rigorous"])
    with open(os.path.join(outdir, "bounds.csv"), "w", newline="") as fh:
        write_sweep_csv(sweep, fh)
    return {
        "below_walk": all(r.p_hat < r.walk_p_hat for r in rows),
        "violations": sum(r.violation for r in rows),
        "first_informative_t": next(
            (r["t"] for r in sweep if r["vacuous"] is False), None),
    }


def _unstable_preset(cfg: ExperimentConfig, outdir: str) -> dict:
    times = [int(t) for t in cfg.t_values()]
    means = mean_abs_difference(cfg.two_agent(), times, cfg.run["n_replicates"],
                                cfg.seed)
    with open(os.path.join(outdir, "mean_abs.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "mean_abs_y"])
        for t, m in zip(times, means):
            w.writerow([t, repr(float(m))])
    return {"mean_abs_y": [float(m) for m in means],
            "growing": bool(np.all(np.diff(means) > 0))}


def _graph_preset(cfg: ExperimentConfig, outdir: str) -> dict:
    traj = simulate_multi_agent(cfg.multi_agent(), cfg.seed, 0)
    write_opinions_csv(traj, os.path.join(outdir, "opinions.csv"))
    x = traj.values
    spread = x.max(axis=0) - x.min(axis=0)
    summary = {"initial_spread": float(spread[0]), "final_spread": float(spread[-1])}
    infl = cfg.influence
    if isinstance(infl, HardThreshold):
        # groups further apart than the confidence radius never interact again
        gaps = np.diff(np.sort(x[:, -1]))
        summary["final_clusters"] = 1 + int(np.count_nonzero(gaps > infl.radius))
    return summary


_PRESET_RUNNERS: dict[str, Callable[[ExperimentConfig, str], dict]] = {
    "bounded-noise-regime": _regime_preset,
    "subgaussian-regime": _regime_preset,
    "unstable-demo": _unstable_preset,
    "linear-special-case": _graph_preset,
    "bounded-confidence-special-case": _graph_preset,
}


def run_preset(name: str, root: str = "presets", seed_override: int | None = None,
               n_replicates: int | None = None, workers: int | None = None) -> dict:
    """Run a named preset; outputs go to ``root/name``.  Returns a summary
    dict that is also written as summary.json."""
    if name not in PRESET_CONFIGS:
        raise KeyError(name)
    doc = json.loads(json.dumps(PRESET_CONFIGS[name]))
    outdir = os.path.join(root, name)
    doc.setdefault("output", {})["directory"] = outdir
    if n_replicates is not None:
        doc.setdefault("run", {})["n_replicates"] = n_replicates
    if workers is not None:
        doc.setdefault("run", {})["worker_count"] = workers
    cfg = ExperimentConfig.from_dict(doc, seed_override)
    os.makedirs(outdir, exist_ok=True)
    cfg.dump(os.path.join(outdir, "resolved_config.json"))
    summary = {"preset": name, "master_seed": cfg.run["master_seed"]}
    summary.update(_PRESET_RUNNERS[name](cfg, outdir))
    _write_json(os.path.join(outdir, "summary.json"), summary)
    return summary
