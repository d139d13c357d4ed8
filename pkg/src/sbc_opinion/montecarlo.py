"""Monte Carlo estimates of tail probabilities and statistical checks.

Replicates are processed in fixed blocks of ``CHUNK`` consecutive ids.  The
blocks do not depend on the number of workers and all reductions are sums
of integers or are done in block order, so every result here is
bit-identical for any ``workers`` value.
"""

from __future__ import annotations

import csv
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats

from .bounds import TailQuery
from .dynamics import simulate_diff_batch
from .errors import ConditioningError, InsufficientSamplesError
from .model import NoiseSpec, TwoAgentConfig, subgaussian_parameter
from .rng import AUX, SeedPolicy

CHUNK = 2048


def replicate_chunks(n_replicates: int, size: int = CHUNK) -> list[range]:
    return [range(i, min(i + size, n_replicates))
            for i in range(0, n_replicates, size)]


def _call(task):
    fn, *args = task
    return fn(*args)


def _run(tasks: list, workers: int) -> list:
    if workers <= 1 or len(tasks) <= 1:
        return [_call(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_call, tasks))


def clopper_pearson(n_success: int, n: int, level: float = 0.99) -> tuple[float, float]:
    """Exact two-sided binomial confidence interval."""
    a = 1.0 - level
    lo = 0.0 if n_success == 0 else float(stats.beta.ppf(a / 2, n_success, n - n_success + 1))
    hi = 1.0 if n_success == n else float(stats.beta.ppf(1 - a / 2, n_success + 1, n - n_success))
    return lo, hi


def _require_origin(config: TwoAgentConfig):
    if config.y0 != 0:
        raise ConditioningError(
            f"tail estimates are conditioned on Y(0) = 0, got y0={config.y0}")


# ---------------------------------------------------------------------------
# tail probabilities
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TailEstimate:
    t: int
    k: float
    n_replicates: int
    n_exceed: int
    ci_low: float
    ci_high: float
    level: float
    master_seed: int
    threshold_scale: float | None = None
    threshold_decay: float | None = None

    @property
    def p_hat(self) -> float:
        return self.n_exceed / self.n_replicates

    @property
    def ci(self) -> tuple[float, float]:
        return self.ci_low, self.ci_high


def _count_exceed(config, seed, reps, t, k):
    y = simulate_diff_batch(config, seed, reps, [t])[:, 0]
    return int(np.count_nonzero(np.abs(y) >= k))


def _tail_tasks(config, seed, n_replicates, t, k):
    return [(_count_exceed, config, seed, reps, int(t), k)
            for reps in replicate_chunks(n_replicates)]


def _make_estimate(t, k, n, count, level, seed, query=None):
    lo, hi = clopper_pearson(count, n, level)
    return TailEstimate(
        int(t), float(k), n, count, lo, hi, level, seed.master_seed,
        query.threshold_scale if query else None,
        query.threshold_decay if query else None)


def estimate_tail(config: TwoAgentConfig, t: int, k: float, n_replicates: int,
                  seed: SeedPolicy, workers: int = 1, level: float = 0.99,
                  query: TailQuery | None = None) -> TailEstimate:
    """Estimate P(|Y(t)| >= k | Y(0) = 0) from independent replicates."""
    _require_origin(config)
    if n_replicates < 1:
        raise ValueError("need at least one replicate")
    counts = _run(_tail_tasks(config, seed, n_replicates, t, k), workers)
    return _make_estimate(t, k, n_replicates, sum(counts), level, seed, query)


def estimate_query_tail(config: TwoAgentConfig, query: TailQuery,
                        n_replicates: int, seed: SeedPolicy, workers: int = 1,
                        level: float = 0.99) -> TailEstimate:
    return estimate_tail(config, int(query.t), query.k, n_replicates, seed,
                         workers, level, query)


def _count_exceed_pair(config, seed, reps, t, k):
    y, walk = simulate_diff_batch(config, seed, reps, [t], with_walk=True)
    return (int(np.count_nonzero(np.abs(y[:, 0]) >= k)),
            int(np.count_nonzero(np.abs(walk[:, 0]) >= k)))


def estimate_tail_with_walk(config: TwoAgentConfig, t: int, k: float,
                            n_replicates: int, seed: SeedPolicy, workers: int = 1,
                            level: float = 0.99, query: TailQuery | None = None
                            ) -> tuple[TailEstimate, TailEstimate]:
    """Tail estimates for Y and for the G = 0 walk from one simulation.

    The walk shares each replicate's noise stream, so its estimate equals
    ``estimate_tail`` on the zero-influence config with the same seed.
    """
    _require_origin(config)
    if n_replicates < 1:
        raise ValueError("need at least one replicate")
    tasks = [(_count_exceed_pair, config, seed, reps, int(t), k)
             for reps in replicate_chunks(n_replicates)]
    parts = _run(tasks, workers)
    cy = sum(p[0] for p in parts)
    cw = sum(p[1] for p in parts)
    return (_make_estimate(t, k, n_replicates, cy, level, seed, query),
            _make_estimate(t, k, n_replicates, cw, level, seed, query))


def _count_exceed_many(config, seed, reps, times, ks):
    uniq = sorted(set(times))
    y = simulate_diff_batch(config, seed, reps, uniq)
    col = {t: j for j, t in enumerate(uniq)}
    return [int(np.count_nonzero(np.abs(y[:, col[t]]) >= k))
            for t, k in zip(times, ks)]


def estimate_tail_curve(config: TwoAgentConfig, points: Sequence[tuple[int, float]],
                        n_replicates: int, seed: SeedPolicy, workers: int = 1,
                        level: float = 0.99) -> list[TailEstimate]:
    """Tail estimates at several (t, k) points from one set of trajectories.

    Each estimate equals the ``estimate_tail`` call with the same seed; the
    points are just read off the same simulated paths.
    """
    _require_origin(config)
    if n_replicates < 1:
        raise ValueError("need at least one replicate")
    if not points:
        return []
    times = [int(t) for t, _ in points]
    ks = [float(k) for _, k in points]
    tasks = [(_count_exceed_many, config, seed, reps, times, ks)
             for reps in replicate_chunks(n_replicates)]
    totals = np.sum(_run(tasks, workers), axis=0)
    return [_make_estimate(t, k, n_replicates, int(c), level, seed)
            for t, k, c in zip(times, ks, totals)]


def run_ensemble(jobs: Sequence[tuple[TwoAgentConfig, TailQuery]],
                 n_replicates: int, seed: SeedPolicy, workers: int = 1,
                 level: float = 0.99) -> list:
    """Estimate the tail for every (config, query) job in one pool.

    Work is split by replicate block across all jobs.  A job that fails
    validation yields its exception in place of a TailEstimate; the other
    jobs still run.
    """
    tasks, owners, results = [], [], [None] * len(jobs)
    for j, (config, query) in enumerate(jobs):
        try:
            _require_origin(config)
            if n_replicates < 1:
                raise ValueError("need at least one replicate")
            job_tasks = _tail_tasks(config, seed, n_replicates, int(query.t), query.k)
        except Exception as exc:  # reported per job
            results[j] = exc
            continue
        tasks.extend(job_tasks)
        owners.extend([j] * len(job_tasks))
    counts = _run(tasks, workers)
    totals = {}
    for j, c in zip(owners, counts):
        totals[j] = totals.get(j, 0) + c
    for j, total in totals.items():
        query = jobs[j][1]
        results[j] = _make_estimate(query.t, query.k, n_replicates, total,
                                    level, seed, query)
    return results


@dataclass(frozen=True)
class EnvelopeEstimate:
    t_start: int
    t_end: int
    n_replicates: int
    n_exceed: int
    ci_low: float
    ci_high: float
    level: float
    master_seed: int

    @property
    def p_hat(self) -> float:
        return self.n_exceed / self.n_replicates


def _envelope_chunk(config, seed, reps, t_start, t_end, scale, decay):
    times = np.arange(t_start, t_end + 1)
    y = simulate_diff_batch(config, seed, reps, times)
    env = scale * np.power(times.astype(float), 0.5 - decay)
    return int(np.count_nonzero((np.abs(y) >= env).any(axis=1)))


def estimate_envelope_exceedance(config: TwoAgentConfig, scale: float, decay: float,
                                 t_start: int, t_end: int, n_replicates: int,
                                 seed: SeedPolicy, workers: int = 1,
                                 level: float = 0.99) -> EnvelopeEstimate:
    """Estimate P(|Y(tau)| >= scale * tau**(1/2 - decay) for some tau in
    [t_start, t_end]) by scanning each trajectory."""
    _require_origin(config)
    if t_start < 1 or t_end < t_start:
        raise ValueError("need 1 <= t_start <= t_end")
    tasks = [(_envelope_chunk, config, seed, reps, t_start, t_end, scale, decay)
             for reps in replicate_chunks(n_replicates)]
    count = sum(_run(tasks, workers))
    lo, hi = clopper_pearson(count, n_replicates, level)
    return EnvelopeEstimate(t_start, t_end, n_replicates, count, lo, hi, level,
                            seed.master_seed)


# ---------------------------------------------------------------------------
# stochastic ordering against the zero-influence walk
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OrderingReport:
    t: int
    n_replicates: int
    levels: np.ndarray
    freq_y: np.ndarray
    freq_walk: np.ndarray
    margin: np.ndarray

    @property
    def ok(self) -> np.ndarray:
        return self.freq_y <= self.freq_walk + self.margin

    @property
    def passed(self) -> bool:
        return bool(self.ok.all())


def _ordering_chunk(config, seed, reps, t, levels):
    y, walk = simulate_diff_batch(config, seed, reps, [t], with_walk=True)
    ay, aw = np.abs(y[:, 0]), np.abs(walk[:, 0])
    above_y = (ay[:, None] > levels[None, :]).sum(axis=0)
    above_w = (aw[:, None] > levels[None, :]).sum(axis=0)
    return above_y, above_w


def default_levels(noise: NoiseSpec, t: int, n: int = 32) -> np.ndarray:
    """Log-spaced levels over [0.1, 5] standard deviations of Y'(t)."""
    sd = math.sqrt(t * noise.diff_variance)
    return np.geomspace(0.1 * sd, 5 * sd, n)


def check_stochastic_ordering(config: TwoAgentConfig, t: int, n_replicates: int,
                              seed: SeedPolicy, levels=None, level: float = 0.99,
                              workers: int = 1) -> OrderingReport:
    """Compare survival frequencies of |Y(t)| and of the G = 0 walk |Y'(t)|.

    Both are driven by the same noise draws in each replicate.  A level
    fails only if freq(|Y| > l) exceeds freq(|Y'| > l) by more than the
    one-sided two-proportion tolerance at ``level``.
    """
    _require_origin(config)
    levels = default_levels(config.noise, t) if levels is None else np.asarray(levels, float)
    tasks = [(_ordering_chunk, config, seed, reps, int(t), levels)
             for reps in replicate_chunks(n_replicates)]
    parts = _run(tasks, workers)
    cy = sum(p[0] for p in parts)
    cw = sum(p[1] for p in parts)
    n = n_replicates
    fy, fw = cy / n, cw / n
    z = stats.norm.ppf(level)
    margin = z * np.sqrt((fy * (1 - fy) + fw * (1 - fw)) / n)
    return OrderingReport(int(t), n, levels, fy, fw, margin)


# ---------------------------------------------------------------------------
# conditional MGF restriction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConditionalMGFResult:
    lam: float
    mgf_current: float        # E[exp(lam Y(t)) | A_t]
    mgf_previous: float       # E[exp(lam Y(t)) | A_{t-1}]
    accepted_current: int
    accepted_previous: int
    n_replicates: int
    diff_quantiles: tuple[float, float]
    passed: bool

    @property
    def acceptance_rates(self) -> tuple[float, float]:
        n = self.n_replicates
        return self.accepted_current / n, self.accepted_previous / n


def _paths_chunk(config, seed, reps, t):
    return simulate_diff_batch(config, seed, reps, np.arange(t + 1))


def check_conditional_mgf(config: TwoAgentConfig, t: int, lam: float,
                          envelope_excess: float, burn_in: int,
                          n_replicates: int, seed: SeedPolicy,
                          envelope_scale: float | None = None,
                          level: float = 0.99, min_accepted: int = 100,
                          n_boot: int = 400, workers: int = 1) -> ConditionalMGFResult:
    """Check that restricting to the envelope event does not raise the MGF.

    A_s is the event |Y(tau)| <= D * tau**(1/2 + envelope_excess) for all
    tau in [burn_in, s].  Both conditional expectations are estimated by
    keeping the trajectories inside the event.  The check fails only if
    the bootstrap lower quantile of the difference is above zero.

    Raises InsufficientSamplesError when fewer than ``min_accepted``
    trajectories lie in A_t.
    """
    _require_origin(config)
    if lam < 0:
        raise ValueError("lam must be >= 0")
    if not 0 <= burn_in <= t:
        raise ValueError("need 0 <= burn_in <= t")
    if envelope_scale is None:
        envelope_scale = config.noise.diff_bound
        if envelope_scale is None:
            envelope_scale = math.sqrt(subgaussian_parameter(config.noise))
    tasks = [(_paths_chunk, config, seed, reps, int(t))
             for reps in replicate_chunks(n_replicates)]
    paths = np.concatenate(_run(tasks, workers))
    taus = np.arange(t + 1, dtype=float)
    with np.errstate(invalid="ignore"):
        env = envelope_scale * np.power(taus, 0.5 + envelope_excess)
    inside = np.abs(paths) <= env
    prev = inside[:, burn_in:t].all(axis=1)
    cur = prev & inside[:, t]
    n_cur, n_prev = int(cur.sum()), int(prev.sum())
    if n_cur < min_accepted:
        raise InsufficientSamplesError(
            f"only {n_cur} trajectories satisfy the envelope event "
            f"(need {min_accepted})", accepted=n_cur, floor=min_accepted)
    f = np.exp(lam * paths[:, t])
    lhs = float(f[cur].mean())
    rhs = float(f[prev].mean())

    rng = seed.generator(0, AUX)
    n = len(f)
    diffs = np.empty(n_boot)
    for b in range(n_boot):
        idx = rng.integers(0, n, n)
        fb, cb, pb = f[idx], cur[idx], prev[idx]
        diffs[b] = fb[cb].mean() - fb[pb].mean() if cb.any() else 0.0
    a = 1.0 - level
    q_lo, q_hi = np.quantile(diffs, [a, 1 - a])
    passed = not (lhs > rhs and q_lo > 0)
    return ConditionalMGFResult(lam, lhs, rhs, n_cur, n_prev, n_replicates,
                                (float(q_lo), float(q_hi)), passed)


# ---------------------------------------------------------------------------
# sub-Gaussian MGF envelopes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MGFCheck:
    lam: float
    estimate: float
    ci_low: float
    ci_high: float
    bound: float
    status: str               # "pass", "fail" or "skipped"

    @property
    def passed(self) -> bool:
        return self.status != "fail"


def check_mgf_envelope(noise: NoiseSpec, lambdas: Sequence[float], n_draws: int,
                       seed: SeedPolicy, level: float = 0.99,
                       max_rel_se: float = 0.05) -> list[MGFCheck]:
    """Compare the empirical MGF of the difference noise with
    exp(lam^2 sigma^2 / 2) at each lam.

    For unbounded noise a lam is skipped with a warning when the predicted
    relative standard error of the MGF estimate, sqrt((exp(lam^2 v) - 1) / n)
    for variance v, exceeds ``max_rel_se``.
    """
    x = noise.sample_diff(seed.generator(0, AUX), n_draws)
    s2 = subgaussian_parameter(noise)
    z = stats.norm.ppf(1 - (1 - level) / 2)
    out = []
    for lam in lambdas:
        bound = math.exp(lam * lam * s2 / 2)
        if noise.diff_bound is None:
            rel_se = math.sqrt(math.expm1(lam * lam * noise.diff_variance) / n_draws)
            if rel_se > max_rel_se:
                warnings.warn(f"MGF estimate at lambda={lam} is unreliable "
                              f"(relative s.e. ~{rel_se:.2g}); skipped")
                out.append(MGFCheck(lam, math.nan, math.nan, math.nan, bound, "skipped"))
                continue
        v = np.exp(lam * x)
        m = float(v.mean())
        half = z * float(v.std(ddof=1)) / math.sqrt(n_draws) if n_draws > 1 else 0.0
        status = "pass" if m - half <= bound else "fail"
        out.append(MGFCheck(lam, m, m - half, m + half, bound, status))
    return out


# ---------------------------------------------------------------------------
# CSV output
# ---------------------------------------------------------------------------

TAIL_COLUMNS = ["t", "k", "c", "beta", "n_replicates", "n_exceed", "p_hat",
                "ci_low", "ci_high", "master_seed"]
ORDERING_COLUMNS = ["level", "freq_y", "freq_walk", "margin", "ok"]


def fmt_value(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_tail_csv(estimates: Sequence[TailEstimate], fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(TAIL_COLUMNS)
    for e in estimates:
        w.writerow([fmt_value(v) for v in (
            e.t, e.k, e.threshold_scale, e.threshold_decay, e.n_replicates,
            e.n_exceed, e.p_hat, e.ci_low, e.ci_high, e.master_seed)])


def write_ordering_csv(report: OrderingReport, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(ORDERING_COLUMNS)
    for row in zip(report.levels, report.freq_y, report.freq_walk,
                   report.margin, report.ok):
        w.writerow([fmt_value(v) for v in row])
