from __future__ import annotations

import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import optimize, stats

from sbc_opinion import (
    BoundedRegime,
    ConditioningError,
    Constant,
    Gaussian,
    InsufficientSamplesError,
    NoiseLevel,
    NoiseSpec,
    PowerLaw,
    Rademacher,
    SeedPolicy,
    TailQuery,
    TwoAgentConfig,
    UniformBounded,
    check_conditional_mgf,
    check_mgf_envelope,
    check_stochastic_ordering,
    clopper_pearson,
    estimate_envelope_exceedance,
    estimate_query_tail,
    estimate_tail,
    estimate_tail_curve,
    estimate_tail_with_walk,
    run_ensemble,
    simulate_diff_batch,
    zero_influence,
)
from sbc_opinion.montecarlo import (
    ORDERING_COLUMNS,
    TAIL_COLUMNS,
    replicate_chunks,
    write_ordering_csv,
    write_tail_csv,
)

UNIF = NoiseSpec(UniformBounded(0.5))
CFG = TwoAgentConfig(PowerLaw(1.0, 0.5), UNIF)


# --- Clopper-Pearson -------------------------------------------------------

def cp_by_root_finding(x, n, level):
    """Exact interval from its defining binomial tail equations."""
    a = (1 - level) / 2
    lo = 0.0 if x == 0 else optimize.brentq(
        lambda p: stats.binom.sf(x - 1, n, p) - a, 1e-15, 1 - 1e-15, xtol=1e-15)
    hi = 1.0 if x == n else optimize.brentq(
        lambda p: stats.binom.cdf(x, n, p) - a, 1e-15, 1 - 1e-15, xtol=1e-15)
    return lo, hi


@pytest.mark.parametrize("x,n", [(0, 10), (1, 10), (5, 10), (10, 10), (3, 1000),
                                 (500, 1000), (0, 100000)])
@pytest.mark.parametrize("level", [0.95, 0.99])
def test_clopper_pearson_matches_tail_equations(x, n, level):
    lo, hi = clopper_pearson(x, n, level)
    elo, ehi = cp_by_root_finding(x, n, level)
    assert lo == pytest.approx(elo, rel=1e-7, abs=1e-12)
    assert hi == pytest.approx(ehi, rel=1e-7, abs=1e-12)


def test_zero_count_upper_limit_closed_form():
    # with no successes the upper limit solves (1 - p)^n = (1 - level) / 2
    lo, hi = clopper_pearson(0, 100_000, 0.99)
    assert lo == 0.0
    assert hi == pytest.approx(1 - 0.005 ** (1 / 100_000), rel=1e-9)
    assert hi == pytest.approx(5.298e-5, rel=1e-3)


@given(st.integers(1, 500), st.data())
def test_clopper_pearson_contains_point_estimate(n, data):
    x = data.draw(st.integers(0, n))
    lo, hi = clopper_pearson(x, n)
    assert 0 <= lo <= x / n <= hi <= 1


# --- tail estimates --------------------------------------------------------

def test_zero_threshold_is_certain(seed):
    est = estimate_tail(CFG, 50, 0.0, 300, seed)
    assert est.n_exceed == 300 and est.p_hat == 1.0 and est.ci_high == 1.0


def test_always_merging_without_noise_never_exceeds(seed):
    cfg = TwoAgentConfig(Constant(1.0), NoiseSpec(UniformBounded(0.0)))
    est = estimate_tail(cfg, 50, 1e-12, 500, seed)
    assert est.n_exceed == 0 and est.ci_low == 0.0


def test_nonzero_start_is_rejected(seed):
    cfg = TwoAgentConfig(PowerLaw(1.0, 0.5), UNIF, 0, 1.0)
    with pytest.raises(ConditioningError):
        estimate_tail(cfg, 10, 1.0, 10, seed)
    with pytest.raises(ConditioningError):
        estimate_tail_with_walk(cfg, 10, 1.0, 10, seed)


def test_tail_counts_match_direct_simulation(seed):
    y = simulate_diff_batch(CFG, seed, range(5000), [100])[:, 0]
    est = estimate_tail(CFG, 100, 3.0, 5000, seed)
    assert est.n_exceed == int(np.count_nonzero(np.abs(y) >= 3.0))


def test_query_tail_records_threshold(seed):
    q = TailQuery(64, 1.5, 0.125, BoundedRegime(0.5))
    est = estimate_query_tail(CFG, q, 100, seed)
    assert est.k == pytest.approx(1.5 * 64 ** 0.375)
    assert (est.threshold_scale, est.threshold_decay) == (1.5, 0.125)


def test_walk_estimate_equals_zero_influence_estimate(seed):
    est, walk = estimate_tail_with_walk(CFG, 200, 4.0, 3000, seed)
    assert est == estimate_tail(CFG, 200, 4.0, 3000, seed)
    assert walk == estimate_tail(zero_influence(CFG), 200, 4.0, 3000, seed)


def test_tail_curve_equals_pointwise_estimates(seed):
    points = [(50, 2.0), (200, 4.0), (50, 1.0), (1, 0.5)]
    curve = estimate_tail_curve(CFG, points, 2500, seed)
    for (t, k), est in zip(points, curve):
        assert est.n_exceed == estimate_tail(CFG, t, k, 2500, seed).n_exceed
    assert estimate_tail_curve(CFG, [], 10, seed) == []


def test_chunks_cover_replicates_once():
    chunks = replicate_chunks(5000)
    ids = [r for c in chunks for r in c]
    assert ids == list(range(5000))
    assert all(len(c) == 2048 for c in chunks[:-1])


def test_workers_do_not_change_results(seed):
    a = estimate_tail(CFG, 64, 2.0, 5000, seed, workers=1)
    b = estimate_tail(CFG, 64, 2.0, 5000, seed, workers=2)
    assert a == b


# --- ensembles -------------------------------------------------------------

def test_ensemble_empty(seed):
    assert run_ensemble([], 10, seed) == []


def test_ensemble_single_equals_direct(seed):
    q = TailQuery(64, 1.0, 0.125)
    (res,) = run_ensemble([(CFG, q)], 3000, seed)
    assert res == estimate_query_tail(CFG, q, 3000, seed)


def test_ensemble_reports_failures_in_place(seed):
    bad = TwoAgentConfig(PowerLaw(1.0, 0.5), UNIF, 0, 2.0)
    q = TailQuery(32, 1.0, 0.125)
    res = run_ensemble([(CFG, q), (bad, q), (zero_influence(CFG), q)], 500, seed)
    assert isinstance(res[1], ConditioningError)
    assert res[0] == estimate_query_tail(CFG, q, 500, seed)
    assert res[2].n_exceed >= 0


def test_ensemble_workers_agree(seed):
    jobs = [(CFG, TailQuery(t, 1.0, 0.125)) for t in (16, 64)]
    assert run_ensemble(jobs, 3000, seed, workers=1) == run_ensemble(jobs, 3000, seed, workers=2)


# --- envelope exceedance ---------------------------------------------------

def test_envelope_matches_direct_scan(seed):
    est = estimate_envelope_exceedance(CFG, 0.5, 0.125, 10, 60, 2000, seed)
    times = np.arange(10, 61)
    y = simulate_diff_batch(CFG, seed, range(2000), times)
    env = 0.5 * times ** 0.375
    assert est.n_exceed == int(np.count_nonzero((np.abs(y) >= env).any(axis=1)))


def test_envelope_wider_window_not_less_likely(seed):
    a = estimate_envelope_exceedance(CFG, 1.0, 0.125, 10, 40, 2000, seed)
    b = estimate_envelope_exceedance(CFG, 1.0, 0.125, 10, 80, 2000, seed)
    assert b.n_exceed >= a.n_exceed


def test_envelope_rejects_bad_window(seed):
    with pytest.raises(ValueError):
        estimate_envelope_exceedance(CFG, 1.0, 0.1, 0, 5, 10, seed)


# --- stochastic ordering ---------------------------------------------------

@pytest.mark.parametrize("influence", [PowerLaw(1.0, 1.5), Constant(1.0), PowerLaw(0.3, 0.5)])
def test_ordering_holds_for_attracting_dynamics(influence, seed):
    cfg = TwoAgentConfig(influence, UNIF)
    rep = check_stochastic_ordering(cfg, 64, 20000, seed)
    assert rep.passed
    assert rep.ok.all()


def test_ordering_is_equality_without_influence(seed):
    rep = check_stochastic_ordering(zero_influence(CFG), 64, 5000, seed)
    np.testing.assert_array_equal(rep.freq_y, rep.freq_walk)


def test_ordering_at_level_zero_counts_nonzero_values(seed):
    rep = check_stochastic_ordering(CFG, 16, 2000, seed, levels=[0.0])
    assert rep.freq_walk[0] == 1.0


def test_ordering_csv(seed):
    rep = check_stochastic_ordering(CFG, 16, 500, seed, levels=[0.5, 1.0])
    buf = io.StringIO()
    write_ordering_csv(rep, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == ",".join(ORDERING_COLUMNS) and len(lines) == 3


# --- conditional MGF -------------------------------------------------------

def test_conditional_mgf_at_zero_lambda(seed):
    r = check_conditional_mgf(CFG, 8, 0.0, 0.1, 2, 2000, seed)
    assert r.mgf_current == r.mgf_previous == 1.0 and r.passed


def test_conditional_mgf_without_restriction_is_unconditional(seed):
    r = check_conditional_mgf(CFG, 8, 0.5, 0.1, 2, 2000, seed, envelope_scale=1e9)
    y = simulate_diff_batch(CFG, seed, range(2000), [8])[:, 0]
    assert r.accepted_current == r.accepted_previous == 2000
    assert r.mgf_current == pytest.approx(np.exp(0.5 * y).mean(), rel=1e-12)
    assert r.mgf_current == r.mgf_previous


def test_conditional_mgf_reports_insufficient_samples(seed):
    with pytest.raises(InsufficientSamplesError) as info:
        check_conditional_mgf(CFG, 8, 0.5, 0.1, 2, 200, seed, envelope_scale=1e-6)
    assert info.value.floor == 100


def test_conditional_mgf_rejects_negative_lambda(seed):
    with pytest.raises(ValueError):
        check_conditional_mgf(CFG, 8, -0.1, 0.1, 2, 200, seed)


# --- MGF envelopes ---------------------------------------------------------

def test_mgf_zero_lambda(seed):
    (c,) = check_mgf_envelope(NoiseSpec(Gaussian(1.0)), [0.0], 1000, seed)
    assert c.estimate == 1.0 and c.bound == 1.0 and c.status == "pass"


def test_mgf_rademacher_hits_cosh(seed):
    spec = NoiseSpec(Rademacher(1.0), NoiseLevel.DIFFERENCE)
    (c,) = check_mgf_envelope(spec, [1.0], 1_000_000, seed)
    assert c.ci_low <= math.cosh(1.0) <= c.ci_high
    assert c.bound == pytest.approx(math.exp(0.5)) and c.passed


def test_mgf_uniform_hits_sinh_ratio(seed):
    spec = NoiseSpec(UniformBounded(1.0), NoiseLevel.DIFFERENCE)
    (c,) = check_mgf_envelope(spec, [2.0], 1_000_000, seed)
    assert c.ci_low <= math.sinh(2.0) / 2 <= c.ci_high and c.passed


def test_mgf_skips_unreliable_gaussian_lambda(seed):
    spec = NoiseSpec(Gaussian(1.0), NoiseLevel.DIFFERENCE)
    with pytest.warns(UserWarning, match="unreliable"):
        checks = check_mgf_envelope(spec, [0.5, 5.0], 100_000, seed)
    assert checks[0].status == "pass"
    assert checks[1].status == "skipped" and checks[1].passed


def test_mgf_bounded_noise_is_never_skipped(seed):
    spec = NoiseSpec(UniformBounded(1.0), NoiseLevel.DIFFERENCE)
    (c,) = check_mgf_envelope(spec, [6.0], 200_000, seed)
    assert c.status == "pass" and c.estimate < c.bound


# --- CSV -------------------------------------------------------------------

def test_tail_csv(seed):
    q = TailQuery(16, 1.0, 0.125)
    est = estimate_query_tail(CFG, q, 100, seed)
    buf = io.StringIO()
    write_tail_csv([est], buf)
    header, row = buf.getvalue().splitlines()
    assert header == ",".join(TAIL_COLUMNS)
    vals = dict(zip(TAIL_COLUMNS, row.split(",")))
    assert vals["t"] == "16" and vals["c"] == "1.0" and vals["master_seed"] == "12345"


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2 ** 32))
def test_tail_estimate_is_reproducible(master):
    s = SeedPolicy(master)
    assert estimate_tail(CFG, 20, 1.0, 50, s) == estimate_tail(CFG, 20, 1.0, 50, s)
