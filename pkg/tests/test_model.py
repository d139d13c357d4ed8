from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from sbc_opinion import (
    ConfigurationError,
    Constant,
    Gaussian,
    HardThreshold,
    MultiAgentConfig,
    NoiseLevel,
    NoiseSpec,
    PowerLaw,
    Rademacher,
    SeedPolicy,
    TruncatedGaussian,
    UniformBounded,
    eval_influence,
    sample_diff_noise,
    subgaussian_parameter,
)

N = 10 ** 6


# --- influence -------------------------------------------------------------

def test_power_law_at_zero_is_scale():
    assert eval_influence(PowerLaw(1.0, 0.5), 0.0) == 1.0


def test_hard_threshold_beyond_radius():
    assert eval_influence(HardThreshold(1.0), 2.0) == 0.0
    assert eval_influence(HardThreshold(1.0), 1.0) == 1.0


def test_power_law_value_at_100():
    assert eval_influence(PowerLaw(1.0, 1.5), 100.0) == pytest.approx(1 / 1001, rel=1e-14)


def test_zero_exponent_is_constant_half_scale():
    assert eval_influence(PowerLaw(1.0, 0.0), 5.0) == 0.5


def test_negative_distance_rejected():
    with pytest.raises(ValueError):
        eval_influence(PowerLaw(1.0, 1.0), -0.1)
    with pytest.raises(ValueError):
        eval_influence(Constant(0.5), float("nan"))


@pytest.mark.parametrize("bad", [
    lambda: PowerLaw(0.0, 1.0), lambda: PowerLaw(1.5, 1.0),
    lambda: PowerLaw(1.0, -1.0), lambda: HardThreshold(-1.0),
    lambda: Constant(1.1), lambda: Constant(-0.1)])
def test_invalid_influence_rejected(bad):
    with pytest.raises(ConfigurationError):
        bad()


influences = st.one_of(
    st.builds(PowerLaw, st.floats(0.01, 1.0), st.floats(0.0, 4.0)),
    st.builds(HardThreshold, st.floats(0.0, 10.0)),
    st.builds(Constant, st.floats(0.0, 1.0)),
)


@settings(max_examples=300)
@given(influences, st.floats(0, 1e6), st.floats(0, 1e6))
def test_influence_in_unit_interval_and_non_increasing(g, x1, x2):
    lo, hi = min(x1, x2), max(x1, x2)
    a, b = eval_influence(g, lo), eval_influence(g, hi)
    assert 0.0 <= b <= a <= 1.0


# --- noise -----------------------------------------------------------------

FAMILIES = [UniformBounded(1.0), Gaussian(1.0), TruncatedGaussian(1.0, 1.5),
            Rademacher(1.0)]


@pytest.mark.parametrize("family", FAMILIES, ids=lambda f: type(f).__name__)
@pytest.mark.parametrize("level", list(NoiseLevel))
def test_noise_mean_zero_and_symmetric(family, level):
    x = NoiseSpec(family, level).sample_diff(SeedPolicy(1).generator(0, 1), N)
    sd = x.std()
    assert abs(x.mean()) <= 5 * sd / math.sqrt(N)
    for eps in (0.1, 0.5, 1.0):
        up = np.mean(x > eps)
        down = np.mean(x < -eps)
        assert abs(up - down) <= 5 / math.sqrt(N)


def test_zero_width_rademacher_is_zero():
    spec = NoiseSpec(Rademacher(0.0), NoiseLevel.DIFFERENCE)
    stream = SeedPolicy(3).stream(0)
    assert all(sample_diff_noise(spec, stream) == 0.0 for _ in range(20))


def test_per_agent_uniform_difference_is_triangular():
    spec = NoiseSpec(UniformBounded(0.5))
    x = spec.sample_diff(SeedPolicy(2).generator(0, 1), N)
    assert x.min() >= -1.0 and x.max() <= 1.0
    assert spec.diff_bound == 1.0
    # triangular law on [-1, 1] has cdf (1 + x)^2 / 2 on [-1, 0]
    ks = stats.kstest(x, stats.triang(c=0.5, loc=-1, scale=2).cdf)
    assert ks.pvalue > 0.01


def test_per_agent_uniform_difference_variance():
    spec = NoiseSpec(UniformBounded(0.5))
    x = spec.sample_diff(SeedPolicy(5).generator(0, 1), N)
    assert x.var(ddof=1) == pytest.approx(1 / 6, rel=0.01)
    assert spec.diff_variance == pytest.approx(1 / 6)


def test_truncated_gaussian_support_and_variance():
    fam = TruncatedGaussian(1.0, 1.5)
    x = fam.sample(SeedPolicy(4).generator(0, 1), N)
    assert np.all(np.abs(x) <= 1.5)
    # independent closed form: Var = 1 - 2 a phi(a) / (2 Phi(a) - 1)
    a = 1.5
    var = 1 - 2 * a * stats.norm.pdf(a) / (2 * stats.norm.cdf(a) - 1)
    assert fam.variance == pytest.approx(var, rel=1e-10)
    assert x.var() == pytest.approx(var, rel=0.01)


def test_subgaussian_parameters():
    assert subgaussian_parameter(NoiseSpec(Gaussian(1.0), NoiseLevel.DIFFERENCE)) == 1.0
    assert subgaussian_parameter(NoiseSpec(UniformBounded(1.0), NoiseLevel.DIFFERENCE)) == 1.0
    assert subgaussian_parameter(NoiseSpec(Gaussian(1.0))) == 2.0
    assert TruncatedGaussian(2.0, 1.0).subgaussian_parameter == 1.0
    assert TruncatedGaussian(0.5, 1.0).subgaussian_parameter == 0.25
    assert Rademacher(3.0).subgaussian_parameter == 9.0


def test_bounds_reported():
    assert Gaussian(1.0).bound is None
    assert NoiseSpec(Gaussian(1.0)).diff_bound is None
    assert UniformBounded(2.0).bound == 2.0
    assert NoiseSpec(Rademacher(1.0), NoiseLevel.DIFFERENCE).diff_bound == 1.0


def test_difference_level_has_no_agent_noise():
    spec = NoiseSpec(Gaussian(1.0), NoiseLevel.DIFFERENCE)
    with pytest.raises(ConfigurationError):
        spec.sample_agent(np.random.default_rng(0), 3)


def test_block_draws_equal_single_draws():
    spec = NoiseSpec(TruncatedGaussian(1.0, 2.0))
    block = spec.sample_diff(SeedPolicy(8).generator(0, 1), 50)
    g = SeedPolicy(8).generator(0, 1)
    single = np.concatenate([spec.sample_diff(g, 1) for _ in range(50)])
    assert np.array_equal(block, single)


# --- graph config ----------------------------------------------------------

NOISE = NoiseSpec(UniformBounded(0.1))


@pytest.mark.parametrize("edges", [[(0, 0)], [(0, 3)], [(0, 1), (1, 0)]])
def test_graph_must_be_simple(edges):
    with pytest.raises(ConfigurationError):
        MultiAgentConfig(edges, Constant(1.0), NOISE, (0.0, 1.0, 2.0))


def test_per_edge_influence_count_checked():
    with pytest.raises(ConfigurationError):
        MultiAgentConfig([(0, 1), (1, 2)], (Constant(1.0),), NOISE, (0.0, 1.0, 2.0))
    cfg = MultiAgentConfig([(0, 1), (1, 2)], (Constant(1.0), Constant(0.0)),
                           NOISE, (0.0, 1.0, 2.0))
    assert cfg.edge_influence(1) == Constant(0.0)


def test_graph_needs_agent_noise():
    with pytest.raises(ConfigurationError):
        MultiAgentConfig([(0, 1)], Constant(1.0),
                         NoiseSpec(UniformBounded(1.0), NoiseLevel.DIFFERENCE), (0.0, 1.0))
