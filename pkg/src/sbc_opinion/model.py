"""Model parameters: noise laws, influence functions and process configs.

All objects here are frozen dataclasses and safe to share between workers.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy import stats

from .errors import ConfigurationError


# ---------------------------------------------------------------------------
# noise laws
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class UniformBounded:
    """Uniform on [-half_width, half_width]."""

    half_width: float

    def __post_init__(self):
        if not self.half_width >= 0:
            raise ConfigurationError("half_width must be >= 0")

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.uniform(-self.half_width, self.half_width, size)

    @property
    def bound(self) -> float:
        return self.half_width

    @property
    def variance(self) -> float:
        return self.half_width ** 2 / 3.0

    @property
    def subgaussian_parameter(self) -> float:
        # Hoeffding: a variable supported in [-D, D] is SG(D^2)
        return self.half_width ** 2


@dataclass(frozen=True)
class Gaussian:
    sigma: float

    def __post_init__(self):
        if not self.sigma >= 0:
            raise ConfigurationError("sigma must be >= 0")

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self.sigma * rng.standard_normal(size)

    @property
    def bound(self) -> None:
        return None

    @property
    def variance(self) -> float:
        return self.sigma ** 2

    @property
    def subgaussian_parameter(self) -> float:
        return self.sigma ** 2


@dataclass(frozen=True)
class TruncatedGaussian:
    """N(0, sigma^2) conditioned on |x| <= half_width.

    Sampled by inverting the truncated CDF, so each draw consumes exactly
    one uniform from the stream.
    """

    sigma: float
    half_width: float

    def __post_init__(self):
        if not (self.sigma > 0 and self.half_width > 0):
            raise ConfigurationError("sigma and half_width must be > 0")

    @property
    def _dist(self):
        a = self.half_width / self.sigma
        return stats.truncnorm(-a, a, loc=0.0, scale=self.sigma)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        u = rng.random(size)
        x = self._dist.ppf(u)
        return np.clip(x, -self.half_width, self.half_width)

    @property
    def bound(self) -> float:
        return self.half_width

    @property
    def variance(self) -> float:
        return float(self._dist.var())

    @property
    def subgaussian_parameter(self) -> float:
        return min(self.sigma ** 2, self.half_width ** 2)


@dataclass(frozen=True)
class Rademacher:
    """+magnitude or -magnitude with equal probability."""

    magnitude: float

    def __post_init__(self):
        if not self.magnitude >= 0:
            raise ConfigurationError("magnitude must be >= 0")

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        # one uniform per draw keeps stream consumption fixed
        return np.where(rng.random(size) < 0.5, -self.magnitude, self.magnitude)

    @property
    def bound(self) -> float:
        return self.magnitude

    @property
    def variance(self) -> float:
        return self.magnitude ** 2

    @property
    def subgaussian_parameter(self) -> float:
        return self.magnitude ** 2


NoiseFamily = Union[UniformBounded, Gaussian, TruncatedGaussian, Rademacher]


class NoiseLevel(enum.Enum):
    PER_AGENT = "per_agent"
    DIFFERENCE = "difference"


@dataclass(frozen=True)
class NoiseSpec:
    """A zero-mean symmetric noise law.

    With ``level=PER_AGENT`` the family describes each agent's own noise
    n_u(t) and the difference noise is n_1 - n_2 of two independent draws.
    With ``level=DIFFERENCE`` the family describes the difference directly.
    """

    family: NoiseFamily
    level: NoiseLevel = NoiseLevel.PER_AGENT

    def sample_agent(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.level is not NoiseLevel.PER_AGENT:
            raise ConfigurationError(
                "per-agent noise is undefined when the spec describes the "
                "difference noise directly")
        return self.family.sample(rng, size)

    def sample_diff(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """``size`` draws of the difference noise.

        Per-agent draws are taken in pairs (n_1, n_2) in stream order, so a
        block draw equals the same number of one-at-a-time draws.
        """
        if self.level is NoiseLevel.DIFFERENCE:
            return self.family.sample(rng, size)
        pairs = self.family.sample(rng, 2 * size).reshape(size, 2)
        return pairs[:, 0] - pairs[:, 1]

    @property
    def diff_bound(self) -> float | None:
        """Support half-width of the difference noise (None if unbounded)."""
        b = self.family.bound
        if b is None:
            return None
        return 2.0 * b if self.level is NoiseLevel.PER_AGENT else b

    @property
    def diff_variance(self) -> float:
        v = self.family.variance
        return 2.0 * v if self.level is NoiseLevel.PER_AGENT else v

    @property
    def is_zero(self) -> bool:
        return self.family.variance == 0.0


def sample_diff_noise(spec: NoiseSpec, stream) -> float:
    """One draw of the difference noise from ``stream.noise``."""
    return float(spec.sample_diff(stream.noise, 1)[0])


def subgaussian_parameter(spec: NoiseSpec) -> float:
    """Variance proxy of the difference noise.

    Independent sub-Gaussian parameters add, so per-agent specs report twice
    the family's parameter.
    """
    s2 = spec.family.subgaussian_parameter
    return 2.0 * s2 if spec.level is NoiseLevel.PER_AGENT else s2


# ---------------------------------------------------------------------------
# influence functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PowerLaw:
    """G(x) = min(1, scale / (1 + x**exponent))."""

    scale: float
    exponent: float

    def __post_init__(self):
        if not 0 < self.scale <= 1:
            raise ConfigurationError("power-law scale must lie in (0, 1]")
        if not self.exponent >= 0:
            raise ConfigurationError("power-law exponent must be >= 0")

    def __call__(self, x):
        return np.minimum(1.0, self.scale / (1.0 + np.power(x, self.exponent)))


@dataclass(frozen=True)
class HardThreshold:
    """G(x) = 1 if x <= radius else 0 (classical bounded confidence)."""

    radius: float

    def __post_init__(self):
        if not self.radius >= 0:
            raise ConfigurationError("threshold radius must be >= 0")

    def __call__(self, x):
        return np.where(np.asarray(x) <= self.radius, 1.0, 0.0)


@dataclass(frozen=True)
class Constant:
    """G(x) = value; value 1 with no noise gives linear averaging."""

    value: float

    def __post_init__(self):
        if not 0 <= self.value <= 1:
            raise ConfigurationError("constant influence must lie in [0, 1]")

    def __call__(self, x):
        return np.full(np.shape(x), float(self.value))


InfluenceSpec = Union[PowerLaw, HardThreshold, Constant]


def eval_influence(spec: InfluenceSpec, x: float) -> float:
    if x < 0 or math.isnan(x):
        raise ValueError(f"influence is defined on [0, inf), got {x}")
    return float(spec(x))


# ---------------------------------------------------------------------------
# process configurations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TwoAgentConfig:
    influence: InfluenceSpec
    noise: NoiseSpec
    horizon: int = 0
    y0: float = 0.0

    def __post_init__(self):
        if self.horizon < 0:
            raise ConfigurationError("horizon must be >= 0")


class PairingPolicy(enum.Enum):
    SINGLE_RANDOM_EDGE = "single_random_edge"
    RANDOM_MAXIMAL_MATCHING = "random_maximal_matching"


@dataclass(frozen=True)
class MultiAgentConfig:
    """Opinion dynamics on an undirected simple graph.

    ``influence`` is either one spec shared by all edges or a sequence with
    one spec per edge, in edge order.
    """

    edges: tuple[tuple[int, int], ...]
    influence: InfluenceSpec | tuple[InfluenceSpec, ...]
    noise: NoiseSpec
    initial: tuple[float, ...]
    pairing: PairingPolicy = PairingPolicy.SINGLE_RANDOM_EDGE
    horizon: int = 0

    def __post_init__(self):
        n = len(self.initial)
        edges = tuple((int(u), int(v)) for u, v in self.edges)
        seen = set()
        for u, v in edges:
            if u == v:
                raise ConfigurationError(f"self-loop at vertex {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise ConfigurationError(f"edge ({u}, {v}) outside 0..{n - 1}")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise ConfigurationError(f"duplicate edge {key}")
            seen.add(key)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "initial", tuple(float(x) for x in self.initial))
        if isinstance(self.influence, Sequence):
            if len(self.influence) != len(edges):
                raise ConfigurationError(
                    "need one influence spec per edge "
                    f"({len(self.influence)} given, {len(edges)} edges)")
            object.__setattr__(self, "influence", tuple(self.influence))
        if self.noise.level is not NoiseLevel.PER_AGENT:
            raise ConfigurationError("multi-agent dynamics need per-agent noise")
        if self.horizon < 0:
            raise ConfigurationError("horizon must be >= 0")

    @property
    def n_agents(self) -> int:
        return len(self.initial)

    def edge_influence(self, index: int) -> InfluenceSpec:
        if isinstance(self.influence, tuple):
            return self.influence[index]
        return self.influence
