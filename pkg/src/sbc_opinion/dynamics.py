"""Stochastic update rules for the two-agent and graph dynamics.

Random consumption is fixed: every two-agent step takes one uniform from
the replicate's coin stream and one difference-noise draw from its noise
stream.  Because each purpose has its own stream, drawing a whole horizon
in one block gives exactly the same numbers as stepping one slot at a
time, and the vectorised batch simulators below reproduce the scalar
step functions bit for bit.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigurationError
from .model import (
    Constant,
    MultiAgentConfig,
    NoiseLevel,
    NoiseSpec,
    PairingPolicy,
    TwoAgentConfig,
)
from .rng import COIN, NOISE, RngStream, SeedPolicy


@dataclass(frozen=True)
class DiffTrajectory:
    values: np.ndarray
    config: TwoAgentConfig
    master_seed: int
    replicate: int


@dataclass(frozen=True)
class OpinionTrajectory:
    """Opinions ``values[u, t]`` plus the pairs selected at every slot."""

    values: np.ndarray
    config: MultiAgentConfig
    master_seed: int
    replicate: int
    pairs: list = field(default_factory=list)
    influenced: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# two-agent difference process
# ---------------------------------------------------------------------------

def _update(influence, y, u, n):
    g = influence(np.abs(y))
    return np.where(u < g, n, y + n)


def step_two_agent_diff(y: float, config: TwoAgentConfig, stream: RngStream) -> float:
    """Advance Y by one slot: reset to the fresh noise with probability
    G(|y|), otherwise add the noise to y."""
    u = stream.coin.random(1)
    n = config.noise.sample_diff(stream.noise, 1)
    return float(_update(config.influence, np.array([y]), u, n)[0])


TIME_BLOCK = 2048


def draw_inputs(noise: NoiseSpec, seed: SeedPolicy, replicates: Sequence[int],
                steps: int) -> tuple[np.ndarray, np.ndarray]:
    """Coin uniforms and difference-noise draws, one row per replicate."""
    coins = np.empty((len(replicates), steps))
    noises = np.empty((len(replicates), steps))
    for i, r in enumerate(replicates):
        coins[i] = seed.generator(r, COIN).random(steps)
        noises[i] = noise.sample_diff(seed.generator(r, NOISE), steps)
    return coins, noises


def _blocks(noise: NoiseSpec, seed: SeedPolicy, replicates: Sequence[int],
            steps: int):
    """Yield (start, coins, noises) in time blocks of TIME_BLOCK slots,
    arrays shaped (slots, replicates).

    Each replicate keeps its own generators across blocks, so the draws
    are those of a single full-horizon draw.
    """
    gens = [(seed.generator(r, COIN), seed.generator(r, NOISE)) for r in replicates]
    R = len(replicates)
    for start in range(0, steps, TIME_BLOCK):
        size = min(TIME_BLOCK, steps - start)
        coins = np.empty((R, size))
        noises = np.empty((R, size))
        for i, (gc, gn) in enumerate(gens):
            coins[i] = gc.random(size)
            noises[i] = noise.sample_diff(gn, size)
        # time-major so each slot reads contiguous memory
        yield start, np.ascontiguousarray(coins.T), np.ascontiguousarray(noises.T)


def simulate_diff_batch(config: TwoAgentConfig, seed: SeedPolicy,
                        replicates: Sequence[int], times: Sequence[int],
                        with_walk: bool = False):
    """Y(t) at the requested ``times`` for each replicate.

    Returns an array of shape ``(len(replicates), len(times))``.  With
    ``with_walk=True`` also returns the zero-influence walk Y'(t) driven by
    the very same noise draws (a coupling, used by the ordering check).
    """
    times = np.asarray(times, dtype=int)
    if times.size and times.min() < 0:
        raise ValueError("times must be >= 0")
    steps = int(times.max()) if times.size else 0
    R = len(replicates)
    y = np.full(R, float(config.y0))
    walk = np.zeros(R)
    out = np.empty((R, times.size))
    walk_out = np.empty((R, times.size)) if with_walk else None
    want = {}
    for j, t in enumerate(times):
        want.setdefault(int(t), []).append(j)

    def record(t):
        for j in want.get(t, ()):
            out[:, j] = y
            if with_walk:
                walk_out[:, j] = walk

    record(0)
    influence = config.influence
    for start, coins, noises in _blocks(config.noise, seed, replicates, steps):
        for i in range(coins.shape[0]):
            y = _update(influence, y, coins[i], noises[i])
            if with_walk:
                walk = walk + noises[i]
            record(start + i + 1)
    if with_walk:
        return out, walk_out
    return out


def simulate_diff_trajectory(config: TwoAgentConfig, seed: SeedPolicy,
                             replicate: int = 0) -> DiffTrajectory:
    T = config.horizon
    values = simulate_diff_batch(config, seed, [replicate], np.arange(T + 1))[0]
    return DiffTrajectory(values, config, seed.master_seed, replicate)


def simulate_random_walk(noise: NoiseSpec, horizon: int, seed: SeedPolicy,
                         replicate: int = 0) -> np.ndarray:
    """Y'(t): cumulative sum of difference noise started at 0.

    Uses the replicate's noise stream, so it is the G = 0 difference process
    driven by the same draws.
    """
    steps = noise.sample_diff(seed.generator(replicate, NOISE), horizon)
    walk = np.empty(horizon + 1)
    walk[0] = 0.0
    walk[1:] = np.cumsum(steps)
    return walk


# ---------------------------------------------------------------------------
# two-agent opinion pair
# ---------------------------------------------------------------------------

def simulate_two_agent_batch(config: TwoAgentConfig, x1_0: float, x2_0: float,
                             seed: SeedPolicy, replicates: Sequence[int],
                             steps: int) -> tuple[np.ndarray, np.ndarray]:
    """Both opinions after ``steps`` slots, one entry per replicate.

    Noise is consumed as (n_1, n_2) pairs in stream order, matching how the
    difference process draws its per-agent noise.
    """
    if config.noise.level is not NoiseLevel.PER_AGENT:
        raise ConfigurationError(
            "per-agent trajectories need a per-agent noise spec")
    R = len(replicates)
    x1 = np.full(R, float(x1_0))
    x2 = np.full(R, float(x2_0))
    coins = np.empty((R, steps))
    n1 = np.empty((R, steps))
    n2 = np.empty((R, steps))
    for i, r in enumerate(replicates):
        coins[i] = seed.generator(r, COIN).random(steps)
        pairs = config.noise.sample_agent(seed.generator(r, NOISE), 2 * steps)
        pairs = pairs.reshape(steps, 2)
        n1[i], n2[i] = pairs[:, 0], pairs[:, 1]
    for t in range(steps):
        g = config.influence(np.abs(x1 - x2))
        hit = coins[:, t] < g
        mid = (x1 + x2) / 2.0
        x1 = np.where(hit, mid, x1) + n1[:, t]
        x2 = np.where(hit, mid, x2) + n2[:, t]
    return x1, x2


def simulate_two_agent_opinions(config: TwoAgentConfig, x1_0: float, x2_0: float,
                                seed: SeedPolicy, replicate: int = 0):
    """Full opinion sequences (X_1(0..T), X_2(0..T)) for one replicate."""
    if config.noise.level is not NoiseLevel.PER_AGENT:
        raise ConfigurationError(
            "per-agent trajectories need a per-agent noise spec")
    T = config.horizon
    stream = seed.stream(replicate)
    coins = stream.coin.random(T)
    noise = config.noise.sample_agent(stream.noise, 2 * T).reshape(T, 2)
    x1 = np.empty(T + 1)
    x2 = np.empty(T + 1)
    x1[0], x2[0] = x1_0, x2_0
    for t in range(T):
        a, b = x1[t], x2[t]
        if coins[t] < float(config.influence(abs(a - b))):
            a = b = (a + b) / 2.0
        x1[t + 1] = a + noise[t, 0]
        x2[t + 1] = b + noise[t, 1]
    return x1, x2


# ---------------------------------------------------------------------------
# graph dynamics
# ---------------------------------------------------------------------------

def select_pairs(edges: Sequence[tuple[int, int]], policy: PairingPolicy,
                 rng: np.random.Generator) -> list[int]:
    """Indices of the edges that interact in this slot.

    No vertex is covered by two selected edges.
    """
    m = len(edges)
    if m == 0:
        return []
    if policy is PairingPolicy.SINGLE_RANDOM_EDGE:
        return [int(rng.integers(m))]
    chosen = []
    busy = set()
    for e in rng.permutation(m):
        u, v = edges[e]
        if u in busy or v in busy:
            continue
        busy.update((u, v))
        chosen.append(int(e))
    return chosen


def _multi_step(state, config: MultiAgentConfig, stream: RngStream):
    x = np.asarray(state, dtype=float)
    if x.shape != (config.n_agents,):
        raise ValueError(f"state must have length {config.n_agents}")
    chosen = select_pairs(config.edges, config.pairing, stream.pairing)
    new = x.copy()
    hits = []
    for e in chosen:
        u, v = config.edges[e]
        g = float(config.edge_influence(e)(abs(x[u] - x[v])))
        hit = stream.coin.random() < g
        if hit:
            new[u] = new[v] = (x[u] + x[v]) / 2.0
        hits.append(hit)
    new += config.noise.sample_agent(stream.noise, config.n_agents)
    return new, [config.edges[e] for e in chosen], hits


def step_multi_agent(state, config: MultiAgentConfig, stream: RngStream) -> np.ndarray:
    """One slot of the graph dynamics.

    Selected pairs that are influenced move to their midpoint; then every
    agent adds its own fresh noise draw.
    """
    return _multi_step(state, config, stream)[0]


def simulate_multi_agent(config: MultiAgentConfig, seed: SeedPolicy,
                         replicate: int = 0) -> OpinionTrajectory:
    stream = seed.stream(replicate)
    T = config.horizon
    values = np.empty((config.n_agents, T + 1))
    values[:, 0] = config.initial
    pairs, influenced = [], []
    for t in range(T):
        values[:, t + 1], p, h = _multi_step(values[:, t], config, stream)
        pairs.append(p)
        influenced.append(h)
    return OpinionTrajectory(values, config, seed.master_seed, replicate,
                             pairs, influenced)


def zero_influence(config: TwoAgentConfig) -> TwoAgentConfig:
    """The same config with G = 0 (the pure random walk comparator)."""
    return TwoAgentConfig(Constant(0.0), config.noise, config.horizon, config.y0)


# ---------------------------------------------------------------------------
# CSV export
# ---------------------------------------------------------------------------

def write_diff_csv(traj: DiffTrajectory | np.ndarray, path) -> None:
    values = traj.values if isinstance(traj, DiffTrajectory) else traj
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "value"])
        for t, y in enumerate(values):
            w.writerow([t, repr(float(y))])


def write_opinions_csv(traj: OpinionTrajectory, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "agent_id", "value"])
        n, T1 = traj.values.shape
        for t in range(T1):
            for u in range(n):
                w.writerow([t, u, repr(float(traj.values[u, t]))])
