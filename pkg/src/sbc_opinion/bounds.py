"""Closed-form Chernoff tail bounds for the two-agent difference process.

Notation used in comments: the threshold is k = c * t**(1/2 - beta); the
influence function is G(x) = B / (1 + x**p) with p = 1 - delta (bounded
noise) or p = 2 - delta (sub-Gaussian noise); D is the noise support bound
(bounded case) or the envelope scale d_t = D * t**(1/2 + beta') (sub-Gaussian
case).

Everything is evaluated in natural-log space: the bounds only become
informative at horizons like 1e10 and beyond, where the linear-space
prefactors and exponentials are far outside float range.

Two variants are offered.  The *literal* variant uses the second-order
proxy gamma = 1 + lambda^2 s^2 / 2 together with the closed-form alpha; it
matches the asymptotic statement.  The *rigorous* variant keeps the full
exponential gamma = exp(lambda^2 s^2 / 2) and the contraction margin that
it actually implies, alpha' = 1 - gamma * (1 - G); it is a valid bound at
every finite t and is never smaller than the literal one.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import RegimeError
from .model import (
    Constant,
    HardThreshold,
    InfluenceSpec,
    NoiseSpec,
    PowerLaw,
    subgaussian_parameter,
)

LOG2 = math.log(2.0)


# ---------------------------------------------------------------------------
# queries and results
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundedRegime:
    """Noise supported in [-D, D], G(x) = B / (1 + x**(1 - exponent_gap))."""

    exponent_gap: float


@dataclass(frozen=True)
class SubGaussianRegime:
    """Sub-Gaussian noise, G(x) = B / (1 + x**(2 - exponent_gap)).

    ``envelope_excess`` sets the high-probability envelope D * t**(1/2 + .)
    and ``burn_in_exponent`` the start h(t) = floor(t**.) of the window on
    which the process is conditioned to stay inside it.
    """

    exponent_gap: float
    envelope_excess: float
    burn_in_exponent: float


@dataclass(frozen=True)
class TailQuery:
    """The event |Y(t)| >= threshold_scale * t**(1/2 - threshold_decay)."""

    t: float
    threshold_scale: float
    threshold_decay: float
    regime: BoundedRegime | SubGaussianRegime | None = None

    def __post_init__(self):
        if not self.t >= 1:
            raise ValueError("t must be >= 1")
        if not self.threshold_scale > 0:
            raise ValueError("threshold scale must be > 0")
        if not self.threshold_decay > 0:
            raise ValueError("threshold decay exponent must be > 0")

    @property
    def k(self) -> float:
        return threshold(self.t, self.threshold_scale, self.threshold_decay)

    def at(self, t: float) -> TailQuery:
        return TailQuery(t, self.threshold_scale, self.threshold_decay, self.regime)

    def check_regime(self) -> None:
        """Raise RegimeError naming the first violated inequality."""
        reg = self.regime
        beta = self.threshold_decay
        if reg is None:
            raise RegimeError("query has no regime attached")
        delta = reg.exponent_gap
        if isinstance(reg, BoundedRegime):
            if not 0 < delta <= 1:
                raise RegimeError(f"need 0 < δ <= 1 for bounded noise, got δ={delta}")
            if not beta < delta / 2:
                raise RegimeError(
                    f"β < δ/2 violated: β={beta}, δ/2={delta / 2}")
            return
        if not 0 < delta < 2:
            raise RegimeError(f"need 0 < δ < 2 for sub-Gaussian noise, got δ={delta}")
        if not beta < delta / 4:
            raise RegimeError(f"β < δ/4 violated: β={beta}, δ/4={delta / 4}")
        zeta = reg.burn_in_exponent
        if not 0 <= zeta < 1 - delta / 2:
            raise RegimeError(
                f"0 <= ζ < 1 - δ/2 violated: ζ={zeta}, 1 - δ/2={1 - delta / 2}")
        lo, hi = envelope_excess_window(delta, beta)
        bp = reg.envelope_excess
        if not lo < bp < hi:
            raise RegimeError(
                "β' in ((δ/4 - β)/(3 - 3δ/2), (δ/4 - β)/(1 - δ/2)) violated: "
                f"β'={bp}, window=({lo}, {hi})")


def envelope_excess_window(delta: float, beta: float) -> tuple[float, float]:
    """Admissible open interval for the envelope excess exponent.

    The lower end balances the decay rates of the two terms of the
    sub-Gaussian bound; above the upper end lambda * k stops growing.
    """
    num = delta / 4 - beta
    return num / (3 - 1.5 * delta), num / (1 - delta / 2)


def threshold(t, scale: float, decay: float):
    return scale * np.power(t, 0.5 - decay)


@dataclass(frozen=True)
class ChernoffParams:
    lam: float
    alpha: float
    gamma: float              # exp(lam^2 s^2 / 2), also the MGF bound
    gamma_taylor: float       # 1 + lam^2 s^2 / 2
    alpha_effective: float    # 1 - gamma * (1 - G(envelope))
    influence_at_envelope: float

    @property
    def mgf_bound(self) -> float:
        return self.gamma


@dataclass(frozen=True)
class BoundEvaluation:
    t: float
    k: float
    log_bound: float
    terms: dict = field(default_factory=dict)
    params: ChernoffParams | None = None
    rigorous: bool = False

    @property
    def effective_alpha(self) -> float:
        p = self.params
        return p.alpha_effective if self.rigorous else p.alpha

    @property
    def vacuous(self) -> bool:
        return not self.log_bound < 0.0

    @property
    def probability(self) -> float:
        return 1.0 if self.vacuous else math.exp(self.log_bound)


@dataclass(frozen=True)
class BoundParams:
    """Model constants entering the bounds."""

    influence_scale: float
    noise_bound: float
    sigma: float | None = None


# ---------------------------------------------------------------------------
# Chernoff parameter choice
# ---------------------------------------------------------------------------

def _expm1_minus_x(u):
    """e^u - 1 - u without cancellation for small u."""
    u = np.asarray(u, dtype=float)
    series = u * u * (0.5 + u * (1 / 6 + u * (1 / 24 + u * (1 / 120 + u / 720))))
    return np.where(u < 0.05, series, np.expm1(u) - u)


def _chernoff_arrays(log_envelope, power, B, s):
    """lambda, alpha, gamma's and alpha' for envelope**power in log form."""
    x = np.exp(power * log_envelope)          # envelope ** power
    with np.errstate(divide="ignore"):
        radicand = B / (1.0 + x - B)
    if np.any(~((radicand > 0) & np.isfinite(radicand))):
        raise RegimeError("Chernoff radicand B / (1 + x - B) is not positive and finite")
    lam = np.sqrt(radicand) / s
    alpha = B / (2.0 * (1.0 + x))
    half = radicand / 2.0                     # lam^2 s^2 / 2
    gamma = np.exp(half)
    gamma_taylor = 1.0 + half
    g_env = np.minimum(1.0, B / (1.0 + x))
    # 1 - gamma (1 - G) rewritten as alpha - (e^u - 1 - u)(1 - G), using
    # alpha = G - u (1 - G); the direct form cancels catastrophically
    alpha_eff = alpha - _expm1_minus_x(half) * (1.0 - g_env)
    return lam, alpha, gamma, gamma_taylor, alpha_eff, g_env


def _as_params(arrays) -> ChernoffParams:
    return ChernoffParams(*(float(a) for a in arrays))


def choose_chernoff_bounded(influence_scale: float, noise_bound: float,
                            exponent_gap: float, t: float) -> ChernoffParams:
    """Chernoff parameters for bounded noise with envelope D * t."""
    B, D, delta = influence_scale, noise_bound, exponent_gap
    if not (0 < B <= 1 and D > 0 and t >= 1):
        raise RegimeError("need 0 < B <= 1, D > 0, t >= 1")
    return _as_params(_chernoff_arrays(math.log(D * t), 1.0 - delta, B, D))


def choose_chernoff_subgaussian(influence_scale: float, sigma: float,
                                noise_bound: float, exponent_gap: float,
                                envelope_excess: float, t: float) -> ChernoffParams:
    """Chernoff parameters for sub-Gaussian noise with envelope
    d_t = D * t**(1/2 + envelope_excess)."""
    B, D, delta = influence_scale, noise_bound, exponent_gap
    if not (0 < B <= 1 and D > 0 and sigma > 0 and t >= 1):
        raise RegimeError("need 0 < B <= 1, D > 0, sigma > 0, t >= 1")
    log_d = math.log(D) + (0.5 + envelope_excess) * math.log(t)
    return _as_params(_chernoff_arrays(log_d, 2.0 - delta, B, sigma))


# ---------------------------------------------------------------------------
# vectorised log-bounds
# ---------------------------------------------------------------------------

def _log_prefactor(gamma, alpha):
    """log(gamma / alpha); +inf where alpha <= 0 (no contraction)."""
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(alpha > 0, np.log(gamma) - np.log(np.where(alpha > 0, alpha, 1.0)),
                        np.inf)


def _check_rigorous_order(alpha, alpha_eff):
    ok = (alpha_eff <= 0) | (alpha_eff <= alpha * (1 + 1e-12))
    assert np.all(ok), "effective contraction margin exceeds the closed-form one"


def bounded_log_terms(t, scale, decay, delta, B, D, rigorous=False):
    """Log of the bounded-noise bound 2 (gamma / alpha + 1) exp(-lambda k).

    Returns (log_bound, lam, alpha, gamma, k) as arrays over ``t``.
    """
    t = np.asarray(t, dtype=float)
    lam, alpha, gamma, gamma_t, alpha_eff, _ = _chernoff_arrays(
        np.log(D * t), 1.0 - delta, B, D)
    _check_rigorous_order(alpha, alpha_eff)
    log_k = math.log(scale) + (0.5 - decay) * np.log(t)
    lam_k = np.exp(np.log(lam) + log_k)
    if rigorous:
        lp = _log_prefactor(gamma, alpha_eff)
        g, a = gamma, alpha_eff
    else:
        lp = _log_prefactor(gamma_t, alpha)
        g, a = gamma_t, alpha
    log_bound = LOG2 + np.logaddexp(lp, 0.0) - lam_k
    return log_bound, lam, a, g, np.exp(log_k)


def burn_in(t, zeta):
    return np.maximum(1.0, np.floor(np.power(np.asarray(t, dtype=float), zeta)))


def subgaussian_log_terms(t, scale, decay, delta, envelope_excess, zeta,
                          B, sigma, D, rigorous=False):
    """Log of both terms of the sub-Gaussian bound.

    term1 = 2 (t - h) exp(-c' h**(2 beta')), c' = D^2 / (2 sigma^2), bounds
    the chance of leaving the envelope after the burn-in h;
    term2 = 2 [exp(lambda^2 sigma^2 h / 2) + gamma / alpha] exp(-lambda k)
    is the Chernoff bound on the conditioned process.

    Returns (log_term1, log_term2, lam, alpha, gamma, k) as arrays.
    """
    t = np.asarray(t, dtype=float)
    log_t = np.log(t)
    log_d = math.log(D) + (0.5 + envelope_excess) * log_t
    lam, alpha, gamma, gamma_t, alpha_eff, _ = _chernoff_arrays(
        log_d, 2.0 - delta, B, sigma)
    _check_rigorous_order(alpha, alpha_eff)
    h = burn_in(t, zeta)
    c_prime = D ** 2 / (2.0 * sigma ** 2)
    gap = t - h
    with np.errstate(divide="ignore"):
        log_term1 = np.where(
            gap > 0,
            LOG2 + np.log(np.where(gap > 0, gap, 1.0)) - c_prime * np.power(h, 2 * envelope_excess),
            -np.inf)
    log_k = math.log(scale) + (0.5 - decay) * log_t
    lam_k = np.exp(np.log(lam) + log_k)
    if rigorous:
        g, a = gamma, alpha_eff
    else:
        g, a = gamma_t, alpha
    lp = _log_prefactor(g, a)
    log_term2 = LOG2 + np.logaddexp(lam ** 2 * sigma ** 2 * h / 2.0, lp) - lam_k
    return log_term1, log_term2, lam, a, g, np.exp(log_k)


# ---------------------------------------------------------------------------
# public evaluators
# ---------------------------------------------------------------------------

def bounded_noise_bound(query: TailQuery, influence_scale: float,
                        noise_bound: float, rigorous: bool = False,
                        check_regime: bool = True) -> BoundEvaluation:
    """Tail bound on P(|Y(t)| >= k | Y(0) = 0) for noise in [-D, D]."""
    if check_regime:
        query.check_regime()
    reg = query.regime
    if not isinstance(reg, BoundedRegime):
        raise RegimeError("bounded-noise bound needs a BoundedRegime query")
    params = choose_chernoff_bounded(influence_scale, noise_bound,
                                     reg.exponent_gap, query.t)
    log_bound, *_, k = bounded_log_terms(
        query.t, query.threshold_scale, query.threshold_decay,
        reg.exponent_gap, influence_scale, noise_bound, rigorous)
    lb = float(log_bound)
    return BoundEvaluation(query.t, float(k), lb, {"chernoff": lb}, params, rigorous)


def subgaussian_bound(query: TailQuery, influence_scale: float, sigma: float,
                      noise_bound: float, rigorous: bool = False,
                      check_regime: bool = True) -> BoundEvaluation:
    """Tail bound on P(|Y(t)| >= k | Y(0) = 0) for SG(sigma^2) noise.

    ``noise_bound`` is the envelope scale D in d_t = D t**(1/2 + beta').
    """
    if check_regime:
        query.check_regime()
    reg = query.regime
    if not isinstance(reg, SubGaussianRegime):
        raise RegimeError("sub-Gaussian bound needs a SubGaussianRegime query")
    params = choose_chernoff_subgaussian(influence_scale, sigma, noise_bound,
                                         reg.exponent_gap, reg.envelope_excess,
                                         query.t)
    l1, l2, *_, k = subgaussian_log_terms(
        query.t, query.threshold_scale, query.threshold_decay, reg.exponent_gap,
        reg.envelope_excess, reg.burn_in_exponent, influence_scale, sigma,
        noise_bound, rigorous)
    l1, l2 = float(l1), float(l2)
    return BoundEvaluation(query.t, float(k), float(np.logaddexp(l1, l2)),
                           {"escape": l1, "chernoff": l2}, params, rigorous)


def tail_bound(query: TailQuery, params: BoundParams, rigorous: bool = False,
               check_regime: bool = True) -> BoundEvaluation:
    if isinstance(query.regime, SubGaussianRegime):
        if params.sigma is None:
            raise RegimeError("sub-Gaussian bound needs sigma")
        return subgaussian_bound(query, params.influence_scale, params.sigma,
                                 params.noise_bound, rigorous, check_regime)
    return bounded_noise_bound(query, params.influence_scale, params.noise_bound,
                               rigorous, check_regime)


def _log_bound_array(query: TailQuery, params: BoundParams, taus, rigorous):
    reg = query.regime
    c, beta = query.threshold_scale, query.threshold_decay
    if isinstance(reg, SubGaussianRegime):
        l1, l2, *_ = subgaussian_log_terms(
            taus, c, beta, reg.exponent_gap, reg.envelope_excess,
            reg.burn_in_exponent, params.influence_scale, params.sigma,
            params.noise_bound, rigorous)
        return np.logaddexp(l1, l2)
    return bounded_log_terms(taus, c, beta, reg.exponent_gap,
                             params.influence_scale, params.noise_bound,
                             rigorous)[0]


def envelope_union_bound(query: TailQuery, params: BoundParams, t_max: int,
                         rigorous: bool = False, max_terms: int = 10 ** 7,
                         n_blocks: int = 200_000, chunk: int = 10 ** 6) -> float:
    """Log of sum_{tau=t}^{t_max} bound(tau).

    This bounds the probability that |Y(tau)| crosses c tau**(1/2 - beta) at
    some tau in [t, t_max].  Up to ``max_terms`` terms the sum is exact.
    Longer ranges are split into geometric blocks and each block is charged
    count * max(bound at its two ends), an over-approximation that stays a
    valid bound whenever the per-time bound is monotone inside each block.
    """
    query.check_regime()
    t0 = int(math.ceil(query.t))
    t_max = int(t_max)
    if t_max < t0:
        raise ValueError("t_max must be >= t")
    n = t_max - t0 + 1
    if n <= max_terms:
        parts = []
        for start in range(t0, t_max + 1, chunk):
            taus = np.arange(start, min(start + chunk, t_max + 1), dtype=float)
            parts.append(logsumexp(_log_bound_array(query, params, taus, rigorous)))
        return float(logsumexp(parts))
    edges = np.unique(np.round(np.geomspace(t0, t_max + 1, n_blocks + 1)))
    edges[0], edges[-1] = t0, t_max + 1
    lefts, rights = edges[:-1], edges[1:] - 1
    counts = rights - lefts + 1
    f_left = _log_bound_array(query, params, lefts, rigorous)
    f_right = _log_bound_array(query, params, rights, rigorous)
    return float(logsumexp(np.log(counts) + np.maximum(f_left, f_right)))


def baseline_walk_tail(noise: NoiseSpec, t: float, k: float) -> float:
    """Sub-Gaussian tail 2 exp(-k^2 / (2 sigma^2 t)) for the noise sum.

    Not clamped; callers report min(1, value).
    """
    s2 = subgaussian_parameter(noise)
    if s2 == 0:
        return 2.0 if k <= 0 else 0.0
    return 2.0 * math.exp(-k * k / (2.0 * s2 * t))


# ---------------------------------------------------------------------------
# stability classes
# ---------------------------------------------------------------------------

class Stability(enum.Enum):
    STABLE_SUBLINEAR = "stable_sublinear"        # p < 1: both bounds apply
    STABLE_SUBQUADRATIC = "stable_subquadratic"  # 1 <= p < 2
    BOUNDARY = "boundary"                        # p == 2, no claim
    UNSTABLE = "unstable"                        # p > 2
    NOT_APPLICABLE = "not_applicable"


@dataclass(frozen=True)
class RegimeClass:
    kind: Stability
    exponent_gap: float | None
    note: str = ""


def classify_regime(influence: InfluenceSpec) -> RegimeClass:
    """Stability class of a power-law influence function by its exponent."""
    if isinstance(influence, Constant):
        return RegimeClass(Stability.NOT_APPLICABLE, None,
                           "constant influence: linear averaging, always contracting"
                           if influence.value > 0 else
                           "zero influence: pure random walk")
    if isinstance(influence, HardThreshold):
        return RegimeClass(Stability.NOT_APPLICABLE, None,
                           "hard threshold: no power-law tail to classify")
    if not isinstance(influence, PowerLaw):
        return RegimeClass(Stability.NOT_APPLICABLE, None, "unknown family")
    p = influence.exponent
    if p < 1:
        return RegimeClass(Stability.STABLE_SUBLINEAR, 1.0 - p)
    if p < 2:
        return RegimeClass(Stability.STABLE_SUBQUADRATIC, 2.0 - p)
    if p == 2:
        return RegimeClass(Stability.BOUNDARY, 0.0,
                           "decay exactly 1/x^2: stability not settled")
    return RegimeClass(Stability.UNSTABLE, p - 2.0)


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

SWEEP_COLUMNS = ["t", "k", "lambda", "alpha", "gamma", "log_term1",
                 "log_term2", "log_bound", "vacuous", "error"]


def bound_sweep(query: TailQuery, params: BoundParams, t_grid: Iterable[float],
                rigorous: bool = False) -> list[dict]:
    """One row per t; rows whose evaluation fails carry the message in
    ``error`` instead of aborting the sweep."""
    rows = []
    for t in t_grid:
        row = dict.fromkeys(SWEEP_COLUMNS, "")
        row["t"] = t
        try:
            ev = tail_bound(query.at(t), params, rigorous, check_regime=False)
        except (RegimeError, ValueError, FloatingPointError) as exc:
            row["error"] = str(exc)
            rows.append(row)
            continue
        p = ev.params
        row.update(k=ev.k, **{"lambda": p.lam}, alpha=ev.effective_alpha,
                   gamma=p.gamma if rigorous else p.gamma_taylor,
                   log_bound=ev.log_bound, vacuous=ev.vacuous)
        if "escape" in ev.terms:
            row["log_term1"] = ev.terms["escape"]
        row["log_term2"] = ev.terms["chernoff"]
        rows.append(row)
    return rows


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_sweep_csv(rows: Sequence[dict], fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for row in rows:
        w.writerow([_fmt(row[c]) for c in SWEEP_COLUMNS])


def _grid_power(base: float, e: float) -> float:
    # integer powers via exact int arithmetic, so 1e2:1e40:log10 hits decades
    if base.is_integer() and abs(e - round(e)) < 1e-9:
        return float(int(base) ** int(round(e)))
    return base ** e


def parse_t_grid(text: str) -> list[float]:
    """Parse ``start:stop:log10`` (decades), ``start:stop:logN``,
    ``start:stop:linN`` or a comma list.  Integers stay integers."""
    text = text.strip()
    if not text:
        return []
    if ":" in text:
        start, stop, how = text.split(":")
        a, b = float(start), float(stop)
        if how.startswith("log"):
            step = float(how[3:] or 10)
            lo, hi = math.log(a, step), math.log(b, step)
            n = int(round(hi - lo))
            vals = [_grid_power(step, lo + i) for i in range(n + 1)]
        elif how.startswith("lin"):
            n = int(how[3:])
            vals = list(np.linspace(a, b, n))
        else:
            raise ValueError(f"unknown grid spacing {how!r}")
    else:
        vals = [float(x) for x in text.split(",")]
    return [int(v) if float(v).is_integer() and v < 2 ** 53 else float(v)
            for v in vals]
