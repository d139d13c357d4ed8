"""JSON experiment configuration: schema, defaults and resolution.

A document has four sections:

    model   influence function, noise law, and either a two-agent start
            or a graph (multi-agent run)
    query   tail event |Y(t)| >= c t**(1/2 - beta) and bound regime
    run     replicate count, worker count, master seed, work budget
    output  output directory and formats

The document is validated against SCHEMA before anything is computed.
Unknown keys are rejected.  ``resolve`` fills every default, draws any
random graph or random initial opinions, and returns a document that, when
fed back in, reproduces the same run exactly.
"""

from __future__ import annotations

import copy
import json
import os
from dataclasses import dataclass
from typing import Any

import jsonschema
import numpy as np

from .bounds import (
    BoundParams,
    BoundedRegime,
    SubGaussianRegime,
    TailQuery,
    classify_regime,
    parse_t_grid,
)
from .errors import ConfigurationError, RegimeError
from .model import (
    Constant,
    Gaussian,
    HardThreshold,
    MultiAgentConfig,
    NoiseLevel,
    NoiseSpec,
    PairingPolicy,
    PowerLaw,
    Rademacher,
    TruncatedGaussian,
    TwoAgentConfig,
    UniformBounded,
    subgaussian_parameter,
)
from .rng import SeedPolicy

SEED_ENV = "SBC_SEED"
GRAPH_STREAM = 16           # substream ids of replicate 0 used for graph draws


def _obj(props, required=()):
    return {"type": "object", "properties": props,
            "required": list(required), "additionalProperties": False}


_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_NONNEG = {"type": "number", "minimum": 0}

INFLUENCE_SCHEMA = {"oneOf": [
    _obj({"family": {"const": "power_law"},
          "scale": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
          "exponent": _NONNEG}, ["family", "scale", "exponent"]),
    _obj({"family": {"const": "hard_threshold"}, "radius": _NONNEG},
         ["family", "radius"]),
    _obj({"family": {"const": "constant"},
          "value": {"type": "number", "minimum": 0, "maximum": 1}},
         ["family", "value"]),
]}

_LEVEL = {"enum": ["per_agent", "difference"]}
NOISE_SCHEMA = {"oneOf": [
    _obj({"family": {"const": "uniform"}, "half_width": _NONNEG, "level": _LEVEL},
         ["family", "half_width"]),
    _obj({"family": {"const": "gaussian"}, "sigma": _NONNEG, "level": _LEVEL},
         ["family", "sigma"]),
    _obj({"family": {"const": "truncated_gaussian"}, "sigma": _POS,
          "half_width": _POS, "level": _LEVEL},
         ["family", "sigma", "half_width"]),
    _obj({"family": {"const": "rademacher"}, "magnitude": _NONNEG, "level": _LEVEL},
         ["family", "magnitude"]),
]}

_EDGE = {"type": "array", "items": {"type": "integer", "minimum": 0},
         "minItems": 2, "maxItems": 2}
GRAPH_SCHEMA = {"oneOf": [
    _obj({"edges": {"type": "array", "items": _EDGE},
          "n_vertices": {"type": "integer", "minimum": 1}},
         ["edges", "n_vertices"]),
    _obj({"random": _obj({
        "n_vertices": {"type": "integer", "minimum": 1},
        "edge_probability": {"type": "number", "minimum": 0, "maximum": 1},
    }, ["n_vertices", "edge_probability"])}, ["random"]),
]}

_INITIAL = {"oneOf": [
    {"type": "array", "items": _NUM, "minItems": 1},
    _obj({"uniform": {"type": "array", "items": _NUM,
                      "minItems": 2, "maxItems": 2}}, ["uniform"]),
]}

MODEL_SCHEMA = _obj({
    "influence": INFLUENCE_SCHEMA,
    "noise": NOISE_SCHEMA,
    "y0": _NUM,
    "horizon": {"type": "integer", "minimum": 0},
    "graph": GRAPH_SCHEMA,
    "initial": _INITIAL,
    "pairing": {"enum": [p.value for p in PairingPolicy]},
}, ["influence", "noise"])

QUERY_SCHEMA = _obj({
    "t": {"oneOf": [{"type": "number", "minimum": 1},
                    {"type": "array", "items": {"type": "number", "minimum": 1}},
                    {"type": "string"}]},
    "c": _POS,
    "beta": _POS,
    "regime": {"enum": ["bounded", "subgauss"]},
    "delta": _NUM,          # range checked with the regime, not here
    "beta_prime": _POS,
    "zeta": _NONNEG,
    "B": _POS,
    "D": _POS,
    "sigma": _POS,
    "rigorous": {"type": "boolean"},
})

RUN_SCHEMA = _obj({
    "n_replicates": {"type": "integer", "minimum": 1},
    "worker_count": {"type": "integer", "minimum": 1},
    "master_seed": {"type": "integer", "minimum": 0, "maximum": 2 ** 64 - 1},
    "budget": _POS,
    "level": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
})

OUTPUT_SCHEMA = _obj({
    "directory": {"type": "string"},
    "formats": {"type": "array", "items": {"enum": ["csv", "json"]}},
})

SCHEMA = _obj({
    "model": MODEL_SCHEMA,
    "query": QUERY_SCHEMA,
    "run": RUN_SCHEMA,
    "output": OUTPUT_SCHEMA,
}, ["model"])

RUN_DEFAULTS = {"n_replicates": 1, "worker_count": 1, "master_seed": 0,
                "budget": 1e9, "level": 0.99}
OUTPUT_DEFAULTS = {"directory": "out", "formats": ["csv", "json"]}


class SchemaError(ConfigurationError):
    """The document does not match SCHEMA; ``path`` locates the field."""

    def __init__(self, message: str, path: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def _json_path(error) -> str:
    path = "$"
    for part in error.absolute_path:
        path += f"[{part}]" if isinstance(part, int) else f".{part}"
    return path


def _deepest(error):
    # a oneOf failure carries the errors of every branch; report those of
    # the branch whose discriminating "family" (or shape) matched
    while error.context:
        branches = {}
        for e in error.context:
            branches.setdefault(e.relative_schema_path[0], []).append(e)

        def score(errs):
            wrong_family = any(e.validator == "const" for e in errs)
            return (wrong_family, len(errs), -max(len(e.absolute_path) for e in errs))

        errs = min(branches.values(), key=score)
        error = errs[0]
    return error


def validate(doc: Any) -> None:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        err = _deepest(errors[0])
        raise SchemaError(err.message, _json_path(err))


def load(path) -> dict:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON ({exc.msg})", f"$ (line {exc.lineno})") from exc
    validate(doc)
    return doc


# ---------------------------------------------------------------------------
# model objects from document sections
# ---------------------------------------------------------------------------

def build_influence(d: dict):
    fam = d["family"]
    if fam == "power_law":
        return PowerLaw(d["scale"], d["exponent"])
    if fam == "hard_threshold":
        return HardThreshold(d["radius"])
    return Constant(d["value"])


def build_noise(d: dict) -> NoiseSpec:
    fam = d["family"]
    if fam == "uniform":
        family = UniformBounded(d["half_width"])
    elif fam == "gaussian":
        family = Gaussian(d["sigma"])
    elif fam == "truncated_gaussian":
        family = TruncatedGaussian(d["sigma"], d["half_width"])
    else:
        family = Rademacher(d["magnitude"])
    return NoiseSpec(family, NoiseLevel(d.get("level", "per_agent")))


def _random_graph(n: int, p: float, seed: SeedPolicy) -> list[list[int]]:
    rng = seed.generator(0, GRAPH_STREAM)
    iu, ju = np.triu_indices(n, 1)
    keep = rng.random(iu.size) < p
    return [[int(u), int(v)] for u, v in zip(iu[keep], ju[keep])]


def _resolve_model(model: dict, seed: SeedPolicy) -> dict:
    m = copy.deepcopy(model)
    m["noise"].setdefault("level", "per_agent")
    m.setdefault("horizon", 0)
    if "graph" not in m:
        if "initial" in m or "pairing" in m:
            raise SchemaError("'initial' and 'pairing' need a 'graph'", "$.model")
        m.setdefault("y0", 0.0)
        return m
    if "y0" in m:
        raise SchemaError("'y0' is for two-agent runs, not graphs", "$.model.y0")
    g = m["graph"]
    if "random" in g:
        r = g["random"]
        n = r["n_vertices"]
        m["graph"] = {"n_vertices": n,
                      "edges": _random_graph(n, r["edge_probability"], seed)}
    n = m["graph"]["n_vertices"]
    init = m.get("initial")
    if init is None:
        raise SchemaError("'initial' is a required property for graph runs", "$.model")
    if isinstance(init, dict):
        lo, hi = init["uniform"]
        rng = seed.generator(0, GRAPH_STREAM + 1)
        m["initial"] = [float(x) for x in rng.uniform(lo, hi, n)]
    elif len(init) != n:
        raise SchemaError(f"expected {n} initial opinions, got {len(init)}",
                          "$.model.initial")
    m.setdefault("pairing", PairingPolicy.SINGLE_RANDOM_EDGE.value)
    return m


def _resolve_query(query: dict, model: dict) -> dict:
    q = copy.deepcopy(query)
    infl = model["influence"]
    noise = build_noise(model["noise"])
    q.setdefault("c", 1.0)
    q.setdefault("rigorous", False)
    if "regime" not in q:
        return q
    if "B" not in q and infl["family"] == "power_law":
        q["B"] = infl["scale"]
    if "delta" not in q and infl["family"] == "power_law":
        p = infl["exponent"]
        q["delta"] = (1.0 - p) if q["regime"] == "bounded" else (2.0 - p)
    if "sigma" not in q:
        s2 = subgaussian_parameter(noise)
        if s2 > 0:
            q["sigma"] = float(np.sqrt(s2))
    if "D" not in q:
        if q["regime"] == "bounded" and noise.diff_bound:
            q["D"] = noise.diff_bound
        elif q["regime"] == "subgauss" and "sigma" in q:
            q["D"] = q["sigma"]
    return q


def resolve(doc: dict, seed_override: int | None = None) -> dict:
    """Fill defaults and materialise random choices.

    ``seed_override`` (or the SBC_SEED environment variable) replaces
    run.master_seed.
    """
    validate(doc)
    out = {}
    run = dict(RUN_DEFAULTS, **doc.get("run", {}))
    if seed_override is None and os.environ.get(SEED_ENV):
        try:
            seed_override = int(os.environ[SEED_ENV], 0)
        except ValueError as exc:
            raise SchemaError(f"{SEED_ENV} must be an integer", "$env." + SEED_ENV) from exc
    if seed_override is not None:
        run["master_seed"] = int(seed_override)
    seed = SeedPolicy(run["master_seed"])
    out["model"] = _resolve_model(doc["model"], seed)
    out["query"] = _resolve_query(doc.get("query", {}), out["model"])
    out["run"] = run
    out["output"] = dict(OUTPUT_DEFAULTS, **doc.get("output", {}))
    validate(out)
    return out


# ---------------------------------------------------------------------------
# resolved experiment
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    doc: dict

    @classmethod
    def from_file(cls, path, seed_override: int | None = None) -> ExperimentConfig:
        return cls(resolve(load(path), seed_override))

    @classmethod
    def from_dict(cls, doc: dict, seed_override: int | None = None) -> ExperimentConfig:
        return cls(resolve(doc, seed_override))

    @property
    def model(self) -> dict:
        return self.doc["model"]

    @property
    def query(self) -> dict:
        return self.doc["query"]

    @property
    def run(self) -> dict:
        return self.doc["run"]

    @property
    def output(self) -> dict:
        return self.doc["output"]

    @property
    def seed(self) -> SeedPolicy:
        return SeedPolicy(self.run["master_seed"])

    @property
    def is_multi_agent(self) -> bool:
        return "graph" in self.model

    @property
    def influence(self):
        return build_influence(self.model["influence"])

    @property
    def noise(self) -> NoiseSpec:
        return build_noise(self.model["noise"])

    def two_agent(self) -> TwoAgentConfig:
        if self.is_multi_agent:
            raise ConfigurationError("config describes a graph, not two agents")
        m = self.model
        return TwoAgentConfig(self.influence, self.noise, m["horizon"], m["y0"])

    def multi_agent(self) -> MultiAgentConfig:
        if not self.is_multi_agent:
            raise ConfigurationError("config has no graph section")
        m = self.model
        return MultiAgentConfig(
            tuple(tuple(e) for e in m["graph"]["edges"]), self.influence,
            self.noise, tuple(m["initial"]), PairingPolicy(m["pairing"]),
            m["horizon"])

    def t_values(self) -> list:
        t = self.query.get("t")
        if t is None:
            return []
        if isinstance(t, str):
            return parse_t_grid(t)
        return list(t) if isinstance(t, list) else [t]

    def has_bound_query(self) -> bool:
        return "regime" in self.query

    def tail_query(self, t: float = 1) -> TailQuery:
        """The query at time ``t`` with its regime attached (not checked)."""
        q = self.query
        if "beta" not in q:
            raise SchemaError("'beta' is required to define the threshold", "$.query")
        regime = None
        if "regime" in q:
            if "delta" not in q:
                raise SchemaError("'delta' is required unless the influence "
                                  "is a power law", "$.query")
            if q["regime"] == "bounded":
                regime = BoundedRegime(q["delta"])
            else:
                for key in ("beta_prime", "zeta"):
                    if key not in q:
                        raise SchemaError(f"'{key}' is required for the "
                                          "sub-Gaussian regime", "$.query")
                regime = SubGaussianRegime(q["delta"], q["beta_prime"], q["zeta"])
        return TailQuery(t, q["c"], q["beta"], regime)

    def bound_params(self) -> BoundParams:
        q = self.query
        for key in ("B", "D"):
            if key not in q:
                raise SchemaError(f"'{key}' is required for bound evaluation", "$.query")
        if q["regime"] == "subgauss" and "sigma" not in q:
            raise SchemaError("'sigma' is required for the sub-Gaussian regime", "$.query")
        return BoundParams(q["B"], q["D"], q.get("sigma"))

    def check_regime(self) -> None:
        """Raise RegimeError if the query's regime inequalities fail or the
        influence exponent disagrees with the stated exponent gap."""
        if not self.has_bound_query():
            return
        self.tail_query().check_regime()
        infl = self.influence
        if isinstance(infl, PowerLaw):
            cls = classify_regime(infl)
            want = (1.0 - infl.exponent) if self.query["regime"] == "bounded" \
                else (2.0 - infl.exponent)
            if abs(want - self.query["delta"]) > 1e-12:
                raise RegimeError(
                    f"δ={self.query['delta']} does not match the influence "
                    f"exponent p={infl.exponent} (expected δ={want}; "
                    f"stability class {cls.kind.value})")

    def dump(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
