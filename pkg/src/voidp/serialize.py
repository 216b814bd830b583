"""Versioned JSON persistence for models, rewards, costs, and solver output.

Every float is written as decimal text with 17 significant digits, which
round-trips IEEE doubles exactly; documents are serialized with sorted
keys and a fixed indent, so save(load(save(x))) is byte-identical to
save(x).
"""

from __future__ import annotations

import json
import math

import numpy as np

from .costs import CostModel
from .errors import FormatVersionError, SchemaError
from .model import ChainModel, HmmModel, Mode
from .multi import MultiChainModel, ProductCoupling
from .plan import PlanTables
from .rewards import (DecisionVoi, Expectation, Hotspot, JointEntropy, Margin,
                      ResidualEntropy, RewardSpec, WeightedVariance)
from .subset import SubsetResult

MODEL_FORMAT = "voidp-model/1"
HMM_FORMAT = "voidp-hmm/1"
REWARD_FORMAT = "voidp-reward/1"
COSTS_FORMAT = "voidp-costs/1"
PLAN_FORMAT = "voidp-plan/1"
SUBSET_FORMAT = "voidp-subset/1"
MULTI_FORMAT = "voidp-multimodel/1"


def _enc_float(x) -> str:
    return format(float(x), ".17g")


def _enc_array(arr) -> list:
    arr = np.asarray(arr, dtype=float)
    if arr.ndim == 1:
        return [_enc_float(x) for x in arr]
    return [_enc_array(row) for row in arr]


def _dec_float(value, path) -> float:
    try:
        return float(value)
    except (TypeError, ValueError):
        raise SchemaError(f"expected a number, got {value!r}", path)


def _dec_array(value, path, shape_hint="vector") -> np.ndarray:
    if not isinstance(value, list):
        raise SchemaError(f"expected a {shape_hint}", path)
    if value and isinstance(value[0], list):
        return np.array([_dec_array(v, f"{path}[{i}]") for i, v in enumerate(value)])
    return np.array([_dec_float(v, f"{path}[{i}]") for i, v in enumerate(value)])


def _field(doc, key, path=""):
    if not isinstance(doc, dict):
        raise SchemaError("expected an object", path or key)
    if key not in doc:
        raise SchemaError("missing field", f"{path}.{key}" if path else key)
    return doc[key]


def _check_format(doc, expected, path=""):
    tag = _field(doc, "format", path)
    if tag != expected:
        raise FormatVersionError(
            f"expected format {expected!r}, found {tag!r}",
            f"{path}.format" if path else "format",
        )


def model_to_document(model: ChainModel) -> dict:
    return {
        "format": MODEL_FORMAT,
        "prior": _enc_array(model.prior),
        "transitions": [_enc_array(t) for t in model.transitions],
        "state_values": None if model.state_values is None
        else [_enc_array(v) for v in model.state_values],
    }


def model_from_document(doc, path="") -> ChainModel:
    _check_format(doc, MODEL_FORMAT, path)
    prior = _dec_array(_field(doc, "prior", path), f"{path}.prior" if path else "prior")
    raw = _field(doc, "transitions", path)
    if not isinstance(raw, list):
        raise SchemaError("expected a list of matrices", "transitions")
    transitions = [
        _dec_array(t, f"{path}.transitions[{i}]" if path else f"transitions[{i}]", "matrix")
        for i, t in enumerate(raw)
    ]
    values = doc.get("state_values")
    state_values = None
    if values is not None:
        state_values = [
            _dec_array(v, f"state_values[{i}]") for i, v in enumerate(values)
        ]
    return ChainModel(prior, transitions, state_values=state_values)


def hmm_to_document(hmm: HmmModel) -> dict:
    return {
        "format": HMM_FORMAT,
        "hidden": model_to_document(hmm.hidden),
        "emissions": [_enc_array(e) for e in hmm.emissions],
    }


def hmm_from_document(doc) -> HmmModel:
    _check_format(doc, HMM_FORMAT)
    hidden = model_from_document(_field(doc, "hidden"), "hidden")
    emissions = [
        _dec_array(e, f"emissions[{i}]", "matrix")
        for i, e in enumerate(_field(doc, "emissions"))
    ]
    return HmmModel(hidden, tuple(emissions))


_VARIANT_KINDS = {
    "residual_entropy": ResidualEntropy,
    "joint_entropy": JointEntropy,
    "margin": Margin,
    "expectation": Expectation,
}


def _variant_to_document(variant) -> dict:
    if isinstance(variant, DecisionVoi):
        return {
            "kind": "decision_voi",
            "utilities": _enc_array(variant.utilities),
            "actions": list(variant.actions),
        }
    if isinstance(variant, WeightedVariance):
        return {"kind": "weighted_variance", "weight": _enc_float(variant.weight)}
    if isinstance(variant, Hotspot):
        return {"kind": "hotspot", "critical": sorted(variant.critical)}
    for name, cls in _VARIANT_KINDS.items():
        if isinstance(variant, cls):
            return {"kind": name}
    raise SchemaError(f"unknown reward variant {variant!r}")


def _variant_from_document(doc, path) -> object:
    kind = _field(doc, "kind", path)
    if kind == "decision_voi":
        utilities = _dec_array(_field(doc, "utilities", path), f"{path}.utilities", "matrix")
        return DecisionVoi(utilities, tuple(doc.get("actions") or ()))
    if kind == "weighted_variance":
        return WeightedVariance(_dec_float(_field(doc, "weight", path), f"{path}.weight"))
    if kind == "hotspot":
        crit = _field(doc, "critical", path)
        if not isinstance(crit, list):
            raise SchemaError("expected a list of states", f"{path}.critical")
        return Hotspot(frozenset(int(x) for x in crit))
    if kind in _VARIANT_KINDS:
        return _VARIANT_KINDS[kind]()
    raise SchemaError(f"unknown reward kind {kind!r}", f"{path}.kind")


def reward_to_document(spec: RewardSpec) -> dict:
    return {
        "format": REWARD_FORMAT,
        "variants": [_variant_to_document(v) for v in spec.variants],
    }


def reward_from_document(doc, path="") -> RewardSpec:
    _check_format(doc, REWARD_FORMAT, path)
    raw = _field(doc, "variants", path)
    if not isinstance(raw, list):
        raise SchemaError("expected a list of variants", "variants")
    base = f"{path}.variants" if path else "variants"
    return RewardSpec(tuple(
        _variant_from_document(v, f"{base}[{i}]") for i, v in enumerate(raw)
    ))


def costs_to_document(costs: CostModel) -> dict:
    penalties = [
        _enc_float(c) if np.isscalar(c) else _enc_array(c) for c in costs.penalties
    ]
    betas = [int(b) if np.isscalar(b) else [int(x) for x in b] for b in costs.betas]
    return {
        "format": COSTS_FORMAT,
        "budget": costs.budget,
        "penalties": penalties,
        "betas": betas,
    }


def costs_from_document(doc, path="") -> CostModel:
    _check_format(doc, COSTS_FORMAT, path)
    budget = _field(doc, "budget", path)
    if not isinstance(budget, int) or isinstance(budget, bool):
        raise SchemaError("budget must be an integer", "budget")
    penalties = []
    for i, c in enumerate(_field(doc, "penalties", path)):
        penalties.append(_dec_array(c, f"penalties[{i}]") if isinstance(c, list)
                         else _dec_float(c, f"penalties[{i}]"))
    betas = []
    for i, b in enumerate(_field(doc, "betas", path)):
        betas.append([int(x) for x in b] if isinstance(b, list) else int(b))
    return CostModel(penalties, betas, budget)


def subset_to_document(result: SubsetResult) -> dict:
    return {
        "format": SUBSET_FORMAT,
        "mode": result.mode.value,
        "budget": result.budget,
        "selected": list(result.selected),
        "value": _enc_float(result.value),
        "eval_count": result.eval_count,
        "tables": _enc_array(result.tables),
        "traceback": result.traceback.tolist(),
    }


def subset_from_document(doc) -> SubsetResult:
    _check_format(doc, SUBSET_FORMAT)
    tables = _dec_array(_field(doc, "tables"), "tables", "tensor")
    return SubsetResult(
        selected=tuple(int(j) for j in _field(doc, "selected")),
        value=_dec_float(_field(doc, "value"), "value"),
        tables=tables,
        traceback=np.array(_field(doc, "traceback"), dtype=int),
        eval_count=int(_field(doc, "eval_count")),
        mode=Mode.coerce(_field(doc, "mode")),
        budget=int(_field(doc, "budget")),
    )


def plan_to_document(tables: PlanTables) -> dict:
    segments = []
    for (a, b), values in sorted(tables.values.items()):
        entry = {
            "a": a,
            "b": b,
            "values": _enc_array(values),
            "pi": tables.pi[(a, b)].tolist(),
        }
        if tables.mode is Mode.SMOOTHING:
            entry["sigma"] = tables.sigma[(a, b)].tolist()
        segments.append(entry)
    return {
        "format": PLAN_FORMAT,
        "mode": tables.mode.value,
        "budget": tables.budget,
        "eval_count": tables.eval_count,
        "model": model_to_document(tables.model),
        "reward": reward_to_document(tables.spec),
        "costs": costs_to_document(tables.costs),
        "segments": segments,
    }


def plan_from_document(doc) -> PlanTables:
    _check_format(doc, PLAN_FORMAT)
    mode = Mode.coerce(_field(doc, "mode"))
    model = model_from_document(_field(doc, "model"), "model")
    spec = reward_from_document(_field(doc, "reward"), "reward")
    costs = costs_from_document(_field(doc, "costs"), "costs")
    values, pi, sigma = {}, {}, {}
    for i, entry in enumerate(_field(doc, "segments")):
        a = int(_field(entry, "a", f"segments[{i}]"))
        b = int(_field(entry, "b", f"segments[{i}]"))
        values[(a, b)] = _dec_array(_field(entry, "values", f"segments[{i}]"),
                                    f"segments[{i}].values", "tensor")
        pi[(a, b)] = np.array(_field(entry, "pi", f"segments[{i}]"), dtype=int)
        if mode is Mode.SMOOTHING:
            sigma[(a, b)] = np.array(_field(entry, "sigma", f"segments[{i}]"), dtype=int)
    return PlanTables(
        model=model, spec=spec, costs=costs, mode=mode,
        budget=int(_field(doc, "budget")), values=values, pi=pi, sigma=sigma,
        eval_count=int(_field(doc, "eval_count")),
    )


def multi_to_document(multi: MultiChainModel) -> dict:
    if not isinstance(multi.coupling, ProductCoupling):
        raise SchemaError("sampler couplings cannot be persisted")
    return {
        "format": MULTI_FORMAT,
        "sensors": [model_to_document(m) for m in multi.sensors],
        "rewards": [reward_to_document(r) for r in multi.rewards],
        "coupling": {
            "kind": "product_chain",
            "dims": [list(d) for d in multi.coupling.dims],
            "chain": model_to_document(multi.coupling.chain),
        },
    }


def multi_from_document(doc) -> MultiChainModel:
    _check_format(doc, MULTI_FORMAT)
    sensors = [
        model_from_document(m, f"sensors[{i}]")
        for i, m in enumerate(_field(doc, "sensors"))
    ]
    rewards = [
        reward_from_document(r, f"rewards[{i}]")
        for i, r in enumerate(_field(doc, "rewards"))
    ]
    coupling_doc = _field(doc, "coupling")
    kind = _field(coupling_doc, "kind", "coupling")
    if kind != "product_chain":
        raise SchemaError(f"unknown coupling kind {kind!r}", "coupling.kind")
    chain = model_from_document(_field(coupling_doc, "chain", "coupling"), "coupling.chain")
    dims = [tuple(int(x) for x in d) for d in _field(coupling_doc, "dims", "coupling")]
    return MultiChainModel(sensors, rewards, ProductCoupling(chain, dims))


_TO_DOCUMENT = [
    (ChainModel, model_to_document),
    (HmmModel, hmm_to_document),
    (RewardSpec, reward_to_document),
    (CostModel, costs_to_document),
    (PlanTables, plan_to_document),
    (SubsetResult, subset_to_document),
    (MultiChainModel, multi_to_document),
]

_FROM_DOCUMENT = {
    MODEL_FORMAT: model_from_document,
    HMM_FORMAT: hmm_from_document,
    REWARD_FORMAT: reward_from_document,
    COSTS_FORMAT: costs_from_document,
    PLAN_FORMAT: plan_from_document,
    SUBSET_FORMAT: subset_from_document,
    MULTI_FORMAT: multi_from_document,
}


def to_document(obj) -> dict:
    for cls, encode in _TO_DOCUMENT:
        if isinstance(obj, cls):
            return encode(obj)
    raise TypeError(f"cannot persist objects of type {type(obj).__name__}")


def from_document(doc):
    if not isinstance(doc, dict):
        raise SchemaError("expected a JSON object at the top level")
    tag = _field(doc, "format")
    if tag not in _FROM_DOCUMENT:
        raise FormatVersionError(f"unsupported format {tag!r}", "format")
    return _FROM_DOCUMENT[tag](doc)


def dumps(obj) -> str:
    return json.dumps(to_document(obj), indent=2, sort_keys=True) + "\n"


def save(obj, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(obj))


def loads(text: str):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise SchemaError(f"not valid JSON: {err}") from err
    return from_document(doc)


def load(path, expected_type=None):
    with open(path, "r", encoding="utf-8") as fh:
        obj = loads(fh.read())
    if expected_type is not None and not isinstance(obj, expected_type):
        raise SchemaError(
            f"expected a {expected_type.__name__} document, found {type(obj).__name__}"
        )
    return obj
