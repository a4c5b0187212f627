"""Scenario container and its JSON file format."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from .bargaining import ProviderMap
from .demand_choice import (
    AssignmentModel,
    LinkCostModel,
    LinkProfitModel,
    PassengerClass,
    SatisfactionMode,
    TableDemand,
    TanhDemand,
)
from .equilibrium import MsaConfig, StepSchedule
from .errors import DomainError, SchemaError
from .incentive import IncentiveBox, QpConfig, TwoTimescaleConfig
from .network import Hyperpath, Link, Mode, Network, Node, build_incidence, validate_network


@dataclass(frozen=True)
class SolverSettings:
    alpha: StepSchedule = StepSchedule(10.0, 0.001, 0.8)
    beta: StepSchedule = StepSchedule(10.0, 1.0, 0.9)
    eps_flow: float = 1e-6
    eps_incentive: float = 1e-4
    max_iters: int = 50_000
    msa_max_iters: int = 200_000
    qp: QpConfig = QpConfig()

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha.as_dict(),
            "beta": self.beta.as_dict(),
            "eps_flow": self.eps_flow,
            "eps_incentive": self.eps_incentive,
            "max_iters": self.max_iters,
            "msa_max_iters": self.msa_max_iters,
            "qp": {"max_qp_iters": self.qp.max_qp_iters, "qp_tol": self.qp.qp_tol, "prox": self.qp.prox},
        }

    @classmethod
    def from_dict(cls, d: dict, base: "SolverSettings | None" = None) -> "SolverSettings":
        """Settings from a (possibly partial) dict; missing fields come from ``base``."""
        base = base or cls()
        unknown = set(d) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise KeyError(f"unknown solver settings: {sorted(unknown)}")
        qp = base.qp
        if "qp" in d:
            qp = dataclasses.replace(qp, **d["qp"])
        return cls(
            alpha=StepSchedule(**d["alpha"]) if "alpha" in d else base.alpha,
            beta=StepSchedule(**d["beta"]) if "beta" in d else base.beta,
            eps_flow=float(d.get("eps_flow", base.eps_flow)),
            eps_incentive=float(d.get("eps_incentive", base.eps_incentive)),
            max_iters=int(d.get("max_iters", base.max_iters)),
            msa_max_iters=int(d.get("msa_max_iters", base.msa_max_iters)),
            qp=qp,
        )


@dataclass(frozen=True)
class Scenario:
    network: Network
    cost: LinkCostModel
    profit: LinkProfitModel
    classes: tuple[PassengerClass, ...]
    box: IncentiveBox
    providers: ProviderMap
    theta: np.ndarray
    od_pairs: tuple[tuple[int, int], ...] = ()
    solver: SolverSettings = field(default_factory=SolverSettings)
    threads: int = 1

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(self.classes))
        object.__setattr__(self, "theta", np.asarray(self.theta, dtype=float))
        L = self.network.n_links
        sizes = {
            "cost": self.cost.n_links,
            "profit": self.profit.n_links,
            "incentive box": len(self.box.J_min),
            "provider map": self.providers.Z.shape[0],
        }
        for name, n in sizes.items():
            if n != L:
                raise DomainError(f"{name} has {n} links, network has {L}")
        if len(self.theta) != self.providers.n_providers:
            raise DomainError("theta needs one weight per provider")

    @property
    def n_links(self) -> int:
        return self.network.n_links

    @property
    def link_ids(self) -> tuple[int, ...]:
        return self.network.link_ids

    @cached_property
    def assignment(self) -> AssignmentModel:
        return AssignmentModel(self.classes, threads=self.threads)

    def msa_config(self) -> MsaConfig:
        return MsaConfig(self.solver.alpha, self.solver.eps_flow, self.solver.msa_max_iters)

    def two_timescale_config(self) -> TwoTimescaleConfig:
        s = self.solver
        return TwoTimescaleConfig(s.alpha, s.beta, s.eps_flow, s.eps_incentive, s.max_iters, s.msa_max_iters, s.qp)

    def replace(self, **changes) -> "Scenario":
        return dataclasses.replace(self, **changes)

    def with_box(self, lo, hi) -> "Scenario":
        L = self.n_links
        return self.replace(box=IncentiveBox(np.broadcast_to(lo, L).astype(float), np.broadcast_to(hi, L).astype(float)))

    def with_price_cut(self, link_index: int, delta: float) -> "Scenario":
        price = self.cost.price.copy()
        price[link_index] -= delta
        return self.replace(cost=dataclasses.replace(self.cost, price=price))

    def with_demand_scale(self, factor: float) -> "Scenario":
        classes = []
        for cls in self.classes:
            dem = cls.demand
            if isinstance(dem, TanhDemand):
                dem = TanhDemand(dem.a * factor, dem.b)
            else:
                dem = TableDemand(dem.s, tuple(np.asarray(dem.d) * factor))
            classes.append(dataclasses.replace(cls, demand=dem))
        return self.replace(classes=tuple(classes))


# ----------------------------------------------------------------------------
# JSON format

_NUM = {"type": "number"}
_NUMS = {"type": "array", "items": _NUM}
_SCHED = {
    "type": "object",
    "properties": {"p": _NUM, "q": _NUM, "r": _NUM},
    "required": ["p", "q", "r"],
    "additionalProperties": False,
}

SCENARIO_SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["nodes", "links", "hyperpaths", "classes", "incentive_box", "providers", "theta"],
    "properties": {
        "name": {"type": "string"},
        "gamma": {"type": "number", "minimum": 0},
        "nodes": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id"],
                "properties": {"id": {"type": "integer", "minimum": 0}, "label": {"type": ["string", "null"]}},
                "additionalProperties": False,
            },
        },
        "links": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "tail", "head", "provider", "price", "time", "congestion_slope",
                             "profit_slope", "profit_intercept"],
                "properties": {
                    "id": {"type": "integer", "minimum": 1},
                    "tail": {"type": "integer"},
                    "head": {"type": "integer"},
                    "mode": {"enum": [m.value for m in Mode]},
                    "provider": {"type": "integer", "minimum": 0},
                    "price": {"type": "number", "minimum": 0},
                    "time": _NUM,
                    "congestion_slope": {"type": "number", "minimum": 0},
                    "profit_slope": _NUM,
                    "profit_intercept": _NUM,
                },
                "additionalProperties": False,
            },
        },
        "hyperpaths": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "od", "links"],
                "properties": {
                    "id": {"type": "integer"},
                    "od": {"type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2},
                    "links": {"type": "array", "items": {"type": "integer"}, "minItems": 1},
                    "diversion": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "required": ["link", "prob"],
                            "properties": {"link": {"type": "integer"},
                                           "prob": {"type": "number", "minimum": 0, "maximum": 1}},
                            "additionalProperties": False,
                        },
                    },
                },
                "additionalProperties": False,
            },
        },
        "classes": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["demand", "route_ids"],
                "properties": {
                    "name": {"type": "string"},
                    "v0": _NUM,
                    "beta": _NUM,
                    "sigma": {"type": "number", "exclusiveMinimum": 0},
                    "satisfaction_mode": {"enum": [m.value for m in SatisfactionMode]},
                    "route_cost": _NUMS,
                    "demand": {
                        "oneOf": [
                            {
                                "type": "object",
                                "required": ["a", "b"],
                                "properties": {"type": {"const": "tanh"},
                                               "a": {"type": "number", "minimum": 0},
                                               "b": {"type": "number", "exclusiveMinimum": 0}},
                                "additionalProperties": False,
                            },
                            {
                                "type": "object",
                                "required": ["type", "s", "d"],
                                "properties": {"type": {"const": "table"}, "s": _NUMS, "d": _NUMS},
                                "additionalProperties": False,
                            },
                        ]
                    },
                    "route_ids": {"type": "array", "items": {"type": "integer"}, "minItems": 1},
                },
                "additionalProperties": False,
            },
        },
        "od_pairs": {"type": "array", "items": {"type": "array", "items": {"type": "integer"},
                                                 "minItems": 2, "maxItems": 2}},
        "incentive_box": {
            "type": "object",
            "required": ["j_min", "j_max"],
            "properties": {"j_min": _NUMS, "j_max": _NUMS},
            "additionalProperties": False,
        },
        "providers": {"type": "array", "items": {"type": "string"}, "minItems": 1},
        "theta": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
        "solver": {
            "type": "object",
            "properties": {
                "alpha": _SCHED,
                "beta": _SCHED,
                "eps_flow": {"type": "number", "exclusiveMinimum": 0},
                "eps_incentive": {"type": "number", "exclusiveMinimum": 0},
                "max_iters": {"type": "integer", "minimum": 1},
                "msa_max_iters": {"type": "integer", "minimum": 1},
                "qp": {
                    "type": "object",
                    "properties": {
                        "max_qp_iters": {"type": "integer", "minimum": 1},
                        "qp_tol": {"type": "number", "exclusiveMinimum": 0},
                        "prox": {"type": "number", "minimum": 0},
                    },
                    "additionalProperties": False,
                },
            },
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}


def _schema_check(doc: Any) -> None:
    validator = jsonschema.Draft202012Validator(SCENARIO_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise SchemaError(err.message, path=err.json_path)


def scenario_from_dict(doc: dict) -> Scenario:
    """Build a scenario from a parsed JSON document, validating as it goes."""
    _schema_check(doc)
    nodes = tuple(Node(n["id"], n.get("label")) for n in doc["nodes"])
    node_ids = {n.id for n in nodes}
    providers = doc["providers"]
    links_raw = doc["links"]
    seen = set()
    for i, l in enumerate(links_raw):
        where = f"$.links[{i}]"
        if l["id"] in seen:
            raise SchemaError(f"duplicate link id {l['id']}", path=f"{where}.id")
        seen.add(l["id"])
        for end in ("tail", "head"):
            if l[end] not in node_ids:
                raise SchemaError(f"unknown node id {l[end]}", path=f"{where}.{end}")
        if l["provider"] >= len(providers):
            raise SchemaError(f"unknown provider index {l['provider']}", path=f"{where}.provider")
    order = sorted(range(len(links_raw)), key=lambda i: links_raw[i]["id"])
    links_raw = [links_raw[i] for i in order]
    links = tuple(Link(l["id"], l["tail"], l["head"], Mode(l.get("mode", "generic")), l["provider"])
                  for l in links_raw)
    by_id = {l.id: l for l in links}
    L = len(links)

    hyperpaths = []
    for i, h in enumerate(doc["hyperpaths"]):
        where = f"$.hyperpaths[{i}]"
        for j, lid in enumerate(h["links"]):
            if lid not in by_id:
                raise SchemaError(f"unknown link id {lid}", path=f"{where}.links[{j}]")
        div = {}
        for j, item in enumerate(h.get("diversion", [])):
            if item["link"] not in h["links"]:
                raise SchemaError(f"diversion link {item['link']} is not in the hyperpath",
                                  path=f"{where}.diversion[{j}].link")
            div[item["link"]] = float(item["prob"])
        hyperpaths.append(Hyperpath(h["id"], tuple(h["od"]), tuple(by_id[lid] for lid in h["links"]), div))
    network = Network(nodes, links, tuple(hyperpaths))
    problems = validate_network(network)
    if problems:
        raise SchemaError("; ".join(problems), path="$")
    routes = {h.id: h for h in hyperpaths}

    classes = []
    for i, c in enumerate(doc["classes"]):
        where = f"$.classes[{i}]"
        for j, rid in enumerate(c["route_ids"]):
            if rid not in routes:
                raise SchemaError(f"unknown hyperpath id {rid}", path=f"{where}.route_ids[{j}]")
        inc = build_incidence(links, [routes[r] for r in c["route_ids"]])
        dem = c["demand"]
        try:
            demand = TableDemand(tuple(dem["s"]), tuple(dem["d"])) if dem.get("type") == "table" \
                else TanhDemand(float(dem["a"]), float(dem["b"]))
            cs = c.get("route_cost")
            if cs is not None:
                cs = np.asarray(cs, dtype=float)[np.argsort(c["route_ids"])]
            classes.append(PassengerClass(
                name=c.get("name", f"class{i}"),
                incidence=inc,
                demand=demand,
                v0=float(c.get("v0", 0.0)),
                beta=float(c.get("beta", 1.0)),
                sigma=float(c.get("sigma", 1.0)),
                satisfaction_mode=SatisfactionMode(c.get("satisfaction_mode", "scaled_max")),
                route_cost=cs,
            ))
        except DomainError as exc:
            raise SchemaError(str(exc), path=where) from exc

    def vec(key):
        return np.array([l[key] for l in links_raw], dtype=float)

    box = doc["incentive_box"]
    for key in ("j_min", "j_max"):
        if len(box[key]) != L:
            raise SchemaError(f"expected {L} entries, got {len(box[key])}", path=f"$.incentive_box.{key}")
    if len(doc["theta"]) != len(providers):
        raise SchemaError(f"expected {len(providers)} weights, got {len(doc['theta'])}", path="$.theta")
    try:
        solver = SolverSettings.from_dict(doc.get("solver", {}))
        box_obj = IncentiveBox(np.array(box["j_min"], dtype=float)[order], np.array(box["j_max"], dtype=float)[order])
    except DomainError as exc:
        raise SchemaError(str(exc), path="$.solver" if "step" in str(exc) else "$.incentive_box") from exc

    return Scenario(
        network=network,
        cost=LinkCostModel(vec("price"), vec("time"), vec("congestion_slope"), float(doc.get("gamma", 1.0))),
        profit=LinkProfitModel(vec("profit_slope"), vec("profit_intercept")),
        classes=tuple(classes),
        box=box_obj,
        providers=ProviderMap.from_owners([l.provider for l in links], providers),
        theta=np.asarray(doc["theta"], dtype=float),
        od_pairs=tuple(tuple(p) for p in doc.get("od_pairs", [])),
        solver=solver,
    )


def scenario_to_dict(s: Scenario) -> dict:
    if s.profit.Q.ndim != 1:
        raise DomainError("only diagonal profit slopes can be written to a scenario file")
    links = []
    for i, l in enumerate(sorted(s.network.links, key=lambda l: l.id)):
        links.append({
            "id": l.id, "tail": l.tail, "head": l.head, "mode": l.mode.value, "provider": l.provider,
            "price": float(s.cost.price[i]), "time": float(s.cost.time_const[i]),
            "congestion_slope": float(s.cost.congestion_slope[i]),
            "profit_slope": float(s.profit.Q[i]), "profit_intercept": float(s.profit.pi0[i]),
        })
    hyperpaths = []
    for h in sorted(s.network.hyperpaths, key=lambda h: h.id):
        item = {"id": h.id, "od": list(h.od), "links": list(h.link_ids)}
        if h.diversion:
            item["diversion"] = [{"link": k, "prob": float(v)} for k, v in sorted(h.diversion.items())]
        hyperpaths.append(item)
    classes = []
    for c in s.classes:
        if isinstance(c.demand, TanhDemand):
            dem = {"type": "tanh", "a": float(c.demand.a), "b": float(c.demand.b)}
        else:
            dem = {"type": "table", "s": list(c.demand.s), "d": list(c.demand.d)}
        item = {
            "name": c.name, "v0": c.v0, "beta": c.beta, "sigma": c.sigma,
            "satisfaction_mode": c.satisfaction_mode.value, "demand": dem,
            "route_ids": list(c.incidence.route_ids),
        }
        if np.any(c.route_cost != 0):
            item["route_cost"] = [float(v) for v in c.route_cost]
        classes.append(item)
    return {
        "gamma": float(s.cost.gamma),
        "nodes": [{"id": n.id, "label": n.label} for n in s.network.nodes],
        "links": links,
        "hyperpaths": hyperpaths,
        "classes": classes,
        "od_pairs": [list(p) for p in s.od_pairs],
        "incentive_box": {"j_min": [float(v) for v in s.box.J_min], "j_max": [float(v) for v in s.box.J_max]},
        "providers": list(s.providers.names),
        "theta": [float(v) for v in s.theta],
        "solver": s.solver.to_dict(),
    }


def dumps(s: Scenario) -> str:
    return json.dumps(scenario_to_dict(s), indent=1) + "\n"


def dump(s: Scenario, path: str | Path) -> None:
    Path(path).write_text(dumps(s))


def loads(text: str) -> Scenario:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc.msg} at line {exc.lineno} column {exc.colno}", path="$") from exc
    return scenario_from_dict(doc)


def load(path: str | Path) -> Scenario:
    return loads(Path(path).read_text())
