"""Synthetic scale-free scenarios and the bundled six-node city fixture."""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .bargaining import ProviderMap
from .demand_choice import LinkCostModel, LinkProfitModel, PassengerClass, TanhDemand
from .equilibrium import StepSchedule
from .errors import DomainError, Unreachable
from .incentive import IncentiveBox, QpConfig
from .network import Hyperpath, Link, Mode, Network, Node, build_incidence
from .scenario import Scenario, SolverSettings

SLOPE_MODES = {0.005: Mode.SUBWAY, 0.01: Mode.BUS, 0.015: Mode.TAXI}


@dataclass(frozen=True)
class GeneratorConfig:
    n_nodes: int = 500
    m_attach: int = 2
    n_od_pairs: int = 100
    k_routes: int = 3
    seed: int = 0
    od_range: int = 100
    cost_range: tuple[float, float] = (10.0, 20.0)
    demand_range: tuple[float, float] = (0.9, 1.1)
    demand_scale: float = 10.0
    slopes: tuple[float, ...] = (0.005, 0.01, 0.015)
    profit_slope_range: tuple[float, float] = (-0.1, 0.1)
    v0: float = 200.0
    sigma: float = 200.0
    box: tuple[float, float] = (-3.0, 3.0)

    def __post_init__(self):
        if not 1 <= self.m_attach < self.n_nodes:
            raise DomainError("need 1 <= m_attach < n_nodes")
        if self.k_routes < 1:
            raise DomainError("k_routes must be at least 1")
        if self.n_od_pairs < 1:
            raise DomainError("n_od_pairs must be at least 1")
        if not 0 <= self.seed < 2**64:
            raise DomainError("seed must be a 64-bit unsigned integer")


def barabasi_albert(n: int, m: int, seed: int | np.random.Generator = 0) -> Network:
    """Preferential-attachment graph with both directions of every edge.

    Grows from a clique on nodes ``1..m+1``; each later node connects to
    ``m`` distinct existing nodes picked with probability proportional to
    their degree.  Nodes are numbered ``1..n``; link ids follow the order in
    which edges are created, forward direction first.
    """
    if not 1 <= m < n:
        raise DomainError(f"need 1 <= m < n, got n={n}, m={m}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    edges: list[tuple[int, int]] = []
    ends: list[int] = []  # every edge endpoint once, so uniform draws are degree-weighted
    for u in range(1, m + 2):
        for v in range(u + 1, m + 2):
            edges.append((u, v))
            ends += [u, v]
    for new in range(m + 2, n + 1):
        targets: list[int] = []
        while len(targets) < m:
            t = ends[int(rng.integers(len(ends)))]
            if t not in targets:
                targets.append(t)
        for t in targets:
            edges.append((t, new))
            ends += [t, new]
    links = []
    for u, v in edges:
        links.append(Link(len(links) + 1, u, v))
        links.append(Link(len(links) + 1, v, u))
    return Network(tuple(Node(i) for i in range(1, n + 1)), tuple(links))


class HyperpathList(list):
    """List of hyperpaths; ``complete`` is False when fewer than k exist."""

    complete: bool = True


def _cost_lookup(network: Network, costs) -> dict[int, float]:
    if isinstance(costs, Mapping):
        return {int(k): float(v) for k, v in costs.items()}
    costs = np.asarray(costs, dtype=float)
    return dict(zip(network.link_ids, costs))


def _dijkstra(out, source, target, cost, banned_nodes, banned_links):
    """Cheapest path, ties broken by smaller (node sequence, link sequence)."""
    heap = [(0.0, (source,), ())]
    done = set()
    while heap:
        c, nodes, links = heapq.heappop(heap)
        node = nodes[-1]
        if node in done:
            continue
        done.add(node)
        if node == target:
            return c, nodes, links
        for link in out.get(node, ()):
            if link.id in banned_links or link.head in banned_nodes or link.head in done:
                continue
            heapq.heappush(heap, (c + cost[link.id], nodes + (link.head,), links + (link,)))
    return None


def k_shortest_hyperpaths(network: Network, od: tuple[int, int], k: int, costs,
                          first_id: int = 1) -> HyperpathList:
    """The ``k`` cheapest loopless paths by constant link cost, as hyperpaths.

    Yen's algorithm; each path becomes a single-path hyperpath.  ``costs``
    is either a mapping from link id to cost or a vector in link-id order.
    """
    if k < 1:
        raise DomainError("k must be at least 1")
    o, d = od
    cost = _cost_lookup(network, costs)
    out: dict[int, list[Link]] = {}
    for link in sorted(network.links, key=lambda l: l.id):
        out.setdefault(link.tail, []).append(link)

    first = _dijkstra(out, o, d, cost, set(), set())
    if first is None or o == d:
        raise Unreachable(f"no path from node {o} to node {d}")
    found = [first]
    candidates: list = []
    seen = {first[2]}
    while len(found) < k:
        _, nodes, links = found[-1]
        for i in range(len(links)):
            root_nodes, root_links = nodes[: i + 1], links[:i]
            banned_links = {p[2][i].id for p in found if p[2][:i] == root_links and len(p[2]) > i}
            spur = _dijkstra(out, nodes[i], d, cost, set(root_nodes[:-1]), banned_links)
            if spur is None:
                continue
            full_links = root_links + spur[2]
            if full_links in seen:
                continue
            seen.add(full_links)
            total = sum(cost[l.id] for l in full_links)
            heapq.heappush(candidates, (total, root_nodes[:-1] + spur[1], full_links))
        if not candidates:
            break
        found.append(heapq.heappop(candidates))
    result = HyperpathList(
        Hyperpath(first_id + j, (o, d), links) for j, (_, _, links) in enumerate(found)
    )
    result.complete = len(found) == k
    return result


def random_scenario(config: GeneratorConfig) -> Scenario:
    """Scale-free multi-OD scenario with sampled costs, profits and demand.

    All randomness comes from one PCG64 generator seeded with
    ``config.seed``.
    """
    rng = np.random.default_rng(config.seed)
    net = barabasi_albert(config.n_nodes, config.m_attach, rng)
    L = net.n_links
    c0 = rng.uniform(*config.cost_range, size=L)
    slope = np.asarray(config.slopes)[rng.integers(len(config.slopes), size=L)]
    q = rng.uniform(*config.profit_slope_range, size=L)
    slope_list = list(config.slopes)
    modes = [SLOPE_MODES.get(s, Mode.GENERIC) for s in config.slopes]
    links = tuple(
        Link(l.id, l.tail, l.head, modes[slope_list.index(s)], slope_list.index(s))
        for l, s in zip(net.links, slope)
    )

    top = min(config.od_range, config.n_nodes)
    ods = []
    for _ in range(config.n_od_pairs):
        o, d = rng.choice(np.arange(1, top + 1), size=2, replace=False)
        ods.append((int(o), int(d)))
    ab = rng.uniform(*config.demand_range, size=(config.n_od_pairs, 2))

    net = Network(net.nodes, links)
    hyperpaths: list[Hyperpath] = []
    classes = []
    for n, (od, (a, b)) in enumerate(zip(ods, ab)):
        routes = k_shortest_hyperpaths(net, od, config.k_routes, c0, first_id=len(hyperpaths) + 1)
        hyperpaths.extend(routes)
        classes.append(PassengerClass(
            name=f"od{n + 1}",
            incidence=build_incidence(links, routes),
            demand=TanhDemand(config.demand_scale * a, b),
            v0=config.v0,
            sigma=config.sigma,
        ))
    names = [m.value for m in modes]
    return Scenario(
        network=Network(net.nodes, links, tuple(hyperpaths)),
        cost=LinkCostModel(c0, np.zeros(L), slope, gamma=1.0),
        profit=LinkProfitModel(q, c0 / 2),
        classes=tuple(classes),
        box=IncentiveBox.uniform(L, *config.box),
        providers=ProviderMap.from_owners([l.provider for l in links], names),
        theta=np.ones(len(names)),
        od_pairs=tuple(ods),
        solver=SolverSettings(beta=StepSchedule(100.0, 0.8, 0.9), max_iters=15_000,
                              qp=QpConfig(max_qp_iters=100)),
    )


# ----------------------------------------------------------------------------
# Six-node city fixture: taxi, bus, scooter and subway between o and d.

_NODE_LABELS = ["o", "1", "2", "3", "4", "d"]
# id, tail, head, mode, provider, price, time
_LINKS = [
    (1, 0, 5, Mode.TAXI, 0, 50.0, 44.0),
    (2, 0, 1, Mode.TAXI, 0, 20.0, 14.0),
    (3, 1, 2, Mode.BUS, 1, 3.0, 42.0),
    (4, 2, 5, Mode.BUS, 1, 3.0, 38.0),
    (5, 2, 5, Mode.BUS, 1, 4.0, 36.0),
    (6, 1, 3, Mode.SCOOTER, 2, 1.0, 6.0),
    (7, 3, 1, Mode.SCOOTER, 2, 1.0, 6.0),
    (8, 2, 4, Mode.SCOOTER, 2, 1.0, 6.0),
    (9, 4, 2, Mode.SCOOTER, 2, 1.0, 6.0),
    (10, 0, 3, Mode.BUS, 1, 3.0, 48.0),
    (11, 3, 4, Mode.SUBWAY, 3, 5.0, 34.0),
    (12, 4, 5, Mode.SUBWAY, 3, 4.0, 40.0),
]
_Q = [-0.2, -0.2, 0.05, 0.05, 0.05, -0.03, -0.03, -0.03, -0.03, 0.05, 0.05, 0.05]
_PI0 = [10.0, 4.0, 0.5, 0.5, 0.75, 0.7, 0.7, 0.7, 0.7, 0.5, 2.0, 1.6]
_SPLIT = {4: 0.4, 5: 0.6}
_ROUTES = [
    [1],
    [2, 3, 4, 5],
    [2, 6, 11, 12],
    [2, 6, 11, 9, 4, 5],
    [2, 3, 8, 12],
    [10, 7, 3, 4, 5],
    [10, 7, 3, 8, 12],
    [10, 11, 9, 4, 5],
    [10, 11, 12],
]
PROVIDERS = ("taxi", "bus", "scooter", "subway")


def chengdu_fixture() -> Scenario:
    """Six nodes, twelve links, two passenger classes and four providers."""
    links = tuple(Link(i, t, h, m, p) for i, t, h, m, p, _, _ in _LINKS)
    by_id = {l.id: l for l in links}
    hyperpaths = tuple(
        Hyperpath(r + 1, (0, 5), tuple(by_id[i] for i in ids),
                  {i: _SPLIT[i] for i in ids if i in _SPLIT})
        for r, ids in enumerate(_ROUTES)
    )
    nodes = tuple(Node(i, lab) for i, lab in enumerate(_NODE_LABELS))
    price = np.array([row[5] for row in _LINKS])
    time = np.array([row[6] for row in _LINKS])
    classes = (
        PassengerClass("A", build_incidence(links, [hyperpaths[i - 1] for i in (1, 2, 9)]),
                       TanhDemand(60.0, 1.0), v0=200.0, sigma=200.0),
        PassengerClass("B", build_incidence(links, hyperpaths),
                       TanhDemand(40.0, 1.0), v0=200.0, sigma=200.0),
    )
    return Scenario(
        network=Network(nodes, links, hyperpaths),
        cost=LinkCostModel(price, time, np.full(12, 0.02), gamma=0.5),
        profit=LinkProfitModel(np.array(_Q), np.array(_PI0)),
        classes=classes,
        box=IncentiveBox.uniform(12, -3.0, 3.0),
        providers=ProviderMap.from_owners([l.provider for l in links], PROVIDERS),
        theta=np.array([70.0, 60.0, 1.0, 200.0]),
        od_pairs=((0, 5),),
        solver=SolverSettings(),
    )
