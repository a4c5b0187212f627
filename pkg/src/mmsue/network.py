"""Multi-modal graph, elementary paths, hyperpaths and incidence matrices.

Links are identified by integer id, never by their endpoints, so parallel
links between the same pair of nodes (two bus lines, say) are fine.  A
hyperpath (also called a *route*) is a bundle of elementary paths with
diversion probabilities at branching nodes.  The matrices built here are

* ``A`` (links x paths): 0/1 membership of a link in an elementary path,
* ``E`` (paths x routes): probability that a route follows a given path,
* ``B = A @ E`` (links x routes): probability that a route traverses a link.
"""

from __future__ import annotations

import csv
import enum
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InvalidHyperpath, SchemaError

DIVERSION_TOL = 1e-12


class Mode(str, enum.Enum):
    TAXI = "taxi"
    BUS = "bus"
    SUBWAY = "subway"
    BIKE = "bike"
    SCOOTER = "scooter"
    GENERIC = "generic"


@dataclass(frozen=True)
class Node:
    id: int
    label: str | None = None


@dataclass(frozen=True)
class Link:
    id: int
    tail: int
    head: int
    mode: Mode = Mode.GENERIC
    provider: int = 0

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))


@dataclass(frozen=True)
class ElementaryPath:
    od: tuple[int, int]
    links: tuple[Link, ...]

    @property
    def link_ids(self) -> tuple[int, ...]:
        return tuple(l.id for l in self.links)

    @property
    def nodes(self) -> tuple[int, ...]:
        if not self.links:
            return ()
        return (self.links[0].tail,) + tuple(l.head for l in self.links)

    def problems(self) -> list[str]:
        """Return the invariants this path violates (empty when valid)."""
        if not self.links:
            return ["path is empty"]
        out = []
        o, d = self.od
        if self.links[0].tail != o:
            out.append(f"path starts at node {self.links[0].tail}, not origin {o}")
        if self.links[-1].head != d:
            out.append(f"path ends at node {self.links[-1].head}, not destination {d}")
        for a, b in zip(self.links, self.links[1:]):
            if a.head != b.tail:
                out.append(f"links {a.id} and {b.id} are not consecutive")
        nodes = self.nodes
        if len(set(nodes)) != len(nodes):
            out.append("path repeats a node")
        return out


@dataclass(frozen=True)
class Hyperpath:
    """A route: a link set plus per-link diversion probabilities.

    ``diversion`` maps a link id to the probability of leaving the link's
    tail node through that link.  Links whose tail has a single outgoing
    hyperpath link may be omitted (probability 1).
    """

    id: int
    od: tuple[int, int]
    links: tuple[Link, ...]
    diversion: Mapping[int, float] = field(default_factory=dict)

    @property
    def link_ids(self) -> tuple[int, ...]:
        return tuple(l.id for l in self.links)

    def outgoing(self) -> dict[int, list[Link]]:
        out: dict[int, list[Link]] = defaultdict(list)
        for link in sorted(self.links, key=lambda l: l.id):
            out[link.tail].append(link)
        return out

    def probability(self, link: Link) -> float:
        if link.id in self.diversion:
            return float(self.diversion[link.id])
        siblings = self.outgoing()[link.tail]
        return 1.0 if len(siblings) == 1 else math.nan

    def topological_order(self) -> list[int] | None:
        """Nodes of the hyperpath in topological order, or None on a cycle."""
        out = self.outgoing()
        indeg: dict[int, int] = defaultdict(int)
        nodes = set()
        for link in self.links:
            nodes.update((link.tail, link.head))
            indeg[link.head] += 1
        ready = sorted(n for n in nodes if indeg[n] == 0)
        order = []
        while ready:
            n = ready.pop(0)
            order.append(n)
            for link in out.get(n, []):
                indeg[link.head] -= 1
                if indeg[link.head] == 0:
                    ready.append(link.head)
            ready.sort()
        return order if len(order) == len(nodes) else None

    def problems(self) -> list[str]:
        """Return the invariants this hyperpath violates (empty when valid)."""
        tag = f"hyperpath {self.id}"
        if not self.links:
            return [f"{tag}: no links"]
        out = []
        ids = [l.id for l in self.links]
        if len(set(ids)) != len(ids):
            out.append(f"{tag}: duplicate link ids")
        for lid in self.diversion:
            if lid not in ids:
                out.append(f"{tag}: diversion given for link {lid} outside the hyperpath")
        o, d = self.od
        outgoing = self.outgoing()
        if o not in outgoing:
            out.append(f"{tag}: origin {o} has no outgoing link")
        if d in outgoing:
            out.append(f"{tag}: destination {d} has outgoing links")
        for node, links in outgoing.items():
            probs = [self.probability(l) for l in links]
            if any(math.isnan(p) for p in probs):
                out.append(f"{tag}: node {node} branches without diversion probabilities")
                continue
            if any(p < 0 or p > 1 for p in probs):
                out.append(f"{tag}: node {node} has a diversion probability outside [0, 1]")
            total = sum(probs)
            if abs(total - 1.0) > DIVERSION_TOL:
                out.append(f"{tag}: diversion at node {node} sums to {total:.12g}, not 1")
        order = self.topological_order()
        if order is None:
            out.append(f"{tag}: link set contains a cycle")
        else:
            heads = {l.head for l in self.links}
            for node in order:
                if node != o and node not in heads:
                    out.append(f"{tag}: node {node} is not reachable from origin {o}")
                if node != d and node not in outgoing:
                    out.append(f"{tag}: node {node} is a dead end")
        return out


def enumerate_paths(hyperpath: Hyperpath) -> list[tuple[ElementaryPath, float]]:
    """List every elementary path of ``hyperpath`` with its en-route probability.

    The probability of a path is the product of the diversion probabilities
    of its links.  Paths come out in depth-first order, branches explored by
    ascending link id.
    """
    problems = hyperpath.problems()
    if problems:
        raise InvalidHyperpath("; ".join(problems))
    outgoing = hyperpath.outgoing()
    o, d = hyperpath.od
    found: list[tuple[ElementaryPath, float]] = []

    def walk(node: int, trail: list[Link], prob: float):
        if node == d:
            found.append((ElementaryPath(hyperpath.od, tuple(trail)), prob))
            return
        for link in outgoing.get(node, []):
            walk(link.head, trail + [link], prob * hyperpath.probability(link))

    walk(o, [], 1.0)
    return found


def traversal_probabilities(hyperpath: Hyperpath) -> dict[int, float]:
    """Probability that a traveller on ``hyperpath`` uses each of its links.

    Computed by pushing probability mass through the DAG in topological
    order, independently of path enumeration.
    """
    problems = hyperpath.problems()
    if problems:
        raise InvalidHyperpath("; ".join(problems))
    outgoing = hyperpath.outgoing()
    mass: dict[int, float] = defaultdict(float)
    mass[hyperpath.od[0]] = 1.0
    out: dict[int, float] = {}
    for node in hyperpath.topological_order():
        for link in outgoing.get(node, []):
            p = mass[node] * hyperpath.probability(link)
            out[link.id] = p
            mass[link.head] += p
    return out


@dataclass(frozen=True)
class IncidenceData:
    """Link-path, path-route and link-route matrices with their orderings."""

    link_ids: tuple[int, ...]
    path_keys: tuple[tuple[int, ...], ...]
    route_ids: tuple[int, ...]
    A: np.ndarray
    E: np.ndarray
    B: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.B.shape

    def to_csv(self, path: str | Path, matrix: str = "B") -> None:
        """Dump one matrix as dense CSV; rows are link ids, columns route ids."""
        mat = getattr(self, matrix)
        if matrix == "E":
            rows, cols = [",".join(map(str, k)) for k in self.path_keys], self.route_ids
        elif matrix == "A":
            rows, cols = self.link_ids, [",".join(map(str, k)) for k in self.path_keys]
        else:
            rows, cols = self.link_ids, self.route_ids
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["link"] + [str(c) for c in cols])
            for r, row in zip(rows, mat):
                w.writerow([r] + [f"{v:.6g}" for v in row])


def build_incidence(
    links: Iterable[Link] | Iterable[int],
    hyperpaths: Sequence[Hyperpath],
    paths: Sequence[ElementaryPath] | None = None,
) -> IncidenceData:
    """Build ``A``, ``E`` and ``B = A E`` in canonical id order.

    ``paths`` defaults to every elementary path of every hyperpath.  Extra
    paths that belong to no hyperpath just give an all-zero row of ``E``.
    """
    link_ids = sorted({l.id if isinstance(l, Link) else int(l) for l in links})
    row = {lid: i for i, lid in enumerate(link_ids)}
    routes = sorted(hyperpaths, key=lambda h: h.id)
    if len({h.id for h in routes}) != len(routes):
        raise SchemaError("duplicate hyperpath ids")

    per_route = [enumerate_paths(h) for h in routes]
    pool = {p.link_ids for p in paths} if paths is not None else set()
    for found in per_route:
        pool.update(p.link_ids for p, _ in found)
    keys = sorted(pool)
    for key in keys:
        for lid in key:
            if lid not in row:
                raise SchemaError(f"unknown link id {lid}")
    col = {k: j for j, k in enumerate(keys)}

    A = np.zeros((len(link_ids), len(keys)))
    for j, key in enumerate(keys):
        for lid in key:
            A[row[lid], j] = 1.0
    E = np.zeros((len(keys), len(routes)))
    for m, found in enumerate(per_route):
        for p, prob in found:
            E[col[p.link_ids], m] += prob
    return IncidenceData(
        link_ids=tuple(link_ids),
        path_keys=tuple(keys),
        route_ids=tuple(h.id for h in routes),
        A=A,
        E=E,
        B=A @ E,
    )


@dataclass(frozen=True)
class Network:
    nodes: tuple[Node, ...]
    links: tuple[Link, ...]
    hyperpaths: tuple[Hyperpath, ...] = ()

    @property
    def n_links(self) -> int:
        return len(self.links)

    @property
    def link_ids(self) -> tuple[int, ...]:
        return tuple(sorted(l.id for l in self.links))

    def link(self, link_id: int) -> Link:
        for l in self.links:
            if l.id == link_id:
                return l
        raise SchemaError(f"unknown link id {link_id}")

    def hyperpath(self, route_id: int) -> Hyperpath:
        for h in self.hyperpaths:
            if h.id == route_id:
                return h
        raise SchemaError(f"unknown hyperpath id {route_id}")

    def incidence(self, route_ids: Sequence[int] | None = None) -> IncidenceData:
        """Incidence matrices over all links for the chosen routes."""
        if route_ids is None:
            routes = self.hyperpaths
        else:
            routes = [self.hyperpath(r) for r in route_ids]
        return build_incidence(self.links, routes)


def validate_network(network: Network) -> list[str]:
    """Human-readable diagnostics; an empty list means the network is valid."""
    out = []
    node_ids = [n.id for n in network.nodes]
    if len(set(node_ids)) != len(node_ids):
        out.append("duplicate node ids")
    known = set(node_ids)
    link_ids = [l.id for l in network.links]
    if len(set(link_ids)) != len(link_ids):
        out.append("duplicate link ids")
    by_id = {l.id: l for l in network.links}
    for l in network.links:
        if l.tail == l.head:
            out.append(f"link {l.id}: tail equals head (node {l.tail})")
        for end in (l.tail, l.head):
            if end not in known:
                out.append(f"link {l.id}: unknown node {end}")
    route_ids = [h.id for h in network.hyperpaths]
    if len(set(route_ids)) != len(route_ids):
        out.append("duplicate hyperpath ids")
    for h in network.hyperpaths:
        for l in h.links:
            if by_id.get(l.id) != l:
                out.append(f"hyperpath {h.id}: link {l.id} does not match the network")
        out.extend(h.problems())
    return out
