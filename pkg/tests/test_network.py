import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mmsue import (
    ElementaryPath,
    Hyperpath,
    InvalidHyperpath,
    Link,
    Network,
    Node,
    SchemaError,
    build_incidence,
    enumerate_paths,
    validate_network,
)
from mmsue.network import traversal_probabilities
from oracles import policy_path_probabilities


def diamond(p=0.3):
    links = (Link(1, 0, 1), Link(2, 0, 2), Link(3, 1, 3), Link(4, 2, 3), Link(5, 1, 2))
    return links, Hyperpath(1, (0, 3), links, {1: p, 2: 1 - p, 3: 0.5, 5: 0.5})


def test_elementary_path_checks():
    a, b = Link(1, 0, 1), Link(2, 1, 0)
    assert ElementaryPath((0, 1), (a,)).problems() == []
    assert ElementaryPath((0, 0), (a, b)).problems()  # revisits the origin
    assert ElementaryPath((0, 1), ()).problems()


def test_diamond_paths_match_policy_enumeration():
    _, h = diamond(0.3)
    got = {p.link_ids: prob for p, prob in enumerate_paths(h)}
    want = policy_path_probabilities(h)
    assert set(got) == set(want)
    for k in want:
        assert got[k] == pytest.approx(want[k], abs=1e-14)
    assert sum(got.values()) == pytest.approx(1.0, abs=1e-12)


def test_chengdu_hyperpaths_match_oracle(chengdu):
    for h in chengdu.network.hyperpaths:
        got = {p.link_ids: prob for p, prob in enumerate_paths(h)}
        want = policy_path_probabilities(h)
        assert got.keys() == want.keys()
        assert all(abs(got[k] - want[k]) < 1e-14 for k in want)
    split = {p.link_ids: prob for p, prob in enumerate_paths(chengdu.network.hyperpath(2))}
    assert split == {(2, 3, 4): pytest.approx(0.4), (2, 3, 5): pytest.approx(0.6)}


def test_cycle_rejected():
    links = (Link(1, 0, 1), Link(2, 1, 2), Link(3, 2, 1), Link(4, 2, 3))
    h = Hyperpath(1, (0, 3), links, {2: 1.0, 3: 0.5, 4: 0.5})
    with pytest.raises(InvalidHyperpath, match="cycle"):
        enumerate_paths(h)


def test_bad_diversion_sum():
    links, _ = diamond()
    h = Hyperpath(1, (0, 3), links, {1: 0.3, 2: 0.6, 3: 0.5, 5: 0.5})
    assert any("sums to" in p for p in h.problems())
    with pytest.raises(InvalidHyperpath):
        enumerate_paths(h)


def test_missing_diversion_and_dead_end():
    links = (Link(1, 0, 1), Link(2, 0, 2), Link(3, 1, 3))
    h = Hyperpath(1, (0, 3), links)
    msgs = h.problems()
    assert any("without diversion" in m for m in msgs)
    h2 = Hyperpath(1, (0, 3), links, {1: 0.5, 2: 0.5})
    assert any("dead end" in m for m in h2.problems())


def test_incidence_product_and_order():
    links, h = diamond(0.3)
    single = Hyperpath(2, (0, 3), (links[1], links[3]))
    inc = build_incidence(links, [single, h])
    assert inc.route_ids == (1, 2)  # canonical ascending order
    assert np.allclose(inc.B, inc.A @ inc.E)
    # B column = traversal probability of each link
    tp = traversal_probabilities(h)
    for i, lid in enumerate(inc.link_ids):
        assert inc.B[i, 0] == pytest.approx(tp.get(lid, 0.0))
    assert inc.B[:, 1].tolist() == [0, 1, 0, 1, 0]


def test_chengdu_route2_column(chengdu):
    B = chengdu.network.incidence().B
    assert B[:, 1].tolist() == [0, 1, 1, 0.4, 0.6, 0, 0, 0, 0, 0, 0, 0]


def test_incidence_errors():
    links, h = diamond()
    with pytest.raises(SchemaError, match="unknown link"):
        build_incidence(links[:3], [h])
    with pytest.raises(SchemaError, match="duplicate"):
        build_incidence(links, [h, h])


def test_incidence_csv(tmp_path):
    links, h = diamond()
    inc = build_incidence(links, [h])
    inc.to_csv(tmp_path / "B.csv")
    rows = (tmp_path / "B.csv").read_text().splitlines()
    assert len(rows) == 1 + len(links)


def test_validate_network(chengdu):
    assert validate_network(chengdu.network) == []
    links, h = diamond()
    bad = Network((Node(0), Node(1), Node(2)), links, (h,))
    assert validate_network(bad)  # node 3 is missing


@st.composite
def random_dag_hyperpath(draw):
    """Layered DAG from node 0 to node n-1 with random diversion probabilities."""
    n = draw(st.integers(3, 7))
    links, lid = [], 1
    for u in range(n - 1):
        heads = draw(st.lists(st.integers(u + 1, n - 1), min_size=1, max_size=3, unique=True))
        if u == n - 2:
            heads = [n - 1]
        for v in sorted(heads):
            links.append(Link(lid, u, v))
            lid += 1
    # keep only nodes reachable from 0
    reach, frontier = {0}, [0]
    while frontier:
        u = frontier.pop()
        for l in links:
            if l.tail == u and l.head not in reach:
                reach.add(l.head)
                frontier.append(l.head)
    links = [l for l in links if l.tail in reach]
    div = {}
    for u in reach:
        out = [l for l in links if l.tail == u]
        if len(out) > 1:
            w = np.array(draw(st.lists(st.floats(0.05, 1.0), min_size=len(out), max_size=len(out))))
            w = w / w.sum()
            w[-1] = 1.0 - w[:-1].sum()
            div.update({l.id: float(p) for l, p in zip(out, w)})
    return Hyperpath(1, (0, n - 1), tuple(links), div)


@settings(max_examples=60, deadline=None)
@given(random_dag_hyperpath())
def test_random_hyperpaths(h):
    paths = enumerate_paths(h)
    probs = {p.link_ids: q for p, q in paths}
    want = policy_path_probabilities(h)
    assert probs.keys() == want.keys()
    assert math.isclose(sum(probs.values()), 1.0, abs_tol=1e-12)
    for p, _ in paths:
        assert p.problems() == []
    # link traversal probability = total probability of paths through the link
    tp = traversal_probabilities(h)
    for link in h.links:
        through = sum(q for k, q in probs.items() if link.id in k)
        assert tp[link.id] == pytest.approx(through, abs=1e-12)
