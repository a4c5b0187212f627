import numpy as np
import pytest

from mmsue import (
    DomainError,
    GeneratorConfig,
    Unreachable,
    barabasi_albert,
    k_shortest_hyperpaths,
    provider_profits,
    random_scenario,
    validate_network,
)
from mmsue.network import Link, Network, Node
from mmsue.scenario import dumps
from conftest import CITY_FLOW
from oracles import all_simple_paths, binned_density_slope, ccdf_slope


def degrees(net):
    """Undirected degree of every node (each edge appears as two links)."""
    deg = {n.id: 0 for n in net.nodes}
    for l in net.links:
        deg[l.tail] += 1
    return np.array([deg[n.id] for n in net.nodes])


def test_ba_link_count():
    net = barabasi_albert(500, 2, 42)
    assert 1950 <= net.n_links <= 2050
    assert validate_network(net) == []


def test_ba_triangle():
    net = barabasi_albert(3, 2, 0)
    pairs = sorted((l.tail, l.head) for l in net.links)
    assert pairs == [(1, 2), (1, 3), (2, 1), (2, 3), (3, 1), (3, 2)]


@pytest.mark.parametrize("n,m", [(2, 2), (5, 0), (3, 5)])
def test_ba_bad_parameters(n, m):
    with pytest.raises(DomainError):
        barabasi_albert(n, m)


def test_ba_deterministic_and_min_degree():
    a, b = barabasi_albert(200, 2, 7), barabasi_albert(200, 2, 7)
    assert a == b
    assert barabasi_albert(200, 2, 8) != a
    assert degrees(a).min() >= 2


def test_ba_degree_tail():
    """Heavy tail: density exponent in the expected band, CCDF near the textbook -2."""
    dens, ccdf = [], []
    for seed in range(20):
        d = degrees(barabasi_albert(500, 2, seed))
        dens.append(binned_density_slope(d))
        ccdf.append(ccdf_slope(d))
    assert all(-3.8 <= s <= -2.2 for s in dens), dens
    assert all(-2.4 <= s <= -1.5 for s in ccdf), ccdf


def triangle():
    links = (Link(1, 0, 1), Link(2, 1, 2), Link(3, 0, 2))
    return Network((Node(0), Node(1), Node(2)), links)


def test_yen_triangle():
    hp = k_shortest_hyperpaths(triangle(), (0, 2), 2, {1: 1.0, 2: 1.0, 3: 3.0})
    assert [h.link_ids for h in hp] == [(1, 2), (3,)]
    assert hp.complete
    assert all(h.diversion == {} for h in hp)


def test_yen_fewer_than_k():
    hp = k_shortest_hyperpaths(triangle(), (0, 2), 5, {1: 1.0, 2: 1.0, 3: 3.0})
    assert len(hp) == 2 and not hp.complete


def test_yen_unreachable():
    with pytest.raises(Unreachable):
        k_shortest_hyperpaths(triangle(), (2, 0), 1, {1: 1.0, 2: 1.0, 3: 1.0})


def test_yen_tie_break_by_node_sequence():
    links = (Link(1, 0, 2), Link(2, 2, 3), Link(3, 0, 1), Link(4, 1, 3))
    net = Network(tuple(Node(i) for i in range(4)), links)
    hp = k_shortest_hyperpaths(net, (0, 3), 1, {i: 1.0 for i in range(1, 5)})
    assert hp[0].link_ids == (3, 4)  # via node 1 before node 2


def test_yen_matches_exhaustive_enumeration():
    net = barabasi_albert(50, 2, 3)
    rng = np.random.default_rng(3)
    cost = {l.id: float(c) for l, c in zip(net.links, rng.uniform(10, 20, net.n_links))}
    for _ in range(20):
        o, d = (int(x) for x in rng.choice(np.arange(1, 51), 2, replace=False))
        for k in (1, 3):
            hp = k_shortest_hyperpaths(net, (o, d), k, cost)
            got = [sum(cost[i] for i in h.link_ids) for h in hp]
            ref = all_simple_paths(net.links, o, d, max_cost=got[-1], cost=cost)[:k]
            assert np.allclose(got, [c for c, _ in ref], atol=1e-9)
            assert hp[0].link_ids == ref[0][1] or got[0] == pytest.approx(ref[1][0])


def test_random_scenario_contract():
    cfg = GeneratorConfig(n_nodes=60, n_od_pairs=15, seed=11)
    s = random_scenario(cfg)
    assert dumps(s) == dumps(random_scenario(cfg))
    assert validate_network(s.network) == []
    assert np.allclose(s.profit.pi0, s.cost.price / 2)
    assert np.all((s.cost.price >= 10) & (s.cost.price <= 20))
    assert set(np.unique(s.cost.congestion_slope)) <= {0.005, 0.01, 0.015}
    assert np.all(np.abs(s.profit.Q) <= 0.1)
    for cls in s.classes:
        assert 9 <= cls.demand.a <= 11 and 0.9 <= cls.demand.b <= 1.1
        assert cls.v0 == 200 and cls.sigma == 200
    for o, d in s.od_pairs:
        assert o != d and 1 <= o <= 60 and 1 <= d <= 60


def test_od_endpoints_limited_to_first_hundred():
    s = random_scenario(GeneratorConfig(n_nodes=300, n_od_pairs=40, seed=2))
    assert max(max(p) for p in s.od_pairs) <= 100


def test_generator_config_checks():
    with pytest.raises(DomainError):
        GeneratorConfig(n_nodes=3, m_attach=3)
    with pytest.raises(DomainError):
        GeneratorConfig(k_routes=0)


def test_chengdu_fixture(chengdu):
    assert chengdu.cost.price[0] == 50 and chengdu.cost.time_const[0] == 44
    assert validate_network(chengdu.network) == []
    taxi = provider_profits(np.array(CITY_FLOW), np.zeros(12), chengdu.profit, chengdu.providers)[0]
    assert taxi == pytest.approx(133.87, abs=0.1)
    assert [c.n_routes for c in chengdu.classes] == [3, 9]
    assert list(chengdu.providers.names) == ["taxi", "bus", "scooter", "subway"]
