import dataclasses

import numpy as np
import pytest

from mmsue import GeneratorConfig, chengdu_fixture, msa_solve, random_scenario, two_timescale

CITY_FLOW = [32.16, 12.10, 12.09, 5.09, 7.63, 0.09, 0.09, 0.01, 0.64, 12.13, 12.13, 11.50]
CITY_COST = [72.32, 27.12, 24.12, 22.05, 22.08, 4.00, 4.00, 4.00, 4.00, 27.12, 22.12, 24.11]
CITY_MARGIN = [3.57, 1.58, 1.10, 0.75, 1.13, 0.70, 0.70, 0.70, 0.68, 1.11, 2.61, 2.17]
CITY_J_OPT = [-0.00, -0.35, 0.16, 0.32, 0.10, -0.23, 1.23, 2.04, 1.69, -1.58, -1.30, -1.85]
CITY_FLOW_OPT = [5.15, 2.11, 1.90, 0.80, 1.21, 0.22, 0.01, 0.00, 0.11, 49.98, 50.19, 50.08]


def small_scenario(seed: int, logsum: bool = False, n_nodes: int = 12, n_od: int = 3):
    """A few OD pairs on a small scale-free graph; cheap enough for sweeps."""
    s = random_scenario(GeneratorConfig(n_nodes=n_nodes, m_attach=2, n_od_pairs=n_od, k_routes=3,
                                        seed=seed, od_range=n_nodes))
    if logsum:
        s = s.replace(classes=tuple(dataclasses.replace(c, satisfaction_mode="logsum") for c in s.classes))
    return s


@pytest.fixture(scope="session")
def chengdu():
    return chengdu_fixture()


@pytest.fixture(scope="session")
def chengdu_base(chengdu):
    return msa_solve(chengdu)


@pytest.fixture(scope="session")
def chengdu_opt(chengdu):
    return two_timescale(chengdu)


@pytest.fixture(scope="session")
def chengdu_small_box(chengdu):
    return two_timescale(chengdu.with_box(-0.1, 0.1))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


TOY = dict(price=(4.0, 6.0), time=(10.0, 6.0), slope=(0.3, 0.1), gamma=0.5, v0=20.0, beta=1.0, sigma=10.0,
           a=30.0, b=0.8)


def toy_scenario(**overrides):
    """One OD pair, two parallel single-link routes, one class, two providers."""
    from mmsue import (IncentiveBox, LinkCostModel, LinkProfitModel, Network, Node, PassengerClass,
                       ProviderMap, Scenario, TanhDemand, build_incidence)
    from mmsue.network import Hyperpath, Link

    p = {**TOY, **overrides}
    links = (Link(1, 0, 1), Link(2, 0, 1))
    routes = (Hyperpath(1, (0, 1), (links[0],)), Hyperpath(2, (0, 1), (links[1],)))
    cls = PassengerClass("toy", build_incidence(links, routes), TanhDemand(p["a"], p["b"]),
                         v0=p["v0"], beta=p["beta"], sigma=p["sigma"])
    return Scenario(
        network=Network((Node(0), Node(1)), links, routes),
        cost=LinkCostModel(np.array(p["price"]), np.array(p["time"]), np.array(p["slope"]), gamma=p["gamma"]),
        profit=LinkProfitModel(np.array([-0.05, 0.02]), np.array([2.0, 3.0])),
        classes=(cls,),
        box=IncentiveBox.uniform(2, -1.0, 1.0),
        providers=ProviderMap.from_owners([0, 1], ["red", "blue"]),
        theta=np.array([1.0, 2.0]),
        od_pairs=((0, 1),),
    )
