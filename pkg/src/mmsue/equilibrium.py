"""Stochastic user equilibrium by the method of successive averages.

The equilibrium flow is the fixed point ``f = g(C(f) + J)`` of the
assignment map.  ``msa_solve`` averages towards it with a tapering step,
and the ``property_*`` helpers probe how the equilibrium responds to price
and incentive perturbations.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .demand_choice import Assignment, link_cost
from .errors import DomainError, NotConverged, NumericalFailure

if TYPE_CHECKING:
    from .scenario import Scenario


@dataclass(frozen=True)
class StepSchedule:
    """Step sizes ``1 / (p + q k^r)`` for ``k = 1, 2, ...``."""

    p: float
    q: float
    r: float

    def __post_init__(self):
        if self.p <= 0 or self.q < 0 or self.p + self.q < 1:
            raise DomainError("step schedule must give steps in (0, 1]")
        if self.q > 0 and not 0.5 < self.r <= 1:
            raise DomainError("step exponent r must lie in (0.5, 1]")

    def __call__(self, k: int) -> float:
        return 1.0 / (self.p + self.q * k**self.r)

    def as_dict(self) -> dict:
        return {"p": self.p, "q": self.q, "r": self.r}


@dataclass(frozen=True)
class MsaConfig:
    alpha: StepSchedule = StepSchedule(10.0, 0.001, 0.8)
    eps_flow: float = 1e-6
    max_iters: int = 200_000

    def __post_init__(self):
        if self.eps_flow <= 0:
            raise DomainError("eps_flow must be positive")
        if self.max_iters < 1:
            raise DomainError("max_iters must be at least 1")


@dataclass
class EquilibriumResult:
    f_star: np.ndarray
    route_flows: list[np.ndarray]
    demands: np.ndarray
    satisfaction: np.ndarray
    residual: float
    iterations: int
    trace: np.ndarray
    converged: bool = True

    def class_flows(self, k: int) -> np.ndarray:
        return self.route_flows[k]


def _finish(scenario: "Scenario", f: np.ndarray, J: np.ndarray, res: float, it: int,
            trace: list[float], converged: bool) -> EquilibriumResult:
    a = scenario.assignment.evaluate(link_cost(f, J, scenario.cost))
    return EquilibriumResult(
        f_star=f,
        route_flows=[a.route_flows(k) for k in range(len(scenario.classes))],
        demands=a.d,
        satisfaction=a.s,
        residual=res,
        iterations=it,
        trace=np.asarray(trace),
        converged=converged,
    )


def residual(scenario: "Scenario", f, J) -> float:
    """Euclidean fixed-point residual ``||g(C(f) + J) - f||``."""
    f = np.asarray(f, dtype=float)
    return float(np.linalg.norm(scenario.assignment(link_cost(f, J, scenario.cost)) - f))


def msa_solve(scenario: "Scenario", J=None, config: MsaConfig | None = None, f0=None) -> EquilibriumResult:
    """Equilibrium link flows for a fixed incentive vector ``J``.

    Starts from ``f0`` (zero flow by default).  Raises ``NotConverged``
    carrying the lowest-residual iterate when ``max_iters`` is exhausted.
    """
    config = config or MsaConfig()
    L = scenario.n_links
    J = np.zeros(L) if J is None else np.asarray(J, dtype=float)
    f = np.zeros(L) if f0 is None else np.array(f0, dtype=float)
    if J.shape != (L,) or f.shape != (L,):
        raise DomainError(f"incentive and warm-start vectors must have {L} entries")
    g = scenario.assignment
    trace: list[float] = []
    best = (np.inf, f, 0)
    for k in range(1, config.max_iters + 1):
        gf = g(link_cost(f, J, scenario.cost))
        res = float(np.linalg.norm(gf - f))
        if not np.isfinite(res):
            raise NumericalFailure("non-finite flow in equilibrium iteration", iteration=k)
        trace.append(res)
        if res < best[0]:
            best = (res, f, k)
        if res <= config.eps_flow:
            return _finish(scenario, f, J, res, k, trace, True)
        a = config.alpha(k)
        f = (1 - a) * f + a * gf
    res, f, k = best
    result = _finish(scenario, f, J, res, k, trace, False)
    raise NotConverged(
        f"equilibrium residual {res:.3g} above {config.eps_flow:.3g} after {config.max_iters} iterations",
        result=result,
    )


@dataclass
class MonotonicityReport:
    link_index: int
    delta: float
    flow_before: float
    flow_after: float

    @property
    def change(self) -> float:
        return self.flow_after - self.flow_before

    @property
    def holds(self) -> bool:
        return self.change > -1e-8


def property_monotonicity(scenario: "Scenario", link_index: int, delta: float,
                          config: MsaConfig | None = None, J=None) -> MonotonicityReport:
    """Compare the equilibrium flow on one link before and after cutting its price.

    ``link_index`` is a position in the canonical link order.
    """
    if delta < 0:
        raise DomainError("delta must be non-negative")
    base = msa_solve(scenario, J, config)
    cheaper = scenario.with_price_cut(link_index, delta)
    after = msa_solve(cheaper, J, config)
    return MonotonicityReport(link_index, delta, float(base.f_star[link_index]), float(after.f_star[link_index]))


@dataclass
class ContinuityReport:
    norms: np.ndarray
    ratios: np.ndarray
    bound: float

    def max_by_scale(self) -> dict[float, float]:
        out = {}
        for n in np.unique(self.norms):
            out[float(n)] = float(self.ratios[self.norms == n].max())
        return out

    @property
    def scale_spread(self) -> float:
        vals = [v for v in self.max_by_scale().values() if v > 0]
        return max(vals) / min(vals) if vals else 1.0

    @property
    def holds(self) -> bool:
        return bool(np.all(np.isfinite(self.ratios)) and self.ratios.max(initial=0) < self.bound
                    and self.scale_spread < 10)


def property_continuity(scenario: "Scenario", J, perturbations: Sequence[np.ndarray],
                        config: MsaConfig | None = None, bound: float = 100.0) -> ContinuityReport:
    """Sample ``||h(J + delta) - h(J)|| / ||delta||`` for each perturbation.

    ``h`` is the equilibrium flow as a function of the incentive.  Each
    perturbed solve is warm-started from the unperturbed equilibrium.
    """
    config = config or MsaConfig()
    J = np.asarray(J, dtype=float)
    base = msa_solve(scenario, J, config)
    norms, ratios = [], []
    for delta in perturbations:
        delta = np.asarray(delta, dtype=float)
        n = float(np.linalg.norm(delta))
        norms.append(n)
        if n == 0:
            ratios.append(0.0)
            continue
        other = msa_solve(scenario, J + delta, config, f0=base.f_star)
        ratios.append(float(np.linalg.norm(other.f_star - base.f_star)) / n)
    return ContinuityReport(np.round(np.asarray(norms), 12), np.asarray(ratios), bound)
