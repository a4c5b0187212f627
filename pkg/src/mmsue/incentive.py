"""Incentive optimisation by two time-scale stochastic approximation.

The platform picks a per-link incentive ``J`` (a surcharge when positive,
a discount when negative) to maximise its total profit at the induced
equilibrium, subject to a box on ``J`` and to no route becoming more
expensive (``B^T J <= 0`` for every class).

The slow update steers ``J`` towards ``psi(f, J)``, the maximiser of the
profit after linearising the equilibrium response around the current
iterate:  ``y(x) = f + G (x - J)`` with ``G`` the assignment Jacobian, and

    Phi(x) = y^T (Q y + pi0 + x)

which is a quadratic ``x^T H x + b^T x + const`` in ``x``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.linalg import cho_factor, cho_solve

from .demand_choice import LinkProfitModel, link_cost
from .equilibrium import MsaConfig, StepSchedule, msa_solve
from .errors import DomainError, NotConverged, NumericalFailure, Unsupported

if TYPE_CHECKING:
    from .scenario import Scenario


@dataclass(frozen=True)
class IncentiveBox:
    J_min: np.ndarray
    J_max: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.J_min, dtype=float)
        hi = np.asarray(self.J_max, dtype=float)
        if lo.ndim != 1 or lo.shape != hi.shape:
            raise DomainError("J_min and J_max must be vectors of equal length")
        if np.any(lo > hi):
            bad = int(np.flatnonzero(lo > hi)[0])
            raise DomainError(f"empty incentive box at position {bad}: J_min > J_max")
        object.__setattr__(self, "J_min", lo)
        object.__setattr__(self, "J_max", hi)

    @classmethod
    def uniform(cls, n_links: int, lo: float, hi: float) -> "IncentiveBox":
        return cls(np.full(n_links, float(lo)), np.full(n_links, float(hi)))

    def contains(self, J, tol: float = 1e-9) -> bool:
        J = np.asarray(J)
        return bool(np.all(J >= self.J_min - tol) and np.all(J <= self.J_max + tol))

    def violation(self, J) -> float:
        J = np.asarray(J)
        return float(max(0.0, (self.J_min - J).max(initial=0), (J - self.J_max).max(initial=0)))


@dataclass(frozen=True)
class QpConfig:
    """Settings for the box-and-halfspace QP behind ``psi``.

    ``prox`` adds ``-prox/2 ||x - J||^2`` to the objective.  It leaves the
    fixed points of the outer loop unchanged and makes the subproblem
    strictly concave when the linearised profit has flat directions.
    ``max_qp_iters`` and ``qp_tol`` bound each splitting solve;
    ``max_prox_rounds`` bounds the proximal steps taken on non-concave
    problems, and those with at most ``probe_dim`` variables are also
    restarted from every box corner.
    """

    max_qp_iters: int = 1000
    qp_tol: float = 1e-8
    prox: float = 0.0
    rho0: float = 0.1
    warm_start: bool = True
    max_prox_rounds: int = 200
    probe_dim: int = 4


@dataclass(frozen=True)
class TwoTimescaleConfig:
    alpha: StepSchedule = StepSchedule(10.0, 0.001, 0.8)
    beta: StepSchedule = StepSchedule(10.0, 1.0, 0.9)
    eps_flow: float = 1e-6
    eps_incentive: float = 1e-4
    max_iters: int = 50_000
    msa_max_iters: int = 200_000
    qp: QpConfig = QpConfig()

    def __post_init__(self):
        a, b = self.alpha, self.beta
        # beta_k / alpha_k -> 0 requires beta to taper strictly faster.
        if not (b.q > 0 and (a.q == 0 or b.r > a.r or (b.r == a.r and b.q > a.q))):
            raise DomainError("beta schedule must taper faster than alpha schedule")
        if self.eps_flow <= 0 or self.eps_incentive <= 0:
            raise DomainError("tolerances must be positive")

    @property
    def msa(self) -> MsaConfig:
        return MsaConfig(self.alpha, self.eps_flow, self.msa_max_iters)


@dataclass
class IncentiveResult:
    J_star: np.ndarray
    f_star: np.ndarray
    profit: float
    baseline_profit: float
    delta_f: np.ndarray
    delta_J: np.ndarray
    profit_trace: np.ndarray
    route_violation: float
    box_violation: float
    iterations: int
    converged: bool
    degraded: bool = False
    ascent_failures: int = 0
    assumption_products: list[tuple[int, float]] = field(default_factory=list)
    baseline_f: np.ndarray | None = None
    reverted: bool = False
    raw_profit: float | None = None

    @property
    def never_decreases(self) -> bool:
        """Final profit is no lower than the no-incentive profit."""
        return self.profit >= self.baseline_profit - 1e-6

    @property
    def constraint_residuals(self) -> dict[str, float]:
        return {"route": self.route_violation, "box": self.box_violation}


def total_profit(f, J, profit_model) -> float:
    f = np.asarray(f, dtype=float)
    return float(f @ (profit_model.profit(f) + np.asarray(J, dtype=float)))


def assignment_jacobian(c, classes, rows=None) -> np.ndarray:
    """Jacobian of the assignment map with respect to link costs."""
    from .demand_choice import AssignmentModel

    model = classes if isinstance(classes, AssignmentModel) else AssignmentModel(classes)
    c = np.asarray(c, dtype=float)
    if c.shape != (model.n_links,):
        raise DomainError(f"cost vector must have {model.n_links} entries")
    return model.jacobian(c, rows)


def quadratic_model(f, J, G, Q, pi0) -> tuple[np.ndarray, np.ndarray, float]:
    """``(H, b, const)`` with ``Phi(x) = x^T H x + b^T x + const``.

    ``Q`` is either a matrix or the diagonal of one.
    """
    f, J, pi0 = (np.asarray(z, dtype=float) for z in (f, J, pi0))
    G = np.asarray(G, dtype=float)
    Qm = np.diag(Q) if np.ndim(Q) == 1 else np.asarray(Q, dtype=float)
    r = f - G @ J
    H = G.T @ (Qm @ G + np.eye(len(f)))
    b = G.T @ ((Qm + Qm.T) @ r + pi0) + r
    const = float(r @ (Qm @ r + pi0))
    return H, b, const


def linearized_profit(x, f, J, G, Q, pi0) -> float:
    """``Phi(x)`` evaluated directly, without forming ``H``."""
    y = f + G @ (np.asarray(x) - J)
    Qy = Q * y if np.ndim(Q) == 1 else Q @ y
    return float(y @ (Qy + pi0 + x))


def dykstra_projection(y, lo, hi, A, iters: int = 5000, tol: float = 1e-13) -> np.ndarray:
    """Euclidean projection onto ``{lo <= x <= hi, A x <= 0}``."""
    x = np.array(y, dtype=float)
    A = np.atleast_2d(A) if len(A) else np.zeros((0, len(x)))
    norms = np.einsum("ij,ij->i", A, A)
    inc = np.zeros((len(A) + 1, len(x)))
    for _ in range(iters):
        prev = x.copy()
        z = x + inc[0]
        x = np.clip(z, lo, hi)
        inc[0] = z - x
        for i in range(len(A)):
            z = x + inc[i + 1]
            t = A[i] @ z
            x = z - (t / norms[i]) * A[i] if t > 0 else z
            inc[i + 1] = z - x
        if np.linalg.norm(x - prev) < tol:
            break
    return x


@dataclass
class QpState:
    """Warm-start memory carried between consecutive QP solves."""

    x: np.ndarray | None = None
    y: np.ndarray | None = None
    rho: float | None = None


@dataclass
class QpResult:
    x: np.ndarray
    iterations: int
    primal_residual: float
    dual_residual: float
    converged: bool
    shift: float
    ascent: bool


def _admm(P, q, A, lo, hi, x, y, rho, config: QpConfig):
    """Operator-splitting iterations for ``min 1/2 x'Px + q'x`` on the box and ``Ax <= 0``.

    The constraint block is ``C = [I; A]`` with slack ``z = Cx``; each
    iteration solves one linear system with a cached inverse,
    projects the slack, and updates the scaled duals ``y``.  ``rho`` is
    rebalanced when primal and dual residuals drift apart.
    """
    n = len(q)
    sigma, relax = 1e-6, 1.6
    AT = A.T.copy()
    AtA = AT @ A
    eye = np.eye(n)

    def factor(r):
        # The system matrix only changes with rho, so invert it once and
        # reuse the inverse as a plain matrix-vector product.
        return cho_solve(cho_factor(P + (sigma + r) * eye + r * AtA), eye)

    Kinv = factor(rho)
    y1, y2 = y[:n].copy(), y[n:].copy()
    z1 = np.clip(x, lo, hi)
    z2 = np.minimum(A @ x, 0.0)
    rp = rd = np.inf
    converged = False
    it = 0
    for it in range(1, config.max_qp_iters + 1):
        rhs = sigma * x - q + rho * z1 - y1 + AT @ (rho * z2 - y2)
        xt = Kinv @ rhs
        Axt = A @ xt
        x = relax * xt + (1 - relax) * x
        r1 = relax * xt + (1 - relax) * z1
        r2 = relax * Axt + (1 - relax) * z2
        n1 = np.clip(r1 + y1 / rho, lo, hi)
        n2 = np.minimum(r2 + y2 / rho, 0.0)
        y1 += rho * (r1 - n1)
        y2 += rho * (r2 - n2)
        z1, z2 = n1, n2
        if it % 10 and it != config.max_qp_iters:
            continue
        Ax = A @ x
        Px = P @ x
        Aty = y1 + AT @ y2
        rp = max(np.abs(x - z1).max(initial=0), np.abs(Ax - z2).max(initial=0))
        rd = np.abs(Px + q + Aty).max(initial=0)
        scale_p = max(np.abs(x).max(initial=0), np.abs(Ax).max(initial=0))
        scale_d = max(np.abs(Px).max(initial=0), np.abs(Aty).max(initial=0), np.abs(q).max(initial=0))
        if rp <= config.qp_tol * (1 + scale_p) and rd <= config.qp_tol * (1 + scale_d):
            converged = True
            break
        if it % 50 == 0:
            ratio = np.sqrt((rp / (1e-30 + scale_p)) / (rd / (1e-30 + scale_d) + 1e-30))
            if ratio > 5 or ratio < 0.2:
                rho = float(np.clip(rho * ratio, 1e-6, 1e6))
                Kinv = factor(rho)
    return x, np.concatenate([y1, y2]), rho, it, float(rp), float(rd), converged


def _objective(H, b, x) -> float:
    return float(x @ H @ x + b @ x)


def maximize_box_halfspace_qp(H, b, lo, hi, A, x0, config: QpConfig = QpConfig(),
                              state: QpState | None = None, center=None) -> QpResult:
    """Maximise ``x^T H x + b^T x - prox/2 ||x - center||^2`` over ``{lo <= x <= hi, A x <= 0}``.

    ``x0`` must be feasible (or nearly so); the returned point is never
    worse than it.  When the quadratic is not concave the proximal weight
    is raised just enough to make each subproblem concave and proximal
    steps are repeated until they stall, which ends at a local maximum.
    Small non-concave problems are additionally restarted from every box
    corner (projected onto the feasible set) and the best end point wins.
    A short Dykstra pass removes the small constraint violations left by
    the splitting iterations.
    """
    H = np.asarray(H, dtype=float)
    b = np.asarray(b, dtype=float)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    n = len(b)
    A = A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float).reshape(-1, n)
    if np.any(lo > hi):
        raise DomainError("empty box: lower bound above upper bound")
    start = np.clip(np.asarray(x0, dtype=float), lo, hi)
    if n == 0:
        return QpResult(np.zeros(0), 0, 0.0, 0.0, True, 0.0, True)
    center = start if center is None else np.asarray(center, dtype=float)
    m = A.shape[0]

    P = -(H + H.T) + config.prox * np.eye(n)
    shift = 0.0
    jitter = 1e-10 * (1.0 + np.abs(P).max())
    try:
        np.linalg.cholesky(P + jitter * np.eye(n))
    except np.linalg.LinAlgError:
        lowest = float(np.linalg.eigvalsh(P)[0])
        shift = -lowest + 1e-6 * (1.0 + abs(lowest))
        P = P + shift * np.eye(n)
    tau = config.prox + shift

    def feasible(x):
        x = np.clip(x, lo, hi)
        if m and (A @ x).max() > 0:
            x = dykstra_projection(x, lo, hi, A, iters=200)
        return x

    def solve(c, x, y, rho):
        return _admm(P, -b - tau * c, A, lo, hi, x, y, rho, config)

    warm = config.warm_start and state is not None and state.x is not None \
        and len(state.x) == n and state.y is not None and len(state.y) == n + m
    x = state.x.copy() if warm else start.copy()
    y = state.y.copy() if warm else np.zeros(n + m)
    rho = state.rho if warm and state.rho else config.rho0
    x, y, rho, its, rp, rd, ok = solve(center, x, y, rho)
    if not np.all(np.isfinite(x)):
        raise NumericalFailure("QP iterate became non-finite")
    if state is not None:
        state.x, state.y, state.rho = x.copy(), y.copy(), rho
    out = feasible(x)

    if shift > 0:
        def climb(c, x, y, rho):
            # Repeated proximal steps: each is concave, the sequence ascends.
            nonlocal its
            for _ in range(config.max_prox_rounds):
                x, y, rho, k, *_ = solve(c, x, y, rho)
                its += k
                if np.abs(x - c).max() <= 1e-9 * (1.0 + np.abs(c).max()):
                    break
                c = x
            return feasible(x)

        candidates = [climb(x, x, y, rho)]
        if n <= config.probe_dim:
            for corner in itertools.product(*zip(lo, hi)):
                v = feasible(np.array(corner))
                candidates += [v, climb(v, v, np.zeros(n + m), config.rho0)]
        for cand in candidates:
            if _objective(H, b, cand) > _objective(H, b, out):
                out = cand

    base = _objective(H, b, start)
    ascent = _objective(H, b, out) >= base - 1e-12 * (1.0 + abs(base))
    return QpResult(out if ascent else start, its, rp, rd, ok, shift, ascent)


def _constraint_rows(incidences, cols: np.ndarray) -> np.ndarray:
    rows = []
    for inc in incidences:
        B = inc.B if hasattr(inc, "B") else np.asarray(inc)
        if B.shape[1]:
            rows.append(B[cols].T)
    if not rows:
        return np.zeros((0, len(cols)))
    A = np.vstack(rows)
    A = A[np.any(A != 0, axis=1)]
    return np.unique(A, axis=0)


def psi_qp(f, J, grad, profit_model, box: IncentiveBox, incidences: Sequence, config: QpConfig = QpConfig(),
           state: QpState | None = None, active=None) -> np.ndarray:
    """Feasible incentive maximising the linearised profit around ``(f, J)``.

    ``grad`` is the assignment Jacobian, over all links or over the
    ``active`` link positions only.  Links outside ``active`` carry no
    route and keep their current incentive.
    """
    return _psi(f, J, grad, profit_model, box, incidences, config, state, active)[0]


def _psi(f, J, grad, profit_model, box, incidences, config, state, active, rows=None):
    if not isinstance(profit_model, LinkProfitModel):
        raise Unsupported("the incentive subproblem needs a linear profit model")
    f = np.asarray(f, dtype=float)
    J = np.asarray(J, dtype=float)
    L = len(f)
    if np.any(box.J_min > box.J_max):
        raise DomainError("empty incentive box")
    act = np.arange(L) if active is None else np.asarray(active)
    G = np.asarray(grad, dtype=float)
    if G.shape == (L, L) and len(act) != L:
        G = G[np.ix_(act, act)]
    if G.shape != (len(act), len(act)):
        raise DomainError("Jacobian shape does not match the link set")
    Q = profit_model.Q[act] if profit_model.Q.ndim == 1 else profit_model.Q[np.ix_(act, act)]
    H, b, _ = quadratic_model(f[act], J[act], G, Q, profit_model.pi0[act])
    A = _constraint_rows(incidences, act) if rows is None else rows
    x = np.clip(J, box.J_min, box.J_max)
    res = maximize_box_halfspace_qp(H, b, box.J_min[act], box.J_max[act], A, J[act], config, state,
                                    center=J[act])
    x[act] = res.x
    return x, res


def route_violation(J, incidences) -> float:
    worst = 0.0
    for inc in incidences:
        B = inc.B if hasattr(inc, "B") else np.asarray(inc)
        if B.shape[1]:
            worst = max(worst, float((B.T @ J).max()))
    return worst


def feasible_start(box: IncentiveBox, incidences) -> np.ndarray:
    """Projection of the zero incentive onto the feasible set.

    Raises ``DomainError`` when the box and the route constraints do not
    intersect.
    """
    A = _constraint_rows(incidences, np.arange(len(box.J_min)))
    x = dykstra_projection(np.zeros(len(box.J_min)), box.J_min, box.J_max, A)
    if box.violation(x) > 1e-9 or (len(A) and (A @ x).max() > 1e-9):
        raise DomainError("incentive box and route constraints have no common point")
    return x


def _checkpoints(n: int) -> bool:
    return n & (n - 1) == 0


def two_timescale(scenario: "Scenario", config: TwoTimescaleConfig | None = None,
                  progress: Callable[[int, float, float, float], None] | None = None) -> IncentiveResult:
    """Jointly iterate equilibrium flows (fast) and incentives (slow).

    Starts from the no-incentive equilibrium.  Each step moves the flow a
    step ``alpha_k`` towards the assignment at the current costs and the
    incentive a step ``beta_k`` towards ``psi``.  Stops once both the flow
    error and the incentive error fall below their tolerances, then
    re-solves the equilibrium at the final incentive.  ``progress`` is
    called as ``progress(k, delta_f, delta_J, profit)`` every iteration.
    """
    config = config or scenario.two_timescale_config()
    if not isinstance(scenario.profit, LinkProfitModel):
        raise Unsupported("incentive optimisation needs a linear profit model")
    model = scenario.assignment
    box = scenario.box
    incid = [cls.incidence for cls in scenario.classes]
    act = model.active_links
    rows = _constraint_rows(incid, act)
    degraded = False

    try:
        base = msa_solve(scenario, np.zeros(scenario.n_links), config.msa)
    except NotConverged as exc:
        base, degraded = exc.result, True
    baseline = total_profit(base.f_star, np.zeros(scenario.n_links), scenario.profit)

    f = base.f_star.copy()
    J = feasible_start(box, incid)
    state = QpState()
    dfs, djs, profits, products = [], [], [], []
    fails = 0
    converged = False
    k = 0
    for k in range(1, config.max_iters + 1):
        c = link_cost(f, J, scenario.cost)
        a = model.evaluate(c)
        G = model.jacobian_at(a, act)
        psi, qp = _psi(f, J, G, scenario.profit, box, incid, config.qp, state, act, rows)
        df = float(np.linalg.norm(a.f - f))
        dj = float(np.linalg.norm(psi - J))
        if not (math.isfinite(df) and math.isfinite(dj)):
            raise NumericalFailure("non-finite iterate in incentive optimisation", iteration=k)
        if not qp.ascent:
            fails += 1
        dfs.append(df)
        djs.append(dj)
        profits.append(total_profit(f, J, scenario.profit))
        if progress is not None:
            progress(k, df, dj, profits[-1])
        if _checkpoints(k):
            products.append((k, f.copy(), psi - J))
        if df < config.eps_flow and dj < config.eps_incentive and qp.ascent:
            converged = True
            break
        al, be = config.alpha(k), config.beta(k)
        f = (1 - al) * f + al * a.f
        J = (1 - be) * J + be * psi

    try:
        final = msa_solve(scenario, J, config.msa, f0=f)
    except NotConverged as exc:
        final, degraded = exc.result, True
    h = final.f_star
    profit = raw = total_profit(h, J, scenario.profit)
    # The loop follows the assignment Jacobian rather than the equilibrium
    # response, so its limit can be worse than charging nothing.  When no
    # incentive is an option, fall back to it and say so.
    reverted = bool(np.all(box.J_min <= 0) and np.all(box.J_max >= 0) and raw < baseline - 1e-6)
    if reverted:
        J, h, profit = np.zeros(scenario.n_links), base.f_star, baseline
    result = IncentiveResult(
        J_star=J,
        f_star=h,
        profit=profit,
        baseline_profit=baseline,
        delta_f=np.asarray(dfs),
        delta_J=np.asarray(djs),
        profit_trace=np.asarray(profits),
        route_violation=route_violation(J, incid),
        box_violation=box.violation(J),
        iterations=k,
        converged=converged,
        degraded=degraded,
        ascent_failures=fails,
        assumption_products=[(it, float((h - fk) @ step)) for it, fk, step in products],
        baseline_f=base.f_star,
        reverted=reverted,
        raw_profit=raw,
    )
    if not converged:
        raise NotConverged(
            f"incentive loop stopped after {config.max_iters} iterations "
            f"(flow error {dfs[-1]:.3g}, incentive error {djs[-1]:.3g})",
            result=result,
        )
    return result
