"""Link costs, route utilities, logit choice, satisfaction and elastic demand.

Everything here works on vectors indexed by the canonical (ascending id)
link order of the network.  The scalar helpers (``logit_probs``,
``satisfaction`` ...) are the reference definitions; ``AssignmentModel``
evaluates the same quantities for many passenger classes at once and is
what the solvers use.
"""

from __future__ import annotations

import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import DomainError
from .network import IncidenceData


def _vec(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise DomainError(f"{name} must be a 1-D vector")
    return arr


@dataclass(frozen=True)
class LinkCostModel:
    """Affine link cost ``price + J + gamma * (slope * f + time_const)``."""

    price: np.ndarray
    time_const: np.ndarray
    congestion_slope: np.ndarray
    gamma: float = 1.0

    def __post_init__(self):
        for name in ("price", "time_const", "congestion_slope"):
            object.__setattr__(self, name, _vec(getattr(self, name), name))
        n = len(self.price)
        if len(self.time_const) != n or len(self.congestion_slope) != n:
            raise DomainError("cost vectors must all have one entry per link")
        if np.any(self.price < 0):
            raise DomainError("link prices must be non-negative")
        if np.any(self.congestion_slope < 0):
            raise DomainError("congestion slopes must be non-negative")
        if self.gamma < 0:
            raise DomainError("gamma must be non-negative")

    @property
    def n_links(self) -> int:
        return len(self.price)


def link_cost(f, J, model: LinkCostModel) -> np.ndarray:
    f = _vec(f, "f")
    J = _vec(J, "J")
    if len(f) != model.n_links or len(J) != model.n_links:
        raise DomainError("flow and incentive vectors must have one entry per link")
    if np.any(f < 0):
        raise DomainError("link flows must be non-negative")
    return model.price + J + model.gamma * (model.congestion_slope * f + model.time_const)


@dataclass(frozen=True)
class LinkProfitModel:
    """Linear link profit ``pi(f) = Q f + pi0``.

    ``Q`` may be given as a full matrix or as its diagonal.
    """

    Q: np.ndarray
    pi0: np.ndarray

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=float)
        pi0 = _vec(self.pi0, "pi0")
        if Q.ndim == 1:
            ok = len(Q) == len(pi0)
        elif Q.ndim == 2:
            ok = Q.shape == (len(pi0), len(pi0))
        else:
            ok = False
        if not ok:
            raise DomainError("Q and pi0 dimensions do not match")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "pi0", pi0)

    @property
    def n_links(self) -> int:
        return len(self.pi0)

    @property
    def matrix(self) -> np.ndarray:
        return np.diag(self.Q) if self.Q.ndim == 1 else self.Q

    def profit(self, f) -> np.ndarray:
        f = _vec(f, "f")
        if len(f) != self.n_links:
            raise DomainError("flow vector must have one entry per link")
        return (self.Q * f if self.Q.ndim == 1 else self.Q @ f) + self.pi0


@dataclass(frozen=True)
class NonlinearProfitModel:
    """Arbitrary per-link profit function; usable for accounting only."""

    func: Callable[[np.ndarray], np.ndarray]
    n_links: int

    def profit(self, f) -> np.ndarray:
        return np.asarray(self.func(_vec(f, "f")), dtype=float)


class SatisfactionMode(str, enum.Enum):
    SCALED_MAX = "scaled_max"
    LOGSUM = "logsum"


@dataclass(frozen=True)
class TanhDemand:
    """``d = max(0, a * tanh(b * s))``."""

    a: float
    b: float = 1.0

    def __post_init__(self):
        if self.a < 0:
            raise DomainError("demand amplitude a must be non-negative")
        if self.b <= 0:
            raise DomainError("demand rate b must be positive")

    def __call__(self, s: float) -> float:
        return max(0.0, self.a * np.tanh(self.b * s))

    def derivative(self, s: float) -> float:
        if s < 0:
            return 0.0
        return self.a * self.b / np.cosh(self.b * s) ** 2


@dataclass(frozen=True)
class TableDemand:
    """Piecewise-linear monotone demand curve, flat outside the table."""

    s: tuple[float, ...]
    d: tuple[float, ...]

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float)
        d = np.asarray(self.d, dtype=float)
        if len(s) < 2 or len(s) != len(d):
            raise DomainError("demand table needs at least two (s, d) points")
        if np.any(np.diff(s) <= 0):
            raise DomainError("demand table s values must be strictly increasing")
        if np.any(np.diff(d) < 0) or np.any(d < 0):
            raise DomainError("demand table must be non-negative and non-decreasing")
        object.__setattr__(self, "s", tuple(s))
        object.__setattr__(self, "d", tuple(d))

    def __call__(self, s: float) -> float:
        return float(np.interp(s, self.s, self.d))

    def derivative(self, s: float) -> float:
        grid = self.s
        if s < grid[0] or s >= grid[-1]:
            return 0.0
        i = int(np.searchsorted(grid, s, side="right")) - 1
        return (self.d[i + 1] - self.d[i]) / (grid[i + 1] - grid[i])


@dataclass(frozen=True)
class PassengerClass:
    """A group of travellers sharing utility, satisfaction and demand curves.

    ``incidence.B`` is the L x M matrix of the class's admissible routes over
    all links of the network.
    """

    name: str
    incidence: IncidenceData
    demand: TanhDemand | TableDemand
    v0: float = 0.0
    beta: float = 1.0
    sigma: float = 1.0
    satisfaction_mode: SatisfactionMode = SatisfactionMode.SCALED_MAX
    route_cost: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "satisfaction_mode", SatisfactionMode(self.satisfaction_mode))
        if self.sigma <= 0:
            raise DomainError("satisfaction scale sigma must be positive")
        m = self.incidence.B.shape[1]
        cs = np.zeros(m) if self.route_cost is None else _vec(self.route_cost, "route_cost")
        if len(cs) != m:
            raise DomainError("route_cost must have one entry per route")
        object.__setattr__(self, "route_cost", cs)

    @property
    def B(self) -> np.ndarray:
        return self.incidence.B

    @property
    def n_routes(self) -> int:
        return self.incidence.B.shape[1]


def route_utility(c, cls: PassengerClass) -> np.ndarray:
    c = _vec(c, "c")
    if len(c) != cls.B.shape[0]:
        raise DomainError(f"cost vector has {len(c)} entries, class {cls.name} expects {cls.B.shape[0]}")
    return cls.v0 - cls.beta * (cls.B.T @ c) - cls.route_cost


def logit_probs(v) -> np.ndarray:
    v = _vec(v, "v")
    if len(v) == 0:
        raise DomainError("logit choice needs at least one route")
    e = np.exp(v - v.max())
    return e / e.sum()


def satisfaction(v, mode: SatisfactionMode | str = SatisfactionMode.SCALED_MAX, sigma: float = 1.0) -> float:
    v = _vec(v, "v")
    if len(v) == 0:
        raise DomainError("satisfaction needs at least one route")
    top = v.max()
    if SatisfactionMode(mode) is SatisfactionMode.SCALED_MAX:
        return float(top / sigma)
    return float((top + np.log(np.exp(v - top).sum())) / sigma)


def satisfaction_gradient(v, mode: SatisfactionMode | str, sigma: float) -> np.ndarray:
    """dS/dv; for the max form this is the subgradient at the lowest argmax."""
    v = _vec(v, "v")
    if SatisfactionMode(mode) is SatisfactionMode.SCALED_MAX:
        out = np.zeros(len(v))
        out[int(np.argmax(v))] = 1.0 / sigma
        return out
    return logit_probs(v) / sigma


def demand(s: float, cls: PassengerClass) -> float:
    return float(cls.demand(s))


@dataclass(frozen=True)
class ClassState:
    v: np.ndarray
    p: np.ndarray
    s: float
    d: float

    @property
    def x(self) -> np.ndarray:
        return self.p * self.d


def class_state(c, cls: PassengerClass) -> ClassState:
    v = route_utility(c, cls)
    s = satisfaction(v, cls.satisfaction_mode, cls.sigma)
    return ClassState(v=v, p=logit_probs(v), s=s, d=demand(s, cls))


def assign(c, classes: Sequence[PassengerClass]) -> np.ndarray:
    """Link flows produced by all classes facing link costs ``c``."""
    c = _vec(c, "c")
    f = np.zeros(len(c))
    for cls in classes:
        st = class_state(c, cls)
        f += cls.B @ st.x
    return f


@dataclass
class Assignment:
    """Route-level outcome of one assignment evaluation."""

    f: np.ndarray
    v: np.ndarray
    p: np.ndarray
    s: np.ndarray
    d: np.ndarray
    starts: np.ndarray

    @property
    def x(self) -> np.ndarray:
        return self.p * np.repeat(self.d, np.diff(self.starts))

    def route_flows(self, k: int) -> np.ndarray:
        return self.x[self.starts[k] : self.starts[k + 1]]


@dataclass
class AssignmentModel:
    """Vectorised assignment over many classes with stacked incidence.

    All classes' route columns are concatenated into one sparse L x R
    matrix ``U``; per-class quantities become segment reductions over that
    route axis.  ``threads > 1`` splits the classes into contiguous chunks
    for the route-level work; the final link accumulation is one sparse
    product, so results do not depend on the thread count.
    """

    classes: Sequence[PassengerClass]
    threads: int = 1
    U: sp.csc_matrix = field(init=False)
    starts: np.ndarray = field(init=False)

    def __post_init__(self):
        self.classes = tuple(self.classes)
        if not self.classes:
            raise DomainError("at least one passenger class is required")
        L = self.classes[0].B.shape[0]
        for cls in self.classes:
            if cls.B.shape[0] != L:
                raise DomainError("all classes must share the same link set")
        sizes = np.array([cls.n_routes for cls in self.classes])
        if np.any(sizes == 0):
            raise DomainError("every class needs at least one route")
        self.n_links = L
        self.starts = np.concatenate([[0], np.cumsum(sizes)])
        self.seg = np.repeat(np.arange(len(self.classes)), sizes)
        self.U = sp.csc_matrix(np.hstack([cls.B for cls in self.classes])) if L else sp.csc_matrix((0, sizes.sum()))
        self.UT = self.U.T.tocsr()
        self.v0 = np.array([cls.v0 for cls in self.classes])
        self.beta = np.array([cls.beta for cls in self.classes])
        self.sigma = np.array([cls.sigma for cls in self.classes])
        self.route_cost = np.concatenate([cls.route_cost for cls in self.classes])
        self.logsum = np.array([cls.satisfaction_mode is SatisfactionMode.LOGSUM for cls in self.classes])
        self.tanh = all(isinstance(cls.demand, TanhDemand) for cls in self.classes)
        if self.tanh:
            self.a = np.array([cls.demand.a for cls in self.classes])
            self.b = np.array([cls.demand.b for cls in self.classes])

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    @property
    def active_links(self) -> np.ndarray:
        """Positions of links used by at least one admissible route."""
        return np.flatnonzero(np.diff(self.UT.tocsc().indptr) > 0)

    def _chunks(self) -> list[tuple[int, int]]:
        n = self.n_classes
        t = max(1, min(self.threads, n))
        edges = np.linspace(0, n, t + 1).astype(int)
        return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]

    def _segment(self, lo: int, hi: int, uc: np.ndarray):
        r0, r1 = self.starts[lo], self.starts[hi]
        sl = slice(r0, r1)
        seg = self.seg[sl] - lo
        starts = self.starts[lo:hi] - r0
        reps = np.diff(self.starts[lo : hi + 1])
        v = np.repeat(self.v0[lo:hi], reps) - np.repeat(self.beta[lo:hi], reps) * uc[sl] - self.route_cost[sl]
        vmax = np.maximum.reduceat(v, starts)
        e = np.exp(v - vmax[seg])
        z = np.add.reduceat(e, starts)
        p = e / z[seg]
        top = np.where(self.logsum[lo:hi], vmax + np.log(z), vmax)
        s = top / self.sigma[lo:hi]
        if self.tanh:
            d = np.maximum(0.0, self.a[lo:hi] * np.tanh(self.b[lo:hi] * s))
        else:
            d = np.array([cls.demand(si) for cls, si in zip(self.classes[lo:hi], s)])
        return v, p, s, d

    def evaluate(self, c) -> Assignment:
        c = np.asarray(c, dtype=float)
        if c.shape != (self.n_links,):
            raise DomainError(f"cost vector must have {self.n_links} entries")
        uc = self.UT @ c
        chunks = self._chunks()
        if len(chunks) == 1:
            parts = [self._segment(0, self.n_classes, uc)]
        else:
            with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
                parts = list(pool.map(lambda ch: self._segment(ch[0], ch[1], uc), chunks))
        v, p, s, d = (np.concatenate(z) for z in zip(*parts))
        x = p * np.repeat(d, np.diff(self.starts))
        f = self.U @ x
        return Assignment(f=np.asarray(f).ravel(), v=v, p=p, s=s, d=d, starts=self.starts)

    def __call__(self, c) -> np.ndarray:
        return self.evaluate(c).f

    def demand_derivative(self, s: np.ndarray) -> np.ndarray:
        if self.tanh:
            return np.where(s >= 0, self.a * self.b / np.cosh(self.b * s) ** 2, 0.0)
        return np.array([cls.demand.derivative(si) for cls, si in zip(self.classes, s)])

    def jacobian(self, c, rows: np.ndarray | None = None) -> np.ndarray:
        """Analytic Jacobian of the assignment map at costs ``c``.

        Each class contributes ``B [d (diag p - p p^T) + D'(s) p g^T] (-beta B^T)``
        where ``g = dS/dv``.  Expanding the product gives a diagonal term
        plus one rank-one term per class, which is how it is assembled:

            -U diag(beta d p) U^T + sum_k (B_k p_k)(beta_k B_k (d_k p_k - D'_k g_k))^T

        ``rows`` restricts the result to a subset of link positions (both
        rows and columns).
        """
        return self.jacobian_at(self.evaluate(c), rows)

    def jacobian_at(self, a: Assignment, rows: np.ndarray | None = None) -> np.ndarray:
        """Same as ``jacobian`` but reuses an existing evaluation."""
        reps = np.diff(self.starts)
        d_r = np.repeat(a.d, reps)
        b_r = np.repeat(self.beta, reps)
        g = np.zeros_like(a.p)
        ls = np.repeat(self.logsum, reps)
        g[ls] = a.p[ls]
        for k in np.flatnonzero(~self.logsum):
            lo, hi = self.starts[k], self.starts[k + 1]
            g[lo + int(np.argmax(a.v[lo:hi]))] = 1.0
        g /= np.repeat(self.sigma, reps)
        dprime = np.repeat(self.demand_derivative(a.s), reps)

        U = self.U if rows is None else self.U[rows, :]
        diag_w = b_r * d_r * a.p
        route_cls = sp.csc_matrix((np.ones(len(self.seg)), (np.arange(len(self.seg)), self.seg)),
                                  shape=(len(self.seg), self.n_classes))
        left = U @ sp.diags(a.p) @ route_cls
        right = U @ sp.diags(b_r * (d_r * a.p - dprime * g)) @ route_cls
        G = (left @ right.T).toarray() - (U @ sp.diags(diag_w) @ U.T).toarray()
        return G
