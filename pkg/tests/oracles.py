"""Independent reference computations used to cross-check the library.

Nothing here calls into the code under test except to read plain data
(links, hyperpath diversion tables).  Each oracle takes a different route
to the same quantity: exhaustive policy enumeration instead of a path
walk, nested scalar bisection instead of successive averages, dense grid
search instead of operator splitting.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


def policy_path_probabilities(hyperpath) -> dict[tuple[int, ...], float]:
    """Path probabilities by enumerating every joint choice at every node.

    A policy fixes one outgoing link per node.  Following the policy from
    the origin traces exactly one path; the probability of a path is the
    total weight of the policies that trace it, which by independence of
    the per-node choices equals the product along the path.
    """
    out: dict[int, list] = {}
    for link in hyperpath.links:
        out.setdefault(link.tail, []).append(link)
    nodes = sorted(out)
    choices = []
    for n in nodes:
        opts = []
        for link in out[n]:
            p = hyperpath.diversion.get(link.id, 1.0 if len(out[n]) == 1 else float("nan"))
            opts.append((link, p))
        choices.append(opts)
    origin, dest = hyperpath.od
    paths: dict[tuple[int, ...], float] = {}
    for policy in itertools.product(*choices):
        weight = math.prod(p for _, p in policy)
        step = {n: link for n, (link, _) in zip(nodes, policy)}
        node, trail = origin, []
        while node != dest:
            link = step[node]
            trail.append(link.id)
            node = link.head
        key = tuple(trail)
        paths[key] = paths.get(key, 0.0) + weight
    return paths


def all_simple_paths(links, origin, dest, max_cost=math.inf, cost=None):
    """Every loopless path from origin to dest with total cost <= max_cost."""
    out: dict[int, list] = {}
    for link in links:
        out.setdefault(link.tail, []).append(link)
    found = []

    def walk(node, visited, trail, c):
        if c > max_cost + 1e-12:
            return
        if node == dest:
            found.append((c, tuple(trail)))
            return
        for link in out.get(node, ()):
            if link.head not in visited:
                visited.add(link.head)
                trail.append(link.id)
                walk(link.head, visited, trail, c + (cost[link.id] if cost else 1.0))
                trail.pop()
                visited.discard(link.head)

    walk(origin, {origin}, [], 0.0)
    found.sort()
    return found


def _bisect(fun, lo, hi, tol=1e-14, iters=300):
    flo = fun(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = fun(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)


def two_route_equilibrium(price, time, slope, gamma, v0, beta, sigma, a, b):
    """Equilibrium of one OD pair served by two parallel single-link routes.

    Nested bisection: for a trial demand ``d`` the split ``f1`` solves the
    (monotone) logit balance, and the demand itself solves ``d = D(s(d))``
    where satisfaction falls as ``d`` rises.
    """

    def costs(f1, f2):
        return [price[i] + gamma * (time[i] + slope[i] * f) for i, f in enumerate((f1, f2))]

    def split(d):
        def gap(f1):
            c1, c2 = costs(f1, d - f1)
            u1, u2 = v0 - beta * c1, v0 - beta * c2
            p1 = 1.0 / (1.0 + math.exp(u2 - u1))
            return f1 - d * p1

        return _bisect(gap, 0.0, d) if d > 0 else 0.0

    def excess(d):
        f1 = split(d)
        c1, c2 = costs(f1, d - f1)
        s = max(v0 - beta * c1, v0 - beta * c2) / sigma
        return d - max(0.0, a * math.tanh(b * s))

    d = _bisect(excess, 0.0, a + 1.0)
    f1 = split(d)
    return np.array([f1, d - f1]), d


def grid_max(fun, lo, hi, A, n=801, refine=3):
    """Maximum of a vectorised 2-D function over a box cut by ``A x <= 0``, by grid search.

    ``fun`` maps an ``(N, 2)`` array of points to ``N`` values.  A coarse
    grid locates the best cell; the grid is then rebuilt around it
    ``refine`` times, each time a tenth the width.
    """
    A = np.atleast_2d(np.asarray(A, float)) if len(A) else np.zeros((0, 2))
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    a_lo, a_hi = lo.copy(), hi.copy()
    best_val, best_x = -np.inf, None
    for _ in range(refine + 1):
        xs = np.linspace(a_lo[0], a_hi[0], n)
        ys = np.linspace(a_lo[1], a_hi[1], n)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        P = np.stack([X.ravel(), Y.ravel()], axis=1)
        ok = np.all(P @ A.T <= 1e-12, axis=1) if len(A) else np.ones(len(P), bool)
        vals = np.asarray(fun(P), float)
        vals[~ok] = -np.inf
        i = int(np.argmax(vals))
        if vals[i] > best_val:
            best_val, best_x = vals[i], P[i]
        width = (a_hi - a_lo) / 10
        a_lo = np.maximum(lo, best_x - width / 2)
        a_hi = np.minimum(hi, best_x + width / 2)
    return float(best_val), best_x


def grid_qp_max(H, b, lo, hi, A, n=801, refine=3):
    """Maximum of ``x'Hx + b'x`` over a 2-D box cut by ``A x <= 0``."""
    H = np.asarray(H, float)
    b = np.asarray(b, float)
    return grid_max(lambda P: np.einsum("ij,jk,ik->i", P, H, P) + P @ b, lo, hi, A, n, refine)


def grid_linearized_max(f, J, G, Q, pi0, lo, hi, A, n=801, refine=3):
    """Maximum of the linearised profit ``y'(Qy + pi0 + x)``, ``y = f + G(x - J)``.

    Evaluated point by point from its definition, without any reduction
    to a quadratic form.
    """
    f, J, G, Q, pi0 = (np.asarray(v, float) for v in (f, J, G, Q, pi0))
    Qm = np.diag(Q) if Q.ndim == 1 else Q

    def phi(P):
        Y = f + (P - J) @ G.T
        return np.einsum("ij,ij->i", Y, Y @ Qm.T + pi0 + P)

    return grid_max(phi, lo, hi, A, n, refine)


def grid_nash(R_c, t, theta, n=2001):
    """Weighted Nash product maximiser for two or three players by grid search."""
    t = np.asarray(t, float)
    theta = np.asarray(theta, float)
    surplus = R_c - t.sum()
    g = np.linspace(0, 1, n)[1:-1]
    if len(t) == 2:
        shares = np.stack([g, 1 - g], axis=1)
    else:
        A, B = np.meshgrid(g, g, indexing="ij")
        C = 1 - A - B
        keep = C > 0
        shares = np.stack([A[keep], B[keep], C[keep]], axis=1)
    obj = np.log(shares * surplus) @ theta
    return t + shares[int(np.argmax(obj))] * surplus


def central_jacobian(fun, c, h=1e-5):
    c = np.asarray(c, float)
    cols = []
    for i in range(len(c)):
        e = np.zeros_like(c)
        e[i] = h
        cols.append((fun(c + e) - fun(c - e)) / (2 * h))
    return np.stack(cols, axis=1)


def ccdf_slope(degrees) -> float:
    """Least-squares slope of log P(K >= k) against log k over observed degrees."""
    degrees = np.asarray(degrees)
    ks = np.unique(degrees)
    ccdf = np.array([(degrees >= k).mean() for k in ks])
    return float(np.polyfit(np.log(ks), np.log(ccdf), 1)[0])


def binned_density_slope(degrees) -> float:
    """Least-squares slope of the log-binned degree density against log k."""
    degrees = np.asarray(degrees)
    edges = 2.0 ** np.arange(int(np.log2(degrees.min())), int(np.log2(degrees.max())) + 2)
    counts, _ = np.histogram(degrees, bins=edges)
    dens = counts / np.diff(edges) / len(degrees)
    centres = np.sqrt(edges[:-1] * edges[1:])
    m = counts > 0
    return float(np.polyfit(np.log(centres[m]), np.log(dens[m]), 1)[0])


def mp_central_jacobian(classes, c, dps=40, h="1e-15"):
    """Central differences of the assignment map in extended precision.

    The assignment is re-derived from its formulas (route utility, logit,
    log-sum satisfaction, tanh demand) with mpmath, so rounding noise sits
    far below the double-precision values being checked.
    """
    import mpmath as mp

    mp.mp.dps = dps
    step = mp.mpf(h)

    def flows(cv):
        L = len(cv)
        f = [mp.mpf(0)] * L
        for cls in classes:
            B = cls.B
            m = B.shape[1]
            v = []
            for r in range(m):
                route = sum(mp.mpf(float(B[i, r])) * cv[i] for i in range(L) if B[i, r] != 0)
                v.append(mp.mpf(cls.v0) - mp.mpf(cls.beta) * route - mp.mpf(float(cls.route_cost[r])))
            top = max(v)
            w = [mp.exp(x - top) for x in v]
            z = sum(w)
            if cls.satisfaction_mode.value == "logsum":
                s = (top + mp.log(z)) / cls.sigma
            else:
                s = top / cls.sigma
            d = max(mp.mpf(0), cls.demand.a * mp.tanh(cls.demand.b * s))
            for r in range(m):
                x = d * w[r] / z
                for i in range(L):
                    if B[i, r] != 0:
                        f[i] += mp.mpf(float(B[i, r])) * x
        return f

    base = [mp.mpf(float(x)) for x in c]
    L = len(base)
    out = np.zeros((L, L))
    for j in range(L):
        up = list(base)
        dn = list(base)
        up[j] += step
        dn[j] -= step
        fu, fd = flows(up), flows(dn)
        for i in range(L):
            out[i, j] = float((fu[i] - fd[i]) / (2 * step))
    return out
