"""A scale-free city: generate, solve, optimise and look at where flow goes.

``python demos/large_scale.py [n_nodes] [n_od_pairs] [seed]``

The defaults (150 nodes, 30 OD pairs) finish in a few minutes.  The full
500-node, 100-pair setting takes a quarter of an hour or more; use the
``mmsue pipeline`` command for that.
"""

import sys
import time

import numpy as np

from mmsue import GeneratorConfig, NotConverged, msa_solve, random_scenario, two_timescale

n, od, seed = (int(a) for a in (sys.argv[1:] + ["150", "30", "1"][len(sys.argv) - 1:]))

scenario = random_scenario(GeneratorConfig(n_nodes=n, n_od_pairs=od, seed=seed))
print(f"{n} nodes, {scenario.n_links} links, {od} OD pairs, {sum(c.n_routes for c in scenario.classes)} routes")

# Degree distribution: a few hubs, many nodes with the minimum two edges.
deg = np.bincount([l.tail for l in scenario.network.links])[1:]
print("degree: min", deg.min(), "median", int(np.median(deg)), "max", deg.max())

t0 = time.perf_counter()
base = msa_solve(scenario)
used = base.f_star > 1e-6
print(f"\nequilibrium in {base.iterations} iterations ({time.perf_counter() - t0:.1f}s)")
print(f"links carrying flow: {used.sum()} of {scenario.n_links} ({used.mean():.0%})")

t0 = time.perf_counter()
try:
    res = two_timescale(scenario)
except NotConverged as exc:  # the best iterate is still useful
    res = exc.result
    print("incentive loop hit its iteration limit")
print(f"incentive loop: {res.iterations} iterations ({time.perf_counter() - t0:.0f}s)")
print(f"profit {res.baseline_profit:.1f} -> {res.profit:.1f} ({100 * (res.profit / res.baseline_profit - 1):+.2f}%)")

# The flow residual settles quickly; the incentive keeps drifting along
# directions that change no route cost and so leave the profit unchanged.
for k in (10, 100, 1000, len(res.delta_f)):
    if k <= len(res.delta_f):
        print(f"  iter {k:6d}  delta_f {res.delta_f[k - 1]:.2e}  delta_J {res.delta_J[k - 1]:.2e}  "
              f"profit {res.profit_trace[k - 1]:.2f}")

J = res.J_star
print(f"\nlinks discounted: {(J < -1e-6).sum()}, surcharged: {(J > 1e-6).sum()}, route violation "
      f"{res.route_violation:.1e}")
