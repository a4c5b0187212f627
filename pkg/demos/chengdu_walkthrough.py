"""Walk through the six-node city network from equilibrium to profit sharing.

Run with ``python demos/chengdu_walkthrough.py``.  Takes about ten seconds.
"""

import numpy as np

from mmsue import asymmetric_nash, chengdu_fixture, link_cost, msa_solve, provider_profits, two_timescale

np.set_printoptions(precision=2, suppress=True)

city = chengdu_fixture()
print(f"{city.n_links} links, {len(city.classes)} passenger classes, providers {list(city.providers.names)}")

# Passengers left to themselves: the stochastic user equilibrium with no incentive.
zero = np.zeros(city.n_links)
base = msa_solve(city)
print("\nno incentive")
print("  flows   ", base.f_star)
print("  costs   ", link_cost(base.f_star, zero, city.cost))
print("  demands ", np.array(base.demands))
print(f"  platform profit {base.f_star @ city.profit.profit(base.f_star):.2f} after {base.iterations} iterations")

# The platform now adds per-link discounts or surcharges.  No route may get
# dearer overall, so every surcharge has to be paid for by a discount
# elsewhere on the same route.
opt = two_timescale(city)
print("\nwith incentives")
print("  J       ", opt.J_star)
print("  flows   ", opt.f_star)
print(f"  platform profit {opt.baseline_profit:.2f} -> {opt.profit:.2f} ({opt.iterations} outer iterations)")
print(f"  worst route surcharge {opt.route_violation:.1e}")

# The subway links (10-12) get discounts and draw passengers away from the
# taxi and bus links.
shift = opt.f_star - base.f_star
print("  flow moved per link", shift)

# Who gets what: weighted Nash bargaining over the extra profit.
before = provider_profits(base.f_star, zero, city.profit, city.providers)
after = provider_profits(opt.f_star, opt.J_star, city.profit, city.providers)
share = asymmetric_nash(opt.profit, before, city.theta, post=after)
print("\nprofit sharing, weights", city.theta)
print(f"  {'provider':10s}{'alone':>10s}{'raw':>10s}{'transfer':>10s}{'final':>10s}")
for name, t, p, c, r in zip(city.providers.names, before, after, share.compensation, share.R_star):
    print(f"  {name:10s}{t:10.2f}{p:10.2f}{c:10.2f}{r:10.2f}")
print("  every provider gains:", bool(np.all(share.increase > 0)))
