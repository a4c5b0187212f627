"""How bargaining weights move the split of a fixed cooperative profit.

The pie and each provider's stand-alone profit are held fixed; only the
weights change.  Every provider always keeps its stand-alone profit and
takes a slice of the surplus proportional to its weight.
"""

import numpy as np

from mmsue import NoSurplus, asymmetric_nash, equal_split

names = ["taxi", "bus", "scooter", "subway"]
alone = np.array([133.87, 39.25, 0.57, 56.65])
pie = 401.90
print(f"surplus to split: {pie - alone.sum():.2f}\n")

for theta in ([1, 1, 1, 1], [70, 60, 1, 200], [200, 60, 1, 70], [1, 1, 1, 1000]):
    res = asymmetric_nash(pie, alone, theta)
    print(f"weights {str(theta):20s}", "  ".join(f"{n} {r:7.2f}" for n, r in zip(names, res.R_star)))

print("\nequal split of the pie, ignoring stand-alone profits:")
print("  ", np.round(equal_split(pie, len(names)), 2))

# With no surplus there is nothing to bargain over.
try:
    asymmetric_nash(alone.sum() - 1, alone, [1, 1, 1, 1])
except NoSurplus as exc:
    print("\nshrinking pie:", exc)
