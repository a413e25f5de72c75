"""
Solving the cyclic and eco benchmark systems
============================================

Track every path of a total-degree homotopy and count what survives.
"""

import numpy as np

from homotrack.polysys import eval_system
from homotrack.problems import gen_cyclic, gen_eco
from homotrack.tracker import solve

# cyclic-5 has Bezout number 5! = 120 but only 70 isolated roots
F = gen_cyclic(5)
sset, results, ch = solve(F)
print(F.name, "tracks:", len(results), "distinct:", len(sset), "real:", len(sset.real_points))
print("status counts:", {k: v for k, v in sset.counts.items() if v})

# every distinct endpoint is checked against the target directly
res = max(np.abs(eval_system(F, p)).max() for p in sset.points)
print("max residual %.2e" % res)

# eco-8 in its quadratic form: 2^7 = 128 paths for 64 finite roots
F = gen_eco(8)
sset, results, ch = solve(F)
print(F.name, "tracks:", len(results), "distinct:", len(sset))

# step statistics say where the tracker worked hardest
steps = np.array([r.steps for r in results])
print("steps per path: min %d  median %d  max %d" % (steps.min(), np.median(steps), steps.max()))
