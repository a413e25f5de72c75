"""
Optimal triangulation by critical points
========================================

Minimize the squared image corrections subject to the epipolar
constraints.  For two views the answer is known in closed form, so it
doubles as a check.
"""

import numpy as np

from homotrack.problems.vision import (
    best_triangulation,
    build_system,
    hartley_sturm,
    synth_instance,
)
from homotrack.tracker import solve

inst, _ = synth_instance("tri2", seed=0, noise=1.0)
sset, _, _ = solve(build_system(inst))
best = best_triangulation(sset.real_points, 2)

x1, x2 = inst.points[0][0], inst.points[1][0]
h1, h2 = hartley_sturm(x1, x2, inst.E[(0, 1)])
print("two views, critical points:", len(sset))
print("  homotopy     ", x1[:2] - best[0:2], x2[:2] - best[2:4])
print("  closed form  ", h1[:2], h2[:2])

# three views: the pairwise constraints are consistent, so the corrected
# points correspond to a single 3D point
inst, _ = synth_instance("tri3", seed=0, noise=1.0)
sset, results, _ = solve(build_system(inst))
best = best_triangulation(sset.real_points, 3)
clean = inst.gt["clean"]
err = [np.hypot(*(inst.points[k][0, :2] - best[2 * k:2 * k + 2] - clean[k][0, :2])) for k in range(3)]
print("three views: %d tracks, %d critical points, %d real" % (len(results), len(sset), len(sset.real_points)))
print("  mean correction error %.3f px" % (np.mean(err) * inst.focal))
