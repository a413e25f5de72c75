"""
Absolute pose from three points
===============================

The depths of three known world points satisfy three quadratics.
Solve them, then recover the rotation and translation.
"""

import numpy as np

from homotrack.problems.vision import build_system, p3p_pose, synth_instance
from homotrack.tracker import solve

inst, pose = synth_instance("p3p", seed=3)
F = build_system(inst)
print("unknowns:", F.num_vars, "degrees:", F.degrees)

sset, _, _ = solve(F)
print("distinct solutions:", len(sset), "real:", len(sset.real_points))

# keep real solutions with positive depths
rays = inst.points[0]
for rho in sset.real_points:
    if np.all(rho.real > 0):
        R, T = p3p_pose(inst.world, rays, rho.real)
        err = np.abs(R - pose.R).max()
        print("depths", np.round(rho.real, 6), "rotation error %.1e" % err)

print("true depths", np.round(pose.depths, 6))
