"""
Threads and determinism
=======================

Paths are independent, so they are split over worker threads.  Each
path runs the same arithmetic whatever the split, so the results are
identical bit for bit.
"""

import os
import time

import numpy as np

from homotrack.polysys import compile_homotopy
from homotrack.problems import gen_eco, total_degree_start
from homotrack.tracker import track_many

F = gen_eco(11)
pair = total_degree_start(F.degrees)
ch = compile_homotopy(pair.system, F, np.exp(0.4j))
print("paths:", len(pair.solutions), "cpus:", os.cpu_count())

# warm up so the first timing is not paying for one-off costs
track_many(ch, pair.solutions[:8])

baseline = None
for threads in (1, 2, 4):
    t0 = time.perf_counter()
    out = track_many(ch, pair.solutions, threads=threads)
    dt = time.perf_counter() - t0
    X = np.array([r.x for r in out])
    same = baseline is None or X.tobytes() == baseline.tobytes()
    baseline = X if baseline is None else baseline
    print("threads %d: %.2f s  identical: %s" % (threads, dt, same))
