"""Total-degree start systems and start-pair file I/O."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..polysys import (
    Polynomial,
    PolynomialSystem,
    eval_system,
    parse_solutions,
    parse_system,
    serialize_solutions,
    serialize_system,
)

TRACK_BUDGET = 10**7


class TrackBudgetExceeded(ValueError):
    pass


@dataclass(frozen=True)
class StartPair:
    system: PolynomialSystem
    solutions: np.ndarray

    def max_residual(self) -> float:
        if len(self.solutions) == 0:
            return 0.0
        return max(float(np.abs(eval_system(self.system, s)).max()) for s in self.solutions)


def total_degree_start(degrees, seed: int = 0) -> StartPair:
    """g_i = c_i * x_i^d_i - c'_i with random unit-modulus c_i, c'_i.

    All prod(d_i) solutions are enumerated, coordinate i running over the
    d_i-th roots of c'_i / c_i.
    """
    degrees = [int(d) for d in degrees]
    if not degrees or min(degrees) < 1:
        raise ValueError("degrees must be positive")
    count = math.prod(degrees)
    if count > TRACK_BUDGET:
        raise TrackBudgetExceeded(f"track budget exceeded: {count} > {TRACK_BUDGET} start solutions")
    n = len(degrees)
    rng = np.random.default_rng([seed, 0x57A27])
    phases = rng.random((2, n))
    c = np.exp(2j * np.pi * phases[0])
    c2 = np.exp(2j * np.pi * phases[1])
    eqs = []
    for i, d in enumerate(degrees):
        e = [0] * n
        e[i] = d
        eqs.append(Polynomial(n, {tuple(e): c[i], (0,) * n: -c2[i]}))
    system = PolynomialSystem(n, eqs, name="total-degree start")

    roots = []
    for i, d in enumerate(degrees):
        base = (c2[i] / c[i]) ** (1.0 / d)
        roots.append(base * np.exp(2j * np.pi * np.arange(d) / d))
    sols = np.array(list(itertools.product(*roots)), dtype=complex).reshape(count, n)
    return StartPair(system, sols)


def write_start_pair(pair: StartPair, system_path, solutions_path) -> None:
    Path(system_path).write_text(serialize_system(pair.system))
    Path(solutions_path).write_text(serialize_solutions(pair.solutions))


def read_start_pair(system_path, solutions_path) -> StartPair:
    system = parse_system(Path(system_path).read_text())
    sols = parse_solutions(Path(solutions_path).read_text())
    if sols.shape[1] != system.num_vars:
        raise ValueError("solution dimension differs from the start system")
    return StartPair(system, sols)
