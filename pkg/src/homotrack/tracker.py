"""Adaptive predictor-corrector path tracking.

Every path runs start-to-finish inside one compiled kernel that touches only
its own workspace, so its result cannot depend on how paths are grouped into
worker threads.  ``solve_all`` hands contiguous chunks of start points to a
thread pool; the kernels release the GIL.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from numba import njit

from .batchla import SINGULAR, default_threads, fused_solve_inplace
from .homotopy import eval_exprs, interpolate, kernel_args, load_state
from .polysys import CompiledHomotopy, PolynomialSystem, compile_homotopy

CONVERGED = 0
DIVERGED = 1
UNDERFLOW = 2
MAX_STEPS = 3
SINGULAR_JACOBIAN = 4

STATUS_NAMES = (
    "converged",
    "divergedToInfinity",
    "stepSizeUnderflow",
    "maxStepsExceeded",
    "singularJacobian",
)


@dataclass(frozen=True)
class TrackerConfig:
    predictor: str = "rk4"
    dt_init: float = 0.01
    dt_min: float = 1e-10
    dt_max: float = 0.1
    max_corrector_iters: int = 3
    corrector_tol: float = 1e-10
    successive_successes_to_grow: int = 4
    grow_factor: float = 2.0
    shrink_factor: float = 0.5
    max_steps: int = 10000
    infinity_threshold: float = 1e8
    seed: int = 0
    dedup_tol: float = 1e-6
    real_tol: float = 1e-6

    def __post_init__(self):
        if self.predictor not in ("euler", "rk4"):
            raise ValueError(f"unknown predictor {self.predictor!r}")
        if not 0 < self.dt_min <= self.dt_init <= self.dt_max <= 1:
            raise ValueError("need 0 < dt_min <= dt_init <= dt_max <= 1")
        if not (self.grow_factor > 1 and 0 < self.shrink_factor < 1):
            raise ValueError("grow_factor must exceed 1 and shrink_factor lie in (0, 1)")
        if self.max_corrector_iters < 1 or self.max_steps < 1:
            raise ValueError("iteration limits must be positive")

    def as_tuple(self):
        return (
            1 if self.predictor == "rk4" else 0,
            float(self.dt_init),
            float(self.dt_min),
            float(self.dt_max),
            int(self.max_corrector_iters),
            float(self.corrector_tol),
            int(self.successive_successes_to_grow),
            float(self.grow_factor),
            float(self.shrink_factor),
            int(self.max_steps),
            float(self.infinity_threshold),
        )

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrackResult:
    start_index: int
    x: np.ndarray
    status: str
    steps: int
    corrector_iters_total: int
    final_residual: float
    t: float = 0.0
    accepted: int = 0
    rejected: int = 0

    @property
    def converged(self) -> bool:
        return self.status == "converged"


@dataclass
class Solution:
    x: np.ndarray
    residual: float
    is_real: bool
    track_indices: list[int]

    @property
    def multiplicity(self) -> int:
        return len(self.track_indices)


@dataclass
class SolutionSet:
    solutions: list[Solution]
    counts: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.solutions)

    @property
    def points(self) -> np.ndarray:
        if not self.solutions:
            return np.zeros((0, 0), dtype=complex)
        return np.array([s.x for s in self.solutions])

    @property
    def real_points(self) -> np.ndarray:
        pts = [s.x.real for s in self.solutions if s.is_real]
        return np.array(pts) if pts else np.zeros((0, 0))


# --------------------------------------------------------------------------
# compiled kernels


@njit(cache=True, nogil=True)
def _norm_inf(v):
    m = 0.0
    for i in range(v.shape[0]):
        a = abs(v[i])
        if a > m:
            m = a
    return m


@njit(cache=True, nogil=True)
def _equilibrate_rows(W, n):
    """Scale each row of [J | rhs] so max |J_ij| over j is 1."""
    for i in range(n):
        m = 0.0
        for j in range(n):
            a = abs(W[i, j])
            if a > m:
                m = a
        if m > 0.0 and math.isfinite(m):
            r = 1.0 / m
            for j in range(n + 1):
                W[i, j] *= r


@njit(cache=True, nogil=True)
def _dxdt(args, x, t, z, a, jx, jt, W, rinv, scale, ops, out):
    """Solve Jx * dx/dt = -Jt at (x, t)."""
    n = x.shape[0]
    load_state(x, z)
    interpolate(args[9], args[10], t, a)
    eval_exprs(args[3], args[4], args[5], a, z, jx)
    eval_exprs(args[6], args[7], args[8], args[11], z, jt)
    for i in range(n):
        for j in range(n):
            W[i, j] = jx[i * n + j]
        W[i, n] = -jt[i]
    _equilibrate_rows(W, n)
    status, _ = fused_solve_inplace(W, n, out, rinv, scale, ops)
    return status


@njit(cache=True, nogil=True)
def _predict(args, x, t, dt, rk4, ws, xp):
    z, a, jx, jt, hv, W, rinv, scale, ops, k1, k2, k3, k4, xs = ws
    n = x.shape[0]
    if _dxdt(args, x, t, z, a, jx, jt, W, rinv, scale, ops, k1) == SINGULAR:
        return SINGULAR
    if rk4 == 0:
        for i in range(n):
            xp[i] = x[i] + dt * k1[i]
        return 0
    h = 0.5 * dt
    for i in range(n):
        xs[i] = x[i] + h * k1[i]
    if _dxdt(args, xs, t + h, z, a, jx, jt, W, rinv, scale, ops, k2) == SINGULAR:
        return SINGULAR
    for i in range(n):
        xs[i] = x[i] + h * k2[i]
    if _dxdt(args, xs, t + h, z, a, jx, jt, W, rinv, scale, ops, k3) == SINGULAR:
        return SINGULAR
    for i in range(n):
        xs[i] = x[i] + dt * k3[i]
    if _dxdt(args, xs, t + dt, z, a, jx, jt, W, rinv, scale, ops, k4) == SINGULAR:
        return SINGULAR
    for i in range(n):
        xp[i] = x[i] + (dt / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    return 0


@njit(cache=True, nogil=True)
def _correct(args, x, t, max_iters, tol, ws):
    """Newton at fixed t, updating ``x`` in place.

    Returns (status, iterations, converged).  Convergence means
    ||dx||_inf < tol * max(1, ||x||_inf); an iteration whose step fails to
    halve the previous one stops the loop as non-convergent.
    """
    z, a, jx, jt, hv, W, rinv, scale, ops, dx, _, _, _, _ = ws
    n = x.shape[0]
    interpolate(args[9], args[10], t, a)
    prev = np.inf
    for it in range(1, max_iters + 1):
        load_state(x, z)
        eval_exprs(args[0], args[1], args[2], a, z, hv)
        eval_exprs(args[3], args[4], args[5], a, z, jx)
        for i in range(n):
            for j in range(n):
                W[i, j] = jx[i * n + j]
            W[i, n] = -hv[i]
        _equilibrate_rows(W, n)
        status, _ = fused_solve_inplace(W, n, dx, rinv, scale, ops)
        if status == SINGULAR:
            return SINGULAR, it, False
        for i in range(n):
            x[i] += dx[i]
        step = _norm_inf(dx)
        if not math.isfinite(step):
            return 0, it, False
        if step < tol * max(1.0, _norm_inf(x)):
            return 0, it, True
        if it > 1 and step > 0.5 * prev:
            return 0, it, False
        prev = step
    return 0, max_iters, False


@njit(cache=True, nogil=True)
def _workspace(n, ncoef):
    c = np.complex128
    return (
        np.empty(n + 2, dtype=c),
        np.empty(ncoef, dtype=c),
        np.empty(n * n, dtype=c),
        np.empty(n, dtype=c),
        np.empty(n, dtype=c),
        np.empty((n, n + 1), dtype=c),
        np.empty(n, dtype=c),
        np.empty(n),
        np.zeros(1, dtype=np.int64),
        np.empty(n, dtype=c),
        np.empty(n, dtype=c),
        np.empty(n, dtype=c),
        np.empty(n, dtype=c),
        np.empty(n, dtype=c),
    )


@njit(cache=True, nogil=True)
def _residual(args, x, ws):
    z, a, jx, jt, hv = ws[0], ws[1], ws[2], ws[3], ws[4]
    load_state(x, z)
    eval_exprs(args[0], args[1], args[2], args[10], z, hv)
    return _norm_inf(hv)


@njit(cache=True, nogil=True)
def _polish(args, x, ws, max_iters, r):
    """Extra Newton steps on the target, kept only while the residual drops."""
    n = x.shape[0]
    trial = np.empty(n, dtype=np.complex128)
    used = 0
    for _ in range(max_iters):
        for i in range(n):
            trial[i] = x[i]
        st, it, _ = _correct(args, trial, 1.0, 1, 0.0, ws)
        used += it
        if st == SINGULAR:
            break
        rt = _residual(args, trial, ws)
        if not rt < r:
            break
        for i in range(n):
            x[i] = trial[i]
        r = rt
    return r, used


@njit(cache=True, nogil=True)
def _track(args, x0, cfg, x, history):
    """Track one path from t=0 to t=1.  ``x`` receives the endpoint.

    Returns (status, steps, corrector_iters, residual, t, accepted, rejected).
    Accepted t values are written to ``history`` while it has room.
    """
    rk4, dt_init, dt_min, dt_max, max_it, tol, grow_after, grow, shrink, max_steps, inf_thr = cfg
    n = x0.shape[0]
    ws = _workspace(n, args[9].shape[0])
    xp = np.empty(n, dtype=np.complex128)
    for i in range(n):
        x[i] = x0[i]
    t = 0.0
    dt = dt_init
    streak = 0
    steps = 0
    iters = 0
    accepted = 0
    rejected = 0
    last_fail_singular = False
    status = CONVERGED
    while t < 1.0:
        if steps >= max_steps:
            status = MAX_STEPS
            break
        steps += 1
        remaining = 1.0 - t
        h = dt
        if remaining - h < dt_min:
            h = remaining if remaining <= dt_max else 0.5 * remaining
        last = h == remaining
        t_new = 1.0 if last else t + h
        ok = _predict(args, x, t, h, rk4, ws, xp) != SINGULAR
        singular = not ok
        if ok:
            st, it, conv = _correct(args, xp, t_new, max_it, tol, ws)
            iters += it
            singular = st == SINGULAR
            ok = conv and not singular
        if ok:
            for i in range(n):
                x[i] = xp[i]
            t = t_new
            if accepted < history.shape[0]:
                history[accepted] = t
            accepted += 1
            last_fail_singular = False
            streak += 1
            if streak >= grow_after:
                dt = min(dt * grow, dt_max)
                streak = 0
            if _norm_inf(x) > inf_thr:
                status = DIVERGED
                break
        else:
            rejected += 1
            streak = 0
            last_fail_singular = singular
            dt *= shrink
            if dt < dt_min:
                status = SINGULAR_JACOBIAN if last_fail_singular else UNDERFLOW
                break
    residual = np.inf
    if status == CONVERGED:
        st, it, conv = _correct(args, x, 1.0, max_it, tol, ws)
        iters += it
        residual = _residual(args, x, ws)
        if conv and st != SINGULAR:
            residual, it = _polish(args, x, ws, max_it, residual)
            iters += it
        if st == SINGULAR:
            status = SINGULAR_JACOBIAN
        elif not conv or not math.isfinite(residual):
            status = UNDERFLOW
    else:
        residual = _residual(args, x, ws)
    return status, steps, iters, residual, t, accepted, rejected


@njit(cache=True, nogil=True)
def _track_range(args, X0, cfg, lo, hi, X, status, steps, iters, resid, tfin, acc, rej):
    history = np.empty(0)
    for p in range(lo, hi):
        s, st, it, r, t, a, rj = _track(args, X0[p], cfg, X[p], history)
        status[p] = s
        steps[p] = st
        iters[p] = it
        resid[p] = r
        tfin[p] = t
        acc[p] = a
        rej[p] = rj


# --------------------------------------------------------------------------
# python surface


def _as_point(ch: CompiledHomotopy, x) -> np.ndarray:
    x = np.ascontiguousarray(x, dtype=np.complex128)
    if x.shape != (ch.num_vars,):
        raise ValueError(f"expected {ch.num_vars} coordinates, got shape {x.shape}")
    return x


def predict(ch: CompiledHomotopy, x, t: float, dt: float, predictor: str = "rk4") -> np.ndarray:
    """One Euler or RK4 step of dx/dt = -Jx^-1 Jt.  Raises on a singular Jacobian."""
    x = _as_point(ch, x)
    ws = _workspace(ch.num_vars, ch.num_coeffs + 1)
    xp = np.empty_like(x)
    if _predict(kernel_args(ch), x, float(t), float(dt), int(predictor == "rk4"), ws, xp) == SINGULAR:
        raise np.linalg.LinAlgError("singular Jacobian in predictor")
    return xp


def correct(ch: CompiledHomotopy, x, t: float, max_iters: int = 3, tol: float = 1e-10):
    """Newton correction at fixed ``t``; returns ``(x_hat, iterations, converged)``."""
    x = _as_point(ch, x).copy()
    ws = _workspace(ch.num_vars, ch.num_coeffs + 1)
    st, it, conv = _correct(kernel_args(ch), x, float(t), int(max_iters), float(tol), ws)
    if st == SINGULAR:
        raise np.linalg.LinAlgError("singular Jacobian in corrector")
    return x, int(it), bool(conv)


def _result(i, x, s, st, it, r, t, a, rj) -> TrackResult:
    return TrackResult(
        start_index=int(i), x=x, status=STATUS_NAMES[int(s)], steps=int(st),
        corrector_iters_total=int(it), final_residual=float(r), t=float(t),
        accepted=int(a), rejected=int(rj),
    )


def track_path(ch: CompiledHomotopy, start, config: TrackerConfig | None = None,
               start_index: int = 0, record: bool = False):
    """Track a single start solution.  With ``record`` also return the accepted t values."""
    config = config or TrackerConfig()
    x0 = _as_point(ch, start)
    x = np.empty_like(x0)
    history = np.empty(config.max_steps + 1 if record else 0)
    out = _track(kernel_args(ch), x0, config.as_tuple(), x, history)
    res = _result(start_index, x, *out)
    if record:
        return res, history[: res.accepted].copy()
    return res


def track_many(ch: CompiledHomotopy, starts, config: TrackerConfig | None = None,
               threads: int | None = None) -> list[TrackResult]:
    config = config or TrackerConfig()
    X0 = np.ascontiguousarray(np.atleast_2d(np.asarray(starts, dtype=np.complex128)))
    if X0.shape[1] != ch.num_vars:
        raise ValueError(f"start points must have {ch.num_vars} coordinates")
    npaths = X0.shape[0]
    X = np.empty_like(X0)
    status = np.empty(npaths, dtype=np.int64)
    steps = np.empty(npaths, dtype=np.int64)
    iters = np.empty(npaths, dtype=np.int64)
    resid = np.empty(npaths)
    tfin = np.empty(npaths)
    acc = np.empty(npaths, dtype=np.int64)
    rej = np.empty(npaths, dtype=np.int64)
    args = kernel_args(ch)
    cfg = config.as_tuple()
    outs = (X, status, steps, iters, resid, tfin, acc, rej)
    threads = default_threads() if threads is None else max(1, int(threads))
    threads = min(threads, npaths) if npaths else 1
    if threads == 1:
        _track_range(args, X0, cfg, 0, npaths, *outs)
    else:
        # interleaved small chunks keep workers balanced when path costs differ
        chunk = max(1, min(64, -(-npaths // (4 * threads))))
        spans = [(lo, min(npaths, lo + chunk)) for lo in range(0, npaths, chunk)]
        with ThreadPoolExecutor(threads) as pool:
            for f in [pool.submit(_track_range, args, X0, cfg, lo, hi, *outs) for lo, hi in spans]:
                f.result()
    return [
        _result(i, X[i].copy(), status[i], steps[i], iters[i], resid[i], tfin[i], acc[i], rej[i])
        for i in range(npaths)
    ]


def dedup_and_classify(results, dedup_tol: float = 1e-6, real_tol: float = 1e-6) -> SolutionSet:
    """Greedy clustering of converged endpoints in start-index order."""
    counts = {name: 0 for name in STATUS_NAMES}
    reps: list[np.ndarray] = []
    members: list[list[int]] = []
    best: list[TrackResult] = []
    for r in results:
        counts[r.status] += 1
        if not r.converged:
            continue
        hit = -1
        if reps:
            d = np.abs(np.asarray(reps) - r.x).max(axis=1)
            close = np.flatnonzero(d <= dedup_tol)
            if close.size:
                hit = int(close[0])
        if hit < 0:
            reps.append(r.x)
            members.append([r.start_index])
            best.append(r)
        else:
            members[hit].append(r.start_index)
            if r.final_residual < best[hit].final_residual:
                best[hit] = r
    sols = [
        Solution(
            x=b.x.copy(),
            residual=b.final_residual,
            is_real=bool(np.abs(b.x.imag).max(initial=0.0) < real_tol),
            track_indices=m,
        )
        for b, m in zip(best, members)
    ]
    counts["failed"] = sum(v for k, v in counts.items() if k != "converged")
    counts["distinct"] = len(sols)
    counts["real"] = sum(s.is_real for s in sols)
    return SolutionSet(sols, counts)


def solve_all(ch: CompiledHomotopy, start_solutions, config: TrackerConfig | None = None,
              threads: int | None = None):
    """Track every start solution and collect the distinct endpoints."""
    config = config or TrackerConfig()
    starts = np.atleast_2d(np.asarray(start_solutions, dtype=np.complex128))
    if starts.size == 0:
        raise ValueError("no start solutions")
    results = track_many(ch, starts, config, threads)
    return dedup_and_classify(results, config.dedup_tol, config.real_tol), results


def random_gamma(seed: int) -> complex:
    """Unit-modulus gamma drawn from ``seed``."""
    rng = np.random.default_rng([seed, 0x9A33A])
    return complex(np.exp(2j * np.pi * rng.random()))


def solve(target: PolynomialSystem, start: PolynomialSystem | None = None, start_solutions=None,
          config: TrackerConfig | None = None, threads: int | None = None):
    """Convenience driver: total-degree start unless one is supplied.

    Returns ``(SolutionSet, results, compiled_homotopy)``.
    """
    from .problems.start import total_degree_start

    config = config or TrackerConfig()
    if not target.is_square():
        raise ValueError("target system must be square")
    if start is None:
        pair = total_degree_start(target.degrees, seed=config.seed)
        start, start_solutions = pair.system, pair.solutions
    elif start_solutions is None:
        raise ValueError("a supplied start system needs its solutions")
    ch = compile_homotopy(start, target, random_gamma(config.seed))
    sset, results = solve_all(ch, start_solutions, config, threads)
    return sset, results, ch
