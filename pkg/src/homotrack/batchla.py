"""Batched small dense complex linear solves.

The production path eliminates the augmented matrix ``[A | b]`` with partial
pivoting in a single pass, so the forward solve against ``L`` happens as a
side effect of the factorization, then back-substitutes against the cached
``U`` and reciprocal pivots.  A conventional factor + two triangular solves
path is kept as a cross-check.

Kernels take an ``ops`` accumulator (length-1 int64 array) that counts real
floating point operations with the weights below.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numba import njit

MAX_N = 32
SINGULAR_RTOL = 1e-14
GROWTH_LIMIT = 1e8

# real flops per complex operation
OPS_ADD = 2
OPS_MUL = 6
OPS_DIV = 11
OPS_ABS2 = 3

OK = 0
SINGULAR = 1


@dataclass(frozen=True)
class LinearProblem:
    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.A, dtype=np.complex128)
        b = np.asarray(self.b, dtype=np.complex128).reshape(-1)
        n = b.shape[0]
        if A.shape != (n, n):
            raise ValueError(f"A has shape {A.shape}, expected ({n}, {n})")
        if not 1 <= n <= MAX_N:
            raise ValueError(f"system size {n} outside 1..{MAX_N}")
        if not (np.isfinite(A).all() and np.isfinite(b).all()):
            raise ValueError("non-finite entries")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def n(self) -> int:
        return self.b.shape[0]


@dataclass(frozen=True)
class LinearSolution:
    x: np.ndarray | None
    status: str
    growth_flag: bool = False

    @property
    def ok(self) -> bool:
        return self.status == "ok"


@njit(cache=True, nogil=True)
def _abs2(z):
    return z.real * z.real + z.imag * z.imag


@njit(cache=True, nogil=True)
def fused_solve_inplace(W, n, x, rinv, scale, ops):
    """Solve in place on the augmented ``n x (n+1)`` block of ``W``.

    ``rinv`` and ``scale`` are work vectors of length >= n.  On return
    ``x[:n]`` holds the solution.  Returns ``(status, growth)`` where growth
    is max|U| / max|A|.
    """
    amax = 0.0
    for j in range(n):
        cmax = 0.0
        for i in range(n):
            a = _abs2(W[i, j])
            if a > cmax:
                cmax = a
        scale[j] = cmax
        if cmax > amax:
            amax = cmax
    umax = amax
    for k in range(n):
        p = k
        pmax = -1.0
        for i in range(k, n):
            a = _abs2(W[i, k])
            ops[0] += OPS_ABS2
            if a > pmax:
                pmax = a
                p = i
        # squared moduli on both sides of the relative threshold
        if not (pmax > (SINGULAR_RTOL * SINGULAR_RTOL) * scale[k]) or not math.isfinite(pmax):
            return SINGULAR, 0.0
        if p != k:
            for j in range(k, n + 1):
                tmp = W[k, j]
                W[k, j] = W[p, j]
                W[p, j] = tmp
        r = 1.0 / W[k, k]
        rinv[k] = r
        ops[0] += OPS_DIV
        for i in range(k + 1, n):
            l = W[i, k] * r
            ops[0] += OPS_MUL
            for j in range(k + 1, n + 1):
                W[i, j] -= l * W[k, j]
            ops[0] += (OPS_MUL + OPS_ADD) * (n - k)
        for j in range(k, n):
            a = _abs2(W[k, j])
            if a > umax:
                umax = a
    for i in range(n - 1, -1, -1):
        acc = W[i, n]
        for j in range(i + 1, n):
            acc -= W[i, j] * x[j]
        ops[0] += (OPS_MUL + OPS_ADD) * (n - 1 - i)
        x[i] = acc * rinv[i]
        ops[0] += OPS_MUL
    growth = math.sqrt(umax / amax) if amax > 0 else 0.0
    return OK, growth


@njit(cache=True, nogil=True)
def lu_factor_inplace(A, n, piv, ops):
    """Partial-pivoting LU of the ``n x n`` block; unit-lower L stored below the diagonal."""
    scale = np.empty(n)
    for j in range(n):
        cmax = 0.0
        for i in range(n):
            a = _abs2(A[i, j])
            if a > cmax:
                cmax = a
        scale[j] = cmax
    for k in range(n):
        p = k
        pmax = -1.0
        for i in range(k, n):
            a = _abs2(A[i, k])
            ops[0] += OPS_ABS2
            if a > pmax:
                pmax = a
                p = i
        piv[k] = p
        if not (pmax > (SINGULAR_RTOL * SINGULAR_RTOL) * scale[k]) or not math.isfinite(pmax):
            return SINGULAR
        if p != k:
            for j in range(n):
                tmp = A[k, j]
                A[k, j] = A[p, j]
                A[p, j] = tmp
        r = 1.0 / A[k, k]
        ops[0] += OPS_DIV
        for i in range(k + 1, n):
            A[i, k] *= r
            ops[0] += OPS_MUL
            l = A[i, k]
            for j in range(k + 1, n):
                A[i, j] -= l * A[k, j]
            ops[0] += (OPS_MUL + OPS_ADD) * (n - k - 1)
    return OK


@njit(cache=True, nogil=True)
def lu_solve_inplace(LU, n, piv, b, ops):
    """Apply the row swaps, then forward (unit L) and backward (U) substitution."""
    for k in range(n):
        p = piv[k]
        if p != k:
            tmp = b[k]
            b[k] = b[p]
            b[p] = tmp
    for i in range(n):
        acc = b[i]
        for j in range(i):
            acc -= LU[i, j] * b[j]
        ops[0] += (OPS_MUL + OPS_ADD) * i
        b[i] = acc
    for i in range(n - 1, -1, -1):
        acc = b[i]
        for j in range(i + 1, n):
            acc -= LU[i, j] * b[j]
        ops[0] += (OPS_MUL + OPS_ADD) * (n - 1 - i)
        b[i] = acc / LU[i, i]
        ops[0] += OPS_DIV


@njit(cache=True, nogil=True)
def _fused_batch(W, sizes, X, status, growth, ops, lo, hi):
    rinv = np.empty(W.shape[1], dtype=np.complex128)
    scale = np.empty(W.shape[1])
    for m in range(lo, hi):
        s, g = fused_solve_inplace(W[m], sizes[m], X[m], rinv, scale, ops)
        status[m] = s
        growth[m] = g


@njit(cache=True, nogil=True)
def _factor_solve_batch(A, B, sizes, status, ops, lo, hi):
    piv = np.empty(A.shape[1], dtype=np.int64)
    for m in range(lo, hi):
        n = sizes[m]
        s = lu_factor_inplace(A[m], n, piv, ops)
        status[m] = s
        if s == OK:
            lu_solve_inplace(A[m], n, piv, B[m], ops)


def _pack(problems):
    nb = len(problems)
    nmax = max(p.n for p in problems)
    W = np.zeros((nb, nmax, nmax + 1), dtype=np.complex128)
    sizes = np.empty(nb, dtype=np.int64)
    for m, p in enumerate(problems):
        n = p.n
        sizes[m] = n
        W[m, :n, :n] = p.A
        W[m, :n, n] = p.b
    return W, sizes, nmax


def _chunks(nb: int, threads: int):
    threads = max(1, min(threads, nb))
    step = -(-nb // threads)
    return [(lo, min(nb, lo + step)) for lo in range(0, nb, step)]


def default_threads() -> int:
    env = os.environ.get("HC_THREADS")
    return int(env) if env else (os.cpu_count() or 1)


def solve_batch(problems, threads: int = 1, count_ops: bool = False):
    """Solve every problem independently with the fused kernel.

    Returns the list of :class:`LinearSolution` (and the total real flop
    count when ``count_ops`` is set).  A singular element only affects its
    own slot.
    """
    problems = list(problems)
    if not problems:
        return ([], 0) if count_ops else []
    W, sizes, nmax = _pack(problems)
    nb = len(problems)
    X = np.zeros((nb, nmax), dtype=np.complex128)
    status = np.zeros(nb, dtype=np.int64)
    growth = np.zeros(nb)
    spans = _chunks(nb, threads)
    counters = [np.zeros(1, dtype=np.int64) for _ in spans]
    if len(spans) == 1:
        _fused_batch(W, sizes, X, status, growth, counters[0], 0, nb)
    else:
        with ThreadPoolExecutor(len(spans)) as pool:
            futs = [
                pool.submit(_fused_batch, W, sizes, X, status, growth, c, lo, hi)
                for c, (lo, hi) in zip(counters, spans)
            ]
            for f in futs:
                f.result()
    out = []
    for m, p in enumerate(problems):
        if status[m] == OK:
            out.append(LinearSolution(X[m, : p.n].copy(), "ok", bool(growth[m] > GROWTH_LIMIT)))
        else:
            out.append(LinearSolution(None, "singular"))
    if count_ops:
        return out, int(sum(int(c[0]) for c in counters))
    return out


def solve_fused(problem: LinearProblem) -> LinearSolution:
    return solve_batch([problem])[0]


def solve_factor_then_substitute(problems, count_ops: bool = False):
    """Reference path: LU factorization, then separate L and U solves."""
    problems = list(problems)
    if not problems:
        return ([], 0) if count_ops else []
    nb = len(problems)
    nmax = max(p.n for p in problems)
    A = np.zeros((nb, nmax, nmax), dtype=np.complex128)
    B = np.zeros((nb, nmax), dtype=np.complex128)
    sizes = np.empty(nb, dtype=np.int64)
    for m, p in enumerate(problems):
        A[m, : p.n, : p.n] = p.A
        B[m, : p.n] = p.b
        sizes[m] = p.n
    status = np.zeros(nb, dtype=np.int64)
    ops = np.zeros(1, dtype=np.int64)
    _factor_solve_batch(A, B, sizes, status, ops, 0, nb)
    out = [
        LinearSolution(B[m, : p.n].copy(), "ok") if status[m] == OK else LinearSolution(None, "singular")
        for m, p in enumerate(problems)
    ]
    return (out, int(ops[0])) if count_ops else out


def naive_solve(A, b, dps: int = 40) -> np.ndarray:
    """Unpivoted Gaussian elimination in ``dps``-digit arithmetic (mpmath).

    Independent oracle for the double precision kernels.  Raises
    ``ZeroDivisionError`` on an exactly zero pivot.
    """
    import mpmath

    A = np.asarray(A, dtype=complex)
    b = np.asarray(b, dtype=complex)
    n = len(b)
    with mpmath.workdps(dps):
        M = [[mpmath.mpc(A[i, j].real, A[i, j].imag) for j in range(n)] + [mpmath.mpc(b[i].real, b[i].imag)]
             for i in range(n)]
        for k in range(n):
            if M[k][k] == 0:
                raise ZeroDivisionError("zero pivot in unpivoted elimination")
            for i in range(k + 1, n):
                l = M[i][k] / M[k][k]
                for j in range(k, n + 1):
                    M[i][j] -= l * M[k][j]
        x = [mpmath.mpc(0)] * n
        for i in range(n - 1, -1, -1):
            acc = M[i][n]
            for j in range(i + 1, n):
                acc -= M[i][j] * x[j]
            x[i] = acc / M[i][i]
        return np.array([complex(v) for v in x])
