"""Evaluation of H(x, t), dH/dx and dH/dt from compiled indexed-term tables."""

from __future__ import annotations

import numpy as np
from numba import njit

from .polysys import CompiledHomotopy


@njit(cache=True, nogil=True)
def eval_exprs(scal, cidx, vidx, coeffs, z, out):
    """out[e] = sum_k scal[e,k] * coeffs[cidx[e,k]] * prod_m z[vidx[e,k,m]].

    Padding terms (scalar 0) are always trailing, so the sum stops at the
    first one.
    """
    nexpr, K = scal.shape
    M = vidx.shape[2]
    for e in range(nexpr):
        acc = 0j
        for k in range(K):
            s = scal[e, k]
            if s == 0.0:
                break
            term = s * coeffs[cidx[e, k]]
            for m in range(M):
                term *= z[vidx[e, k, m]]
            acc += term
        out[e] = acc


@njit(cache=True, nogil=True)
def load_state(x, z):
    n = x.shape[0]
    for i in range(n):
        z[i + 1] = x[i]
    z[0] = 0.0
    z[n + 1] = 1.0


@njit(cache=True, nogil=True)
def interpolate(gg, f, t, a):
    s = 1.0 - t
    for j in range(gg.shape[0]):
        a[j] = s * gg[j] + t * f[j]


def kernel_args(ch: CompiledHomotopy):
    """Flat tuple of arrays consumed by the numba kernels."""
    gg = ch.gamma * ch.start_coeffs
    return (
        ch.h_scalars, ch.h_coeffs, ch.h_vars,
        ch.jx_scalars, ch.jx_coeffs, ch.jx_vars,
        ch.jt_scalars, ch.jt_coeffs, ch.jt_vars,
        gg, ch.target_coeffs, ch.target_coeffs - gg,
    )


def _state(ch: CompiledHomotopy, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.complex128)
    if x.shape != (ch.num_vars,):
        raise ValueError(f"expected {ch.num_vars} coordinates, got shape {x.shape}")
    z = np.empty(ch.num_vars + 2, dtype=np.complex128)
    load_state(x, z)
    return z


def _check_t(t: float) -> float:
    t = float(t)
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t={t} outside [0, 1]")
    return t


def eval_H(ch: CompiledHomotopy, x, t: float) -> np.ndarray:
    z = _state(ch, x)
    a = np.empty(ch.num_coeffs + 1, dtype=np.complex128)
    args = kernel_args(ch)
    interpolate(args[9], args[10], _check_t(t), a)
    out = np.empty(ch.num_vars, dtype=np.complex128)
    eval_exprs(ch.h_scalars, ch.h_coeffs, ch.h_vars, a, z, out)
    return out


def eval_Jx(ch: CompiledHomotopy, x, t: float) -> np.ndarray:
    n = ch.num_vars
    z = _state(ch, x)
    a = np.empty(ch.num_coeffs + 1, dtype=np.complex128)
    args = kernel_args(ch)
    interpolate(args[9], args[10], _check_t(t), a)
    out = np.empty(n * n, dtype=np.complex128)
    eval_exprs(ch.jx_scalars, ch.jx_coeffs, ch.jx_vars, a, z, out)
    return out.reshape(n, n)


def eval_Jt(ch: CompiledHomotopy, x, t: float = 0.0) -> np.ndarray:
    """dH/dt = F(x) - gamma*G(x); ``t`` is accepted for symmetry and validated."""
    _check_t(t)
    z = _state(ch, x)
    out = np.empty(ch.num_vars, dtype=np.complex128)
    eval_exprs(ch.jt_scalars, ch.jt_coeffs, ch.jt_vars, kernel_args(ch)[11], z, out)
    return out
