"""Cyclic-n and eco-n benchmark systems."""

from __future__ import annotations

import math

from ..polysys import PolynomialSystem, variables


def gen_cyclic(n: int) -> PolynomialSystem:
    """Equation k (k < n) sums the products of k cyclically consecutive
    variables; the last is x_1 ... x_n - 1."""
    if not 3 <= n <= 9:
        raise ValueError("cyclic-n needs 3 <= n <= 9")
    x = variables(n)
    eqs = []
    for k in range(1, n):
        eqs.append(sum(math.prod((x[(i + j) % n] for j in range(k)), start=1) for i in range(n)))
    eqs.append(math.prod(x, start=1) - 1)
    return PolynomialSystem(n, eqs, name=f"cyclic-{n}")


def gen_eco(n: int, form: str = "quadratic") -> PolynomialSystem:
    """Eco-n economics system.

    ``form="cubic"`` is the classical statement

        (x_k + sum_{i=1}^{n-k-1} x_i x_{i+k}) x_n - k = 0,  k = 1..n-1
        x_1 + ... + x_{n-1} + 1 = 0.

    ``form="quadratic"`` (default) uses x_{n-1} x_n = n - 1 to replace the
    cubic equations by (n-1)(x_k + sum x_i x_{i+k}) - k x_{n-1} = 0, giving
    n-1 quadratics and one linear equation with the same solution set.
    """
    if not 3 <= n <= 12:
        raise ValueError("eco-n needs 3 <= n <= 12")
    if form not in ("quadratic", "cubic"):
        raise ValueError(f"unknown eco form {form!r}")
    x = variables(n)
    eqs = []
    for k in range(1, n):
        inner = x[k - 1] + sum((x[i - 1] * x[i + k - 1] for i in range(1, n - k)), start=0 * x[0])
        if form == "cubic" or k == n - 1:
            eqs.append(inner * x[n - 1] - k)
        else:
            eqs.append((n - 1) * inner - k * x[n - 2])
    eqs.append(sum(x[: n - 1], start=0 * x[0]) + 1)
    return PolynomialSystem(n, eqs, name=f"eco-{n}")
