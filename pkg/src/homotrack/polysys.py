"""Sparse complex polynomial systems and their indexed-term compilation.

A system is stored as one sparse polynomial per equation.  For tracking, a
start/target pair is compiled into the uniform indexed-term layout: every
expression of H, dH/dx and dH/dt becomes exactly ``K`` terms

    s_k * a[j_k] * z[m_1] * ... * z[m_M]

where ``z`` is the state vector with a constant-one slot at index
``num_vars + 1`` (indices are 1-based; slot 0 is unused).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

MAX_VARS = 32


class ParseError(ValueError):
    """Malformed system or solution file."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class Monomial:
    coefficient: complex
    exponents: tuple[int, ...]

    @property
    def degree(self) -> int:
        return sum(self.exponents)


class Polynomial:
    """Sparse polynomial over the complex numbers.

    ``terms`` maps exponent tuples to nonzero complex coefficients.  Supports
    ``+ - *`` and integer powers against other polynomials and scalars, which
    is all the problem builders need.
    """

    __slots__ = ("nvars", "terms")

    def __init__(self, nvars: int, terms: dict | None = None):
        self.nvars = int(nvars)
        clean = {}
        for exps, c in (terms or {}).items():
            exps = tuple(int(e) for e in exps)
            if len(exps) != self.nvars:
                raise ValueError(
                    f"exponent vector of length {len(exps)} in a {self.nvars}-variable polynomial"
                )
            if min(exps, default=0) < 0:
                raise ValueError("negative exponent")
            c = complex(c)
            if not (math.isfinite(c.real) and math.isfinite(c.imag)):
                raise ValueError("non-finite coefficient")
            if c != 0:
                clean[exps] = clean.get(exps, 0) + c
        self.terms = {e: c for e, c in clean.items() if c != 0}

    @classmethod
    def constant(cls, nvars: int, value: complex) -> "Polynomial":
        return cls(nvars, {(0,) * nvars: value})

    @classmethod
    def variable(cls, nvars: int, index: int) -> "Polynomial":
        """The polynomial ``x_index`` (1-based)."""
        if not 1 <= index <= nvars:
            raise ValueError("variable index out of range")
        exps = [0] * nvars
        exps[index - 1] = 1
        return cls(nvars, {tuple(exps): 1.0})

    @property
    def degree(self) -> int:
        return max((sum(e) for e in self.terms), default=0)

    def monomials(self) -> list[Monomial]:
        return [Monomial(c, e) for e, c in self.terms.items()]

    def is_zero(self) -> bool:
        return not self.terms

    def _coerce(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            if other.nvars != self.nvars:
                raise ValueError("variable count mismatch")
            return other
        return Polynomial.constant(self.nvars, other)

    def __add__(self, other):
        other = self._coerce(other)
        out = dict(self.terms)
        for e, c in other.terms.items():
            out[e] = out.get(e, 0) + c
        return Polynomial(self.nvars, out)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self.nvars, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, Polynomial):
            other = complex(other)
            return Polynomial(self.nvars, {e: c * other for e, c in self.terms.items()})
        other = self._coerce(other)
        out: dict = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                out[e] = out.get(e, 0) + c1 * c2
        return Polynomial(self.nvars, out)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if k < 0:
            raise ValueError("negative power")
        out = Polynomial.constant(self.nvars, 1.0)
        for _ in range(k):
            out = out * self
        return out

    def diff(self, var: int) -> "Polynomial":
        """Partial derivative with respect to ``x_var`` (1-based)."""
        if not 1 <= var <= self.nvars:
            raise ValueError("variable index out of range")
        v = var - 1
        out = {}
        for e, c in self.terms.items():
            if e[v]:
                d = list(e)
                d[v] -= 1
                out[tuple(d)] = c * e[v]
        return Polynomial(self.nvars, out)

    def __call__(self, x) -> complex:
        x = np.asarray(x, dtype=complex)
        acc = 0j
        for e, c in self.terms.items():
            term = c
            for xi, ei in zip(x, e):
                if ei:
                    term *= xi**ei
            acc += term
        return acc

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.nvars == other.nvars and self.terms == other.terms

    def __hash__(self):
        return hash((self.nvars, frozenset(self.terms.items())))

    def __repr__(self):
        if not self.terms:
            return "0"
        parts = []
        for e, c in self.terms.items():
            xs = "*".join(
                f"x{i + 1}" + (f"^{k}" if k > 1 else "") for i, k in enumerate(e) if k
            )
            parts.append(f"({c:g})" + (f"*{xs}" if xs else ""))
        return " + ".join(parts)


def variables(nvars: int) -> list[Polynomial]:
    return [Polynomial.variable(nvars, i) for i in range(1, nvars + 1)]


@dataclass(frozen=True)
class PolynomialSystem:
    num_vars: int
    equations: tuple[Polynomial, ...]
    name: str = field(default="", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "equations", tuple(self.equations))
        for eq in self.equations:
            if eq.nvars != self.num_vars:
                raise ValueError("equation variable count differs from system")

    @property
    def num_eqs(self) -> int:
        return len(self.equations)

    @property
    def degrees(self) -> list[int]:
        return [eq.degree for eq in self.equations]

    @property
    def bezout_number(self) -> int:
        return math.prod(self.degrees)

    def is_square(self) -> bool:
        return self.num_eqs == self.num_vars

    def monomials(self) -> list[list[Monomial]]:
        return [eq.monomials() for eq in self.equations]

    def __call__(self, x) -> np.ndarray:
        return eval_system(self, x)


def eval_system(sys: PolynomialSystem, x) -> np.ndarray:
    """Direct term-by-term evaluation of every equation at ``x``."""
    x = np.asarray(x, dtype=complex)
    if x.shape != (sys.num_vars,):
        raise ValueError(f"expected a point with {sys.num_vars} coordinates, got shape {x.shape}")
    return np.array([eq(x) for eq in sys.equations], dtype=complex)


def differentiate(sys: PolynomialSystem, var: int) -> list[Polynomial]:
    """Column ``var`` of the symbolic Jacobian."""
    if not 1 <= var <= sys.num_vars:
        raise ValueError("variable index out of range")
    return [eq.diff(var) for eq in sys.equations]


def jacobian(sys: PolynomialSystem) -> list[list[Polynomial]]:
    cols = [differentiate(sys, v) for v in range(1, sys.num_vars + 1)]
    return [[cols[v][i] for v in range(sys.num_vars)] for i in range(sys.num_eqs)]


# --------------------------------------------------------------------------
# text formats

_COMMENT = re.compile(r"#.*")


def _content_lines(text: str):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _COMMENT.sub("", raw).strip()
        if line:
            yield lineno, line.split()


def _finite_float(tok: str, lineno: int) -> float:
    try:
        v = float(tok)
    except ValueError:
        raise ParseError(f"not a number: {tok!r}", lineno) from None
    if not math.isfinite(v):
        raise ParseError("non-finite coefficient", lineno)
    return v


def parse_system(text: str) -> PolynomialSystem:
    lines = _content_lines(text)
    try:
        lineno, head = next(lines)
    except StopIteration:
        raise ParseError("empty system file") from None
    if len(head) != 2:
        raise ParseError("header must be '<numVars> <numEqs>'", lineno)
    try:
        nvars, neqs = int(head[0]), int(head[1])
    except ValueError:
        raise ParseError("header must hold two integers", lineno) from None
    if nvars < 1 or neqs < 1:
        raise ParseError("variable and equation counts must be positive", lineno)

    terms: list[dict] = [{} for _ in range(neqs)]
    for lineno, tok in lines:
        if len(tok) != 3 + nvars:
            if len(tok) > 3 + nvars:
                raise ParseError("variable index out of range", lineno)
            raise ParseError(
                f"expected {3 + nvars} fields (eq re im + {nvars} exponents), got {len(tok)}",
                lineno,
            )
        try:
            eq = int(tok[0])
            exps = tuple(int(t) for t in tok[3:])
        except ValueError:
            raise ParseError("equation index and exponents must be integers", lineno) from None
        if not 1 <= eq <= neqs:
            raise ParseError(f"equation index {eq} out of range 1..{neqs}", lineno)
        if min(exps) < 0:
            raise ParseError("negative exponent", lineno)
        c = complex(_finite_float(tok[1], lineno), _finite_float(tok[2], lineno))
        bucket = terms[eq - 1]
        bucket[exps] = bucket.get(exps, 0) + c
    return PolynomialSystem(nvars, [Polynomial(nvars, t) for t in terms])


def serialize_system(sys: PolynomialSystem) -> str:
    out = [f"{sys.num_vars} {sys.num_eqs}"]
    if sys.name:
        out.insert(0, f"# {sys.name}")
    for i, eq in enumerate(sys.equations, start=1):
        for e, c in eq.terms.items():
            out.append(f"{i} {float(c.real)!r} {float(c.imag)!r} " + " ".join(map(str, e)))
    return "\n".join(out) + "\n"


def parse_solutions(text: str) -> np.ndarray:
    """Read a solution file into a ``(numSols, numVars)`` complex array."""
    lines = _content_lines(text)
    try:
        lineno, head = next(lines)
    except StopIteration:
        raise ParseError("empty solution file") from None
    if len(head) != 2:
        raise ParseError("header must be '<numVars> <numSols>'", lineno)
    nvars, nsols = int(head[0]), int(head[1])
    vals = []
    for lineno, tok in lines:
        if len(tok) != 2:
            raise ParseError("solution lines hold '<re> <im>'", lineno)
        vals.append(complex(_finite_float(tok[0], lineno), _finite_float(tok[1], lineno)))
    if len(vals) != nvars * nsols:
        raise ParseError(f"expected {nvars * nsols} coordinates, found {len(vals)}")
    return np.array(vals, dtype=complex).reshape(nsols, nvars)


def serialize_solutions(sols) -> str:
    sols = np.atleast_2d(np.asarray(sols, dtype=complex))
    nsols, nvars = sols.shape if sols.size else (0, sols.shape[-1])
    out = [f"{nvars} {nsols}"]
    for s in sols:
        out.extend(f"{float(v.real)!r} {float(v.imag)!r}" for v in s)
    return "\n".join(out) + "\n"


# --------------------------------------------------------------------------
# indexed-term compilation


class IndexedTerm(NamedTuple):
    scalar: float
    coeff_index: int
    var_indices: tuple[int, ...]


def encode_expression(
    terms: Sequence[tuple[float, int, Sequence[int]]], num_vars: int, K: int, M: int
) -> list[IndexedTerm]:
    """Encode ``[(scalar, coeffIndex, exponents), ...]`` as exactly ``K`` indexed terms.

    Each term's variables are listed by repetition, filled up to ``M`` with the
    constant-one slot ``num_vars + 1``.  Missing terms are padded with
    ``(0, 1, (1, ..., 1))``.
    """
    if len(terms) > K:
        raise ValueError(f"{len(terms)} terms exceed K={K}")
    one = num_vars + 1
    out = []
    for s, j, exps in terms:
        idx = [v + 1 for v, e in enumerate(exps) for _ in range(e)]
        if len(idx) > M:
            raise ValueError(f"term of degree {len(idx)} exceeds M={M}")
        out.append(IndexedTerm(float(s), int(j), tuple(idx + [one] * (M - len(idx)))))
    pad = IndexedTerm(0.0, 1, (1,) * M)
    out.extend([pad] * (K - len(out)))
    return out


@dataclass(frozen=True, eq=False)
class CompiledHomotopy:
    """Indexed-term tables for H = (1-t)*gamma*G + t*F and its derivatives.

    Table arrays have shapes ``(nexpr, K)`` for scalars and coefficient
    indices and ``(nexpr, K, M)`` for variable indices.  The Jacobian table
    is row-major: expression ``i * n + v`` is dH_i/dx_v.
    """

    num_vars: int
    K: int
    M: int
    h_scalars: np.ndarray
    h_coeffs: np.ndarray
    h_vars: np.ndarray
    jx_scalars: np.ndarray
    jx_coeffs: np.ndarray
    jx_vars: np.ndarray
    jt_scalars: np.ndarray
    jt_coeffs: np.ndarray
    jt_vars: np.ndarray
    start_coeffs: np.ndarray
    target_coeffs: np.ndarray
    gamma: complex

    @property
    def num_coeffs(self) -> int:
        return len(self.start_coeffs) - 1

    def coefficients(self, t: float) -> np.ndarray:
        """Interpolated coefficients (1-t)*gamma*g_j + t*f_j."""
        return (1.0 - t) * (self.gamma * self.start_coeffs) + t * self.target_coeffs

    def dt_coefficients(self) -> np.ndarray:
        return self.target_coeffs - self.gamma * self.start_coeffs

    def _table(self, which: str) -> list[list[IndexedTerm]]:
        s = getattr(self, f"{which}_scalars")
        c = getattr(self, f"{which}_coeffs")
        v = getattr(self, f"{which}_vars")
        return [
            [IndexedTerm(float(s[e, k]), int(c[e, k]), tuple(int(i) for i in v[e, k])) for k in range(self.K)]
            for e in range(s.shape[0])
        ]

    @property
    def terms_h(self):
        return self._table("h")

    @property
    def terms_jx(self):
        return self._table("jx")

    @property
    def terms_jt(self):
        return self._table("jt")


def _pack(exprs: list[list[IndexedTerm]], K: int, M: int):
    n = len(exprs)
    scal = np.zeros((n, K))
    coef = np.ones((n, K), dtype=np.int64)
    var = np.ones((n, K, M), dtype=np.int64)
    for e, terms in enumerate(exprs):
        for k, term in enumerate(terms):
            scal[e, k] = term.scalar
            coef[e, k] = term.coeff_index
            var[e, k, :] = term.var_indices
    return scal, coef, var


def compile_homotopy(
    start: PolynomialSystem, target: PolynomialSystem, gamma: complex
) -> CompiledHomotopy:
    """Compile the straight-line homotopy between ``start`` and ``target``.

    Monomials present in either system share one coefficient index per
    equation, with a zero coefficient on the side where they are absent.
    """
    n = target.num_vars
    if start.num_vars != n:
        raise ValueError("start and target have different variable counts")
    if not (start.is_square() and target.is_square()):
        raise ValueError("homotopy systems must be square")
    if n > MAX_VARS:
        raise ValueError(f"at most {MAX_VARS} unknowns are supported, got {n}")
    gamma = complex(gamma)
    if gamma == 0:
        raise ValueError("gamma must be nonzero")

    g_coef = [0j]
    f_coef = [0j]
    raw_h: list[list] = []
    for g_eq, f_eq in zip(start.equations, target.equations):
        support = list(f_eq.terms)
        support += [e for e in g_eq.terms if e not in f_eq.terms]
        row = []
        for exps in support:
            j = len(g_coef)
            g_coef.append(g_eq.terms.get(exps, 0j))
            f_coef.append(f_eq.terms.get(exps, 0j))
            row.append((j, exps))
        raw_h.append(row)

    h_terms = [[(1.0, j, e) for j, e in row] for row in raw_h]
    jx_terms = []
    for row in raw_h:
        for v in range(n):
            entry = []
            for j, e in row:
                if e[v]:
                    d = list(e)
                    d[v] -= 1
                    entry.append((float(e[v]), j, d))
            jx_terms.append(entry)

    K = max(1, max(len(x) for x in h_terms + jx_terms))
    M = max(1, max((sum(e) for row in raw_h for _, e in row), default=1))

    enc = lambda exprs: _pack([encode_expression(x, n, K, M) for x in exprs], K, M)  # noqa: E731
    h = enc(h_terms)
    jx = enc(jx_terms)
    jt = tuple(a.copy() for a in h)
    return CompiledHomotopy(
        n, K, M, *h, *jx, *jt,
        start_coeffs=np.array(g_coef, dtype=complex),
        target_coeffs=np.array(f_coef, dtype=complex),
        gamma=gamma,
    )


__all__ = [
    "MAX_VARS",
    "ParseError",
    "Monomial",
    "Polynomial",
    "PolynomialSystem",
    "IndexedTerm",
    "CompiledHomotopy",
    "variables",
    "eval_system",
    "differentiate",
    "jacobian",
    "parse_system",
    "serialize_system",
    "parse_solutions",
    "serialize_solutions",
    "encode_expression",
    "compile_homotopy",
]
