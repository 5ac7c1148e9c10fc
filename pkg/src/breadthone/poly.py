"""Sparse multivariate polynomials over an abstract coefficient field.

Coefficients are whatever supports ``+ - * /`` and ``==``: ``Fraction`` for
exact work, ``float``/``complex`` for the numeric pipeline, and symbolic
:class:`Polynomial` values where a polynomial's coefficients are themselves
unknowns (the deflated system).  Exponents are tuples of naturals, one per
variable.
"""

from __future__ import annotations

import re
from fractions import Fraction
from math import comb
from typing import Callable, Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import DimensionError, ParseError

Exponent = tuple[int, ...]


def grlex_key(e: Exponent):
    return (sum(e), e)


class Polynomial:
    """Immutable sparse polynomial ``{exponent: coefficient}`` in ``nvars`` variables."""

    __slots__ = ("nvars", "_terms")

    def __init__(self, nvars: int, terms: Mapping[Exponent, object] | None = None):
        self.nvars = nvars
        clean: dict[Exponent, object] = {}
        if terms:
            for e, c in terms.items():
                e = tuple(e)
                if len(e) != nvars:
                    raise DimensionError(f"exponent {e} does not have length {nvars}")
                if c != 0:
                    clean[e] = c
        self._terms = clean

    # -- constructors -------------------------------------------------------

    @classmethod
    def zero(cls, nvars: int) -> Polynomial:
        return cls(nvars)

    @classmethod
    def constant(cls, c, nvars: int) -> Polynomial:
        return cls(nvars, {(0,) * nvars: c})

    @classmethod
    def variable(cls, i: int, nvars: int, coeff=1) -> Polynomial:
        e = [0] * nvars
        e[i] = 1
        return cls(nvars, {tuple(e): coeff})

    @classmethod
    def monomial(cls, e: Sequence[int], coeff=1) -> Polynomial:
        return cls(len(e), {tuple(e): coeff})

    @classmethod
    def _raw(cls, nvars: int, terms: dict) -> Polynomial:
        # caller guarantees no zero coefficients and correct exponent lengths
        p = object.__new__(cls)
        p.nvars = nvars
        p._terms = terms
        return p

    # -- inspection ---------------------------------------------------------

    @property
    def terms(self) -> Mapping[Exponent, object]:
        return self._terms

    def __len__(self) -> int:
        return len(self._terms)

    def __iter__(self) -> Iterator[tuple[Exponent, object]]:
        for e in sorted(self._terms, key=grlex_key, reverse=True):
            yield e, self._terms[e]

    def is_zero(self) -> bool:
        return not self._terms

    def coefficient(self, e: Sequence[int]):
        return self._terms.get(tuple(e), 0)

    def degree(self) -> int:
        return max((sum(e) for e in self._terms), default=-1)

    def degree_in(self, i: int) -> int:
        return max((e[i] for e in self._terms), default=-1)

    def variables(self) -> set[int]:
        return {i for e in self._terms for i, k in enumerate(e) if k}

    # -- arithmetic ---------------------------------------------------------

    def _check(self, other: Polynomial) -> None:
        if other.nvars != self.nvars:
            raise DimensionError(f"nvars mismatch: {self.nvars} vs {other.nvars}")

    def __add__(self, other) -> Polynomial:
        if not isinstance(other, Polynomial):
            other = Polynomial.constant(other, self.nvars)
        self._check(other)
        out = dict(self._terms)
        for e, c in other._terms.items():
            s = out.get(e, 0) + c
            if s != 0:
                out[e] = s
            else:
                out.pop(e, None)
        return Polynomial._raw(self.nvars, out)

    __radd__ = __add__

    def __neg__(self) -> Polynomial:
        return Polynomial._raw(self.nvars, {e: -c for e, c in self._terms.items()})

    def __sub__(self, other) -> Polynomial:
        return self + (-other)

    def __rsub__(self, other) -> Polynomial:
        return (-self) + other

    def __mul__(self, other) -> Polynomial:
        if not isinstance(other, Polynomial):
            if other == 0:
                return Polynomial(self.nvars)
            out = {}
            for e, c in self._terms.items():
                v = c * other
                if v != 0:
                    out[e] = v
            return Polynomial._raw(self.nvars, out)
        self._check(other)
        out: dict[Exponent, object] = {}
        for e1, c1 in self._terms.items():
            for e2, c2 in other._terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                out[e] = out.get(e, 0) + c1 * c2
        return Polynomial(self.nvars, out)

    def __rmul__(self, other) -> Polynomial:
        return self.__mul__(other)

    def __truediv__(self, other) -> Polynomial:
        if isinstance(other, Polynomial):
            raise TypeError("polynomial division is not supported")
        return Polynomial(self.nvars, {e: c / other for e, c in self._terms.items()})

    def __pow__(self, k: int) -> Polynomial:
        if k < 0:
            raise ValueError("negative power")
        out = Polynomial.constant(1, self.nvars)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def __eq__(self, other) -> bool:
        if isinstance(other, Polynomial):
            return self.nvars == other.nvars and self._terms == other._terms
        if other == 0:
            return not self._terms
        return NotImplemented

    def __ne__(self, other) -> bool:
        eq = self.__eq__(other)
        return eq if eq is NotImplemented else not eq

    __hash__ = None

    # -- calculus and evaluation -------------------------------------------

    def diff(self, i: int) -> Polynomial:
        if not 0 <= i < self.nvars:
            raise IndexError(f"variable index {i} out of range for {self.nvars} variables")
        out = {}
        for e, c in self._terms.items():
            k = e[i]
            if k:
                ne = e[:i] + (k - 1,) + e[i + 1:]
                out[ne] = c * k
        return Polynomial._raw(self.nvars, out)

    def __call__(self, x: Sequence):
        return eval_poly(self, x)

    # -- coefficient and variable maps ---------------------------------------

    def map_coeffs(self, fn: Callable) -> Polynomial:
        return Polynomial(self.nvars, {e: fn(c) for e, c in self._terms.items()})

    def permute(self, perm: Sequence[int]) -> Polynomial:
        """Rename variables: new variable ``perm[i]`` takes the role of old variable ``i``."""
        n = self.nvars
        out = {}
        for e, c in self._terms.items():
            ne = [0] * n
            for i, k in enumerate(e):
                ne[perm[i]] = k
            out[tuple(ne)] = c
        return Polynomial._raw(n, out)

    def swap(self, i: int, j: int) -> Polynomial:
        perm = list(range(self.nvars))
        perm[i], perm[j] = j, i
        return self.permute(perm)

    def embed(self, nvars: int, positions: Sequence[int] | None = None) -> Polynomial:
        """Lift into ``nvars`` variables; old variable ``i`` becomes ``positions[i]``."""
        if positions is None:
            positions = range(self.nvars)
        out = {}
        for e, c in self._terms.items():
            ne = [0] * nvars
            for i, k in zip(positions, e):
                ne[i] = k
            out[tuple(ne)] = c
        return Polynomial._raw(nvars, out)

    def to_string(self, names: Sequence[str] | None = None) -> str:
        if names is None:
            names = [f"x{i + 1}" for i in range(self.nvars)]
        return format_terms(self, lambda i: names[i])

    def __repr__(self) -> str:
        return f"Polynomial({self.to_string()})"


def _is_negative(c) -> bool:
    try:
        return c < 0
    except TypeError:
        return False


def format_terms(items: Iterable[tuple[Exponent, object]], symbol: Callable[[int], str]) -> str:
    """Render ``(exponent, coefficient)`` pairs as ``c*s1^2*s2 - ...``."""
    out = ""
    for e, c in items:
        neg = _is_negative(c)
        mag = -c if neg else c
        mono = "*".join(symbol(i) if k == 1 else f"{symbol(i)}^{k}" for i, k in enumerate(e) if k)
        if isinstance(mag, Fraction):
            cs = str(mag) if mag.denominator == 1 else f"({mag})"
        elif isinstance(mag, complex):
            cs = f"({mag})"
        else:
            cs = str(mag)
        if not mono:
            body = cs
        elif mag == 1:
            body = mono
        else:
            body = f"{cs}*{mono}"
        if not out:
            out = "-" + body if neg else body
        else:
            out += (" - " if neg else " + ") + body
    return out or "0"


def eval_poly(p: Polynomial, x: Sequence):
    """Evaluate by direct term summation with cached variable powers."""
    if len(x) != p.nvars:
        raise DimensionError(f"point has length {len(x)}, polynomial has {p.nvars} variables")
    cache: dict[tuple[int, int], object] = {}
    total = 0
    for e, c in p.terms.items():
        v = c
        for i, k in enumerate(e):
            if k:
                key = (i, k)
                pw = cache.get(key)
                if pw is None:
                    pw = x[i] ** k
                    cache[key] = pw
                v = v * pw
        total = total + v
    return total


def diff_poly(p: Polynomial, i: int) -> Polynomial:
    return p.diff(i)


class PolySystem(Sequence[Polynomial]):
    """Ordered list of polynomials sharing one variable set."""

    __slots__ = ("polys", "nvars", "names")

    def __init__(self, polys: Iterable[Polynomial], nvars: int | None = None,
                 names: Sequence[str] | None = None):
        polys = tuple(polys)
        if nvars is None:
            if not polys:
                raise DimensionError("cannot infer nvars of an empty system")
            nvars = polys[0].nvars
        for p in polys:
            if p.nvars != nvars:
                raise DimensionError("all polynomials of a system must share nvars")
        self.polys = polys
        self.nvars = nvars
        self.names = tuple(names) if names is not None else tuple(f"x{i + 1}" for i in range(nvars))

    def __getitem__(self, i):
        return self.polys[i]

    def __len__(self) -> int:
        return len(self.polys)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PolySystem):
            return NotImplemented
        return self.nvars == other.nvars and self.polys == other.polys

    __hash__ = None

    @property
    def is_square(self) -> bool:
        return len(self.polys) == self.nvars

    def evaluate(self, x: Sequence) -> list:
        return [eval_poly(p, x) for p in self.polys]

    def jacobian(self) -> list[list[Polynomial]]:
        return [[p.diff(j) for j in range(self.nvars)] for p in self.polys]

    def map_coeffs(self, fn: Callable) -> PolySystem:
        return PolySystem([p.map_coeffs(fn) for p in self.polys], self.nvars, self.names)

    def swap_vars(self, i: int, j: int) -> PolySystem:
        names = list(self.names)
        names[i], names[j] = names[j], names[i]
        return PolySystem([p.swap(i, j) for p in self.polys], self.nvars, names)

    def swap_polys(self, i: int, j: int) -> PolySystem:
        polys = list(self.polys)
        polys[i], polys[j] = polys[j], polys[i]
        return PolySystem(polys, self.nvars, self.names)

    def to_float(self) -> PolySystem:
        return self.map_coeffs(float)

    def to_text(self) -> str:
        lines = ["vars: " + " ".join(self.names)]
        lines += ["f: " + p.to_string(self.names) for p in self.polys]
        return "\n".join(lines) + "\n"

    def __repr__(self) -> str:
        body = ", ".join(p.to_string(self.names) for p in self.polys)
        return f"PolySystem([{body}])"


def jacobian_eval(F: PolySystem, x: Sequence, dtype=None) -> np.ndarray:
    """Numeric (or exact, with ``dtype=object``) Jacobian of ``F`` at ``x``."""
    if len(x) != F.nvars:
        raise DimensionError(f"point has length {len(x)}, system has {F.nvars} variables")
    if dtype is None:
        dtype = object if any(isinstance(v, Fraction) for v in x) else np.result_type(*[np.asarray(v) for v in x], float)
    J = np.zeros((len(F), F.nvars), dtype=dtype)
    for i, p in enumerate(F.polys):
        for j in range(F.nvars):
            J[i, j] = eval_poly(p.diff(j), x) if p.degree_in(j) > 0 else 0
    return J


def apply_functional(functional, f: Polynomial, point: Sequence):
    """Apply ``sum_a c_a d^a`` (normalized derivatives at ``point``) to ``f``.

    ``d^a(x^b)`` at ``p`` equals ``prod_i C(b_i, a_i) p_i^(b_i - a_i)``, which is
    the Taylor coefficient of ``y^a`` in ``f(p + y)``.
    """
    if functional.nvars != f.nvars or len(point) != f.nvars:
        raise DimensionError("functional, polynomial and point must share nvars")
    total = 0
    for alpha, lam in functional.terms.items():
        acc = 0
        for beta, c in f.terms.items():
            v = c
            for a, b, p in zip(alpha, beta, point):
                if a > b:
                    v = 0
                    break
                if a or b:
                    v = v * comb(b, a)
                    if b > a:
                        v = v * p ** (b - a)
            acc = acc + v
        total = total + lam * acc
    return total


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?(?:\s*/\s*\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*^()]))"
)


def _number(text: str) -> Fraction:
    if "/" in text:
        p, q = text.split("/")
        if q.strip() == "0":
            raise ZeroDivisionError
        return Fraction(p.strip()) / Fraction(q.strip())
    return Fraction(text)


class _ExprParser:
    def __init__(self, text: str, names: dict[str, int], nvars: int, line: int, offset: int):
        self.text = text
        self.names = names
        self.nvars = nvars
        self.line = line
        self.offset = offset
        self.tokens: list[tuple[str, str, int]] = []
        pos = 0
        while pos < len(text):
            if text[pos:].strip() == "":
                break
            m = _TOKEN.match(text, pos)
            if not m or m.end() == pos:
                col = pos + len(text[pos:]) - len(text[pos:].lstrip())
                self.error(f"unexpected character {text[col]!r}", col)
            kind = m.lastgroup
            self.tokens.append((kind, m.group(kind), m.start(kind)))
            pos = m.end()
        self.i = 0

    def error(self, msg: str, col: int | None = None):
        if col is None:
            col = self.tokens[self.i][2] if self.i < len(self.tokens) else len(self.text)
        raise ParseError(msg, self.line, self.offset + col + 1)

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def take(self):
        tok = self.peek()
        self.i += 1
        return tok

    def parse(self) -> Polynomial:
        if not self.tokens:
            self.error("empty expression")
        p = self.expr()
        if self.peek() is not None:
            tok = self.peek()
            if tok[0] in ("num", "name") or tok[1] == "(":
                self.error("implicit multiplication is not allowed; use '*'")
            self.error(f"unexpected token {tok[1]!r}")
        return p

    def expr(self) -> Polynomial:
        p = self.term()
        while (tok := self.peek()) is not None and tok[1] in "+-" and tok[0] == "op":
            self.take()
            q = self.term()
            p = p + q if tok[1] == "+" else p - q
        return p

    def term(self) -> Polynomial:
        p = self.unary()
        while (tok := self.peek()) is not None and tok[1] == "*":
            self.take()
            p = p * self.unary()
        return p

    def unary(self) -> Polynomial:
        tok = self.peek()
        if tok is not None and tok[0] == "op" and tok[1] in "+-":
            self.take()
            p = self.unary()
            return -p if tok[1] == "-" else p
        return self.power()

    def power(self) -> Polynomial:
        base = self.atom()
        tok = self.peek()
        if tok is not None and tok[1] == "^":
            self.take()
            exp = self.take()
            if exp is None or exp[0] != "num" or not exp[1].isdigit():
                self.error("exponent must be a non-negative integer literal",
                           exp[2] if exp else None)
            return base ** int(exp[1])
        return base

    def atom(self) -> Polynomial:
        tok = self.take()
        if tok is None:
            self.error("unexpected end of expression")
        kind, val, col = tok
        if kind == "num":
            try:
                return Polynomial.constant(_number(val), self.nvars)
            except ZeroDivisionError:
                self.error("division by zero in rational literal", col)
        if kind == "name":
            if val not in self.names:
                self.error(f"undeclared variable {val!r}", col)
            return Polynomial.variable(self.names[val], self.nvars, Fraction(1))
        if val == "(":
            p = self.expr()
            close = self.take()
            if close is None or close[1] != ")":
                self.error("expected ')'", close[2] if close else None)
            return p
        self.error(f"unexpected token {val!r}", col)


def parse_polynomial(text: str, names: Sequence[str]) -> Polynomial:
    index = {n: i for i, n in enumerate(names)}
    return _ExprParser(text, index, len(names), 1, 0).parse()


def parse_system(text: str) -> PolySystem:
    """Parse the ``vars:`` / ``f:`` text format into an exact rational system."""
    names: list[str] | None = None
    polys: list[Polynomial] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        head, sep, body = line.partition(":")
        key = head.strip()
        offset = len(head) + 1
        if not sep:
            raise ParseError("expected 'vars:' or 'f:'", lineno, 1)
        if names is None:
            if key != "vars":
                raise ParseError("first line must declare 'vars:'", lineno, 1)
            names = body.split()
            if not names:
                raise ParseError("no variables declared", lineno, offset + 1)
            for n in names:
                if not re.fullmatch(r"[A-Za-z_][A-Za-z_0-9]*", n):
                    raise ParseError(f"invalid variable name {n!r}", lineno, offset + body.index(n) + 1)
            if len(set(names)) != len(names):
                raise ParseError("duplicate variable name", lineno, offset + 1)
            continue
        if key != "f":
            raise ParseError(f"unknown directive {key!r}", lineno, 1)
        index = {n: i for i, n in enumerate(names)}
        polys.append(_ExprParser(body, index, len(names), lineno, offset).parse())
    if names is None:
        raise ParseError("missing 'vars:' line", 1, 1)
    return PolySystem(polys, len(names), names)


# ---------------------------------------------------------------------------
# Compiled monomial space
# ---------------------------------------------------------------------------

class MonomialSpace:
    """Finite monomial basis closed under differentiation.

    The basis is the downward closure of a support set, so every partial
    derivative of a polynomial supported there stays inside it.  Polynomial
    systems become coefficient matrices of shape ``(len(space), m)`` and a
    directional derivative ``sum_i a_i d/dx_i`` becomes one dense matrix.
    """

    def __init__(self, support: Iterable[Exponent], nvars: int):
        seen: set[Exponent] = set()
        stack = [tuple(e) for e in support]
        while stack:
            e = stack.pop()
            if e in seen:
                continue
            seen.add(e)
            for i, k in enumerate(e):
                if k:
                    stack.append(e[:i] + (k - 1,) + e[i + 1:])
        seen.add((0,) * nvars)
        self.nvars = nvars
        self.exponents: list[Exponent] = sorted(seen, key=grlex_key)
        self.index = {e: k for k, e in enumerate(self.exponents)}
        self.exp_array = np.array(self.exponents, dtype=np.int64).reshape(len(self.exponents), nvars)
        N = len(self.exponents)
        # sparse description of each d/dx_i: (rows, cols, factors)
        self._deriv = []
        for i in range(nvars):
            rows, cols, fac = [], [], []
            for col, e in enumerate(self.exponents):
                if e[i]:
                    rows.append(self.index[e[:i] + (e[i] - 1,) + e[i + 1:]])
                    cols.append(col)
                    fac.append(e[i])
            self._deriv.append((np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64),
                                np.array(fac, dtype=np.int64)))
        self.size = N

    @classmethod
    def for_system(cls, F: PolySystem) -> MonomialSpace:
        return cls({e for p in F.polys for e in p.terms}, F.nvars)

    def __len__(self) -> int:
        return self.size

    def encode(self, F: Sequence[Polynomial], dtype=float) -> np.ndarray:
        C = np.zeros((self.size, len(F)), dtype=dtype)
        if dtype is object:
            C[:] = Fraction(0)
        for j, p in enumerate(F):
            for e, c in p.terms.items():
                C[self.index[e], j] = c
        return C

    def decode(self, C: np.ndarray, names: Sequence[str] | None = None) -> PolySystem:
        polys = []
        for j in range(C.shape[1]):
            terms = {self.exponents[k]: C[k, j] for k in range(self.size) if C[k, j] != 0}
            polys.append(Polynomial(self.nvars, terms))
        return PolySystem(polys, self.nvars, names)

    def derivative_matrix(self, direction: Sequence, dtype=float) -> np.ndarray:
        """Matrix of ``sum_i direction[i] * d/dx_i`` acting on coefficient columns."""
        D = np.zeros((self.size, self.size), dtype=dtype)
        if dtype is object:
            D[:] = Fraction(0)
        for i, a in enumerate(direction):
            if a == 0:
                continue
            rows, cols, fac = self._deriv[i]
            for r, c, f in zip(rows.tolist(), cols.tolist(), fac.tolist()):
                D[r, c] = D[r, c] + a * f
        return D

    def values(self, x: Sequence, dtype=None) -> np.ndarray:
        """Row vector of all basis monomials evaluated at ``x``."""
        if dtype is object:
            out = np.empty(self.size, dtype=object)
            for k, e in enumerate(self.exponents):
                v = Fraction(1)
                for xi, ei in zip(x, e):
                    if ei:
                        v = v * xi ** ei
                out[k] = v
            return out
        xa = np.asarray(x, dtype=dtype if dtype is not None else None)
        if xa.dtype.kind not in "fc":
            xa = xa.astype(float)
        return np.prod(xa[None, :] ** self.exp_array, axis=1)


class PolyBatch:
    """Many sparse polynomials flattened into padded term tables.

    Term ``t`` belongs to polynomial ``owner[t]``; its monomial is
    ``prod_k x[var[t, k]] ** exp[t, k]`` (padding slots have exponent 0).
    Coefficients are kept as given (usually ``Fraction``) so that interval
    code can enclose them; ``coeff`` holds the rounded binary64 values.
    """

    def __init__(self, polys: Sequence[Polynomial], nvars: int):
        owner, var_rows, exp_rows, coeffs = [], [], [], []
        width = 1
        for r, p in enumerate(polys):
            if p.nvars != nvars:
                raise DimensionError("all polynomials of a batch must share nvars")
            for e, c in p.terms.items():
                nz = [(i, k) for i, k in enumerate(e) if k]
                width = max(width, len(nz))
                owner.append(r)
                var_rows.append([i for i, _ in nz])
                exp_rows.append([k for _, k in nz])
                coeffs.append(c)
        T = len(owner)
        self.npolys = len(polys)
        self.nvars = nvars
        self.owner = np.array(owner, dtype=np.int64)
        self.var = np.zeros((T, width), dtype=np.int64)
        self.exp = np.zeros((T, width), dtype=np.int64)
        for t, (vs, ks) in enumerate(zip(var_rows, exp_rows)):
            self.var[t, :len(vs)] = vs
            self.exp[t, :len(ks)] = ks
        self.exact_coeffs = coeffs
        self.coeff = np.array([complex(c) if isinstance(c, complex) else float(c) for c in coeffs])
        self.max_exp = int(self.exp.max()) if T else 0

    def __len__(self) -> int:
        return self.npolys

    def evaluate(self, x) -> np.ndarray:
        x = np.asarray(x)
        if x.dtype.kind not in "fc":
            x = x.astype(float)
        if len(x) != self.nvars:
            raise DimensionError(f"point has length {len(x)}, batch has {self.nvars} variables")
        mono = np.prod(x[self.var] ** self.exp, axis=1) * self.coeff
        out = np.zeros(self.npolys, dtype=mono.dtype)
        np.add.at(out, self.owner, mono)
        return out
