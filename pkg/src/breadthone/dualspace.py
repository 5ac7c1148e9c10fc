"""Multiplicity structure of a breadth-one root without linear transformations.

The dual basis ``Lambda_1..Lambda_mu`` is never materialized while computing
the multiplicity.  Instead each ``Lambda_k`` is carried as the polynomial
system ``L_k(F)`` (``Lambda_k`` applied at a moving point) and each
``Delta_k`` as ``P_k(F)``; both satisfy

    P_k = sum_{j=1}^{k-2} j/(k-1) * J_{L_{k-j}} a_{j+1},   L_k = P_k + J_F a_k.

All work happens after exchanging ``x_1`` with ``x_t``, where ``t`` is the
largest entry of the Jacobian null vector.  Indices are 0-based.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import gmpy2
import numpy as np

from .errors import BreadthNotOne, DimensionError, MultiplicityCapExceeded, ZeroMatrix
from .linalg import (
    exact_nullspace,
    exact_rank,
    is_exact,
    null_vectors,
    plu,
    rect_consistency_solve,
    singular_values,
    to_fraction_matrix,
)
from .poly import (
    Exponent,
    MonomialSpace,
    Polynomial,
    PolySystem,
    format_terms,
    grlex_key,
    jacobian_eval,
)

DEFAULT_TOL = 1e-8
DEFAULT_MAX_MU = 1024


class DiffFunctional:
    """Element of span{d^alpha}: a sparse map exponent -> coefficient."""

    __slots__ = ("nvars", "_terms")

    def __init__(self, nvars: int, terms: Mapping[Exponent, object] | None = None):
        self.nvars = nvars
        self._terms = {tuple(e): c for e, c in (terms or {}).items() if c != 0}
        for e in self._terms:
            if len(e) != nvars:
                raise DimensionError(f"exponent {e} does not have length {nvars}")

    @classmethod
    def one(cls, nvars: int) -> DiffFunctional:
        return cls(nvars, {(0,) * nvars: 1})

    @classmethod
    def d(cls, *powers: int, coeff=1) -> DiffFunctional:
        return cls(len(powers), {tuple(powers): coeff})

    @property
    def terms(self) -> Mapping[Exponent, object]:
        return self._terms

    def coefficient(self, e: Sequence[int]):
        return self._terms.get(tuple(e), 0)

    def degree(self) -> int:
        return max((sum(e) for e in self._terms), default=-1)

    def is_zero(self) -> bool:
        return not self._terms

    def __add__(self, other: DiffFunctional) -> DiffFunctional:
        out = dict(self._terms)
        for e, c in other._terms.items():
            out[e] = out.get(e, 0) + c
        return DiffFunctional(self.nvars, out)

    def __neg__(self) -> DiffFunctional:
        return DiffFunctional(self.nvars, {e: -c for e, c in self._terms.items()})

    def __sub__(self, other: DiffFunctional) -> DiffFunctional:
        return self + (-other)

    def __mul__(self, s) -> DiffFunctional:
        return DiffFunctional(self.nvars, {e: c * s for e, c in self._terms.items()})

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        if isinstance(other, DiffFunctional):
            return self.nvars == other.nvars and self._terms == other._terms
        if other == 0:
            return not self._terms
        return NotImplemented

    __hash__ = None

    def swap(self, i: int, j: int) -> DiffFunctional:
        out = {}
        for e, c in self._terms.items():
            e = list(e)
            e[i], e[j] = e[j], e[i]
            out[tuple(e)] = c
        return DiffFunctional(self.nvars, out)

    def map_coeffs(self, fn) -> DiffFunctional:
        return DiffFunctional(self.nvars, {e: fn(c) for e, c in self._terms.items()})

    def max_abs_diff(self, other: DiffFunctional) -> float:
        keys = set(self._terms) | set(other._terms)
        return max((abs(self.coefficient(e) - other.coefficient(e)) for e in keys), default=0.0)

    def to_string(self, symbol: str = "d") -> str:
        items = ((e, self._terms[e]) for e in sorted(self._terms, key=grlex_key, reverse=True))
        return format_terms(items, lambda i: f"{symbol}{i + 1}")

    def __repr__(self) -> str:
        return f"DiffFunctional({self.to_string()})"


def phi_op(lam: DiffFunctional, i: int) -> DiffFunctional:
    """Anti-differentiation: lower exponent ``i`` by one, dropping terms where it is 0."""
    out = {}
    for e, c in lam.terms.items():
        if e[i] > 0:
            out[e[:i] + (e[i] - 1,) + e[i + 1:]] = c
    return DiffFunctional(lam.nvars, out)


def psi_op(lam: DiffFunctional, i: int) -> DiffFunctional:
    """Raise exponent ``i`` on terms whose exponents vanish in coordinates ``0..i-1``."""
    out = {}
    for e, c in lam.terms.items():
        if not any(e[:i]):
            out[e[:i] + (e[i] + 1,) + e[i + 1:]] = c
    return DiffFunctional(lam.nvars, out)


# ---------------------------------------------------------------------------
# Null vector and corank
# ---------------------------------------------------------------------------

def jacobian_corank(J, tol: float = DEFAULT_TOL) -> int:
    """0, 1, or 2 (meaning "at least two / ambiguous") under the corank-one test."""
    J = np.asarray(J)
    n = J.shape[1]
    if is_exact(J):
        return min(n - exact_rank(J), 2)
    s = singular_values(J)
    if n == 1:
        return 1 if s[0] <= tol else 0
    if s[0] == 0:
        return 2
    if s[-1] > tol * s[0]:
        return 0
    if s[-2] > math.sqrt(tol) * s[0]:
        return 1
    return 2


def null_vector_normalized(J, tol: float = DEFAULT_TOL) -> tuple[int, np.ndarray]:
    """Exchange index ``t`` and ``a_2`` (null vector after ``x_1 <-> x_t``, ``a_2[0] = 1``)."""
    J = np.asarray(J)
    n = J.shape[1]
    exact = is_exact(J)
    if exact:
        J = to_fraction_matrix(J)
        basis = exact_nullspace(J)
        if len(basis) != 1:
            if n > 1 and all(v == 0 for v in J.flat):
                raise ZeroMatrix("Jacobian is zero; corank is n")
            raise BreadthNotOne(f"Jacobian corank is {len(basis)}, expected 1")
        r = basis[0]
    else:
        s = singular_values(J)
        if n > 1 and s[0] == 0:
            raise ZeroMatrix("Jacobian is zero; corank is n")
        c = jacobian_corank(J, tol)
        if c != 1:
            raise BreadthNotOne(
                "Jacobian is nonsingular (regular root)" if c == 0 else "Jacobian corank exceeds one"
            )
        r = null_vectors(J)[1]
    mags = [abs(v) for v in r]
    t = int(np.argmax(mags))
    r = r.copy()
    r[0], r[t] = r[t], r[0]
    a2 = r / r[0]
    a2[0] = Fraction(1) if exact else 1.0
    return t, a2


# ---------------------------------------------------------------------------
# Generic L_k / P_k recursion on PolySystems
# ---------------------------------------------------------------------------

def jacobian_times(L: Sequence[Polynomial], a: Sequence, xvars: Sequence[int]) -> list[Polynomial]:
    """``J_L * a`` with derivatives taken only in the variables ``xvars``.

    Entries of ``a`` may be numbers or polynomials (symbolic parameters).
    """
    out = []
    for p in L:
        acc = Polynomial.zero(p.nvars)
        for ai, v in zip(a, xvars):
            if isinstance(ai, Polynomial):
                if ai.is_zero():
                    continue
            elif ai == 0:
                continue
            if p.degree_in(v) > 0:
                acc = acc + p.diff(v) * ai
        out.append(acc)
    return out


def lk_pk_step(F: PolySystem, L_systems: Sequence[Sequence[Polynomial]], a_vecs: Sequence[Sequence],
               k: int, xvars: Sequence[int] | None = None):
    """Build ``P_k(F)`` and, when ``a_k`` is known, ``L_k(F)``.

    ``L_systems[m - 1]`` holds ``L_m`` for ``m = 1..k-1`` (``L_1 = F``) and
    ``a_vecs[m - 2]`` holds ``a_m``.  Returns ``(P_k, L_k or None)``.
    """
    if xvars is None:
        xvars = range(F.nvars)
    xvars = list(xvars)
    if len(L_systems) < k - 1 or len(a_vecs) < k - 2:
        raise DimensionError(f"need L_1..L_{k - 1} and a_2..a_{k - 1} to form P_{k}")
    nv = F.nvars
    P = [Polynomial.zero(nv) for _ in F]
    for j in range(1, k - 1):
        w = Fraction(j, k - 1)
        term = jacobian_times(L_systems[k - j - 1], a_vecs[j - 1], xvars)
        P = [p + q * w for p, q in zip(P, term)]
    P_sys = PolySystem(P, nv, F.names)
    if len(a_vecs) >= k - 1:
        JFa = jacobian_times(F, a_vecs[k - 2], xvars)
        return P_sys, PolySystem([p + q for p, q in zip(P, JFa)], nv, F.names)
    return P_sys, None


# ---------------------------------------------------------------------------
# MSB1
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MultiplicityStructure:
    """Result of MSB1.  ``a_vecs[k - 2]`` is ``a_k`` in exchanged coordinates."""

    mu: int
    t: int
    a_vecs: tuple[np.ndarray, ...]
    point: tuple
    exact: bool
    names: tuple[str, ...] = ()
    diagnostics: dict = field(default_factory=dict, compare=False)
    _space: MonomialSpace | None = field(default=None, repr=False, compare=False)
    _L: tuple = field(default=(), repr=False, compare=False)
    _P: Mapping[int, np.ndarray] = field(default_factory=dict, repr=False, compare=False)

    @property
    def nvars(self) -> int:
        return len(self.point)

    def exchanged_names(self) -> tuple[str, ...]:
        names = list(self.names)
        names[0], names[self.t] = names[self.t], names[0]
        return tuple(names)

    def L_system(self, k: int) -> PolySystem:
        """``L_k(F)`` in exchanged variables, ``1 <= k <= mu``."""
        return self._decode(self._L[k - 1])

    def P_system(self, k: int) -> PolySystem:
        """``P_k(F)`` in exchanged variables, ``3 <= k <= mu + 1``."""
        return self._decode(self._P[k])

    def _decode(self, C: np.ndarray) -> PolySystem:
        if self.exact:
            C = np.vectorize(_frac, otypes=[object])(C)
        return self._space.decode(C, self.exchanged_names())

    @property
    def Lk_systems(self) -> list[PolySystem]:
        return [self.L_system(k) for k in range(1, len(self._L) + 1)]

    @property
    def Pk_systems(self) -> dict[int, PolySystem]:
        return {k: self.P_system(k) for k in sorted(self._P)}


def _Q(num, den=1):
    if isinstance(num, Fraction):
        return gmpy2.mpq(num.numerator, num.denominator) / den
    return gmpy2.mpq(num, den)


def _frac(q) -> Fraction:
    if isinstance(q, Fraction):
        return q
    return Fraction(int(q.numerator), int(q.denominator))


class _DenseDirection:
    """Cached dense matrices of ``sum_i a_i d/dx_i`` for float/complex work."""

    def __init__(self, space: MonomialSpace, dtype):
        self.space = space
        self.dtype = dtype
        self.mats: list[np.ndarray] = []

    def push(self, a) -> None:
        self.mats.append(self.space.derivative_matrix(a, self.dtype))

    def __call__(self, idx: int, C: np.ndarray) -> np.ndarray:
        return self.mats[idx] @ C


class _SparseDirection:
    """Exact directional derivatives touching only nonzero entries of ``a``."""

    def __init__(self, space: MonomialSpace):
        self.space = space
        self.ops: list[list[tuple[np.ndarray, np.ndarray, np.ndarray]]] = []

    def push(self, a) -> None:
        ops = []
        for i, ai in enumerate(a):
            if ai == 0:
                continue
            rows, cols, fac = self.space._deriv[i]
            if len(rows):
                w = np.array([ai * int(f) for f in fac], dtype=object)
                ops.append((rows, cols, w))
        self.ops.append(ops)

    def __call__(self, idx: int, C: np.ndarray) -> np.ndarray:
        out = np.full(C.shape, _Q(0), dtype=object)
        for rows, cols, w in self.ops[idx]:
            # d/dx_i maps distinct monomials to distinct monomials: no duplicate rows
            out[rows] = out[rows] + w[:, None] * C[cols]
        return out



class LkPkChain:
    """Coefficient arrays of ``L_1, L_2, ...`` and ``P_3, P_4, ...`` over a monomial space.

    ``L[m - 1]`` holds ``L_m``; ``next_P()`` forms ``P_k`` for the next ``k``
    from ``L_1..L_{k-1}`` and ``a_2..a_{k-1}``; ``push_a(a_k)`` then closes
    ``L_k = P_k + J_F a_k``.
    """

    def __init__(self, space: MonomialSpace, CF: np.ndarray, a2, exact: bool = False, dtype=float):
        self.exact = exact
        self.zero = _Q(0) if exact else dtype(0)
        self.apply = _SparseDirection(space) if exact else _DenseDirection(space, dtype)
        self.apply.push(a2)
        self.CF = CF
        # apply(j - 2, C) multiplies C's Jacobian by a_j
        self.L: list[np.ndarray] = [CF, self.apply(0, CF)]
        self.P: dict[int, np.ndarray] = {}

    @property
    def k_next(self) -> int:
        return len(self.L) + 1

    def next_P(self) -> np.ndarray:
        k = self.k_next
        if k in self.P:
            return self.P[k]
        Pk = np.full(self.CF.shape, self.zero, dtype=self.CF.dtype)
        for j in range(1, k - 1):
            w = _Q(j, k - 1) if self.exact else j / (k - 1)
            Pk = Pk + w * self.apply(j - 1, self.L[k - j - 1])
        self.P[k] = Pk
        return Pk

    def push_a(self, ak) -> np.ndarray:
        k = self.k_next
        Pk = self.next_P()
        self.apply.push(ak)
        Lk = Pk + self.apply(k - 2, self.CF)
        self.L.append(Lk)
        return Lk

def _coeff_dtype(F: PolySystem, x: Sequence, exact: bool):
    if exact:
        return object
    if any(isinstance(v, complex) or np.iscomplexobj(v) for v in x):
        return complex
    return float


def msb1(F: PolySystem, x: Sequence, tol: float = DEFAULT_TOL, max_mu: int = DEFAULT_MAX_MU,
         exact: bool = False) -> MultiplicityStructure:
    """Multiplicity and parameters ``a_2..a_mu`` of a breadth-one root.

    A nonsingular Jacobian yields ``mu = 1``.  With ``exact=True`` the system
    and point are taken as rationals and every test is an exact zero test.
    """
    n = F.nvars
    if len(F) != n:
        raise DimensionError("msb1 needs a square system")
    if len(x) != n:
        raise DimensionError("point length does not match the system")
    dtype = _coeff_dtype(F, x, exact)
    if exact:
        x = [Fraction(v) for v in x]
        Fc = F.map_coeffs(Fraction)
    else:
        x = [dtype(v) for v in x]
        Fc = F.map_coeffs(dtype)

    J = jacobian_eval(Fc, x, dtype=object if exact else dtype)
    corank = jacobian_corank(J, tol)
    if corank == 0:
        return MultiplicityStructure(1, 0, (), tuple(x), exact, tuple(F.names),
                                     {"corank": 0})
    t, a2 = null_vector_normalized(J, tol)

    Fx = Fc.swap_vars(0, t)
    xs = list(x)
    xs[0], xs[t] = xs[t], xs[0]
    space = MonomialSpace.for_system(Fx)
    if exact:
        # gmpy2 rationals are an order of magnitude faster than Fraction here
        a2 = np.array([_Q(v) for v in a2], dtype=object)
        CF = space.encode(Fx.polys, object)
        CF = np.vectorize(_Q, otypes=[object])(CF)
        vals = np.array([_Q(v) for v in space.values(xs, dtype=object)], dtype=object)
        zero = _Q(0)
    else:
        CF = space.encode(Fx.polys, dtype)
        vals = space.values(xs, dtype=dtype)
        zero = dtype(0)

    Js = J.copy()
    Js[:, [0, t]] = Js[:, [t, 0]]
    Jt = Js[:, 1:]
    if exact:
        Jt = np.vectorize(_Q, otypes=[object])(Jt) if Jt.size else Jt
    factors = plu(Jt)

    chain = LkPkChain(space, CF, a2, exact=exact, dtype=dtype)
    a_vecs = [a2]
    while True:
        k = chain.k_next
        Pk = chain.next_P()
        delta = vals @ Pk
        c = rect_consistency_solve(factors, -delta, tol)
        if c is None:
            mu = k - 1
            break
        if k - 1 >= max_mu:
            raise MultiplicityCapExceeded(
                f"multiplicity exceeds max_mu={max_mu}; tolerance {tol} may be too loose"
            )
        ak = np.empty(n, dtype=object if exact else dtype)
        ak[0] = zero
        ak[1:] = c
        a_vecs.append(ak)
        chain.push_a(ak)
    Ls, P = chain.L, chain.P

    if exact:
        a_vecs = [np.array([_frac(v) for v in a], dtype=object) for a in a_vecs]
        delta = np.array([_frac(v) for v in delta], dtype=object)
        Jt = to_fraction_matrix(Jt) if Jt.size else Jt
    diagnostics = {"corank": 1, "final_delta": delta}
    if not exact:
        sj = singular_values(Jt)
        aug = np.column_stack([delta, Jt])
        sa = singular_values(aug)
        diagnostics.update(
            sigma_tilde=(float(sj[0]), float(sj[-1])) if len(sj) else (0.0, 0.0),
            sigma_augmented=(float(sa[0]), float(sa[-1])),
        )
    else:
        diagnostics.update(rank_tilde=exact_rank(Jt) if Jt.size else 0,
                           rank_augmented=exact_rank(np.column_stack([delta, Jt])))
    return MultiplicityStructure(mu, t, tuple(a_vecs), tuple(x), exact, tuple(F.names),
                                 diagnostics, space, tuple(Ls), P)


# ---------------------------------------------------------------------------
# Explicit dual basis
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DualBasis:
    lambdas: tuple[DiffFunctional, ...]
    exchanged: tuple[DiffFunctional, ...]
    t: int

    def __len__(self) -> int:
        return len(self.lambdas)

    def __getitem__(self, k: int) -> DiffFunctional:
        return self.lambdas[k]


def construct_dual_basis(ms: MultiplicityStructure) -> DualBasis:
    """Closed basis ``Lambda_1..Lambda_mu`` in original variable order.

    Built in exchanged coordinates by
    ``Lambda_k = Psi_1(Lambda_{k-1}) + sum_{i>=2} sum_{j=2}^{k-1} a_{k-j+1,i} Psi_i(Lambda_j)
    + sum_{i>=2} a_{k,i} d_i`` and then mapped back by ``d_1 <-> d_t``.
    """
    n = ms.nvars
    one = Fraction(1) if ms.exact else 1.0
    lams = [DiffFunctional.one(n) * one]
    if ms.mu >= 2:
        a2 = ms.a_vecs[0]
        lams.append(DiffFunctional(n, {_unit(n, i): a2[i] for i in range(n)}))
    for k in range(3, ms.mu + 1):
        lam = psi_op(lams[k - 2], 0)
        for i in range(1, n):
            for j in range(2, k):
                a = ms.a_vecs[k - j - 1][i]
                if a != 0:
                    lam = lam + psi_op(lams[j - 1], i) * a
        ak = ms.a_vecs[k - 2]
        lam = lam + DiffFunctional(n, {_unit(n, i): ak[i] for i in range(1, n)})
        lams.append(lam)
    original = tuple(l.swap(0, ms.t) for l in lams)
    return DualBasis(original, tuple(lams), ms.t)


def _unit(n: int, i: int) -> Exponent:
    e = [0] * n
    e[i] = 1
    return tuple(e)
