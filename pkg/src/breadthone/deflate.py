"""Pivot selection and the parameterized deflated system ``G(x, b, a)``.

After exchanging ``x_1 <-> x_col`` and ``f_1 <-> f_row`` the system is

    F_1 = F - (b_0 + b_1 x_1 + ... + b_{mu-2} x_1^{mu-2}/(mu-2)!) e_1
    F_k = L_k(F_1),  k = 2..mu

with ``a_2 = (1, a_{2,2..n})`` and ``a_k = (0, a_{k,2..n})`` as unknowns, for
``mu * n`` equations in ``mu * n`` unknowns.  Variable layout is
``[x (n) | b (mu-1) | a_2 free (n-1) | ... | a_mu free (n-1)]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import factorial
from typing import Sequence

import numpy as np

from .dualspace import DEFAULT_TOL, jacobian_corank, jacobian_times, lk_pk_step
from .errors import BreadthNotOne, DimensionError
from .linalg import exact_nullspace, is_exact, null_vectors, singular_values, to_fraction_matrix
from .poly import Polynomial, PolyBatch, PolySystem, eval_poly


@dataclass(frozen=True)
class PivotRecord:
    """Perturbed variable ``col`` and perturbed equation ``row`` (0-based)."""

    col: int
    row: int


def select_pivots(Jx, tol: float = DEFAULT_TOL) -> PivotRecord:
    """Largest entries of the right and left null vectors of a corank-one Jacobian."""
    J = np.asarray(Jx)
    n = J.shape[0]
    if J.shape != (n, n):
        raise DimensionError("select_pivots needs a square Jacobian")
    if is_exact(J):
        J = to_fraction_matrix(J)
        right = exact_nullspace(J)
        left = exact_nullspace(J.T)
        if len(right) != 1:
            raise BreadthNotOne(f"Jacobian corank is {len(right)}, expected 1")
        r, l = right[0], left[0]
    else:
        if jacobian_corank(J, tol) != 1:
            raise BreadthNotOne("Jacobian does not have corank one")
        _, r, l = null_vectors(J)
    col = int(np.argmax([abs(v) for v in r]))
    row = int(np.argmax([abs(v) for v in l]))
    if n > 1 and not is_exact(J):
        Js = J.copy()
        Js[:, [0, col]] = Js[:, [col, 0]]
        Js[[0, row]] = Js[[row, 0]]
        s_block = singular_values(Js[1:, 1:])
        if s_block[-1] <= tol * singular_values(J)[0]:
            raise BreadthNotOne("no pivot pair leaves a nonsingular trailing block")
    return PivotRecord(col, row)


@dataclass
class DeflatedSystem:
    G: PolySystem
    n: int
    mu: int
    pivot: PivotRecord
    names: tuple[str, ...]
    # dGdx[r][j] = dG_r/dx_j
    dGdx: list[list[Polynomial]] = field(repr=False)
    _values: PolyBatch = field(repr=False)
    _entries: PolyBatch = field(repr=False)
    _entry_pos: np.ndarray = field(repr=False)

    # -- layout ---------------------------------------------------------------

    @property
    def nvars(self) -> int:
        return self.mu * self.n

    def x_slice(self) -> slice:
        return slice(0, self.n)

    def b_slice(self) -> slice:
        return slice(self.n, self.n + self.mu - 1)

    def a_slice(self, k: int | None = None) -> slice:
        """Free part of ``a_k`` (``2 <= k <= mu``), or of all ``a``'s."""
        start = self.n + self.mu - 1
        if k is None:
            return slice(start, self.nvars)
        lo = start + (k - 2) * (self.n - 1)
        return slice(lo, lo + self.n - 1)

    def a_index(self, k: int, j: int) -> int:
        """Column of ``a_{k,j}`` for ``2 <= k <= mu`` and ``1 <= j <= n-1`` (0-based ``j``)."""
        return self.a_slice(k).start + j - 1

    def b_index(self, nu: int) -> int:
        return self.n + nu

    def pack(self, x: Sequence, b: Sequence | None = None, a_vecs: Sequence | None = None,
             exchanged: bool = False) -> np.ndarray:
        """Assemble ``z`` from ``x`` (original order unless ``exchanged``), ``b`` and ``a_2..a_mu``."""
        x = list(x)
        if not exchanged:
            x[0], x[self.pivot.col] = x[self.pivot.col], x[0]
        b = list(b) if b is not None else [0.0] * (self.mu - 1)
        a = []
        for k in range(2, self.mu + 1):
            ak = a_vecs[k - 2] if a_vecs is not None else [0.0] * self.n
            a.extend(list(ak)[1:])
        return np.array(x + b + a, dtype=np.result_type(*[np.asarray(v) for v in x + b + a], float))

    def unpack_x(self, z: Sequence) -> list:
        """The ``x`` block of ``z`` in original variable order."""
        x = list(z[: self.n])
        x[0], x[self.pivot.col] = x[self.pivot.col], x[0]
        return x

    def smoothed_system(self, b: Sequence) -> PolySystem:
        """``F_0(x) = F_1(x, b)`` in exchanged coordinates for fixed ``b``."""
        n = self.n
        polys = []
        for p in self.G.polys[:n]:
            terms: dict = {}
            for e, c in p.terms.items():
                v = c
                for nu, k in enumerate(e[n:n + self.mu - 1]):
                    if k:
                        v = v * b[nu] ** k
                if any(e[n + self.mu - 1:]):
                    raise DimensionError("F_1 unexpectedly depends on a-parameters")
                key = e[:n]
                terms[key] = terms.get(key, 0) + v
            polys.append(Polynomial(n, terms))
        return PolySystem(polys, n, self.names[:n])

    # -- evaluation -------------------------------------------------------------

    def evaluate(self, z) -> np.ndarray:
        return self._values.evaluate(z)

    def jacobian(self, z) -> np.ndarray:
        vals = self._entries.evaluate(z)
        n, mu = self.n, self.mu
        JX = np.zeros((mu * n, n), dtype=vals.dtype)
        Bc = np.zeros((mu * n, mu - 1), dtype=vals.dtype)
        flat = np.zeros(mu * n * n + mu * n * (mu - 1), dtype=vals.dtype)
        flat[self._entry_pos] = vals
        JX[:] = flat[: mu * n * n].reshape(mu * n, n)
        Bc[:] = flat[mu * n * n:].reshape(mu * n, mu - 1)
        return assemble_jacobian(JX, Bc, n, mu)


def assemble_jacobian(JX, Bc, n: int, mu: int, zero=0.0):
    """Block Jacobian of ``G`` from its ``x``-derivatives and ``b``-columns.

    ``dF_k/da_{i,j} = dF_{k-i+1}/dx_j`` fills the parameter columns, so only
    ``JX`` (``mu*n x n``) and ``Bc`` (``mu*n x (mu-1)``) are evaluated.
    Works on any array type supporting slicing, including object arrays.
    """
    N = mu * n
    J = np.empty((N, N), dtype=np.asarray(JX).dtype)
    J[...] = zero
    J[:, :n] = JX
    J[:, n:n + mu - 1] = Bc
    base = n + mu - 1
    for k in range(2, mu + 1):
        rows = slice((k - 1) * n, k * n)
        for i in range(2, k + 1):
            src = slice((k - i) * n, (k - i + 1) * n)
            col = base + (i - 2) * (n - 1)
            J[rows, col:col + n - 1] = JX[src, 1:]
    return J


def build_deflated_system(F: PolySystem, mu: int, pivot: PivotRecord) -> DeflatedSystem:
    """Materialize ``G`` as exact polynomials in the ``mu * n`` extended variables."""
    n = F.nvars
    if len(F) != n:
        raise DimensionError("deflation needs a square system")
    if mu < 2:
        raise ValueError("mu < 2: the root is regular, verify F directly")
    if not (0 <= pivot.col < n and 0 <= pivot.row < n):
        raise DimensionError("pivot out of range")
    V = mu * n
    Fs = F.swap_vars(0, pivot.col).swap_polys(0, pivot.row)
    xnames = list(Fs.names)
    bnames = [f"b{nu}" for nu in range(mu - 1)]
    anames = [f"a{k}_{j + 1}" for k in range(2, mu + 1) for j in range(1, n)]
    names = tuple(xnames + bnames + anames)

    def var(i: int) -> Polynomial:
        return Polynomial.variable(i, V, Fraction(1))

    F1 = [p.embed(V) for p in Fs.polys]
    smoothing = Polynomial.zero(V)
    for nu in range(mu - 1):
        smoothing = smoothing + var(n + nu) * var(0) ** nu * Fraction(1, factorial(nu))
    F1[0] = F1[0] - smoothing
    F1sys = PolySystem(F1, V, names)

    a_vecs = []
    for k in range(2, mu + 1):
        lead = Polynomial.constant(Fraction(1 if k == 2 else 0), V)
        a_vecs.append([lead] + [var(n + mu - 1 + (k - 2) * (n - 1) + j - 1) for j in range(1, n)])
    xvars = range(n)
    Ls = [F1, jacobian_times(F1, a_vecs[0], xvars)]
    for k in range(3, mu + 1):
        _, Lk = lk_pk_step(F1sys, Ls, a_vecs[: k - 1], k, xvars)
        Ls.append(list(Lk.polys))
    G = PolySystem([p for L in Ls for p in L], V, names)
    dGdx = [[p.diff(j) for j in range(n)] for p in G.polys]

    # x-derivative entries and b-columns, flattened row-major after each other;
    # dF_k/db_nu = -x_1^(nu-k+1) / ((nu-k+1)! (k-1)!) on the first row of block k
    entries, pos = [], []
    for r in range(V):
        for j in range(n):
            if not dGdx[r][j].is_zero():
                entries.append(dGdx[r][j])
                pos.append(r * n + j)
    off = V * n
    for k in range(1, mu + 1):
        r = (k - 1) * n
        for nu in range(k - 1, mu - 1):
            m = nu - k + 1
            entries.append(var(0) ** m * Fraction(-1, factorial(m) * factorial(k - 1)))
            pos.append(off + r * (mu - 1) + nu)
    return DeflatedSystem(
        G=G, n=n, mu=mu, pivot=pivot, names=names, dGdx=dGdx,
        _values=PolyBatch(G.polys, V), _entries=PolyBatch(entries, V),
        _entry_pos=np.array(pos, dtype=np.int64),
    )


def eval_G_and_JG(D: DeflatedSystem, z: Sequence):
    """Value of ``G`` and its Jacobian at ``z``.

    Rational (``Fraction``) points are evaluated exactly term by term;
    anything else goes through the vectorized binary64 batches.
    """
    if len(z) != D.nvars:
        raise DimensionError(f"point has length {len(z)}, deflated system has {D.nvars} variables")
    if any(isinstance(v, Fraction) for v in z):
        z = [Fraction(v) for v in z]
        val = np.array([eval_poly(p, z) for p in D.G.polys], dtype=object)
        n, mu = D.n, D.mu
        JX = np.array([[eval_poly(q, z) for q in row] for row in D.dGdx], dtype=object)
        Bc = np.empty((D.nvars, mu - 1), dtype=object)
        Bc[...] = Fraction(0)
        for k in range(1, mu + 1):
            for nu in range(k - 1, mu - 1):
                m = nu - k + 1
                Bc[(k - 1) * n, nu] = -z[0] ** m / (factorial(m) * factorial(k - 1))
        return val, assemble_jacobian(JX, Bc, n, mu, zero=Fraction(0))
    z = np.asarray(z)
    return D.evaluate(z), D.jacobian(z)
