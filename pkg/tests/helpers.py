"""Shared systems and independent oracles for the test suite."""

from __future__ import annotations

import random
from fractions import Fraction
from itertools import combinations_with_replacement

import numpy as np

from breadthone.dualspace import DiffFunctional, construct_dual_basis, phi_op
from breadthone.interval import Interval
from breadthone.poly import Polynomial, PolySystem, apply_functional, eval_poly, parse_system

F = Fraction

OJIKA = "vars: x1 x2\nf: x1^2+x2-3\nf: x1+(1/8)*x2^2-3/2\n"
MU4 = "vars: x1 x2\nf: x1^2*x2-x1*x2^2\nf: x1-x2^2\n"
SENSITIVE = "vars: x1 x2\nf: x1^2-x2^2\nf: x1-x2^2\n"
MU4_START = [0.002, 0.003, -0.001, 0.0015, -0.002, 0.002, 1.001, -0.01]


def ojika() -> PolySystem:
    return parse_system(OJIKA)


def mu4() -> PolySystem:
    return parse_system(MU4)


def sensitive() -> PolySystem:
    return parse_system(SENSITIVE)


def _names(s: int) -> str:
    return " ".join(f"x{i}" for i in range(1, s + 1))


def cubic_chain_text(s: int) -> str:
    """``x_i^3 + x_i^2 - x_{i+1}``, closed by ``x_s^2``: multiplicity ``2^s`` at 0."""
    body = "".join(f"f: x{i}^3+x{i}^2-x{i + 1}\n" for i in range(1, s))
    return f"vars: {_names(s)}\n{body}f: x{s}^2\n"


def quadratic_chain_text(s: int) -> str:
    """``x_i^2 + x_i - x_{i+1}``, closed by ``x_s^3``: multiplicity 3 at 0."""
    body = "".join(f"f: x{i}^2+x{i}-x{i + 1}\n" for i in range(1, s))
    return f"vars: {_names(s)}\n{body}f: x{s}^3\n"


def cubic_chain(s: int) -> PolySystem:
    return parse_system(cubic_chain_text(s))


def quadratic_chain(s: int) -> PolySystem:
    return parse_system(quadratic_chain_text(s))


# -- mu4 deflated system exactly as displayed, in our variable order ----------

MU4_DEFLATED = [
    "x1^2*x2-x1*x2^2-b0-b1*x2-(1/2)*b2*x2^2",
    "x1-x2^2",
    "2*a1*x1*x2-a1*x2^2+x1^2-2*x1*x2-b1-b2*x2",
    "a1-2*x2",
    "a1^2*x2+2*a1*x1-2*a1*x2+2*a2*x1*x2-a2*x2^2-x1-(1/2)*b2",
    "a2-1",
    "a1^2+2*a1*a2*x2-a1+2*a2*x1-2*a2*x2+2*a3*x1*x2-a3*x2^2",
    "a3",
]
# our layout is [x (exchanged), b, a_2 free, a_3 free, a_4 free]; x2 is perturbed
MU4_DEFLATED_NAMES = ["x2", "x1", "b0", "b1", "b2", "a1", "a2", "a3"]


def mu4_start_in_layout() -> list[float]:
    """The displayed start vector (order x1, x2, b, a) mapped to our layout."""
    z = list(MU4_START)
    z[0], z[1] = z[1], z[0]
    return z


# -- random breadth-one instances with known multiplicity ---------------------------

def _compose(p: Polynomial, subs: list[Polynomial]) -> Polynomial:
    n = subs[0].nvars
    out = Polynomial.zero(n)
    for e, c in p.terms.items():
        term = Polynomial.constant(c, n)
        for s, k in zip(subs, e):
            if k:
                term = term * s ** k
        out = out + term
    return out


def _unimodular(rng: random.Random, n: int) -> list[list[int]]:
    """Random integer matrix with determinant +-1 (products of elementary moves)."""
    M = [[int(i == j) for j in range(n)] for i in range(n)]
    for _ in range(n):
        i, j = rng.sample(range(n), 2) if n > 1 else (0, 0)
        if i == j:
            continue
        c = rng.choice([-1, 1])
        M[i] = [a + c * b for a, b in zip(M[i], M[j])]
    if n > 1:
        perm = list(range(n))
        rng.shuffle(perm)
        M = [M[p] for p in perm]
    return M


def random_breadth_one(rng: random.Random, n: int, mu: int) -> PolySystem:
    """Integer system with a breadth-one root of multiplicity ``mu`` at the origin.

    Start from ``{x1^mu (1 + l(x)), x_i - p_i(x1)}`` whose local ring at 0 is
    ``K[x1]/(x1^mu)``, then apply an integer unimodular change of variables
    and mix the equations with another unimodular matrix.
    """
    xs = [Polynomial.variable(i, n, Fraction(1)) for i in range(n)]
    unit = Polynomial.constant(Fraction(1), n)
    for v in xs:
        unit = unit + v * rng.randint(-1, 1)
    base = [xs[0] ** mu * unit if mu > 1 else xs[0] + xs[0] ** 2 * rng.randint(-1, 1)]
    for i in range(1, n):
        p = Polynomial.zero(n)
        for d in range(1, 3):
            p = p + xs[0] ** d * rng.randint(-1, 1)
        base.append(xs[i] - p)
    A = _unimodular(rng, n)
    subs = [sum((xs[k] * A[i][k] for k in range(n) if A[i][k]), Polynomial.zero(n)) for i in range(n)]
    changed = [_compose(f, subs) for f in base]
    B = _unimodular(rng, n)
    mixed = [sum((changed[k] * B[i][k] for k in range(n) if B[i][k]), Polynomial.zero(n)) for i in range(n)]
    return PolySystem(mixed, n, tuple(f"x{i + 1}" for i in range(n)))


# -- Macaulay-matrix multiplicity oracle (exact rank modulo a prime) -------------------

PRIME = 2_147_483_629  # < 2^31 so products fit in int64


def _monomials(n: int, max_deg: int) -> list[tuple[int, ...]]:
    out = []
    for d in range(max_deg + 1):
        for combo in combinations_with_replacement(range(n), d):
            e = [0] * n
            for i in combo:
                e[i] += 1
            out.append(tuple(e))
    return out


def _rank_mod_p(M: np.ndarray, p: int = PRIME) -> int:
    M = np.mod(M, p).astype(np.int64)
    rows, cols = M.shape
    rank = 0
    for c in range(cols):
        if rank == rows:
            break
        nz = np.nonzero(M[rank:, c])[0]
        if len(nz) == 0:
            continue
        piv = rank + nz[0]
        if piv != rank:
            M[[rank, piv]] = M[[piv, rank]]
        inv = pow(int(M[rank, c]), p - 2, p)
        M[rank] = (M[rank] * inv) % p
        below = np.nonzero(M[rank + 1:, c])[0] + rank + 1
        if len(below):
            f = M[below, c][:, None]
            M[below] = (M[below] - (f * M[rank]) % p) % p
        rank += 1
    return rank


def macaulay_multiplicity(F: PolySystem, max_depth: int = 40) -> int:
    """Multiplicity of the origin from ranks of truncated Macaulay matrices.

    The dual subspace of order ``<= a`` is the kernel of the matrix whose
    rows are the coefficients of ``x^b f_i`` (``|b| < a``) on monomials of
    degree ``<= a``; its dimension stabilises at the multiplicity.
    Needs integer-valued coefficients.
    """
    n = F.nvars
    prev = None
    for depth in range(max_depth + 1):
        cols = _monomials(n, depth)
        index = {e: i for i, e in enumerate(cols)}
        rows = []
        for shift in _monomials(n, depth - 1) if depth else []:
            for f in F:
                row = np.zeros(len(cols), dtype=np.int64)
                for e, c in f.terms.items():
                    key = tuple(a + b for a, b in zip(e, shift))
                    if key in index:
                        q = Fraction(c)
                        if q.denominator != 1:
                            raise ValueError("oracle needs integer coefficients")
                        row[index[key]] = int(q) % PRIME
                rows.append(row)
        rank = _rank_mod_p(np.array(rows)) if rows else 0
        dim = len(cols) - rank
        if dim == prev:
            return dim
        prev = dim
    raise RuntimeError("multiplicity did not stabilise")


# -- derivative-form construction of Delta_k -----------------------------------------

def raise_derivative(lam: DiffFunctional, j: int) -> DiffFunctional:
    """``d/dx_j`` composed with ``lam``: ``d^a -> (a_j + 1) d^(a + e_j)``."""
    out = {}
    for e, c in lam.terms.items():
        f = list(e)
        f[j] += 1
        out[tuple(f)] = c * (e[j] + 1)
    return DiffFunctional(lam.nvars, out)


def delta_oracle(lams: list[DiffFunctional], a_vecs, k: int) -> DiffFunctional:
    """``Delta_k`` from ``Lambda_2..Lambda_{k-1}`` by the derivative form.

    ``(1/(k-1)) [d_1 Lambda_{k-1} + sum_{j>=2} d_j(sum_{m=2}^{k-1} (m-1) a_{m,j} Lambda_{k-m+1})]``
    in exchanged coordinates (``lams[0]`` is ``Lambda_1``).
    """
    n = lams[0].nvars
    total = raise_derivative(lams[k - 2], 0)
    for j in range(1, n):
        inner = DiffFunctional(n)
        for m in range(2, k):
            a = a_vecs[m - 2][j]
            if a != 0:
                inner = inner + lams[k - m] * (a * (m - 1))
        total = total + raise_derivative(inner, j)
    scale = Fraction(1, k - 1) if isinstance(next(iter(total.terms.values()), 0), Fraction) else 1 / (k - 1)
    return total * scale


# -- dual-space invariants ------------------------------------------------------------

def check_invariants(S, x, ms):
    """Closedness, vanishing and normalization; returns the largest violation."""
    basis = construct_dual_basis(ms)
    lams = basis.exchanged
    n, mu = ms.nvars, ms.mu
    worst = 0.0

    def gap(a, b):
        return float(a.max_abs_diff(b)) if not ms.exact else (0.0 if a == b else float("inf"))

    for k in range(2, mu + 1):
        lam = lams[k - 1]
        worst = max(worst, gap(phi_op(lam, 0), lams[k - 2]))
        for i in range(1, n):
            expect = DiffFunctional(n)
            for j in range(1, k):  # a_{k-j+1,i} Lambda_j, j = 1..k-1
                a = ms.a_vecs[k - j - 1][i]
                expect = expect + lams[j - 1] * a
            worst = max(worst, gap(phi_op(lam, i), expect))
        e = [0] * n
        for d in range(k):
            e[0] = d
            target = 1 if d == k - 1 else 0
            worst = max(worst, abs(float(lam.coefficient(e) - target)))
    for lam in basis.lambdas:
        for f in S:
            v = apply_functional(lam, f if ms.exact else f.map_coeffs(complex), x)
            worst = max(worst, abs(complex(v)) / max(1.0, sum(abs(complex(c)) for c in f.terms.values())))
    return worst


# -- interval containment sampling -----------------------------------------------------

def encloses(I: Interval, q: Fraction) -> bool:
    return F(I.lo) <= q <= F(I.hi)


def _rand_interval(rng):
    a = F(rng.randint(-10 ** 6, 10 ** 6), rng.randint(1, 10 ** 4)) * F(10) ** rng.randint(-8, 8)
    b = a + F(rng.randint(0, 10 ** 3), rng.randint(1, 10 ** 6)) * F(10) ** rng.randint(-12, 4)
    return Interval(a, b), a, b


def containment_violations(count: int, seed: int = 0) -> int:
    """Random scalar operations on exactly enclosed rational intervals."""
    rng = random.Random(seed)
    bad = 0
    for i in range(count):
        U, ua, ub = _rand_interval(rng)
        V, va, vb = _rand_interval(rng)
        qu = ua + (ub - ua) * F(rng.randint(0, 100), 100)
        qv = va + (vb - va) * F(rng.randint(0, 100), 100)
        op = i % 6
        if op == 0:
            R, q = U + V, qu + qv
        elif op == 1:
            R, q = U - V, qu - qv
        elif op == 2:
            R, q = U * V, qu * qv
        elif op == 3:
            if va <= 0 <= vb:
                R, q = U * U, qu * qu
            else:
                R, q = U / V, qu / qv
        elif op == 4:
            k = rng.randint(0, 5)
            R, q = U ** k, qu ** k
        else:
            R, q = -U.hull(V), -qv
        bad += not encloses(R, q)
    return bad


# -- deflated-system oracles --------------------------------------------------------------

def symbolic_jacobian(D, z):
    """Oracle: differentiate every equation of G in every extended variable."""
    return np.array([[eval_poly(g.diff(j), z) for j in range(D.nvars)] for g in D.G], dtype=object)


def random_system(rng, n, deg=3, terms=4):
    polys = []
    for _ in range(n):
        t = {}
        for _ in range(terms):
            e = tuple(rng.randint(0, deg) for _ in range(n))
            t[e] = F(rng.randint(-6, 6), rng.randint(1, 3))
        polys.append(Polynomial(n, t))
    return PolySystem(polys, n, tuple(f"x{i + 1}" for i in range(n)))
