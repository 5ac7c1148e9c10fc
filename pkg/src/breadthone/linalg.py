"""Dense kernels for the small matrices in the pipeline.

Every routine accepts ``float``/``complex`` arrays; ``plu``,
``rect_consistency_solve`` and the ``exact_*`` helpers also accept
``dtype=object`` arrays of ``Fraction`` and then work without rounding.
"""

from __future__ import annotations

from fractions import Fraction
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .errors import SingularMatrixError

EPS = np.finfo(float).eps


def is_exact(A: np.ndarray) -> bool:
    return np.asarray(A).dtype == object


def _zero_like(A):
    return Fraction(0) if is_exact(A) else 0.0


class PLU(NamedTuple):
    """``A = P @ L @ U`` with ``P[perm[i], i] = 1``, i.e. ``A[perm] == L @ U``."""

    perm: np.ndarray
    L: np.ndarray
    U: np.ndarray
    rank: int

    @property
    def P(self) -> np.ndarray:
        m = len(self.perm)
        P = np.zeros((m, m), dtype=int)
        P[self.perm, np.arange(m)] = 1
        return P


def plu(A) -> PLU:
    """LU factorization with partial pivoting on a possibly rectangular matrix."""
    A = np.array(A, dtype=object if is_exact(np.asarray(A)) else np.result_type(np.asarray(A), float))
    m, n = A.shape
    if m == 0:
        raise ValueError("plu needs a nonempty matrix")
    exact = A.dtype == object
    U = A.copy()
    L = np.zeros((m, m), dtype=A.dtype)
    if exact:
        L[:] = Fraction(0)
    perm = np.arange(m)
    rank = 0
    for k in range(min(m, n)):
        mags = [abs(U[i, k]) for i in range(k, m)]
        p = k + int(np.argmax(mags))
        if U[p, k] == 0:
            continue
        if p != k:
            U[[k, p]] = U[[p, k]]
            L[[k, p]] = L[[p, k]]
            perm[[k, p]] = perm[[p, k]]
        rank += 1
        piv = U[k, k]
        for i in range(k + 1, m):
            if U[i, k] != 0:
                f = U[i, k] / piv
                L[i, k] = f
                U[i, k:] = U[i, k:] - f * U[k, k:]
                U[i, k] = _zero_like(U)
    for i in range(m):
        L[i, i] = Fraction(1) if exact else 1.0
    return PLU(perm, L, U, rank)


def forward_substitute(L: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve ``L y = rhs`` for unit lower-triangular ``L``."""
    y = np.array(rhs, dtype=np.result_type(L, rhs) if not is_exact(L) else object)
    for i in range(len(y)):
        s = y[i]
        for j in range(i):
            if L[i, j] != 0:
                s = s - L[i, j] * y[j]
        y[i] = s
    return y


def back_substitute(U: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    n = U.shape[0]
    y = np.array(rhs, dtype=np.result_type(U, rhs) if not is_exact(U) else object)
    for i in range(n - 1, -1, -1):
        s = y[i]
        for j in range(i + 1, n):
            s = s - U[i, j] * y[j]
        y[i] = s / U[i, i]
    return y


def rect_consistency_solve(factors: PLU, rhs, tol_zero: float = 1e-8):
    """Solve the ``n x (n-1)`` system ``A c = rhs`` if it is consistent.

    ``rhs`` is permuted and run through ``L``; the system is consistent when
    the last entry of the result vanishes, relative to ``max(1, |b|_inf)``.
    Exact (object) factors use a zero test without tolerance.  Returns the
    solution ``c`` or ``None`` when the system is inconsistent or the leading
    ``(n-1) x (n-1)`` block of ``U`` is singular.
    """
    perm, L, U, _ = factors
    m, n = U.shape
    if n != m - 1:
        raise ValueError("rect_consistency_solve expects an n x (n-1) factorization")
    rhs = np.asarray(rhs)
    exact = is_exact(U)
    b = forward_substitute(L, rhs[perm])
    if exact:
        if b[-1] != 0:
            return None
    else:
        scale = max(1.0, float(np.max(np.abs(b)))) if len(b) else 1.0
        if abs(b[-1]) > tol_zero * scale:
            return None
    if n == 0:
        return np.zeros(0, dtype=object if exact else b.dtype)
    lead = U[:n, :]
    diag = [abs(lead[i, i]) for i in range(n)]
    if exact:
        if any(d == 0 for d in diag):
            return None
    else:
        umax = float(np.max(np.abs(lead))) if lead.size else 0.0
        if umax == 0.0 or min(diag) <= tol_zero * umax:
            return None
    return back_substitute(lead, b[:n])


class LstsqResult(NamedTuple):
    solution: np.ndarray
    rank: int
    rank_deficient: bool


def least_squares(A, b, rcond: float | None = None, full_output: bool = False):
    """Minimize ``|A y - b|_2`` via QR with column pivoting.

    Rank-deficient ``A`` falls back to the SVD minimum-norm solution and is
    flagged in the ``full_output`` result.
    """
    A = np.atleast_2d(np.asarray(A))
    A = A.astype(np.result_type(A, float))
    b = np.asarray(b).astype(np.result_type(A, b, float))
    m, n = A.shape
    if n == 0:
        y = np.zeros(0, dtype=A.dtype)
        return LstsqResult(y, 0, False) if full_output else y
    if rcond is None:
        rcond = max(m, n) * EPS
    Q, R, piv = scipy.linalg.qr(A, mode="economic", pivoting=True)
    d = np.abs(np.diag(R))
    rank = int(np.sum(d > rcond * d[0])) if d[0] > 0 else 0
    if rank == n:
        z = scipy.linalg.solve_triangular(R, Q.conj().T @ b)
        y = np.empty(n, dtype=z.dtype)
        y[piv] = z
    else:
        y = np.linalg.lstsq(A, b, rcond=rcond)[0]
    if full_output:
        return LstsqResult(y, rank, rank < n)
    return y


def singular_values(A) -> np.ndarray:
    A = np.atleast_2d(np.asarray(A))
    if A.size == 0:
        return np.zeros(0)
    return np.linalg.svd(A.astype(np.result_type(A, float)), compute_uv=False)


def smallest_singular_value(A) -> float:
    s = singular_values(A)
    return float(s[-1]) if len(s) else 0.0


def null_vectors(A) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Singular values plus right and left singular vectors of ``sigma_min``."""
    A = np.atleast_2d(np.asarray(A))
    A = A.astype(np.result_type(A, float))
    Uf, s, Vh = np.linalg.svd(A)
    right = Vh[-1].conj()
    left = Uf[:, -1].conj()
    return s, right, left


def approx_inverse(A) -> np.ndarray:
    """Floating-point inverse used as a preconditioner; no rigor is claimed."""
    A = np.atleast_2d(np.asarray(A))
    A = A.astype(np.result_type(A, float))
    s = singular_values(A)
    if len(s) == 0 or s[0] == 0 or s[-1] <= s[0] * A.shape[0] * EPS:
        raise SingularMatrixError("matrix is numerically singular; cannot precondition")
    return np.linalg.inv(A)


# -- exact helpers ----------------------------------------------------------

def to_fraction_matrix(A) -> np.ndarray:
    A = np.asarray(A, dtype=object)
    out = np.empty(A.shape, dtype=object)
    for idx, v in np.ndenumerate(A):
        out[idx] = Fraction(v)
    return out


def exact_rref(A) -> tuple[np.ndarray, list[int]]:
    M = to_fraction_matrix(A).copy()
    rows, cols = M.shape
    pivots: list[int] = []
    r = 0
    for c in range(cols):
        p = next((i for i in range(r, rows) if M[i, c] != 0), None)
        if p is None:
            continue
        M[[r, p]] = M[[p, r]]
        M[r] = M[r] / M[r, c]
        for i in range(rows):
            if i != r and M[i, c] != 0:
                M[i] = M[i] - M[i, c] * M[r]
        pivots.append(c)
        r += 1
        if r == rows:
            break
    return M, pivots


def exact_rank(A) -> int:
    return len(exact_rref(A)[1])


def exact_nullspace(A) -> list[np.ndarray]:
    M, pivots = exact_rref(A)
    cols = M.shape[1]
    free = [c for c in range(cols) if c not in pivots]
    basis = []
    for f in free:
        v = np.array([Fraction(0)] * cols, dtype=object)
        v[f] = Fraction(1)
        for r, c in enumerate(pivots):
            v[c] = -M[r, f]
        basis.append(v)
    return basis
