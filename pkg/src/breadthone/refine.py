"""Refinement of an approximate breadth-one singular root (MRRB1 sweeps).

A sweep is: one regularized Newton step on ``F``, least-squares solves for
``a_2..a_mu`` (each ``F_k`` is linear in ``a_k``), a bordered solve for the
correction ``delta`` along ``a_2``, and the update ``x += delta * a_2``.
All work happens in exchanged coordinates (``x_1 <-> x_t``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dualspace import LkPkChain
from .errors import DimensionError, RefinementError
from .linalg import EPS, least_squares, null_vectors, smallest_singular_value
from .poly import MonomialSpace, PolySystem, jacobian_eval

DEFAULT_ITERS = 3
#: a sweep moving ``x`` by less than this many ulps (relative) ends refinement
STEP_STOP_ULPS = 1e3
#: allowed residual growth per sweep before refinement is aborted
GROWTH_LIMIT = 10.0


@dataclass
class RefineState:
    """Outcome of :func:`mrrb1`.

    ``x`` is in original variable order; ``x_exchanged`` and ``a_vecs`` use the
    exchanged order with ``a_2[0] = 1`` and ``a_k[0] = 0`` for ``k >= 3``.
    """

    x: np.ndarray
    a_vecs: tuple[np.ndarray, ...]
    residual_inf: float
    delta: complex | float
    iteration: int
    t: int
    mu: int
    x_exchanged: np.ndarray = field(repr=False)
    history: list[float] = field(default_factory=list)


def _dtype_for(x) -> type:
    return complex if np.iscomplexobj(np.asarray(x)) else float


def _numeric(F: PolySystem, dtype) -> PolySystem:
    return F.map_coeffs(dtype)


def residual_inf(F: PolySystem, x) -> float:
    return float(np.max(np.abs(np.asarray(F.evaluate(list(x)), dtype=complex)))) if len(F) else 0.0


def regularized_newton_step(F: PolySystem, x: Sequence) -> np.ndarray:
    """``x + y`` with ``(J^H J + sigma_n I) y = -J^H F(x)``."""
    x = np.asarray(x)
    dtype = np.result_type(x, float)
    x = x.astype(dtype)
    Fn = _numeric(F, complex if dtype.kind == "c" else float)
    J = jacobian_eval(Fn, list(x), dtype=dtype)
    r = np.asarray(Fn.evaluate(list(x)), dtype=np.result_type(J, float))
    if not np.any(r):
        return x.copy()
    sigma = smallest_singular_value(J)
    JH = J.conj().T
    A = JH @ J + sigma * np.eye(len(x))
    rhs = -JH @ r
    if smallest_singular_value(A) <= EPS * max(1.0, float(np.abs(A).max())):
        y = least_squares(J, -r)
    else:
        y = np.linalg.solve(A, rhs)
    return x + y


class _Workspace:
    """Exchanged system, its monomial space and coefficient arrays."""

    def __init__(self, F: PolySystem, t: int, dtype):
        self.t = t
        self.dtype = dtype
        self.F = _numeric(F.swap_vars(0, t), dtype)
        self.space = MonomialSpace.for_system(self.F)
        self.CF = self.space.encode(self.F.polys, dtype)

    def jacobian(self, x) -> np.ndarray:
        return jacobian_eval(self.F, list(x), dtype=self.dtype)

    def values(self, x) -> np.ndarray:
        return self.space.values(list(x), dtype=self.dtype)


def _solve_free(Jt: np.ndarray, rhs: np.ndarray, what: str) -> np.ndarray:
    res = least_squares(Jt, rhs, full_output=True)
    if res.rank_deficient:
        raise RefinementError(f"{what}: the trailing Jacobian columns lost rank (breadth one lost)")
    return res.solution


def _parameters(ws: _Workspace, x, mu: int) -> tuple[list[np.ndarray], LkPkChain, np.ndarray, np.ndarray]:
    J = ws.jacobian(x)
    Jt = J[:, 1:]
    vals = ws.values(x)
    n = J.shape[0]
    a2 = np.empty(n, dtype=ws.dtype)
    a2[0] = 1
    a2[1:] = _solve_free(Jt, -J[:, 0], "a_2")
    chain = LkPkChain(ws.space, ws.CF, a2, dtype=ws.dtype)
    a_vecs = [a2]
    for k in range(3, mu + 1):
        Pk = chain.next_P()
        ak = np.zeros(n, dtype=ws.dtype)
        ak[1:] = _solve_free(Jt, -(vals @ Pk), f"a_{k}")
        a_vecs.append(ak)
        chain.push_a(ak)
    return a_vecs, chain, vals, Jt


def solve_parameters(F: PolySystem, x: Sequence, k: int, a_prev: Sequence = ()) -> np.ndarray:
    """Least-squares ``a_k`` from ``F_k(x, a_2, .., a_{k-1}, a_k) = 0``.

    ``F`` and ``x`` are in exchanged coordinates; ``a_prev`` holds
    ``a_2..a_{k-1}``.
    """
    if k < 2 or len(a_prev) < k - 2:
        raise DimensionError(f"a_{k} needs a_2..a_{k - 1}")
    dtype = _dtype_for(x)
    ws = _Workspace(F, 0, dtype)
    x = np.asarray(x, dtype=dtype)
    J = ws.jacobian(x)
    n = len(x)
    if k == 2:
        a = np.empty(n, dtype=dtype)
        a[0] = 1
        a[1:] = _solve_free(J[:, 1:], -J[:, 0], "a_2")
        return a
    chain = LkPkChain(ws.space, ws.CF, np.asarray(a_prev[0], dtype=dtype), dtype=dtype)
    for a in a_prev[1:k - 2]:
        chain.push_a(np.asarray(a, dtype=dtype))
    a = np.zeros(n, dtype=dtype)
    a[1:] = _solve_free(J[:, 1:], -(ws.values(x) @ chain.next_P()), f"a_{k}")
    return a


def parameters_at(F: PolySystem, x: Sequence, mu: int, t: int) -> list[np.ndarray]:
    """Least-squares ``a_2..a_mu`` at ``x`` (original order) after exchanging ``x_1 <-> x_t``."""
    dtype = _dtype_for(x)
    xs = np.array(x, dtype=dtype)
    xs[[0, t]] = xs[[t, 0]]
    return _parameters(_Workspace(F, t, dtype), xs, mu)[0]


def _pivot_column(F: PolySystem, x, dtype) -> int:
    J = jacobian_eval(_numeric(F, dtype), list(x), dtype=dtype)
    _, right, _ = null_vectors(J)
    return int(np.argmax(np.abs(right)))


def mrrb1(F: PolySystem, x: Sequence, mu: int, iters: int = DEFAULT_ITERS,
          t: int | None = None) -> RefineState:
    """Run up to ``iters`` sweeps from ``x`` (original coordinates).

    ``t`` is the exchanged variable (0-based); by default the largest entry
    of the approximate right null vector.  Sweeps stop early once a step no
    longer moves ``x`` beyond roundoff.  With ``mu = 1`` only the regularized
    Newton steps run; at a regular root they contract linearly, not quadratically.
    """
    n = F.nvars
    if len(F) != n or len(x) != n:
        raise DimensionError("mrrb1 needs a square system and a matching point")
    if mu < 1:
        raise ValueError("mu must be positive")
    dtype = _dtype_for(x)
    x = np.asarray(x, dtype=dtype)
    if t is None:
        t = _pivot_column(F, x, dtype) if mu > 1 else 0
    ws = _Workspace(F, t, dtype)
    xs = x.copy()
    xs[[0, t]] = xs[[t, 0]]
    scale = max(1.0, max((abs(complex(c)) for p in ws.F for _, c in p), default=1.0))
    floor = STEP_STOP_ULPS * EPS * scale
    res = residual_inf(ws.F, xs)
    history = [res]
    a_vecs: list[np.ndarray] = []
    delta = dtype(0)
    it = 0
    for it in range(1, iters + 1):
        x_old = xs.copy()
        xs = regularized_newton_step(ws.F, xs)
        if mu > 1:
            a_vecs, chain, vals, Jt = _parameters(ws, xs, mu)
            P_next = vals @ chain.next_P()
            L_mu = vals @ chain.L[mu - 1]
            M = np.column_stack([P_next, Jt])
            sol = least_squares(M, -L_mu, full_output=True)
            if sol.rank_deficient:
                raise RefinementError(
                    f"bordered correction matrix is singular at sweep {it}; mu={mu} is probably wrong")
            delta = sol.solution[0] / mu
            xs = xs + delta * a_vecs[0]
        new_res = residual_inf(ws.F, xs)
        history.append(new_res)
        if not np.all(np.isfinite(xs)) or new_res > GROWTH_LIMIT * max(res, floor):
            raise RefinementError(
                f"residual grew from {res:.3e} to {new_res:.3e} in sweep {it}; start is outside the basin")
        res = new_res
        step = float(np.max(np.abs(xs - x_old)))
        if res == 0.0 or step <= STEP_STOP_ULPS * EPS * max(1.0, float(np.max(np.abs(xs)))):
            break
    if mu > 1:
        # parameters consistent with the final point
        a_vecs = _parameters(ws, xs, mu)[0]
    out = xs.copy()
    out[[0, t]] = out[[t, 0]]
    return RefineState(out, tuple(a_vecs), res, delta, it, t, mu, xs, history)
