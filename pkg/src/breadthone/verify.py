"""Krawczyk-type existence and uniqueness test, and certification of breadth-one roots.

For a square system ``G`` with approximate zero ``z``, a preconditioner
``R ~ J_G(z)^{-1}`` and a box ``Y`` around zero, the test

    K(Y) = -R G(z) + (I - R M) Y  strictly inside  Y,     M encloses J_G over z + Y

proves that ``G`` has exactly one zero in ``z + Y`` (and that every matrix in
``M`` is nonsingular).  ``Y`` is grown by epsilon inflation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from .deflate import DeflatedSystem, PivotRecord, assemble_jacobian, build_deflated_system, select_pivots
from .dualspace import MultiplicityStructure
from .errors import IntervalError, SingularMatrixError, VerificationFailure
from .interval import IArray, imatmul, ieval_batch
from .linalg import approx_inverse, singular_values
from .poly import PolyBatch, PolySystem, jacobian_eval

INFLATE_EPS = 0.1
MAX_INFLATE = 15
NEWTON_STEPS = 20
REALMIN = np.finfo(float).tiny


class VerifiableSystem(Protocol):
    """What :func:`krawczyk_verify` needs from a square system."""

    nvars: int

    def evaluate(self, z) -> np.ndarray: ...
    def jacobian(self, z) -> np.ndarray: ...
    def ieval(self, X: IArray) -> IArray: ...
    def ijacobian(self, X: IArray) -> IArray: ...


class PlainSystem:
    """A square :class:`PolySystem` wrapped for verification of a regular zero."""

    def __init__(self, F: PolySystem):
        if not F.is_square:
            raise ValueError("verification needs a square system")
        self.F = F
        self.nvars = F.nvars
        self._values = PolyBatch(F.polys, F.nvars)
        jac = F.jacobian()
        self._pos = [(r, j) for r in range(len(F)) for j in range(F.nvars) if not jac[r][j].is_zero()]
        self._entries = PolyBatch([jac[r][j] for r, j in self._pos], F.nvars)

    def evaluate(self, z) -> np.ndarray:
        return self._values.evaluate(z)

    def _scatter(self, vals, fill=0.0):
        out = np.full((self.nvars, self.nvars), fill, dtype=np.asarray(vals).dtype)
        for (r, j), v in zip(self._pos, vals):
            out[r, j] = v
        return out

    def jacobian(self, z) -> np.ndarray:
        return self._scatter(self._entries.evaluate(z))

    def ieval(self, X: IArray) -> IArray:
        return ieval_batch(self._values, X)

    def ijacobian(self, X: IArray) -> IArray:
        e = ieval_batch(self._entries, X)
        return IArray(self._scatter(e.lo), self._scatter(e.hi))


class DeflatedVerifiable:
    """Adapter giving a :class:`DeflatedSystem` the verification interface."""

    def __init__(self, D: DeflatedSystem):
        self.D = D
        self.nvars = D.nvars

    def evaluate(self, z) -> np.ndarray:
        return self.D.evaluate(z)

    def jacobian(self, z) -> np.ndarray:
        return self.D.jacobian(z)

    def ieval(self, X: IArray) -> IArray:
        return ieval_batch(self.D._values, X)

    def ijacobian(self, X: IArray) -> IArray:
        return ijacobian(self.D, X)


def ijacobian(D: DeflatedSystem, X) -> IArray:
    """Interval matrix enclosing ``J_G`` over the box ``X`` (block assembly)."""
    X = X if isinstance(X, IArray) else IArray.from_exact(np.asarray(X, dtype=object)) \
        if np.asarray(X).dtype == object else IArray(X)
    if len(X) != D.nvars:
        raise IntervalError(f"box has {len(X)} coordinates, deflated system has {D.nvars}")
    e = ieval_batch(D._entries, X)
    n, mu = D.n, D.mu
    size = D.nvars * n + D.nvars * (mu - 1)
    bounds = []
    for part in (e.lo, e.hi):
        flat = np.zeros(size)
        flat[D._entry_pos] = part
        JX = flat[: D.nvars * n].reshape(D.nvars, n)
        Bc = flat[D.nvars * n:].reshape(D.nvars, mu - 1)
        bounds.append(assemble_jacobian(JX, Bc, n, mu))
    return IArray(*bounds)


@dataclass
class KrawczykResult:
    box: IArray
    center: np.ndarray
    iterations: int
    sigma_min: float
    newton_residual: float


def _as_verifiable(system) -> VerifiableSystem:
    if isinstance(system, DeflatedSystem):
        return DeflatedVerifiable(system)
    if isinstance(system, PolySystem):
        return PlainSystem(system)
    return system


def _newton(S: VerifiableSystem, z: np.ndarray, steps: int) -> np.ndarray:
    """Plain floating-point Newton polish of the center before inflation."""
    best, best_res = z, float(np.max(np.abs(S.evaluate(z)))) if S.nvars else 0.0
    for _ in range(steps):
        if best_res == 0.0:
            break
        J = S.jacobian(best)
        try:
            dz = np.linalg.solve(J, S.evaluate(best))
        except np.linalg.LinAlgError:
            break
        cand = best - dz
        if not np.all(np.isfinite(cand)):
            break
        res = float(np.max(np.abs(S.evaluate(cand))))
        moved = float(np.max(np.abs(dz)))
        if res > best_res and moved > 1e-14 * max(1.0, float(np.max(np.abs(best)))):
            break
        best, best_res = cand, min(res, best_res)
        if moved <= 4 * np.finfo(float).eps * max(1.0, float(np.max(np.abs(best)))):
            break
    return best


def krawczyk_verify(system, z0: Sequence, inflate_eps: float = INFLATE_EPS,
                    max_inflate: int = MAX_INFLATE, newton_steps: int = NEWTON_STEPS,
                    preconditioner: np.ndarray | None = None) -> KrawczykResult:
    """Prove existence of a unique zero of ``system`` near ``z0``.

    ``system`` is a :class:`DeflatedSystem`, a square :class:`PolySystem`
    or anything following :class:`VerifiableSystem`.  Raises
    :class:`VerificationFailure` when no certificate is obtained.
    """
    S = _as_verifiable(system)
    z = np.asarray(z0)
    if np.iscomplexobj(z):
        if np.any(np.imag(z) != 0):
            raise VerificationFailure("complex points are outside the real interval model", "krawczyk")
        z = np.real(z)
    z = z.astype(float)
    if len(z) != S.nvars:
        raise VerificationFailure(f"point has {len(z)} coordinates, system has {S.nvars}", "krawczyk")
    if not np.all(np.isfinite(z)):
        raise VerificationFailure("starting point is not finite", "krawczyk")
    if newton_steps:
        z = _newton(S, z, newton_steps)
    Jz = S.jacobian(z)
    try:
        R = approx_inverse(Jz) if preconditioner is None else np.asarray(preconditioner, dtype=float)
    except SingularMatrixError as exc:
        raise VerificationFailure(f"preconditioner singular: {exc}", "krawczyk") from exc
    s = singular_values(Jz)
    sigma_min = float(s[-1]) if len(s) else 0.0
    try:
        Gz = S.ieval(IArray(z))
        Z = -imatmul(R, Gz)
        eta = 10 * REALMIN * max(1.0, float(np.max(np.abs(z))))
        inflate = IArray(1 - inflate_eps, 1 + inflate_eps)
        tiny = IArray(-eta, eta)
        X = Z
        I = np.eye(len(z))
        for it in range(1, max_inflate + 1):
            Y = (X * inflate + tiny).hull(0.0)
            M = S.ijacobian(Y + z)
            C = IArray(I) - imatmul(R, M)
            X = Z + imatmul(C, Y)
            if X.subset_interior(Y):
                return KrawczykResult(X + z, z, it, sigma_min,
                                      float(np.max(np.abs(S.evaluate(z)))) if len(z) else 0.0)
    except IntervalError as exc:
        raise VerificationFailure(f"interval evaluation failed: {exc}", "krawczyk") from exc
    raise VerificationFailure(f"no contraction after {max_inflate} inflation steps", "krawczyk")


@dataclass
class CertifiedRoot:
    """Verified inclusions for a ``mu``-fold breadth-one root.

    ``X`` is in original variable order.  ``B`` encloses the smoothing
    parameters of a nearby system ``F_0`` that provably has a ``mu``-fold root
    in ``X``; ``A`` encloses the free parts of ``a_2..a_mu``.
    """

    X: IArray
    B: IArray
    A: IArray
    mu: int
    pivot: PivotRecord
    iterations_used: int
    sigma_min: float = 0.0
    center: np.ndarray | None = field(default=None, repr=False)
    deflated: DeflatedSystem | None = field(default=None, repr=False)

    def widths(self) -> dict[str, np.ndarray]:
        return {"X": self.X.width(), "B": self.B.width(), "A": self.A.width()}

    def max_width(self) -> float:
        ws = [w for w in self.widths().values() if w.size]
        return float(max(np.max(w) for w in ws)) if ws else 0.0

    def midpoint_residual(self) -> float:
        """``|F_0(mid X)|_inf`` for the perturbed system at ``mid B``."""
        if self.deflated is None:
            return float("nan")
        D = self.deflated
        F0 = D.smoothed_system(list(self.B.mid())).to_float()
        xs = list(self.X.mid())
        xs[0], xs[D.pivot.col] = xs[D.pivot.col], xs[0]
        return float(np.max(np.abs(F0.evaluate(xs))))


def _exchanged_parameters(F: PolySystem, x: np.ndarray, ms: MultiplicityStructure, col: int):
    """``a_2..a_mu`` for exchange column ``col``, reusing ``ms`` when it matches."""
    if ms.t == col and len(ms.a_vecs) == ms.mu - 1:
        return [np.asarray(a) for a in ms.a_vecs]
    from .refine import parameters_at

    return parameters_at(F, x, ms.mu, col)


def verify_breadth_one(F: PolySystem, x: Sequence, ms: MultiplicityStructure,
                       pivot: PivotRecord | None = None, a_vecs: Sequence | None = None,
                       **opts) -> CertifiedRoot:
    """Certify that a nearby perturbation of ``F`` has a ``mu``-fold root near ``x``.

    ``a_vecs`` (exchanged coordinates, e.g. from refinement) default to the
    ones in ``ms``.  Keyword options go to :func:`krawczyk_verify`.
    """
    if ms.mu < 2:
        raise ValueError("root is regular; verify F directly with krawczyk_verify")
    x = np.asarray(x)
    if pivot is None:
        J = jacobian_eval(F.to_float() if not np.iscomplexobj(x) else F, list(x))
        row = select_pivots(J).row
        pivot = PivotRecord(ms.t, row)
    if a_vecs is None or len(a_vecs) != ms.mu - 1:
        a_vecs = _exchanged_parameters(F, x, ms, pivot.col)
    D = build_deflated_system(F, ms.mu, pivot)
    z0 = D.pack(list(x), None, [np.asarray(a) for a in a_vecs])
    res = krawczyk_verify(D, z0, **opts)
    return certificate_from_box(D, res)


def certificate_from_box(D: DeflatedSystem, res: KrawczykResult) -> CertifiedRoot:
    box = res.box
    xb = box[D.x_slice()]
    order = list(range(D.n))
    order[0], order[D.pivot.col] = order[D.pivot.col], order[0]
    X = IArray(xb.lo[order], xb.hi[order])
    return CertifiedRoot(X, box[D.b_slice()], box[D.a_slice()], D.mu, D.pivot, res.iterations,
                         res.sigma_min, res.center, D)
