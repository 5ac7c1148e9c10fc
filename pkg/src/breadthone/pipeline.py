"""End-to-end driver: multiplicity estimate, refinement, deflation, certification."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .deflate import PivotRecord, select_pivots
from .dualspace import DEFAULT_TOL, MultiplicityStructure, msb1
from .errors import BreadthNotOne, MultiplicityCapExceeded, RefinementError, ZeroMatrix
from .poly import PolySystem, jacobian_eval
from .refine import DEFAULT_ITERS, RefineState, mrrb1
from .verify import CertifiedRoot, KrawczykResult, krawczyk_verify, verify_breadth_one

#: tolerances scanned at an unrefined point, where rank drops and consistency
#: residuals are only as small as the point's error
TOL_LADDER = (1e-6, 1e-4, 1e-3, 1e-2)


def multiplicity_candidates(F: PolySystem, x: Sequence, tol: float = DEFAULT_TOL,
                            ladder: Sequence[float] = TOL_LADDER) -> list[MultiplicityStructure]:
    """Distinct ``msb1`` outcomes over ``tol`` and the looser ladder, largest ``mu`` first.

    A rough point makes tight tolerances underestimate ``mu`` (the consistency
    residual is of the order of the point error), so larger values come first
    and are confirmed after refinement.
    """
    found: dict[int, MultiplicityStructure] = {}
    last_error: Exception | None = None
    for t in [tol] + [t for t in ladder if t > tol]:
        try:
            ms = msb1(F, x, tol=t)
        except ZeroMatrix:
            raise
        except (BreadthNotOne, MultiplicityCapExceeded) as exc:
            last_error = exc
            continue
        found.setdefault(ms.mu, ms)
    if not found:
        assert last_error is not None
        raise last_error
    return [found[m] for m in sorted(found, reverse=True)]


def estimate_structure(F: PolySystem, x: Sequence, tol: float = DEFAULT_TOL,
                       ladder: Sequence[float] = TOL_LADDER) -> MultiplicityStructure:
    """Largest-``mu`` candidate from :func:`multiplicity_candidates`."""
    return multiplicity_candidates(F, x, tol, ladder)[0]


@dataclass
class PipelineResult:
    mu: int
    refined: RefineState | None
    structure: MultiplicityStructure
    certificate: CertifiedRoot | None = None
    regular: KrawczykResult | None = None
    timings: dict[str, float] = field(default_factory=dict)


def _confirm(F: PolySystem, x: Sequence, tol: float) -> MultiplicityStructure:
    """``msb1`` at a refined point; the ladder is only a fallback there."""
    try:
        return msb1(F, x, tol=tol)
    except BreadthNotOne:
        return multiplicity_candidates(F, x, tol)[-1]


def refine_point(F: PolySystem, x: Sequence, tol: float = DEFAULT_TOL, iters: int = DEFAULT_ITERS,
                 mu: int | None = None) -> tuple[RefineState, MultiplicityStructure]:
    """Refine ``x`` and confirm the multiplicity at the refined point.

    Without ``mu`` every candidate from :func:`multiplicity_candidates` is
    tried, largest first, until the multiplicity recomputed at the refined
    point agrees with the one used for refinement.
    """
    x = np.asarray(x)
    if mu is not None:
        state = mrrb1(F, x, mu, iters=iters)
        return state, _confirm(F, state.x, tol)
    failures = []
    fallback = None
    for cand in multiplicity_candidates(F, x, tol):
        try:
            state = mrrb1(F, x, cand.mu, iters=iters)
            ms = _confirm(F, state.x, tol)
        except (RefinementError, BreadthNotOne, MultiplicityCapExceeded) as exc:
            failures.append(f"mu={cand.mu}: {exc}")
            continue
        if ms.mu == cand.mu:
            return state, ms
        failures.append(f"mu={cand.mu}: refined point reports mu={ms.mu}")
        fallback = fallback or (state, ms)
    if fallback is not None:
        return fallback
    raise RefinementError("no multiplicity candidate could be refined; " + "; ".join(failures))


def certify(F: PolySystem, x: Sequence, tol: float = DEFAULT_TOL, iters: int = DEFAULT_ITERS,
            mu: int | None = None, **verify_opts) -> PipelineResult:
    """Refine ``x`` and certify the root; regular roots get plain verification."""
    t0 = time.perf_counter()
    state, ms = refine_point(F, x, tol, iters, mu)
    t1 = time.perf_counter()
    mu_final = mu if mu is not None else ms.mu
    timings = {"refine": t1 - t0}
    if mu_final == 1:
        res = krawczyk_verify(F, state.x, **verify_opts)
        timings["verify"] = time.perf_counter() - t1
        return PipelineResult(1, state, ms, regular=res, timings=timings)
    J = jacobian_eval(F.to_float() if not np.iscomplexobj(state.x) else F, list(state.x))
    pivot = PivotRecord(state.t, select_pivots(J, tol=tol).row)
    if ms.mu != mu_final:
        ms = MultiplicityStructure(mu_final, state.t, tuple(state.a_vecs), tuple(state.x), False,
                                   tuple(F.names), {"overridden": True})
    cert = verify_breadth_one(F, state.x, ms, pivot=pivot, a_vecs=state.a_vecs, **verify_opts)
    timings["verify"] = time.perf_counter() - t1
    return PipelineResult(mu_final, state, ms, certificate=cert, timings=timings)
