"""Real interval arithmetic with outward rounding that ignores the FPU mode.

Each bound is computed in round-to-nearest binary64.  An error-free
transformation (TwoSum / Dekker's TwoProduct) tells whether the rounded
value lies above or below the exact one, and only then is the bound pushed
one step outward with ``nextafter``.  Exact operations therefore stay
exact, and no process-global rounding state is touched.

Matrix products use a-priori error bounds for round-to-nearest dot
products instead of per-operation rounding, which keeps them BLAS-fast.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .errors import IntervalError

U = 2.0 ** -53            # unit roundoff
ETA = 2.0 ** -1074        # smallest subnormal
_SPLIT = 134217729.0      # 2^27 + 1
_SPLIT_MAX = 2.0 ** 995   # splitting overflows above this
_PROD_MIN = 2.0 ** -969   # below this the product error may underflow

_NEG_INF = -np.inf
_POS_INF = np.inf


def _finite(*arrays: np.ndarray) -> None:
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise IntervalError("interval bound overflowed or became NaN")


def _arr(x) -> np.ndarray:
    return np.asarray(x, dtype=float)


# -- directed scalar kernels (vectorized) -------------------------------------

def _two_sum_err(a, b, s):
    bb = s - a
    return (a - (s - bb)) + (b - bb)


def add_down(a, b):
    a, b = _arr(a), _arr(b)
    with np.errstate(over="ignore", invalid="ignore"):
        s = a + b
    _finite(s)
    return np.where(_two_sum_err(a, b, s) < 0, np.nextafter(s, _NEG_INF), s)


def add_up(a, b):
    a, b = _arr(a), _arr(b)
    with np.errstate(over="ignore", invalid="ignore"):
        s = a + b
    _finite(s)
    return np.where(_two_sum_err(a, b, s) > 0, np.nextafter(s, _POS_INF), s)


def sub_down(a, b):
    return add_down(a, -_arr(b))


def sub_up(a, b):
    return add_up(a, -_arr(b))


def _split(a):
    c = _SPLIT * a
    hi = c - (c - a)
    return hi, a - hi


def _product_error(a, b, p):
    """``(a*b) - p`` exactly where safe; NaN marks unsafe entries."""
    with np.errstate(over="ignore", invalid="ignore"):
        ah, al = _split(a)
        bh, bl = _split(b)
        err = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    safe = (np.abs(a) < _SPLIT_MAX) & (np.abs(b) < _SPLIT_MAX) & (np.abs(p) >= _PROD_MIN)
    exact_zero = (a == 0) | (b == 0)
    err = np.where(exact_zero, 0.0, np.where(safe, err, np.nan))
    return err


def mul_down(a, b):
    a, b = _arr(a), _arr(b)
    with np.errstate(over="ignore", invalid="ignore"):
        p = a * b
    _finite(p)
    err = _product_error(a, b, p)
    return np.where((err < 0) | np.isnan(err), np.nextafter(p, _NEG_INF), p)


def mul_up(a, b):
    a, b = _arr(a), _arr(b)
    with np.errstate(over="ignore", invalid="ignore"):
        p = a * b
    _finite(p)
    err = _product_error(a, b, p)
    return np.where((err > 0) | np.isnan(err), np.nextafter(p, _POS_INF), p)


def fraction_bounds(c) -> tuple[float, float]:
    """Tightest binary64 interval around a rational (or float) constant."""
    if isinstance(c, complex):
        raise IntervalError("complex coefficients cannot be enclosed by a real interval")
    q = Fraction(c)
    f = float(q)
    if not np.isfinite(f):
        raise IntervalError(f"constant {c} overflows binary64")
    e = Fraction(f)
    if e == q:
        return f, f
    if e < q:
        return f, float(np.nextafter(f, _POS_INF))
    return float(np.nextafter(f, _NEG_INF)), f


# -- interval arrays ---------------------------------------------------------

class IArray:
    """Array of real intervals ``[lo, hi]`` (elementwise, numpy broadcasting)."""

    __slots__ = ("lo", "hi")
    __array_priority__ = 100  # make ndarray <op> IArray defer to us

    def __init__(self, lo, hi=None):
        lo = _arr(lo).copy()
        hi = lo.copy() if hi is None else _arr(hi).copy()
        if lo.shape != hi.shape:
            lo, hi = np.broadcast_arrays(lo, hi)
            lo, hi = lo.copy(), hi.copy()
        _finite(lo, hi)
        if np.any(lo > hi):
            raise IntervalError("lower bound exceeds upper bound")
        self.lo = lo
        self.hi = hi

    @classmethod
    def point(cls, x) -> IArray:
        return cls(x)

    @classmethod
    def from_exact(cls, values: Iterable) -> IArray:
        vals = np.asarray(values, dtype=object)
        lo = np.empty(vals.shape)
        hi = np.empty(vals.shape)
        for idx, v in np.ndenumerate(vals):
            lo[idx], hi[idx] = fraction_bounds(v)
        return cls(lo, hi)

    @classmethod
    def symmetric(cls, r) -> IArray:
        r = np.abs(_arr(r))
        return cls(-r, r)

    @classmethod
    def zeros(cls, shape) -> IArray:
        return cls(np.zeros(shape))

    # -- basic views ------------------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.lo.shape

    def __len__(self) -> int:
        return len(self.lo)

    def __getitem__(self, idx) -> IArray:
        return IArray(self.lo[idx], self.hi[idx])

    def __setitem__(self, idx, value) -> None:
        v = as_interval(value)
        self.lo[idx] = v.lo
        self.hi[idx] = v.hi

    @property
    def T(self) -> IArray:
        return IArray(self.lo.T, self.hi.T)

    def copy(self) -> IArray:
        return IArray(self.lo, self.hi)

    def __repr__(self) -> str:
        if self.lo.ndim == 0:
            return f"[{self.lo!r}, {self.hi!r}]"
        return f"IArray(lo={self.lo!r}, hi={self.hi!r})"

    # -- measures -------------------------------------------------------------

    def width(self) -> np.ndarray:
        return sub_up(self.hi, self.lo)

    def mid(self) -> np.ndarray:
        m = 0.5 * self.lo + 0.5 * self.hi
        return np.clip(m, self.lo, self.hi)

    def midrad(self) -> tuple[np.ndarray, np.ndarray]:
        """``(m, r)`` with ``[lo, hi]`` contained in ``[m - r, m + r]``."""
        m = self.mid()
        return m, np.maximum(sub_up(m, self.lo), sub_up(self.hi, m))

    def mag(self) -> np.ndarray:
        return np.maximum(np.abs(self.lo), np.abs(self.hi))

    def mig(self) -> np.ndarray:
        return np.where((self.lo <= 0) & (self.hi >= 0), 0.0, np.minimum(np.abs(self.lo), np.abs(self.hi)))

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x)
        if x.dtype == object:
            lo = np.vectorize(Fraction, otypes=[object])(self.lo)
            hi = np.vectorize(Fraction, otypes=[object])(self.hi)
            return (lo <= x) & (x <= hi)
        return (self.lo <= x) & (x <= self.hi)

    def subset_interior(self, other: IArray) -> bool:
        """Every component lies strictly inside the matching one of ``other``."""
        return bool(np.all(other.lo < self.lo) and np.all(self.hi < other.hi))

    def subset(self, other: IArray) -> bool:
        return bool(np.all(other.lo <= self.lo) and np.all(self.hi <= other.hi))

    def hull(self, other) -> IArray:
        o = as_interval(other)
        return IArray(np.minimum(self.lo, o.lo), np.maximum(self.hi, o.hi))

    # -- arithmetic -------------------------------------------------------------

    def __neg__(self) -> IArray:
        return IArray(-self.hi, -self.lo)

    def __add__(self, other) -> IArray:
        o = as_interval(other)
        return IArray(add_down(self.lo, o.lo), add_up(self.hi, o.hi))

    __radd__ = __add__

    def __sub__(self, other) -> IArray:
        o = as_interval(other)
        return IArray(sub_down(self.lo, o.hi), sub_up(self.hi, o.lo))

    def __rsub__(self, other) -> IArray:
        return as_interval(other) - self

    def __mul__(self, other) -> IArray:
        o = as_interval(other)
        pairs = ((self.lo, o.lo), (self.lo, o.hi), (self.hi, o.lo), (self.hi, o.hi))
        lo = np.minimum.reduce([mul_down(a, b) for a, b in pairs])
        hi = np.maximum.reduce([mul_up(a, b) for a, b in pairs])
        return IArray(lo, hi)

    __rmul__ = __mul__

    def reciprocal(self) -> IArray:
        if np.any((self.lo <= 0) & (self.hi >= 0)):
            raise IntervalError("division by an interval containing zero")
        with np.errstate(over="ignore"):
            lo = np.nextafter(1.0 / self.hi, _NEG_INF)
            hi = np.nextafter(1.0 / self.lo, _POS_INF)
        return IArray(lo, hi)

    def __truediv__(self, other) -> IArray:
        return self * as_interval(other).reciprocal()

    def __rtruediv__(self, other) -> IArray:
        return as_interval(other) * self.reciprocal()

    def __pow__(self, k) -> IArray:
        return ipow(self, np.broadcast_to(np.asarray(k, dtype=np.int64), self.shape))

    def sum(self) -> IArray:
        """Sum over the last axis."""
        lo = np.zeros(self.shape[:-1])
        hi = np.zeros(self.shape[:-1])
        for j in range(self.shape[-1]):
            lo = add_down(lo, self.lo[..., j])
            hi = add_up(hi, self.hi[..., j])
        return IArray(lo, hi)

    def __matmul__(self, other) -> IArray:
        return imatmul(self, other)

    def __rmatmul__(self, other) -> IArray:
        return imatmul(other, self)


def as_interval(x) -> IArray:
    if isinstance(x, IArray):
        return x
    if isinstance(x, Interval):
        return IArray(x.lo, x.hi)
    arr = np.asarray(x)
    if arr.dtype == object:
        return IArray.from_exact(arr)
    if arr.dtype.kind == "c":
        raise IntervalError("complex values cannot be enclosed by a real interval")
    return IArray(arr)


def ipow(X: IArray, k: np.ndarray) -> IArray:
    """Elementwise ``X ** k`` for nonnegative integer exponents ``k``."""
    k = np.asarray(k, dtype=np.int64)
    if np.any(k < 0):
        raise IntervalError("negative exponents are not supported")
    lo_abs, hi_abs = np.abs(X.lo), np.abs(X.hi)
    straddle = (X.lo < 0) & (X.hi > 0)
    mig = np.where(straddle, 0.0, np.minimum(lo_abs, hi_abs))
    mag = np.maximum(lo_abs, hi_abs)
    out_lo = np.ones(X.shape)
    out_hi = np.ones(X.shape)
    kmax = int(k.max()) if k.size else 0
    # directed powers of |lo|, |hi|, mig and mag
    pd_lo = np.ones(X.shape)
    pu_lo = np.ones(X.shape)
    pd_hi = np.ones(X.shape)
    pu_hi = np.ones(X.shape)
    pd_mig = np.ones(X.shape)
    pu_mag = np.ones(X.shape)
    for p in range(1, kmax + 1):
        pd_lo, pu_lo = mul_down(pd_lo, lo_abs), mul_up(pu_lo, lo_abs)
        pd_hi, pu_hi = mul_down(pd_hi, hi_abs), mul_up(pu_hi, hi_abs)
        pd_mig, pu_mag = mul_down(pd_mig, mig), mul_up(pu_mag, mag)
        sel = k == p
        if not np.any(sel):
            continue
        if p % 2 == 0:
            lo, hi = pd_mig, pu_mag
        else:
            lo = np.where(X.lo >= 0, pd_lo, -pu_lo)
            hi = np.where(X.hi >= 0, pu_hi, -pd_hi)
        out_lo = np.where(sel, lo, out_lo)
        out_hi = np.where(sel, hi, out_hi)
    return IArray(out_lo, out_hi)


# -- matrix products -----------------------------------------------------------

def _dot_error(A: np.ndarray, B: np.ndarray, E: np.ndarray | None = None) -> np.ndarray:
    """Upper bound on ``|fl(A @ B) - A @ B|`` for round-to-nearest BLAS.

    Uses ``|error| <= gamma_n |A||B|`` with ``gamma_n = n u / (1 - n u)``,
    doubled for headroom, plus an underflow allowance.
    """
    n = A.shape[-1] if A.ndim else 1
    if n * U > 1e-3:
        raise IntervalError("dimension too large for the a-priori dot product bound")
    if E is None:
        E = np.abs(A) @ np.abs(B)
    _finite(E)
    coef = 2.0 * (n + 2) * U * (1.0 + 4.0 * U)
    err = mul_up(coef, E)
    err = add_up(err, 4.0 * (n + 1) * ETA)
    return np.nextafter(err, _POS_INF)


def _upper_sum_products(pairs, n: int) -> np.ndarray:
    """Upper bound on ``sum(A @ B)`` over nonnegative factor pairs."""
    total = None
    for A, B in pairs:
        with np.errstate(over="ignore", invalid="ignore"):
            T = A @ B
        _finite(T)
        total = T if total is None else add_up(total, T)
    coef = 1.0 + 2.0 * (n + 3) * U
    return np.nextafter(add_up(mul_up(coef, total), 4.0 * (n + 1) * ETA), _POS_INF)


def imatmul(A, B) -> IArray:
    """Enclosure of ``{a @ b : a in A, b in B}``; plain arrays are point intervals."""
    a_point = not isinstance(A, (IArray, Interval))
    b_point = not isinstance(B, (IArray, Interval))
    if a_point:
        mA, rA = _arr(A), None
    else:
        mA, rA = as_interval(A).midrad()
    if b_point:
        mB, rB = _arr(B), None
    else:
        mB, rB = as_interval(B).midrad()
    n = mA.shape[-1]
    with np.errstate(over="ignore", invalid="ignore"):
        C = mA @ mB
    _finite(C)
    rad = _dot_error(mA, mB)
    pairs = []
    if rB is not None:
        pairs.append((np.abs(mA), rB))
    if rA is not None:
        pairs.append((rA, add_up(np.abs(mB), rB) if rB is not None else np.abs(mB)))
    if pairs:
        rad = add_up(rad, _upper_sum_products(pairs, n))
    return IArray(sub_down(C, rad), add_up(C, rad))


# -- scalar intervals ------------------------------------------------------------

class Interval:
    """A single real interval; a thin scalar face of :class:`IArray`."""

    __slots__ = ("lo", "hi")

    def __init__(self, lo, hi=None):
        if hi is None:
            hi = lo
        # exact bounds are rounded outward, never to nearest
        if isinstance(lo, (Fraction, int)) and not isinstance(lo, bool):
            lo = fraction_bounds(lo)[0]
        if isinstance(hi, (Fraction, int)) and not isinstance(hi, bool):
            hi = fraction_bounds(hi)[1]
        lo, hi = float(lo), float(hi)
        if not (np.isfinite(lo) and np.isfinite(hi)):
            raise IntervalError("interval bounds must be finite")
        if lo > hi:
            raise IntervalError("lower bound exceeds upper bound")
        self.lo = lo
        self.hi = hi

    @classmethod
    def _from(cls, a: IArray) -> Interval:
        return cls(float(a.lo), float(a.hi))

    def _arr(self) -> IArray:
        return IArray(self.lo, self.hi)

    def __add__(self, o):
        return Interval._from(self._arr() + _scalar(o))

    __radd__ = __add__

    def __sub__(self, o):
        return Interval._from(self._arr() - _scalar(o))

    def __rsub__(self, o):
        return Interval._from(_scalar(o) - self._arr())

    def __mul__(self, o):
        return Interval._from(self._arr() * _scalar(o))

    __rmul__ = __mul__

    def __truediv__(self, o):
        return Interval._from(self._arr() / _scalar(o))

    def __rtruediv__(self, o):
        return Interval._from(_scalar(o) / self._arr())

    def __neg__(self):
        return Interval(-self.hi, -self.lo)

    def __pow__(self, k: int):
        return Interval._from(ipow(self._arr(), np.asarray(k)))

    def hull(self, o) -> Interval:
        o = _scalar(o)
        return Interval(min(self.lo, float(o.lo)), max(self.hi, float(o.hi)))

    def scale(self, s) -> Interval:
        return self * s

    def width(self) -> float:
        return float(sub_up(self.hi, self.lo))

    def mid(self) -> float:
        return float(self._arr().mid())

    def __contains__(self, x) -> bool:
        if isinstance(x, Fraction):
            return Fraction(self.lo) <= x <= Fraction(self.hi)
        return self.lo <= x <= self.hi

    def __eq__(self, o) -> bool:
        return isinstance(o, Interval) and self.lo == o.lo and self.hi == o.hi

    def __hash__(self) -> int:
        return hash((self.lo, self.hi))

    def __repr__(self) -> str:
        return f"Interval({self.lo!r}, {self.hi!r})"


def _scalar(o) -> IArray:
    if isinstance(o, Interval):
        return o._arr()
    if isinstance(o, IArray):
        return o
    return IArray(*fraction_bounds(o))


# -- polynomial enclosures --------------------------------------------------------

def batch_coeff_bounds(batch) -> IArray:
    cached = getattr(batch, "_coeff_interval", None)
    if cached is None:
        cached = IArray.from_exact(np.array(batch.exact_coeffs, dtype=object)) if len(batch.exact_coeffs) \
            else IArray(np.zeros(0))
        batch._coeff_interval = cached
    return cached


def _slots(batch) -> tuple[np.ndarray, int]:
    cached = getattr(batch, "_slot_table", None)
    if cached is None:
        counts = np.zeros(batch.npolys, dtype=np.int64)
        slot = np.empty(len(batch.owner), dtype=np.int64)
        for t, r in enumerate(batch.owner):
            slot[t] = counts[r]
            counts[r] += 1
        cached = (slot, int(counts.max()) if batch.npolys and len(slot) else 0)
        batch._slot_table = cached
    return cached


def ieval_batch(batch, X) -> IArray:
    """Enclosures of every polynomial of a :class:`~breadthone.poly.PolyBatch` over ``X``."""
    X = as_interval(X)
    if len(X) != batch.nvars:
        raise IntervalError(f"box has {len(X)} coordinates, polynomials have {batch.nvars}")
    T = len(batch.owner)
    out = IArray.zeros(batch.npolys)
    if T == 0:
        return out
    mono = batch_coeff_bounds(batch)
    for c in range(batch.var.shape[1]):
        col = batch.exp[:, c]
        if not np.any(col):
            continue
        mono = mono * ipow(X[batch.var[:, c]], col)
    slot, width = _slots(batch)
    lo = np.zeros((batch.npolys, width))
    hi = np.zeros((batch.npolys, width))
    lo[batch.owner, slot] = mono.lo
    hi[batch.owner, slot] = mono.hi
    return IArray(lo, hi).sum()


def ieval_poly(p, X) -> Interval:
    """Naive term-by-term enclosure of the range of ``p`` over the box ``X``."""
    from .poly import PolyBatch

    if isinstance(X, (list, tuple)):
        X = _box_from_sequence(X)
    X = as_interval(X)
    r = ieval_batch(PolyBatch([p], p.nvars), X)
    return Interval(float(r.lo[0]), float(r.hi[0]))


def _box_from_sequence(xs: Sequence) -> IArray:
    if all(isinstance(v, Interval) for v in xs):
        return IArray([v.lo for v in xs], [v.hi for v in xs])
    parts = [_scalar(v) for v in xs]
    return IArray([float(v.lo) for v in parts], [float(v.hi) for v in parts])
