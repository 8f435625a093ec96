"""Affine forms: range arithmetic that preserves first-order correlations.

An affine form is ``center + sum(coeff_i * e_i) + err``, where every noise
symbol ``e_i`` ranges over [-1, 1] and ``err`` is a non-negative radius
collecting all approximation errors (assumed uncorrelated with everything,
including other forms' err budgets).  Linear operations are exact up to
floating point; nonlinear operations over-approximate by folding their
remainder into ``center``/``err``.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Mapping

from .interval import Interval

# Coefficients below this magnitude are folded into err to bound term growth.
COEFF_EPS = 1e-12


class DomainError(ValueError):
    """Input range falls outside the domain of a nonlinear function."""


class SymbolRegistry:
    """Allocates noise-symbol ids monotonically; ids are never reused."""

    def __init__(self) -> None:
        self._next = 1
        self._lock = threading.Lock()

    def fresh(self) -> int:
        with self._lock:
            i = self._next
            self._next += 1
            return i

    @property
    def allocated(self) -> int:
        return self._next - 1


@dataclass(frozen=True)
class AffineForm:
    """Immutable affine form; ``terms`` maps noise-symbol id -> coefficient."""

    center: float
    terms: Mapping[int, float] = field(default_factory=dict)
    err: float = 0.0

    def __post_init__(self) -> None:
        center = float(self.center)
        err = float(self.err)
        if not math.isfinite(center):
            raise ValueError(f"non-finite center: {center}")
        if not math.isfinite(err) or err < 0.0:
            raise ValueError(f"err must be finite and non-negative: {err}")
        cleaned: dict[int, float] = {}
        for sym, coeff in self.terms.items():
            coeff = float(coeff)
            if not math.isfinite(coeff):
                raise ValueError(f"non-finite coefficient for e{sym}: {coeff}")
            if abs(coeff) < COEFF_EPS:
                err += abs(coeff)
            else:
                cleaned[sym] = coeff
        object.__setattr__(self, "terms", cleaned)
        object.__setattr__(self, "err", err)
        object.__setattr__(self, "center", center + 0.0)  # normalize -0.0

    # -- classification ----------------------------------------------------

    @property
    def is_exact(self) -> bool:
        return not self.terms and self.err == 0.0

    @property
    def is_zero(self) -> bool:
        return self.center == 0.0 and self.is_exact

    def deviation(self) -> float:
        """Total radius of the pure noise part, err included."""
        return sum(abs(c) for c in self._sorted_terms()) + self.err

    def _sorted_terms(self) -> list[float]:
        return [self.terms[k] for k in sorted(self.terms)]

    # -- arithmetic --------------------------------------------------------

    def __add__(self, other: "AffineForm | float | int") -> "AffineForm":
        return add(self, _lift(other))

    def __radd__(self, other: float | int) -> "AffineForm":
        return add(_lift(other), self)

    def __sub__(self, other: "AffineForm | float | int") -> "AffineForm":
        return sub(self, _lift(other))

    def __rsub__(self, other: float | int) -> "AffineForm":
        return sub(_lift(other), self)

    def __neg__(self) -> "AffineForm":
        return scale(-1.0, self)

    def __mul__(self, other: "AffineForm | float | int") -> "AffineForm":
        if isinstance(other, AffineForm):
            return mul(self, other)
        return scale(float(other), self)

    def __rmul__(self, other: float | int) -> "AffineForm":
        return scale(float(other), self)

    # -- presentation ------------------------------------------------------

    def __str__(self) -> str:
        parts = [repr(self.center)]
        for sym in sorted(self.terms):
            coeff = self.terms[sym]
            sign = "-" if coeff < 0 else "+"
            parts.append(f"{sign} {abs(coeff)!r}*e{sym}")
        text = " ".join(parts)
        if self.err > 0.0:
            text += f" ± {self.err!r}"
        return text

    def to_dict(self) -> dict:
        return {
            "center": self.center,
            "terms": {str(k): self.terms[k] for k in sorted(self.terms)},
            "err": self.err,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AffineForm":
        return cls(
            center=float(data["center"]),
            terms={int(k): float(v) for k, v in data["terms"].items()},
            err=float(data["err"]),
        )

    @classmethod
    def constant(cls, value: float) -> "AffineForm":
        return cls(float(value))


def _lift(value: "AffineForm | float | int") -> AffineForm:
    if isinstance(value, AffineForm):
        return value
    return AffineForm.constant(float(value))


def new_uncertain(registry: SymbolRegistry, center: float, radius: float) -> AffineForm:
    """A fresh basic uncertainty ``center + radius * e_new`` (err = 0)."""
    center = float(center)
    radius = float(radius)
    if not (math.isfinite(center) and math.isfinite(radius)):
        raise ValueError(f"non-finite arguments: center={center}, radius={radius}")
    if radius < 0.0:
        raise ValueError(f"radius must be non-negative: {radius}")
    sym = registry.fresh()
    return AffineForm(center, {sym: radius})


def add(x: AffineForm, y: AffineForm) -> AffineForm:
    terms = dict(x.terms)
    for sym, coeff in y.terms.items():
        terms[sym] = terms.get(sym, 0.0) + coeff
    return AffineForm(x.center + y.center, terms, x.err + y.err)


def sub(x: AffineForm, y: AffineForm) -> AffineForm:
    terms = dict(x.terms)
    for sym, coeff in y.terms.items():
        terms[sym] = terms.get(sym, 0.0) - coeff
    return AffineForm(x.center - y.center, terms, x.err + y.err)


def scale(c: float, x: AffineForm) -> AffineForm:
    c = float(c)
    if not math.isfinite(c):
        raise ValueError(f"non-finite scale factor: {c}")
    return AffineForm(c * x.center, {s: c * v for s, v in x.terms.items()}, abs(c) * x.err)


def mul_with_remainder(x: AffineForm, y: AffineForm) -> tuple[AffineForm, Interval]:
    """Product split into its affine part and the quadratic remainder interval.

    The affine part carries ``x0*y0 + sum((x0*yi + y0*xi) * e_i)`` plus the
    centers' contribution to err.  The remainder bounds the pure quadratic
    part termwise: matching symbols contribute ``coeff * e_i^2`` with
    ``e_i^2 in [0, 1]``, every other pairing is symmetric.
    """
    terms: dict[int, float] = {}
    for sym, coeff in x.terms.items():
        terms[sym] = y.center * coeff
    for sym, coeff in y.terms.items():
        terms[sym] = terms.get(sym, 0.0) + x.center * coeff
    affine = AffineForm(
        x.center * y.center,
        terms,
        abs(x.center) * y.err + abs(y.center) * x.err,
    )

    rx = x.deviation()
    ry = y.deviation()
    sym_rad = rx * ry
    lo = hi = 0.0
    for sym, cx in x.terms.items():
        cy = y.terms.get(sym)
        if cy is None:
            continue
        square = cx * cy  # e_i^2 term, e_i^2 in [0, 1]
        sym_rad -= abs(square)
        lo += min(0.0, square)
        hi += max(0.0, square)
    sym_rad = max(sym_rad, 0.0)  # guard fp cancellation
    return affine, Interval(lo - sym_rad, hi + sym_rad)


def mul(x: AffineForm, y: AffineForm) -> AffineForm:
    affine, rem = mul_with_remainder(x, y)
    # Midpoint of the remainder moves the center; its radius goes to err.
    return AffineForm(affine.center + rem.mid, affine.terms, affine.err + rem.rad)


def range_of(x: AffineForm) -> Interval:
    rad = x.deviation()
    return Interval(x.center - rad, x.center + rad)


def evaluate(x: AffineForm, assignment: Mapping[int, float], err_value: float = 0.0) -> float:
    """Concrete value under a noise assignment; err contributes ``err_value * err``."""
    total = x.center + err_value * x.err
    for sym in sorted(x.terms):
        try:
            total += x.terms[sym] * assignment[sym]
        except KeyError:
            raise KeyError(f"assignment missing noise symbol e{sym}") from None
    return total


# -- nonlinear unary operations --------------------------------------------


class ApproxMode(Enum):
    MIN_RANGE = "min-range"
    CHEBYSHEV = "chebyshev"


@dataclass(frozen=True)
class UnaryFunction:
    """Descriptor for a function that is monotone and convex or concave on any
    interval inside its domain.  ``solve_slope`` inverts the derivative."""

    name: str
    fn: Callable[[float], float]
    deriv: Callable[[float], float]
    solve_slope: Callable[[float, Interval], float]
    in_domain: Callable[[Interval], bool]


def _recip_solve(slope: float, iv: Interval) -> float:
    u = math.sqrt(-1.0 / slope)
    return u if iv.lo > 0 else -u


RECIPROCAL = UnaryFunction(
    name="reciprocal",
    fn=lambda v: 1.0 / v,
    deriv=lambda v: -1.0 / (v * v),
    solve_slope=_recip_solve,
    in_domain=lambda iv: iv.lo > 0.0 or iv.hi < 0.0,
)

SQRT = UnaryFunction(
    name="sqrt",
    fn=math.sqrt,
    deriv=lambda v: 0.5 / math.sqrt(v),
    solve_slope=lambda slope, iv: 1.0 / (4.0 * slope * slope),
    in_domain=lambda iv: iv.lo >= 0.0,
)

EXP = UnaryFunction(
    name="exp",
    fn=math.exp,
    deriv=math.exp,
    solve_slope=lambda slope, iv: math.log(slope),
    in_domain=lambda iv: True,
)

UNARY_FUNCTIONS = {f.name: f for f in (RECIPROCAL, SQRT, EXP)}


def approx_unary(f: UnaryFunction, x: AffineForm, mode: ApproxMode) -> AffineForm:
    """Linear inclusion ``alpha*x + zeta (+/- delta)`` of ``f`` over range(x).

    MIN_RANGE makes the result range equal the exact image of range(x);
    CHEBYSHEV minimizes the added error radius delta.
    """
    iv = range_of(x)
    if not f.in_domain(iv):
        raise DomainError(f"{f.name} undefined over {iv}")
    if iv.width < 1e-12:
        # Degenerate input: a constant, widened by the residual image width.
        c = f.fn(iv.mid)
        slack = max(abs(f.fn(iv.lo) - c), abs(f.fn(iv.hi) - c))
        return _check_finite(AffineForm(c, {}, slack), f)

    fa, fb = f.fn(iv.lo), f.fn(iv.hi)
    if mode is ApproxMode.MIN_RANGE:
        da, db = f.deriv(iv.lo), f.deriv(iv.hi)
        alpha = da if abs(da) <= abs(db) else db
        ga = fa - alpha * iv.lo
        gb = fb - alpha * iv.hi
        zeta = 0.5 * (ga + gb)
        delta = 0.5 * abs(gb - ga)
    elif mode is ApproxMode.CHEBYSHEV:
        alpha = (fb - fa) / iv.width
        u = min(max(f.solve_slope(alpha, iv), iv.lo), iv.hi)
        gu = f.fn(u) - alpha * u
        ga = fa - alpha * iv.lo
        zeta = 0.5 * (ga + gu)
        delta = 0.5 * abs(ga - gu)
    else:
        raise ValueError(f"unknown approximation mode: {mode}")

    result = AffineForm(
        alpha * x.center + zeta,
        {s: alpha * v for s, v in x.terms.items()},
        abs(alpha) * x.err + delta,
    )
    return _check_finite(result, f)


def _check_finite(form: AffineForm, f: UnaryFunction) -> AffineForm:
    if not math.isfinite(form.center + form.err):
        raise DomainError(f"{f.name} overflowed over the input range")
    return form
