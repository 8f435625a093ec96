"""Range tightening of affine objectives under path constraints.

Each path through a decision diagram imposes linear constraints on the noise
symbols (one per comparison condition, with the branch polarity).  ``tighten``
minimizes and maximizes an affine objective over the [-1, 1] box intersected
with those constraints, via a small self-contained bounded-variable primal
simplex (Bland's rule, so it terminates).

Strict inequalities are relaxed to closed ones for the solves, which is a
sound over-approximation.  Emptiness of the *open* region is still detected
exactly: an auxiliary LP maximizes the joint slack margin of all strict
constraints; for affine constraints a positive margin exists iff the open
region is non-empty.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .affine import AffineForm, range_of
from .interval import Interval

SENSES = ("<", "<=", ">", ">=", "==")

_TOL = 1e-9
_STRICT_MARGIN = 1e-10
_MAX_ITER = 5000


@dataclass(frozen=True)
class LinearConstraint:
    """``form sense 0`` when polarity is True, its negation otherwise."""

    form: AffineForm
    sense: str
    polarity: bool = True

    def __post_init__(self) -> None:
        if self.sense not in SENSES:
            raise ValueError(f"unknown sense: {self.sense!r}")

    def __str__(self) -> str:
        pol = "" if self.polarity else "not "
        return f"{pol}({self.form} {self.sense} 0)"


@dataclass(frozen=True)
class BoundsResult:
    feasible: bool
    interval: Interval | None = None
    tightened: bool = True

    @classmethod
    def of(cls, interval: Interval, tightened: bool = True) -> "BoundsResult":
        return cls(True, interval, tightened)

    @classmethod
    def infeasible(cls) -> "BoundsResult":
        return cls(False, None)


class _SolverFailure(Exception):
    """Numerical breakdown; callers fall back to the unconstrained range."""


# -- row construction -------------------------------------------------------

# Effective closed direction of each (sense, polarity) pair.  None drops the
# constraint (the negation of == is non-convex and relaxes to everything).
# The bool marks whether the original constraint was strict.
_EFFECTIVE: dict[tuple[str, bool], tuple[str, bool] | None] = {
    ("<", True): ("<=", True),
    ("<=", True): ("<=", False),
    (">", True): (">=", True),
    (">=", True): (">=", False),
    ("==", True): ("==", False),
    ("<", False): (">=", False),
    ("<=", False): (">=", True),
    (">", False): ("<=", False),
    (">=", False): ("<=", True),
    ("==", False): None,
}


@dataclass(frozen=True)
class _Row:
    coeffs: dict[int, float]  # noise-symbol id -> coefficient
    err: float                # err radius of the constraint form (own box var)
    rel: str                  # '<=' or '>='
    rhs: float
    strict: bool


def _build_rows(constraints: Sequence[LinearConstraint]) -> list[_Row]:
    rows: list[_Row] = []
    for con in constraints:
        eff = _EFFECTIVE[(con.sense, con.polarity)]
        if eff is None:
            continue
        rel, strict = eff
        f = con.form
        if rel == "==":
            rows.append(_Row(dict(f.terms), f.err, "<=", -f.center, False))
            rows.append(_Row(dict(f.terms), f.err, ">=", -f.center, False))
        else:
            rows.append(_Row(dict(f.terms), f.err, rel, -f.center, strict))
    return rows


def _assemble(rows: list[_Row], extra_syms: Sequence[int] = ()) -> tuple[list[int], np.ndarray, np.ndarray, list[bool]]:
    """Rows as <=-form matrix over [noise symbols..., one err var per row]."""
    syms = sorted({s for r in rows for s in r.coeffs} | set(extra_syms))
    col = {s: j for j, s in enumerate(syms)}
    n = len(syms)
    err_cols = [i for i, r in enumerate(rows) if r.err > 0.0]
    ncols = n + len(err_cols)
    A = np.zeros((len(rows), ncols))
    b = np.zeros(len(rows))
    strict = []
    err_j = {i: n + k for k, i in enumerate(err_cols)}
    for i, r in enumerate(rows):
        sign = 1.0 if r.rel == "<=" else -1.0
        for s, c in r.coeffs.items():
            A[i, col[s]] = sign * c
        if r.err > 0.0:
            A[i, err_j[i]] = sign * r.err
        b[i] = sign * r.rhs
        strict.append(r.strict)
    return syms, A, b, strict


# -- public API --------------------------------------------------------------


def strictly_feasible(
    constraints: Sequence[LinearConstraint],
    on_instance: Callable[[str], None] | None = None,
) -> bool:
    """Whether some point in the [-1,1] box satisfies every constraint with
    its original strictness.  Numerical failure reports True (sound: callers
    only use False to prune)."""
    rows = _build_rows(constraints)
    if not rows:
        return True
    syms, A, b, strict = _assemble(rows)
    m, ncols = A.shape
    lo = np.full(ncols, -1.0)
    hi = np.ones(ncols)
    if not any(strict):
        try:
            value, _ = _maximize(np.zeros(ncols), A, b, lo, hi)
        except _SolverFailure:
            return True
        if on_instance is not None:
            on_instance(_format_instance("feasibility", syms, A, b, np.zeros(ncols), value))
        return value is not None
    # max t subject to: strict rows tightened by t, closed rows as-is.
    At = np.hstack([A, np.zeros((m, 1))])
    for i, s in enumerate(strict):
        if s:
            At[i, -1] = 1.0
    c = np.zeros(ncols + 1)
    c[-1] = 1.0
    lo_t = np.append(lo, 0.0)
    hi_t = np.append(hi, np.inf)
    try:
        value, _ = _maximize(c, At, b, lo_t, hi_t)
    except _SolverFailure:
        return True
    if on_instance is not None:
        on_instance(_format_instance("strict-margin", syms, At, b, c, value))
    return value is not None and value > _STRICT_MARGIN


def tighten(
    objective: AffineForm,
    constraints: Sequence[LinearConstraint],
    on_instance: Callable[[str], None] | None = None,
) -> BoundsResult:
    """Constrained bounds of ``objective``; always inside its unconstrained
    range and never tighter than the true constrained range."""
    base = range_of(objective)
    rows = _build_rows(constraints)
    if not rows:
        return BoundsResult.of(base)
    if not strictly_feasible(constraints, on_instance):
        return BoundsResult.infeasible()

    syms, A, b, _ = _assemble(rows, extra_syms=objective.terms.keys())
    ncols = A.shape[1]
    lo = np.full(ncols, -1.0)
    hi = np.ones(ncols)
    c = np.zeros(ncols)
    for j, s in enumerate(syms):
        c[j] = objective.terms.get(s, 0.0)

    try:
        vmax, _ = _maximize(c, A, b, lo, hi)
        vmin, _ = _maximize(-c, A, b, lo, hi)
    except _SolverFailure:
        return BoundsResult.of(base, tightened=False)
    if vmax is None or vmin is None:
        # The closed relaxation already had a feasibility witness, so this is
        # numerical disagreement; fall back soundly.
        return BoundsResult.of(base, tightened=False)

    lo_val = objective.center - vmin - objective.err
    hi_val = objective.center + vmax + objective.err
    if on_instance is not None:
        on_instance(_format_instance("tighten", syms, A, b, c, (lo_val, hi_val)))
    lo_c = max(lo_val, base.lo)
    hi_c = min(hi_val, base.hi)
    if lo_c > hi_c:  # fp noise only; collapse to a point
        lo_c = hi_c = 0.5 * (lo_c + hi_c)
    return BoundsResult.of(Interval(lo_c, hi_c))


def _format_instance(kind, syms, A, b, c, result) -> str:
    lines = [f"lp {kind}: {len(b)} rows, {A.shape[1]} cols"]
    lines.append("  vars: " + " ".join(f"e{s}" for s in syms) + (" ..." if A.shape[1] > len(syms) else ""))
    lines.append("  max  " + " ".join(f"{v:+.6g}" for v in c))
    for i in range(len(b)):
        lines.append("  row  " + " ".join(f"{v:+.6g}" for v in A[i]) + f" <= {b[i]:.6g}")
    lines.append(f"  result: {result}")
    return "\n".join(lines) + "\n"


# -- bounded-variable primal simplex -----------------------------------------

_AT_LOWER, _AT_UPPER, _BASIC = 0, 1, 2


def _maximize(
    c: np.ndarray,
    A: np.ndarray,
    b: np.ndarray,
    lo: np.ndarray,
    hi: np.ndarray,
    max_iter: int = _MAX_ITER,
) -> tuple[float | None, np.ndarray | None]:
    """max c.x  s.t.  A x <= b,  lo <= x <= hi  (lo finite, hi may be +inf).

    Returns (value, x) or (None, None) when infeasible.  Raises
    _SolverFailure on numerical breakdown or iteration exhaustion.
    """
    m, n = A.shape
    if m == 0:
        x = np.where(c > 0, np.minimum(hi, 1e18), lo)
        return float(c @ x), x

    T = np.hstack([A.astype(float), np.eye(m)])
    lob = np.concatenate([lo, np.zeros(m)])
    upb = np.concatenate([hi, np.full(m, np.inf)])
    nstruct = n + m

    x = lob[:nstruct].copy()
    resid = b - A @ lo
    basis = np.arange(n, n + m)
    stat = np.full(nstruct, _AT_LOWER, dtype=int)
    stat[basis] = _BASIC
    xb = resid.copy()

    # Rows starting infeasible get an artificial basic variable (row negated
    # so the basis matrix stays the identity).
    art_rows = np.where(resid < -_TOL)[0]
    if art_rows.size:
        k = art_rows.size
        T = np.hstack([T, np.zeros((m, k))])
        lob = np.concatenate([lob, np.zeros(k)])
        upb = np.concatenate([upb, np.full(k, np.inf)])
        stat = np.concatenate([stat, np.full(k, _BASIC)])
        for j, i in enumerate(art_rows):
            T[i, :nstruct] *= -1.0
            xb[i] = -resid[i]
            T[i, nstruct + j] = 1.0
            stat[basis[i]] = _AT_LOWER  # the slack leaves the basis
            basis[i] = nstruct + j

        phase1 = np.zeros(T.shape[1])
        phase1[nstruct:] = -1.0
        _iterate(T, xb, basis, stat, lob, upb, phase1, max_iter)
        if -(phase1 @ _values(T.shape[1], basis, stat, lob, upb, xb)) > 1e-7:
            return None, None
        # Freeze artificials at zero for phase 2.
        lob[nstruct:] = 0.0
        upb[nstruct:] = 0.0

    cost = np.zeros(T.shape[1])
    cost[:n] = c
    _iterate(T, xb, basis, stat, lob, upb, cost, max_iter)
    full = _values(T.shape[1], basis, stat, lob, upb, xb)
    return float(c @ full[:n]), full[:n]


def _values(ncols, basis, stat, lob, upb, xb) -> np.ndarray:
    v = np.where(stat[:ncols] == _AT_UPPER, upb[:ncols], lob[:ncols]).astype(float)
    v[basis] = xb
    return v


def _iterate(T, xb, basis, stat, lob, upb, cost, max_iter) -> None:
    m, ncols = T.shape
    for _ in range(max_iter):
        y = cost[basis] @ T
        d = cost - y
        entering = -1
        for j in range(ncols):
            if stat[j] == _BASIC:
                continue
            if stat[j] == _AT_LOWER and d[j] > _TOL:
                entering = j
                break
            if stat[j] == _AT_UPPER and d[j] < -_TOL:
                entering = j
                break
        if entering < 0:
            return

        sigma = 1.0 if stat[entering] == _AT_LOWER else -1.0
        col = T[:, entering]
        theta = upb[entering] - lob[entering]  # bound flip distance
        leave_row, leave_to = -1, _AT_LOWER
        for i in range(m):
            coef = sigma * col[i]
            if coef > _TOL:
                room = (xb[i] - lob[basis[i]]) / coef
                if room < theta - _TOL or (abs(room - theta) <= _TOL and (leave_row < 0 or basis[i] < basis[leave_row])):
                    theta, leave_row, leave_to = min(room, theta), i, _AT_LOWER
            elif coef < -_TOL:
                bound = upb[basis[i]]
                if not np.isfinite(bound):
                    continue
                room = (bound - xb[i]) / (-coef)
                if room < theta - _TOL or (abs(room - theta) <= _TOL and (leave_row < 0 or basis[i] < basis[leave_row])):
                    theta, leave_row, leave_to = min(room, theta), i, _AT_UPPER
        if not np.isfinite(theta):
            raise _SolverFailure("unbounded direction")
        theta = max(theta, 0.0)

        xb -= sigma * theta * col
        if leave_row < 0:
            stat[entering] = _AT_UPPER if stat[entering] == _AT_LOWER else _AT_LOWER
            continue

        piv = col[leave_row]
        if abs(piv) < 1e-11:
            raise _SolverFailure("tiny pivot")
        entering_value = (lob[entering] if sigma > 0 else upb[entering]) + sigma * theta
        leaving = basis[leave_row]
        stat[leaving] = leave_to
        stat[entering] = _BASIC
        basis[leave_row] = entering
        T[leave_row, :] /= piv
        colcopy = T[:, entering].copy()
        colcopy[leave_row] = 0.0
        T -= np.outer(colcopy, T[leave_row, :])
        xb[leave_row] = entering_value
    raise _SolverFailure("iteration limit")
