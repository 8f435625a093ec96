"""Value-generic helpers so process code runs on plain numbers or Aadds.

Simulation step functions are written once against these helpers plus the
ordinary arithmetic operators.  With float/bool inputs they behave like the
host language; with :class:`~aadd.diagram.Aadd` inputs every branch outcome
stays represented.  ``if`` on an uncertain condition raises by construction,
which is what rejects value-dependent control flow the kernel cannot track.
"""

from __future__ import annotations

from .diagram import Aadd, bool_not, ite as _aadd_ite


def is_uncertain(value) -> bool:
    return isinstance(value, Aadd)


def ite(cond, then, orelse):
    """Branch merge: both arms are evaluated; with a plain bool condition it
    degenerates to selection."""
    if isinstance(cond, Aadd):
        then = cond._coerce(then)
        orelse = cond._coerce(orelse)
        return _aadd_ite(cond, then, orelse)
    return then if cond else orelse


def land(a, b):
    if isinstance(a, Aadd) or isinstance(b, Aadd):
        if isinstance(a, bool):
            return b if a else False
        if isinstance(b, bool):
            return a if b else False
        return a & b
    return a and b


def lor(a, b):
    if isinstance(a, Aadd) or isinstance(b, Aadd):
        if isinstance(a, bool):
            return True if a else b
        if isinstance(b, bool):
            return True if b else a
        return a | b
    return a or b


def lnot(a):
    if isinstance(a, Aadd):
        return bool_not(a)
    return not a


# Ordering comparisons dispatch through the (possibly reflected) operators.

def le(a, b):
    return a <= b


def lt(a, b):
    return a < b


def ge(a, b):
    return a >= b


def gt(a, b):
    return a > b


def eq(a, b):
    # Aadd deliberately keeps identity-based __eq__, so dispatch explicitly.
    if isinstance(a, Aadd):
        return a.eq(b)
    if isinstance(b, Aadd):
        return b.eq(a)
    return a == b
