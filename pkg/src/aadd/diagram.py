"""Ordered decision diagrams over discrete uncertainties, with affine leaves.

An ``Aadd`` is a DAG whose internal nodes test conditions from a shared,
append-only :class:`ConditionTable` (free booleans or comparisons of an
affine form against zero) and whose terminals are either affine forms (a
real-valued hybrid uncertainty) or booleans.  Condition indices strictly
increase along every root-to-leaf path.

Arithmetic, logical and relational operations recurse over the diagrams;
comparisons consult the LP tightener with the constraints collected along
each path, so a branch is only materialized when the path itself cannot
decide it.
"""

from __future__ import annotations

import io
import threading
from dataclasses import dataclass
from typing import Callable, Iterator, Mapping

from . import affine, lp
from .affine import AffineForm, SymbolRegistry
from .interval import Interval

#: Componentwise tolerance when merging equal-valued terminals in reduce().
MERGE_TOL = 1e-9


class LeafKindError(TypeError):
    """Operation applied to diagrams with incompatible leaf kinds."""


class InconsistentDiagramError(RuntimeError):
    """Every path of the diagram is infeasible."""


# -- conditions ---------------------------------------------------------------


@dataclass(frozen=True)
class FreeBool:
    """A basic discrete uncertainty: an unconstrained boolean choice."""

    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Compare:
    """An uncertain condition: ``form sense 0`` undecided under its path."""

    form: AffineForm
    sense: str

    def __post_init__(self) -> None:
        if self.sense not in lp.SENSES:
            raise ValueError(f"unknown sense: {self.sense!r}")

    def __str__(self) -> str:
        return f"({self.form} {self.sense} 0)"


Condition = FreeBool | Compare


class ConditionTable:
    """Append-only, globally ordered list of conditions; index = position."""

    def __init__(self) -> None:
        self._entries: list[Condition] = []
        self._lock = threading.Lock()

    def add(self, condition: Condition) -> int:
        with self._lock:
            self._entries.append(condition)
            return len(self._entries) - 1

    def __getitem__(self, index: int) -> Condition:
        return self._entries[index]

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[Condition]:
        return iter(list(self._entries))


# -- nodes --------------------------------------------------------------------


class _Leaf:
    __slots__ = ("value",)

    def __init__(self, value) -> None:
        self.value = value


class _Inner:
    __slots__ = ("index", "t", "f")

    def __init__(self, index: int, t, f) -> None:
        self.index = index
        self.t = t
        self.f = f


REAL, BOOL = "real", "bool"


class Context:
    """Shared state for one symbolic computation: the noise-symbol registry,
    the ordered condition table, counters and caches.

    Creating a fresh context per run makes symbol and condition allocation
    (and therefore whole traces) reproducible.
    """

    def __init__(self) -> None:
        self.registry = SymbolRegistry()
        self.conditions = ConditionTable()
        self.lp_calls = 0
        self.lp_sink: Callable[[str], None] | None = None
        self._feasible_cache: dict[tuple[tuple[int, bool], ...], bool] = {}

    # -- value constructors -------------------------------------------------

    def uncertain(self, center: float, radius: float) -> AffineForm:
        """A fresh continuous basic uncertainty (affine-form level)."""
        return affine.new_uncertain(self.registry, center, radius)

    def real(self, value: "AffineForm | float | int") -> "Aadd":
        if not isinstance(value, AffineForm):
            value = AffineForm.constant(float(value))
        return Aadd(self, _Leaf(value), REAL)

    def uncertain_real(self, center: float, radius: float) -> "Aadd":
        return self.real(self.uncertain(center, radius))

    def boolean(self, value: bool) -> "Aadd":
        return Aadd(self, _Leaf(bool(value)), BOOL)

    def free_bool(self, name: str) -> "Aadd":
        idx = self.conditions.add(FreeBool(name))
        return Aadd(self, _Inner(idx, _Leaf(True), _Leaf(False)), BOOL)

    # -- LP plumbing ----------------------------------------------------------

    def tighten(self, objective: AffineForm, path: tuple[tuple[int, bool], ...]) -> lp.BoundsResult:
        self.lp_calls += 1
        return lp.tighten(objective, self.path_constraints(path), self.lp_sink)

    def path_feasible(self, path: tuple[tuple[int, bool], ...]) -> bool:
        key = tuple((i, p) for i, p in path if isinstance(self.conditions[i], Compare))
        cached = self._feasible_cache.get(key)
        if cached is None:
            self.lp_calls += 1
            cached = lp.strictly_feasible(self.path_constraints(path), self.lp_sink)
            self._feasible_cache[key] = cached
        return cached

    def path_constraints(self, path: tuple[tuple[int, bool], ...]) -> list[lp.LinearConstraint]:
        out = []
        for idx, polarity in path:
            cond = self.conditions[idx]
            if isinstance(cond, Compare):
                out.append(lp.LinearConstraint(cond.form, cond.sense, polarity))
        return out

    def describe_path(self, path: tuple[tuple[int, bool], ...]) -> str:
        if not path:
            return "(true)"
        return " & ".join(f"{self.conditions[i]}={'T' if p else 'F'}" for i, p in path)


class Aadd:
    """A value with hybrid uncertainty: an ordered diagram over conditions
    with affine-form or boolean terminals.

    Arithmetic and comparison operators are overloaded so code written for
    plain numbers runs symbolically; branching on an Aadd with ``if`` raises,
    use :func:`ite` instead.
    """

    __slots__ = ("ctx", "root", "kind")

    def __init__(self, ctx: Context, root, kind: str) -> None:
        self.ctx = ctx
        self.root = root
        self.kind = kind

    # -- structure ----------------------------------------------------------

    @property
    def is_terminal(self) -> bool:
        return isinstance(self.root, _Leaf)

    def leaf_value(self):
        if not self.is_terminal:
            raise ValueError("not a terminal diagram")
        return self.root.value

    def leaves(self) -> list:
        """Distinct terminal values in true-edge-first DFS order."""
        seen: set[int] = set()
        out = []

        def walk(node):
            if id(node) in seen:
                return
            seen.add(id(node))
            if isinstance(node, _Leaf):
                out.append(node.value)
            else:
                walk(node.t)
                walk(node.f)

        walk(self.root)
        return out

    def leaf_count(self) -> int:
        return len(self.leaves())

    def node_count(self) -> int:
        seen: set[int] = set()

        def walk(node):
            if id(node) in seen:
                return
            seen.add(id(node))
            if isinstance(node, _Inner):
                walk(node.t)
                walk(node.f)

        walk(self.root)
        return len(seen)

    def __bool__(self) -> bool:
        raise TypeError(
            "an uncertain value has no single truth value; branch with ite(cond, a, b) "
            "instead of Python `if` so both outcomes stay represented"
        )

    __hash__ = object.__hash__

    # -- arithmetic overloads -------------------------------------------------

    def _coerce(self, other) -> "Aadd":
        if isinstance(other, Aadd):
            if other.ctx is not self.ctx:
                raise ValueError("operands belong to different contexts")
            return other
        if isinstance(other, bool):
            return self.ctx.boolean(other)
        if isinstance(other, (int, float)):
            return self.ctx.real(float(other))
        if isinstance(other, AffineForm):
            return self.ctx.real(other)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        return apply_binary("add", self, other) if other is not NotImplemented else other

    __radd__ = __add__

    def __sub__(self, other):
        other = self._coerce(other)
        return apply_binary("sub", self, other) if other is not NotImplemented else other

    def __rsub__(self, other):
        other = self._coerce(other)
        return apply_binary("sub", other, self) if other is not NotImplemented else other

    def __mul__(self, other):
        other = self._coerce(other)
        return apply_binary("mul", self, other) if other is not NotImplemented else other

    __rmul__ = __mul__

    def __neg__(self):
        return map_real_leaves(self, lambda v: affine.scale(-1.0, v))

    # -- comparisons (return Bool-leaf diagrams) ------------------------------

    def _compare_with(self, other, sense: str) -> "Aadd":
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return compare(apply_binary("sub", self, other), sense)

    def __lt__(self, other):
        return self._compare_with(other, "<")

    def __le__(self, other):
        return self._compare_with(other, "<=")

    def __gt__(self, other):
        return self._compare_with(other, ">")

    def __ge__(self, other):
        return self._compare_with(other, ">=")

    def eq(self, other) -> "Aadd":
        return self._compare_with(other, "==")

    def ne(self, other) -> "Aadd":
        return bool_not(self.eq(other))

    # -- boolean overloads -----------------------------------------------------

    def __and__(self, other):
        other = self._coerce(other)
        return apply_binary("and", self, other) if other is not NotImplemented else other

    __rand__ = __and__

    def __or__(self, other):
        other = self._coerce(other)
        return apply_binary("or", self, other) if other is not NotImplemented else other

    __ror__ = __or__

    def __xor__(self, other):
        other = self._coerce(other)
        return apply_binary("xor", self, other) if other is not NotImplemented else other

    __rxor__ = __xor__

    def __invert__(self):
        return bool_not(self)

    def __str__(self) -> str:
        if self.is_terminal:
            return str(self.root.value)
        return f"<aadd {self.kind}: {self.node_count()} nodes, {self.leaf_count()} leaves>"


# -- binary apply ---------------------------------------------------------------

_REAL_OPS: dict[str, Callable[[AffineForm, AffineForm], AffineForm]] = {
    "add": affine.add,
    "sub": affine.sub,
    "mul": affine.mul,
}

_BOOL_OPS: dict[str, Callable[[bool, bool], bool]] = {
    "and": lambda a, b: a and b,
    "or": lambda a, b: a or b,
    "xor": lambda a, b: a != b,
}


def apply_binary(op: str, x: Aadd, y: Aadd) -> Aadd:
    """Recursive apply: terminals combine via the leaf operation, internal
    nodes descend on the smaller condition index (pairwise when equal).
    Memoized on node-pair identity, so shared subgraphs are visited once."""
    if x.ctx is not y.ctx:
        raise ValueError("operands belong to different contexts")
    if op in _REAL_OPS:
        if x.kind != REAL or y.kind != REAL:
            raise LeafKindError(f"{op} needs real-valued operands")
        leaf_op, kind = _REAL_OPS[op], REAL
    elif op in _BOOL_OPS:
        if x.kind != BOOL or y.kind != BOOL:
            raise LeafKindError(f"{op} needs boolean operands")
        leaf_op, kind = _BOOL_OPS[op], BOOL
    else:
        raise ValueError(f"unknown operation: {op!r}")

    memo: dict[tuple[int, int], object] = {}

    def rec(a, b):
        key = (id(a), id(b))
        hit = memo.get(key)
        if hit is not None:
            return hit
        if isinstance(a, _Leaf) and isinstance(b, _Leaf):
            node = _Leaf(leaf_op(a.value, b.value))
        elif isinstance(a, _Leaf):
            node = _Inner(b.index, rec(a, b.t), rec(a, b.f))
        elif isinstance(b, _Leaf):
            node = _Inner(a.index, rec(a.t, b), rec(a.f, b))
        elif a.index == b.index:
            node = _Inner(a.index, rec(a.t, b.t), rec(a.f, b.f))
        elif a.index < b.index:
            node = _Inner(a.index, rec(a.t, b), rec(a.f, b))
        else:
            node = _Inner(b.index, rec(a, b.t), rec(a, b.f))
        memo[key] = node
        return node

    return Aadd(x.ctx, rec(x.root, y.root), kind)


def map_real_leaves(x: Aadd, fn: Callable[[AffineForm], AffineForm]) -> Aadd:
    if x.kind != REAL:
        raise LeafKindError("expected a real-valued diagram")
    memo: dict[int, object] = {}

    def rec(node):
        hit = memo.get(id(node))
        if hit is not None:
            return hit
        out = _Leaf(fn(node.value)) if isinstance(node, _Leaf) else _Inner(node.index, rec(node.t), rec(node.f))
        memo[id(node)] = out
        return out

    return Aadd(x.ctx, rec(x.root), REAL)


def bool_not(x: Aadd) -> Aadd:
    if x.kind != BOOL:
        raise LeafKindError("logical negation needs a boolean diagram")
    memo: dict[int, object] = {}

    def rec(node):
        hit = memo.get(id(node))
        if hit is not None:
            return hit
        out = _Leaf(not node.value) if isinstance(node, _Leaf) else _Inner(node.index, rec(node.t), rec(node.f))
        memo[id(node)] = out
        return out

    return Aadd(x.ctx, rec(x.root), BOOL)


# -- relational operations -------------------------------------------------------


def decide(sense: str, rng: Interval) -> bool | None:
    """Truth of ``value sense 0`` from a sound range, or None if undecided.

    For '==' only the definitely-false cases are decidable from a range; a
    degenerate exact zero is handled by the caller.
    """
    if sense == "<":
        if rng.hi < 0.0:
            return True
        if rng.lo >= 0.0:
            return False
    elif sense == "<=":
        if rng.hi <= 0.0:
            return True
        if rng.lo > 0.0:
            return False
    elif sense == ">":
        if rng.lo > 0.0:
            return True
        if rng.hi <= 0.0:
            return False
    elif sense == ">=":
        if rng.lo >= 0.0:
            return True
        if rng.hi < 0.0:
            return False
    elif sense == "==":
        if rng.hi < 0.0 or rng.lo > 0.0:
            return False
    else:
        raise ValueError(f"unknown sense: {sense!r}")
    return None


def compare(x: Aadd, sense: str) -> Aadd:
    """Relational operation against zero; returns a boolean diagram.

    Per leaf, the leaf's range is first tightened under the constraints of
    the path leading to it.  If that decides the predicate the leaf becomes
    a boolean terminal, otherwise a fresh condition is allocated and tested.
    Internal structure is copied, so the walk is per-path (the tightening
    depends on the path, not just the leaf).
    """
    if x.kind != REAL:
        raise LeafKindError("comparisons need a real-valued diagram")
    ctx = x.ctx

    def rec(node, path):
        if isinstance(node, _Inner):
            t = rec(node.t, path + ((node.index, True),))
            f = rec(node.f, path + ((node.index, False),))
            if t is f:
                return t
            return _Inner(node.index, t, f)
        form = node.value
        if sense == "==" and form.is_zero:
            return _Leaf(True)
        result = ctx.tighten(form, path) if path else lp.BoundsResult.of(affine.range_of(form))
        rng = result.interval if result.feasible else affine.range_of(form)
        verdict = decide(sense, rng)
        if verdict is not None:
            return _Leaf(verdict)
        idx = ctx.conditions.add(Compare(form, sense))
        return _Inner(idx, _Leaf(True), _Leaf(False))

    return Aadd(ctx, rec(x.root, ()), BOOL)


def ite(cond: Aadd, then: Aadd, orelse: Aadd) -> Aadd:
    """Shannon merge: wherever ``cond`` holds take ``then``, else ``orelse``."""
    if cond.kind != BOOL:
        raise LeafKindError("ite condition must be boolean")
    if then.kind != orelse.kind:
        raise LeafKindError("ite branches must have the same leaf kind")
    if cond.ctx is not then.ctx or cond.ctx is not orelse.ctx:
        raise ValueError("operands belong to different contexts")

    memo: dict[tuple[int, int, int], object] = {}

    def rec(c, t, e):
        if isinstance(c, _Leaf):
            return t if c.value else e
        key = (id(c), id(t), id(e))
        hit = memo.get(key)
        if hit is not None:
            return hit
        indices = [c.index]
        if isinstance(t, _Inner):
            indices.append(t.index)
        if isinstance(e, _Inner):
            indices.append(e.index)
        m = min(indices)

        def split(node, branch):
            if isinstance(node, _Inner) and node.index == m:
                return node.t if branch else node.f
            return node

        hi = rec(split(c, True), split(t, True), split(e, True))
        lo = rec(split(c, False), split(t, False), split(e, False))
        node = hi if hi is lo else _Inner(m, hi, lo)
        memo[key] = node
        return node

    return Aadd(then.ctx, rec(cond.root, then.root, orelse.root), then.kind)


# -- evaluation --------------------------------------------------------------------


def choose_leaf(x: Aadd, assignment: Mapping[int, float], choices: Mapping[str, bool] | None = None):
    """The terminal value an assignment selects: conditions are resolved with
    err radii counted as zero."""
    choices = choices or {}
    node = x.root
    while isinstance(node, _Inner):
        cond = x.ctx.conditions[node.index]
        if isinstance(cond, FreeBool):
            try:
                taken = bool(choices[cond.name])
            except KeyError:
                raise KeyError(f"assignment missing free boolean {cond.name!r}") from None
        else:
            value = affine.evaluate(cond.form, assignment)
            taken = _sense_holds(cond.sense, value)
        node = node.t if taken else node.f
    return node.value


def evaluate(x: Aadd, assignment: Mapping[int, float], choices: Mapping[str, bool] | None = None):
    """Concrete value under an assignment of noise symbols (and free boolean
    choices).  err radii count as zero, both in conditions and in the leaf."""
    leaf = choose_leaf(x, assignment, choices)
    if x.kind == BOOL:
        return leaf
    return affine.evaluate(leaf, assignment)


def _sense_holds(sense: str, value: float) -> bool:
    if sense == "<":
        return value < 0.0
    if sense == "<=":
        return value <= 0.0
    if sense == ">":
        return value > 0.0
    if sense == ">=":
        return value >= 0.0
    return value == 0.0


# -- range queries ------------------------------------------------------------------


@dataclass(frozen=True)
class LeafRange:
    path: tuple[tuple[int, bool], ...]
    interval: Interval
    tightened: bool

    def describe(self, ctx: Context) -> str:
        return ctx.describe_path(self.path)


def per_leaf_ranges(x: Aadd) -> list[LeafRange]:
    """LP-tightened interval of every leaf under its path constraints.
    Leaves on infeasible paths are skipped."""
    if x.kind != REAL:
        raise LeafKindError("range queries need a real-valued diagram")
    ctx = x.ctx
    out: list[LeafRange] = []

    def rec(node, path):
        if isinstance(node, _Inner):
            rec(node.t, path + ((node.index, True),))
            rec(node.f, path + ((node.index, False),))
            return
        result = ctx.tighten(node.value, path)
        if result.feasible:
            out.append(LeafRange(path, result.interval, result.tightened))

    rec(x.root, ())
    return out


def overall_range(x: Aadd) -> Interval:
    """Union hull of all feasible per-leaf ranges."""
    ranges = per_leaf_ranges(x)
    if not ranges:
        raise InconsistentDiagramError("all paths of the diagram are infeasible")
    hull = ranges[0].interval
    for r in ranges[1:]:
        hull = hull.hull(r.interval)
    return hull


def possible_bool_values(x: Aadd) -> set[bool]:
    if x.kind != BOOL:
        raise LeafKindError("expected a boolean diagram")
    return set(x.leaves())


# -- reduction -----------------------------------------------------------------------


def reduce(x: Aadd, prune: bool = True) -> Aadd:
    """Merge equal terminals (componentwise within MERGE_TOL), merge
    isomorphic internal nodes and drop redundant tests.  With ``prune``,
    branches whose path constraints are infeasible are cut first.

    The represented function is unchanged on every feasible assignment.
    """
    ctx = x.ctx
    root = x.root
    if prune:
        root = _pruned(ctx, root, ())
        if root is None:
            raise InconsistentDiagramError("all paths of the diagram are infeasible")

    leaf_table: dict[object, _Leaf] = {}
    inner_table: dict[tuple[int, int, int], _Inner] = {}
    memo: dict[int, object] = {}

    def leaf_key(value):
        if isinstance(value, bool):
            return value
        return (
            round(value.center / MERGE_TOL),
            round(value.err / MERGE_TOL),
            tuple((s, round(value.terms[s] / MERGE_TOL)) for s in sorted(value.terms)),
        )

    def rec(node):
        hit = memo.get(id(node))
        if hit is not None:
            return hit
        if isinstance(node, _Leaf):
            key = leaf_key(node.value)
            out = leaf_table.get(key)
            if out is None:
                out = node
                leaf_table[key] = out
        else:
            t = rec(node.t)
            f = rec(node.f)
            if t is f:
                out = t
            else:
                key = (node.index, id(t), id(f))
                out = inner_table.get(key)
                if out is None:
                    out = _Inner(node.index, t, f)
                    inner_table[key] = out
        memo[id(node)] = out
        return out

    return Aadd(ctx, rec(root), x.kind)


def _pruned(ctx: Context, node, path):
    """Copy of the subgraph without infeasible branches; None if everything
    below is infeasible.  Unfolds sharing; reduce() re-shares afterwards."""
    if isinstance(node, _Leaf):
        return node
    cond = ctx.conditions[node.index]
    if isinstance(cond, FreeBool):
        t = _pruned(ctx, node.t, path + ((node.index, True),))
        f = _pruned(ctx, node.f, path + ((node.index, False),))
    else:
        t_path = path + ((node.index, True),)
        f_path = path + ((node.index, False),)
        t = _pruned(ctx, node.t, t_path) if ctx.path_feasible(t_path) else None
        f = _pruned(ctx, node.f, f_path) if ctx.path_feasible(f_path) else None
    if t is None:
        return f
    if f is None:
        return t
    return _Inner(node.index, t, f)


# -- structural checks and export -----------------------------------------------------


def check_ordered(x: Aadd) -> None:
    """Raise if condition indices do not strictly increase along every path
    or leaf kinds are mixed."""

    def rec(node, floor):
        if isinstance(node, _Leaf):
            ok = isinstance(node.value, bool) if x.kind == BOOL else isinstance(node.value, AffineForm)
            if not ok:
                raise AssertionError(f"leaf {node.value!r} does not match kind {x.kind}")
            return
        if node.index <= floor:
            raise AssertionError(f"condition index {node.index} not above parent {floor}")
        rec(node.t, node.index)
        rec(node.f, node.index)

    rec(x.root, -1)


def _number_nodes(x: Aadd) -> dict[int, int]:
    ids: dict[int, int] = {}

    def walk(node):
        if id(node) in ids:
            return
        ids[id(node)] = len(ids)
        if isinstance(node, _Inner):
            walk(node.t)
            walk(node.f)

    walk(x.root)
    return ids


def to_dict(x: Aadd) -> dict:
    """Debug serialization: nodes, plus the conditions the diagram refers to."""
    ids = _number_nodes(x)
    nodes: dict[str, dict] = {}
    used: set[int] = set()

    def walk(node):
        key = str(ids[id(node)])
        if key in nodes:
            return
        if isinstance(node, _Leaf):
            value = node.value if isinstance(node.value, bool) else node.value.to_dict()
            nodes[key] = {"leaf": value}
        else:
            used.add(node.index)
            nodes[key] = {"condition": node.index, "true": ids[id(node.t)], "false": ids[id(node.f)]}
            walk(node.t)
            walk(node.f)

    walk(x.root)
    conditions = {}
    for idx in sorted(used):
        cond = x.ctx.conditions[idx]
        if isinstance(cond, FreeBool):
            conditions[str(idx)] = {"free_bool": cond.name}
        else:
            conditions[str(idx)] = {"form": cond.form.to_dict(), "sense": cond.sense}
    return {"kind": x.kind, "root": ids[id(x.root)], "nodes": nodes, "conditions": conditions}


def to_dot(x: Aadd) -> str:
    """Deterministic graphviz text dump (true edges solid, false dashed)."""
    ids = _number_nodes(x)
    buf = io.StringIO()
    buf.write("digraph aadd {\n")
    emitted: set[int] = set()

    def walk(node):
        n = ids[id(node)]
        if n in emitted:
            return
        emitted.add(n)
        if isinstance(node, _Leaf):
            buf.write(f'  n{n} [shape=box, label="{node.value}"];\n')
        else:
            buf.write(f'  n{n} [shape=ellipse, label="x{node.index}: {x.ctx.conditions[node.index]}"];\n')
            buf.write(f"  n{n} -> n{ids[id(node.t)]};\n")
            buf.write(f"  n{n} -> n{ids[id(node.f)]} [style=dashed];\n")
            walk(node.t)
            walk(node.f)

    walk(x.root)
    buf.write("}\n")
    return buf.getvalue()
