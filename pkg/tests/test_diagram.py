import random

import pytest

from aadd import (
    Compare,
    Context,
    InconsistentDiagramError,
    LeafKindError,
    affine,
    apply_binary,
    check_ordered,
    compare,
    diagram,
    evaluate,
    ite,
    overall_range,
    per_leaf_ranges,
    possible_bool_values,
    to_dict,
    to_dot,
)
from aadd.diagram import bool_not, reduce as dd_reduce

from oracle_programs import run_case

SLACK = 1e-9


def branch_example(ctx: Context):
    """b = 3 + e1; if (b > 3) b += 10 else b -= 10."""
    b = ctx.uncertain_real(3, 1)
    cond = b > 3
    return b, cond, ite(cond, b + 10, b - 10)


# -- the worked branch example ---------------------------------------------------


def test_branch_example_structure(ctx):
    b, cond, merged = branch_example(ctx)
    check_ordered(merged)
    assert merged.leaf_count() == 2
    assert len(ctx.conditions) == 1
    c = ctx.conditions[0]
    assert isinstance(c, Compare) and c.sense == ">"
    assert c.form.center == 0 and list(c.form.terms.values()) == [1.0]
    leaves = merged.leaves()
    assert leaves[0].center == 13 and leaves[1].center == -7


def test_branch_example_tightened_ranges_and_hull(ctx):
    _, _, merged = branch_example(ctx)
    ranges = per_leaf_ranges(merged)
    assert len(ranges) == 2
    (true_leaf, false_leaf) = ranges
    assert true_leaf.interval.lo == pytest.approx(13, abs=SLACK)
    assert true_leaf.interval.hi == pytest.approx(14, abs=SLACK)
    assert false_leaf.interval.lo == pytest.approx(-8, abs=SLACK)
    assert false_leaf.interval.hi == pytest.approx(-7, abs=SLACK)
    hull = overall_range(merged)
    assert hull.lo == pytest.approx(-8, abs=SLACK)
    assert hull.hi == pytest.approx(14, abs=SLACK)


def test_branch_example_evaluate(ctx):
    b, _, merged = branch_example(ctx)
    sym = next(iter(b.leaf_value().terms))
    assert evaluate(merged, {sym: 0.5}) == pytest.approx(13.5)
    assert evaluate(merged, {sym: -0.5}) == pytest.approx(-7.5)


def test_add_constant_to_branching_diagram(ctx):
    _, _, merged = branch_example(ctx)
    shifted = merged + 1
    check_ordered(shifted)
    leaves = shifted.leaves()
    assert [l.center for l in leaves] == [14, -6]
    identical = merged + 0
    assert [l.center for l in identical.leaves()] == [13, -7]
    assert identical.leaf_count() == merged.leaf_count()


# -- relational decision table -----------------------------------------------------


@pytest.mark.parametrize(
    "sense,rng,expected",
    [
        ("<", (-2, -1), True),
        ("<", (0, 1), False),
        ("<", (-1, 1), None),
        ("<=", (-1, 0), True),
        ("<=", (0.5, 1), False),
        ("<=", (-1, 1), None),
        (">", (0.5, 1), True),
        (">", (-1, 0), False),
        (">", (-1, 1), None),
        (">=", (0, 1), True),
        (">=", (-2, -1), False),
        (">=", (-1, 1), None),
        ("==", "zero", True),
        ("==", (1, 2), False),
        ("==", (-1, 1), None),
    ],
)
def test_relational_decision_table(ctx, sense, rng, expected):
    if rng == "zero":
        x = ctx.real(0)
    else:
        lo, hi = rng
        x = ctx.real(affine.AffineForm((lo + hi) / 2, {ctx.registry.fresh(): (hi - lo) / 2}))
    before = len(ctx.conditions)
    result = compare(x, sense)
    if expected is None:
        assert not result.is_terminal
        assert len(ctx.conditions) == before + 1
        assert possible_bool_values(result) == {True, False}
    else:
        assert result.is_terminal and result.leaf_value() is expected
        assert len(ctx.conditions) == before


def test_compare_terminal_cases(ctx):
    assert compare(ctx.real(-1), "<").leaf_value() is True
    assert compare(ctx.real(affine.sub(ctx.uncertain(1, 1), ctx.uncertain(1, 1))), "==").is_terminal is False


def test_lp_decides_when_plain_range_cannot(ctx):
    # Under the path e1 > 0 the leaf e1 + 0.5 lies in [0.5, 1.5]: decided
    # true by the LP even though its unconstrained range [-0.5, 1.5] says
    # nothing.  No new condition may be allocated for it.
    x = ctx.uncertain_real(0, 1)
    branched = ite(x > 0, x + 0.5, ctx.real(-1))
    before = len(ctx.conditions)
    t = compare(branched, ">")
    check_ordered(t)
    assert len(ctx.conditions) == before
    sym = next(iter(x.leaf_value().terms))
    assert evaluate(t, {sym: 0.4}) is True
    assert evaluate(t, {sym: -0.4}) is False


# -- ite --------------------------------------------------------------------------


def test_ite_with_constant_condition(ctx):
    t = ctx.real(1)
    e = ctx.real(2)
    assert ite(ctx.boolean(True), t, e).leaf_value().center == 1
    assert ite(ctx.boolean(False), t, e).leaf_value().center == 2


def test_ite_kind_mismatch(ctx):
    with pytest.raises(LeafKindError):
        ite(ctx.boolean(True), ctx.real(1), ctx.boolean(False))
    with pytest.raises(LeafKindError):
        ite(ctx.real(1), ctx.real(1), ctx.real(2))


def test_nested_branching_covers_all_regions(ctx):
    # if (e1 > 0) { if (e1 > 0.5) 100 else 50 } else -10
    x = ctx.uncertain_real(0, 1)
    outer = x > 0
    inner = x > 0.5
    merged = ite(outer, ite(inner, ctx.real(100), ctx.real(50)), ctx.real(-10))
    check_ordered(merged)
    assert merged.leaf_count() == 3
    sym = next(iter(x.leaf_value().terms))
    for eps, expected in [(-0.7, -10), (-0.1, -10), (0.3, 50), (0.8, 100)]:
        assert evaluate(merged, {sym: eps}) == expected


def test_ite_threads_condition_structure(ctx):
    x = ctx.uncertain_real(0, 1)
    c = x > 0
    t = ite(c, ctx.real(1), ctx.real(2))  # already branches on the same condition
    merged = ite(c, t, ctx.real(3))
    sym = next(iter(x.leaf_value().terms))
    assert evaluate(merged, {sym: 0.5}) == 1
    assert evaluate(merged, {sym: -0.5}) == 3
    check_ordered(merged)


# -- reduce -----------------------------------------------------------------------


def test_reduce_removes_redundant_test(ctx):
    x = ctx.uncertain_real(0, 1)
    v = ctx.real(7)
    same = ite(x > 0, v, v)
    out = dd_reduce(same)
    assert out.is_terminal and out.leaf_value().center == 7


def test_reduce_shares_equal_leaves(ctx):
    x = ctx.uncertain_real(0, 1)
    d = ite(x > 0, ctx.real(5), ctx.real(2) + 3)
    out = dd_reduce(d)
    assert out.is_terminal and out.leaf_value().center == 5


def test_reduce_prunes_infeasible_combinations(ctx):
    x = ctx.uncertain_real(0, 1)
    d1 = ite(x > 0.5, ctx.real(1), ctx.real(2))
    d2 = ite(x < 0.3, ctx.real(10), ctx.real(20))
    total = d1 + d2
    assert total.leaf_count() == 4
    pruned = dd_reduce(total)
    assert pruned.leaf_count() == 3  # (>0.5 and <0.3) cut
    assert len(per_leaf_ranges(total)) == 3
    sym = next(iter(x.leaf_value().terms))
    for eps in (-0.9, 0.1, 0.4, 0.7, 0.9):
        assert evaluate(pruned, {sym: eps}) == evaluate(total, {sym: eps})


def test_reduce_preserves_function_on_random_diagrams(ctx):
    rng = random.Random(5)
    xs = [ctx.uncertain_real(rng.uniform(-1, 1), rng.uniform(0.5, 2)) for _ in range(3)]
    d = ctx.real(0)
    for i, x in enumerate(xs):
        d = ite(x > rng.uniform(-0.5, 0.5), d + ctx.real(i + 1), d - x)
    d = ite(xs[0] > 0.25, d * 2, d)
    reduced = dd_reduce(d)
    syms = [next(iter(x.leaf_value().terms)) for x in xs]
    for _ in range(300):
        assign = {s: rng.uniform(-1, 1) for s in syms}
        assert evaluate(reduced, assign) == pytest.approx(evaluate(d, assign), abs=1e-9)


def test_every_wellformed_diagram_keeps_a_feasible_path(ctx):
    # A concrete point always follows some path, so honest construction can
    # never produce an all-infeasible diagram; reduce must keep >= 1 leaf.
    x = ctx.uncertain_real(0, 1)
    d1 = ite(x > 0.5, ctx.real(1), ctx.real(2))
    d2 = ite(x < 0.3, ctx.real(10), ctx.real(20))
    pruned = dd_reduce(d1 + d2)
    assert pruned.leaf_count() >= 1


def test_all_infeasible_diagram_is_an_error(ctx, monkeypatch):
    # The defensive error path: pretend the tightener rejects every leaf.
    x = ctx.uncertain_real(0, 1)
    d = ite(x > 0, ctx.real(1), ctx.real(2))
    from aadd import lp as lp_mod

    monkeypatch.setattr(type(ctx), "tighten", lambda self, o, p: lp_mod.BoundsResult.infeasible())
    monkeypatch.setattr(type(ctx), "path_feasible", lambda self, p: False)
    with pytest.raises(InconsistentDiagramError):
        overall_range(d)
    with pytest.raises(InconsistentDiagramError):
        dd_reduce(d)


# -- boolean operations --------------------------------------------------------------


def test_double_negation_is_identity(ctx):
    x = ctx.uncertain_real(0, 1)
    c = x > 0
    back = bool_not(bool_not(c))
    sym = next(iter(x.leaf_value().terms))
    for eps in (-0.5, 0.0, 0.5):
        assert evaluate(back, {sym: eps}) == evaluate(c, {sym: eps})


def test_excluded_middle_reduces_to_true(ctx):
    x = ctx.uncertain_real(0, 1)
    c = x > 0
    taut = apply_binary("or", c, bool_not(c))
    out = dd_reduce(taut)
    assert out.is_terminal and out.leaf_value() is True


def test_and_with_true_terminal(ctx):
    x = ctx.uncertain_real(0, 1)
    c = x > 0
    both = apply_binary("and", ctx.boolean(True), c)
    sym = next(iter(x.leaf_value().terms))
    for eps in (-0.5, 0.5):
        assert evaluate(both, {sym: eps}) == evaluate(c, {sym: eps})


def test_free_bool_choice(ctx):
    f = ctx.free_bool("fault")
    v = ite(f, ctx.real(1), ctx.real(0))
    assert evaluate(v, {}, {"fault": True}) == 1
    assert evaluate(v, {}, {"fault": False}) == 0
    with pytest.raises(KeyError):
        evaluate(v, {})


# -- structural invariants -------------------------------------------------------------


def test_uncertain_condition_cannot_be_a_python_bool(ctx):
    x = ctx.uncertain_real(0, 1)
    with pytest.raises(TypeError):
        if x > 0:
            pass


def test_leaf_count_bound_under_apply(ctx):
    rng = random.Random(11)
    xs = [ctx.uncertain_real(rng.uniform(-1, 1), 1) for _ in range(4)]
    a = ite(xs[0] > 0, ctx.real(1), ctx.real(2))
    a = ite(xs[1] > 0, a + 1, a - 1)
    b = ite(xs[2] > 0, ctx.real(5), ctx.real(6))
    b = ite(xs[3] > 0, b * 2, b)
    combined = a + b
    check_ordered(combined)
    assert combined.leaf_count() <= a.leaf_count() * b.leaf_count()


def test_mixed_kind_apply_raises(ctx):
    with pytest.raises(LeafKindError):
        apply_binary("add", ctx.real(1), ctx.boolean(True))
    with pytest.raises(LeafKindError):
        apply_binary("and", ctx.boolean(True), ctx.real(1))


def test_operations_reject_mixed_contexts():
    a = Context().real(1)
    b = Context().real(2)
    with pytest.raises(ValueError):
        a + b


# -- oracle equivalence (small budget; the acceptance suite runs the full one) ----------


def test_symbolic_matches_concrete_execution_linear():
    rng = random.Random(101)
    for _ in range(200):
        run_case(rng, allow_mul=False, n_assignments=10)


def test_symbolic_contains_concrete_execution_nonlinear():
    rng = random.Random(202)
    for _ in range(150):
        run_case(rng, allow_mul=True, n_assignments=10)


# -- export ------------------------------------------------------------------------------


def test_serialization_and_dot_are_deterministic(ctx):
    _, _, merged = branch_example(ctx)
    d1 = to_dict(merged)
    d2 = to_dict(merged)
    assert d1 == d2
    assert d1["kind"] == "real" and len(d1["nodes"]) == 3
    assert "0" in d1["conditions"]
    dot = to_dot(merged)
    assert dot == to_dot(merged)
    assert "digraph" in dot and "style=dashed" in dot
