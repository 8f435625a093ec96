import random

import pytest

from aadd import AffineForm, BoundsResult, Interval, LinearConstraint, strictly_feasible, tighten
from aadd import lp

SLACK = 1e-9


def form(center, terms=None, err=0.0):
    return AffineForm(center, terms or {}, err)


def con(center, terms, sense, polarity=True, err=0.0):
    return LinearConstraint(form(center, terms, err), sense, polarity)


# -- worked cases --------------------------------------------------------------


def test_positive_branch_tightens_lower_bound():
    res = tighten(form(13, {1: 1}), [con(0, {1: 1}, ">")])
    assert res.feasible and res.tightened
    assert res.interval.lo == pytest.approx(13, abs=SLACK)
    assert res.interval.hi == pytest.approx(14, abs=SLACK)


def test_no_constraints_gives_plain_range():
    res = tighten(form(3, {2: 1}), [])
    assert res.interval == Interval(2.0, 4.0)


def test_contradictory_strict_path_is_infeasible():
    res = tighten(form(0, {1: 1}), [con(0, {1: 1}, ">"), con(0, {1: 1}, "<=")])
    assert not res.feasible


def test_closed_pinch_to_a_point_is_feasible():
    # e1 >= 0 and not(e1 > 0) both relax closed; the region is exactly {0}.
    res = tighten(form(13, {1: 1}), [con(0, {1: 1}, ">="), con(0, {1: 1}, ">", polarity=False)])
    assert res.feasible
    assert res.interval.lo == pytest.approx(13, abs=SLACK)
    assert res.interval.hi == pytest.approx(13, abs=SLACK)


def test_negated_polarity_flips_the_halfspace():
    res = tighten(form(0, {1: 1}), [con(0, {1: 1}, ">", polarity=False)])  # e1 <= 0
    assert res.interval.lo == pytest.approx(-1, abs=SLACK)
    assert res.interval.hi == pytest.approx(0, abs=SLACK)


def test_equality_constraint_pins_the_variable():
    res = tighten(form(2, {1: 1}), [con(0, {1: 1}, "==")])
    assert res.interval.lo == pytest.approx(2, abs=SLACK)
    assert res.interval.hi == pytest.approx(2, abs=SLACK)


def test_negated_equality_constrains_nothing():
    res = tighten(form(0, {1: 1}), [con(0, {1: 1}, "==", polarity=False)])
    assert res.interval == Interval(-1.0, 1.0)


def test_constraint_err_is_a_box_variable():
    # e1 + 0.5*u >= 0 with u in [-1, 1] only forces e1 >= -0.5.
    res = tighten(form(0, {1: 1}), [con(0, {1: 1}, ">=", err=0.5)])
    assert res.interval.lo == pytest.approx(-0.5, abs=SLACK)
    assert res.interval.hi == pytest.approx(1.0, abs=SLACK)


def test_objective_err_widens_both_ends():
    res = tighten(form(0, {1: 1}, err=0.25), [con(0, {1: 1}, ">=")])
    assert res.interval.lo == pytest.approx(-0.25, abs=SLACK)
    assert res.interval.hi == pytest.approx(1.25, abs=SLACK)


def test_two_variable_diagonal_cut():
    # e1 + e2 <= 0: the maximum of e1 - e2 is still 2 (at (1,-1)); the
    # maximum of e1 + e2 drops to 0.
    cut = [con(0, {1: 1, 2: 1}, "<=")]
    res = tighten(form(0, {1: 1, 2: -1}), cut)
    assert res.interval.hi == pytest.approx(2, abs=SLACK)
    res = tighten(form(0, {1: 1, 2: 1}), cut)
    assert res.interval.hi == pytest.approx(0, abs=SLACK)
    assert res.interval.lo == pytest.approx(-2, abs=SLACK)


def test_solver_failure_falls_back_to_unconstrained_range(monkeypatch):
    def boom(*args, **kwargs):
        raise lp._SolverFailure("forced")

    monkeypatch.setattr(lp, "_maximize", boom)
    res = tighten(form(1, {1: 2}), [con(0, {1: 1}, ">")])
    assert res.feasible and not res.tightened
    assert res.interval == Interval(-1.0, 3.0)


def test_strictly_feasible_examples():
    assert strictly_feasible([con(0, {1: 1}, ">")])
    assert not strictly_feasible([con(0, {1: 1}, ">"), con(0, {1: 1}, "<=")])
    assert strictly_feasible([])


# -- randomized soundness / monotonicity ----------------------------------------


def _random_form(rng, n_vars, allow_err=True):
    terms = {}
    for sym in range(1, n_vars + 1):
        if rng.random() < 0.7:
            terms[sym] = rng.uniform(-2, 2)
    err = rng.uniform(0, 0.5) if allow_err and rng.random() < 0.3 else 0.0
    return AffineForm(rng.uniform(-2, 2), terms, err)


def _random_constraint(rng, n_vars):
    sense = rng.choice(["<", "<=", ">", ">=", "=="])
    # Equalities in random systems are almost surely infeasible with >1 of
    # them; keep them rare and err-free to give sampling a chance.
    if sense == "==":
        return LinearConstraint(AffineForm(0.0, {rng.randint(1, n_vars): 1.0}), "==", rng.random() < 0.5)
    return LinearConstraint(_random_form(rng, n_vars), sense, rng.random() < 0.7)


def _holds(sense, v):
    return {"<": v < 0, "<=": v <= 0, ">": v > 0, ">=": v >= 0, "==": v == 0}[sense]


def _satisfies(constraints, eps, us):
    for k, c in enumerate(constraints):
        v = c.form.center + sum(coef * eps[s] for s, coef in c.form.terms.items())
        v += c.form.err * us[k]
        if _holds(c.sense, v) != c.polarity:
            return False
    return True


def test_randomized_soundness_and_interval_ordering():
    rng = random.Random(20240811)
    for trial in range(150):
        n_vars = rng.randint(1, 5)
        constraints = [_random_constraint(rng, n_vars) for _ in range(rng.randint(1, 6))]
        objective = _random_form(rng, n_vars)
        res = tighten(objective, constraints)
        base = lp.range_of(objective)
        if res.feasible:
            assert base.lo - SLACK <= res.interval.lo
            assert res.interval.hi <= base.hi + SLACK
        found = 0
        for _ in range(120):
            eps = {s: rng.uniform(-1, 1) for s in range(1, n_vars + 1)}
            us = [rng.uniform(-1, 1) for _ in constraints]
            if not _satisfies(constraints, eps, us):
                continue
            found += 1
            assert res.feasible, f"trial {trial}: sampled a witness for an 'infeasible' system"
            value = objective.center + sum(c * eps[s] for s, c in objective.terms.items())
            assert res.interval.lo - objective.err - SLACK <= value <= res.interval.hi + objective.err + SLACK
        del found


def test_adding_constraints_never_widens():
    rng = random.Random(7)
    for _ in range(80):
        n_vars = rng.randint(1, 4)
        constraints = [_random_constraint(rng, n_vars) for _ in range(4)]
        objective = _random_form(rng, n_vars, allow_err=False)
        previous = None
        for k in range(len(constraints) + 1):
            res = tighten(objective, constraints[:k])
            if not res.feasible:
                break  # stays infeasible under more constraints
            if previous is not None:
                assert res.interval.lo >= previous.lo - SLACK
                assert res.interval.hi <= previous.hi + SLACK
            previous = res.interval


def test_bounds_result_constructors():
    assert BoundsResult.infeasible().feasible is False
    r = BoundsResult.of(Interval(0.0, 1.0))
    assert r.feasible and r.interval.width == 1.0
