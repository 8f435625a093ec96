"""Computing with hybrid uncertainties: affine forms over ordered decision
diagrams, LP-refined path ranges, and a static-dataflow symbolic simulator."""

from .affine import (
    AffineForm,
    ApproxMode,
    DomainError,
    EXP,
    RECIPROCAL,
    SQRT,
    SymbolRegistry,
    UnaryFunction,
    add,
    approx_unary,
    mul,
    mul_with_remainder,
    new_uncertain,
    range_of,
    scale,
    sub,
)
from .diagram import (
    Aadd,
    Compare,
    Condition,
    ConditionTable,
    Context,
    FreeBool,
    InconsistentDiagramError,
    LeafKindError,
    apply_binary,
    bool_not,
    check_ordered,
    choose_leaf,
    compare,
    evaluate,
    ite,
    overall_range,
    per_leaf_ranges,
    possible_bool_values,
    reduce,
    to_dict,
    to_dot,
)
from .interval import Interval
from .lp import BoundsResult, LinearConstraint, strictly_feasible, tighten

__version__ = "0.1.0"
