"""regulus: symbolic-numeric toolkit for regular zero sets.

Builds smooth function terms closed under partial differentiation, computes
Jacobian regularity witnesses, and runs the regularization procedure that
grows a single function with a zero into a full regular system whose regular
zero set meets the function's variety, with derivative-growth certificates
propagated alongside.
"""

from .terms import (
    Basic, BasicFunction, BasicRegistry, Const, EvaluationOverflow,
    MultiIndex, ParseError, Point, Power, Product, REGISTRY, Scalar, Sum,
    Term, TermError, UnknownBasicError, Var, ZERO, ONE, add, apply_basic,
    as_scalar, const, d_alpha, evaluate, graded_multi_indices, is_zero_term,
    mul, multi_indices, negate, npow, parse, partial, scale, subst, subtract,
    to_source, var,
)
from .witness import (
    DeterminantTooLarge, FunctionSystem, RegularityVerdict, WitnessError,
    grad, is_regular_at, jacobian, minor_determinants, q_witness, sym_det,
)
from .closure import ClosureError, NotRegularError, augment, lift_point
from .numeric import (
    Box, DEFAULTS, NoFeasiblePoint, NonConvergence, NumericDefaults,
    NumericError, SingularJacobian, find_zero, flat_probe,
    gauss_newton_polish, min_distance_point, newton_refine, numeric_rank,
    track_chart,
)
from .engine import (
    ChartSplit, EngineError, EngineOptions, EtaSequenceExhausted,
    FlatToMaxOrder, InternalInconsistency, LocalizedTerm, LocallyFlat,
    NoZeroFound, NonflatWitness, RegState, RegularizationResult,
    RegularityFailure, base_case, case1_extend, case1_test, case2_step,
    chart_split, coordinate_state, eta_sequence, localized_derive,
    regularize, sos_components,
)
from .control import (
    ControlData, ControlError, ControlReport, basic_control, combine,
    combine_compose, combine_product, combine_shift, combine_sum,
    constant_control, coordinate_control, implicit_control, shared_control,
    term_control, term_evaluator, verify_control,
)

__version__ = "0.1.0"
