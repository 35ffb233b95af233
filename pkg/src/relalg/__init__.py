"""relalg: structure equations of algebroids relative to submersions.

The engine represents an algebroid by its structure equations over a coframe,
computes torsion of an extension ansatz, solves for completions over an exact
symbolic coefficient field, iterates prolongation towers, and imports
solved-form PDEs on coordinate jet spaces.
"""

from .algebroid import (
    BracketTables,
    FiberCoefficientError,
    Realization,
    RelAlgebroid,
    VariableLevels,
    apply_D,
    bracket_to_derivation,
    check_lie,
    derivation_to_bracket,
    realization_check,
    validate,
)
from .dsl import Document, DslError, format_document, parse
from .forms import Form, Frame, add, coeff, form_eq, scale, wedge
from .jets import (
    JetChart,
    PdeInconsistency,
    SolvedPDE,
    pde_algebroid,
    pde_prolong_oracle,
    total_derivative_algebroid,
)
from .prolong import (
    AdjoinRule,
    ExtensionAnsatz,
    LinearSystem,
    NonPolynomialSolution,
    ProlongationStep,
    Tower,
    extract_system,
    make_ansatz,
    parse_adjoin_target,
    prolong,
    solve,
    torsion,
    tower,
)
from .report import Report, run
from .scalar import (
    Scalar,
    diff,
    evaluate,
    is_zero,
    normalize,
    substitute,
    trig_rewrite,
    trig_rewrite_enabled,
)

__version__ = "0.1.0"

__all__ = [
    "AdjoinRule",
    "BracketTables",
    "Document",
    "DslError",
    "ExtensionAnsatz",
    "FiberCoefficientError",
    "Form",
    "Frame",
    "JetChart",
    "LinearSystem",
    "NonPolynomialSolution",
    "PdeInconsistency",
    "ProlongationStep",
    "Realization",
    "RelAlgebroid",
    "Report",
    "Scalar",
    "SolvedPDE",
    "Tower",
    "VariableLevels",
    "add",
    "apply_D",
    "bracket_to_derivation",
    "check_lie",
    "coeff",
    "derivation_to_bracket",
    "diff",
    "evaluate",
    "extract_system",
    "form_eq",
    "format_document",
    "is_zero",
    "make_ansatz",
    "normalize",
    "parse",
    "parse_adjoin_target",
    "pde_algebroid",
    "pde_prolong_oracle",
    "prolong",
    "realization_check",
    "run",
    "scale",
    "solve",
    "substitute",
    "torsion",
    "total_derivative_algebroid",
    "tower",
    "trig_rewrite",
    "trig_rewrite_enabled",
    "validate",
    "wedge",
]
