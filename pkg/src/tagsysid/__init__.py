"""Grammar-guided genetic programming for NARMAX system identification."""
from .data import Dataset, DatasetBundle, generate_excitation, load_csv, make_benchmark, save_csv, simulate_truth
from .estimation import EstimationReport, estimate, extended_least_squares, least_squares
from .estimators import NarmaxRegressor, TagGPIdentifier
from .exceptions import (
    DegenerateOutput,
    Divergence,
    FootAdjunction,
    GrammarError,
    IncompleteTree,
    InsufficientData,
    LabelMismatch,
    LagOutOfRange,
    NonFiniteSample,
    NotALeaf,
    NullAdjunctionViolation,
    ParseError,
    TagSysIdError,
    TreeOperationError,
    UnknownGrammar,
    UnknownSystem,
)
from .gp import GpConfig, ParetoFront, run
from .grammar import Grammar, builtin_grammar, load_grammar, parse_grammar
from .model import (
    FittedModel,
    ModelStructure,
    format_equation,
    parse_equation,
    parse_model,
    parse_terms,
    predict_one_step,
    simulate,
)
from .objectives import ObjectiveTriple, QualityMeasures, bfr, non_dominated_sort, quality, rms

__version__ = "0.1.0"
