"""Start, induction and joining steps, and the nested-ball iteration."""

from .grids import DriftGrid, lambda_samples
from .induction import (
    BlockLayout,
    InductionResult,
    block_layout,
    build_staircase_family,
    explicit_log_bound,
    lemma_induction,
    niceness_census,
)
from .params import InductionParams, JoiningSettings, SchemeSettings, StartParams, required_N2
from .scheme import (
    JoiningResult,
    SchemeResult,
    StageCertificate,
    iterate_scheme,
    lemma_joining,
    to_json,
)
from .start import (
    GapSelection,
    ShiftedFamily,
    StartResult,
    build_shifted_family,
    build_start_candidates,
    lemma_start,
    select_gap_opening_j,
)

__all__ = [
    "BlockLayout",
    "DriftGrid",
    "GapSelection",
    "InductionParams",
    "InductionResult",
    "JoiningResult",
    "JoiningSettings",
    "SchemeResult",
    "SchemeSettings",
    "ShiftedFamily",
    "StageCertificate",
    "StartParams",
    "StartResult",
    "block_layout",
    "build_shifted_family",
    "build_staircase_family",
    "build_start_candidates",
    "explicit_log_bound",
    "iterate_scheme",
    "lambda_samples",
    "lemma_induction",
    "lemma_joining",
    "lemma_start",
    "niceness_census",
    "required_N2",
    "select_gap_opening_j",
    "to_json",
]
