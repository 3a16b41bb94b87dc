"""Relate crash stack traces to unit-test coverage of the crashing methods.

Estimator classes live in :mod:`crashcov.estimators` so that importing the
package (and the ``stats`` command) stays free of the scikit-learn import cost.
"""

from .errors import (
    ConfigError,
    CoverageParseError,
    CoverageStructureError,
    CrashcovError,
    EmptyScopeError,
    IncidentParseError,
    IncidentStructureError,
    InputError,
    InvariantError,
    OverrideError,
)
from .exact import FisherResult, fisher_less
from .incidents import FrameOccurrence, MethodKey, scan_corpus
from .coverage import parse_report
from .discovery import discover
from .synthesis import JoinedMethodRecord, build_table, classify, compute_threshold, join, scope
from .table import ContingencyTable

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "ContingencyTable",
    "CoverageParseError",
    "CoverageStructureError",
    "CrashcovError",
    "EmptyScopeError",
    "FisherResult",
    "FrameOccurrence",
    "IncidentParseError",
    "IncidentStructureError",
    "InputError",
    "InvariantError",
    "JoinedMethodRecord",
    "MethodKey",
    "OverrideError",
    "build_table",
    "classify",
    "compute_threshold",
    "discover",
    "fisher_less",
    "join",
    "parse_report",
    "scan_corpus",
    "scope",
]
