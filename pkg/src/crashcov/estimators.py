"""scikit-learn compatible wrappers around the analysis steps.

The functional API in :mod:`crashcov.synthesis` and :mod:`crashcov.exact` does
the work; these classes add ``get_params``/``set_params``, fitted attributes
and pipeline composition, e.g.::

    pipe = make_pipeline(DepthScope(10), StrictTestedClassifier())
    classified = pipe.fit_transform(records)
"""

from __future__ import annotations

from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import synthesis
from .exact import fisher_less
from .validation import check_conf_level, check_depth, check_fixed_threshold, check_records, check_table


class DepthScope(TransformerMixin, BaseEstimator):
    """Keep records whose method appeared within the top ``depth`` frames."""

    def __init__(self, depth=10):
        self.depth = depth

    def fit(self, X, y=None):
        check_depth(self.depth)
        self.n_records_in_ = len(check_records(X))
        return self

    def transform(self, X):
        return synthesis.scope(check_records(X), self.depth)


class StrictTestedClassifier(TransformerMixin, BaseEstimator):
    """Learn the line-coverage threshold and flag strictly tested/crashed methods.

    Parameters
    ----------
    threshold : "median" or float
        ``"median"`` learns the lower median of the population's nonzero line
        coverage during ``fit``; a float in (0, 1] is used as is.
    population : {"tested_class_nonzero", "all_nonzero"}
        Which records feed the median.

    Attributes
    ----------
    threshold_ : float
    n_population_ : int
        Size of the median population (0 for a fixed threshold).
    """

    def __init__(self, threshold="median", population=synthesis.TESTED_CLASS_NONZERO):
        self.threshold = threshold
        self.population = population

    def fit(self, X, y=None):
        records = check_records(X)
        if self.threshold == "median":
            values = synthesis.threshold_population(records, self.population)
            self.threshold_ = synthesis.compute_threshold(records, self.population)
            self.n_population_ = len(values)
        else:
            self.threshold_ = check_fixed_threshold(self.threshold)
            self.n_population_ = 0
        return self

    def transform(self, X):
        check_is_fitted(self, "threshold_")
        return synthesis.classify(check_records(X), self.threshold_)

    def predict(self, X):
        """Strictly-tested flag per record."""
        return [r.strict_tested for r in self.transform(X)]


class NameTagger(TransformerMixin, BaseEstimator):
    def __init__(self, debug_patterns=synthesis.DEFAULT_DEBUG_PATTERNS,
                 trigger_patterns=synthesis.DEFAULT_TRIGGER_PATTERNS):
        self.debug_patterns = debug_patterns
        self.trigger_patterns = trigger_patterns

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        return synthesis.tag_names(check_records(X), self.debug_patterns, self.trigger_patterns)


class FisherExactLess(BaseEstimator):
    """Conditional MLE of the odds ratio with the one-sided exact test.

    ``fit`` accepts a table (anything :func:`crashcov.validation.check_table`
    takes) or a list of classified records, which are cross-tabulated first.
    """

    def __init__(self, conf_level=0.95):
        self.conf_level = conf_level

    def fit(self, X, y=None):
        check_conf_level(self.conf_level)
        if isinstance(X, list) and X and isinstance(X[0], synthesis.JoinedMethodRecord):
            table = synthesis.build_table(X)
        else:
            table = check_table(X)
        self.table_ = table
        self.result_ = fisher_less(table, self.conf_level)
        self.pvalue_ = self.result_.p_value
        self.odds_ratio_ = self.result_.odds_ratio
        self.confidence_interval_ = (self.result_.ci_low, self.result_.ci_high)
        return self
