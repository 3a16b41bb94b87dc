"""Input validation helpers used by the functional API and the estimators."""

from __future__ import annotations

import numbers
from collections.abc import Iterable, Mapping

import numpy as np

from .errors import ConfigError
from .table import ContingencyTable

VALID_DEPTHS = (1, 6, 10)


def check_table(table) -> ContingencyTable:
    """Coerce ``table`` into a :class:`ContingencyTable`.

    Accepts a ContingencyTable, a mapping with keys n11/n10/n01/n00, a flat
    sequence ``(n11, n10, n01, n00)`` or a 2x2 array-like
    ``[[n11, n10], [n01, n00]]``.
    """
    if isinstance(table, ContingencyTable):
        return table
    if isinstance(table, str):
        return ContingencyTable.from_string(table)
    if isinstance(table, Mapping):
        try:
            values = [table[k] for k in ("n11", "n10", "n01", "n00")]
        except KeyError as exc:
            raise ValueError(f"table mapping is missing {exc.args[0]!r}") from None
    else:
        arr = np.asarray(table)
        if arr.shape == (2, 2):
            values = arr.ravel().tolist()
        elif arr.shape == (4,):
            values = arr.tolist()
        else:
            raise ValueError(f"expected a 2x2 table or 4 counts, got shape {arr.shape}")
    return ContingencyTable(*(_as_count(v) for v in values))


def _as_count(value) -> int:
    if isinstance(value, bool):
        raise TypeError("table counts must be integers, not booleans")
    if isinstance(value, numbers.Integral):
        return int(value)
    if isinstance(value, numbers.Real) and float(value).is_integer():
        return int(value)
    raise TypeError(f"table counts must be integers, got {value!r}")


def check_depth(depth) -> int:
    if isinstance(depth, bool) or depth not in VALID_DEPTHS:
        raise ConfigError(f"depth must be one of {VALID_DEPTHS}, got {depth!r}")
    return int(depth)


def check_conf_level(conf_level) -> float:
    try:
        value = float(conf_level)
    except (TypeError, ValueError):
        raise ConfigError(f"conf_level must be a number, got {conf_level!r}") from None
    if not 0.0 < value < 1.0:
        raise ConfigError(f"conf_level must lie in (0, 1), got {value}")
    return value


def check_fixed_threshold(value) -> float:
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"threshold must be a number, got {value!r}") from None
    if not 0.0 < value <= 1.0:
        raise ConfigError(f"fixed threshold must lie in (0, 1], got {value}")
    return value


def check_records(records) -> list:
    """Materialize an iterable of joined method records and type-check it."""
    from .synthesis import JoinedMethodRecord

    if isinstance(records, (str, bytes)) or not isinstance(records, Iterable):
        raise TypeError("records must be an iterable of JoinedMethodRecord")
    out = list(records)
    for rec in out:
        if not isinstance(rec, JoinedMethodRecord):
            raise TypeError(f"expected JoinedMethodRecord, got {type(rec).__name__}")
    return out
