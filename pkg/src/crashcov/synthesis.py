"""Join crash occurrences with coverage and test links into per-method records.

A record is *strictly crashed* when the method was the topmost frame of at
least one trace, and *strictly tested* when its class has a unit test and its
line coverage exceeds a threshold (by default the lower median of the nonzero
line coverage of methods in tested classes).
"""

from __future__ import annotations

import csv
import re
from collections import defaultdict
from dataclasses import dataclass, fields, replace
from typing import Iterable, Sequence

from .coverage import CoverageReport
from .discovery import TestLink
from .errors import EmptyScopeError, InputError
from .incidents import FrameOccurrence, MethodKey
from .table import ContingencyTable
from .validation import check_depth, check_records

TESTED_CLASS_NONZERO = "tested_class_nonzero"
ALL_NONZERO = "all_nonzero"
POPULATIONS = (TESTED_CLASS_NONZERO, ALL_NONZERO)

DEBUG_LIKE = "DEBUG_LIKE"
TRIGGER_LIKE = "TRIGGER_LIKE"

# whole-name regexes; "([A-Z]\w*)?" allows a camel-case continuation only
DEFAULT_DEBUG_PATTERNS = (
    r"log([A-Z]\w*)?", r"fail([A-Z]\w*)?", r"error([A-Z]\w*)?", r"warn(ing)?([A-Z]\w*)?",
    r"debug([A-Z]\w*)?", r"trace", r"assert([A-Z]\w*)?", r"check([A-Z]\w*)?",
    r"report([A-Z]\w*)?", r"throw([A-Z]\w*)?", r"handle(Exception|Error|Failure)\w*",
    r"is(Null|NotNull|Empty)", r"notNull", r"exists", r"verify([A-Z]\w*)?",
)
DEFAULT_TRIGGER_PATTERNS = (
    r"run([A-Z]\w*)?", r"invoke([A-Z]\w*)?", r"execute([A-Z]\w*)?", r"call",
    r"perform([A-Z]\w*)?", r"dispatch([A-Z]\w*)?", r"safeRun", r"doRun",
    r"syncExec", r"asyncExec", r"showWhile", r"readAndDispatch",
    r"fire([A-Z]\w*)?", r"notify([A-Z]\w*)?",
)


@dataclass(frozen=True)
class JoinedMethodRecord:
    key: MethodKey
    incident_count: int
    first_frame_count: int
    top6: bool
    top10: bool
    topmost: bool
    line_ratio: float | None
    instr_ratio: float | None
    branch_ratio: float | None
    covered: bool
    in_tested_class: bool
    density: float | None
    strict_tested: bool = False
    strict_crashed: bool = False
    name_tag: str | None = None


RECORD_COLUMNS = ("class_fqn", "method_name") + tuple(
    f.name for f in fields(JoinedMethodRecord) if f.name != "key"
)


def _tested_classes(links: Iterable[TestLink]) -> dict[str, float | None]:
    class_lines: dict[str, int] = {}
    test_lines: dict[str, int] = defaultdict(int)
    for link in links:
        fqn = link.class_fqn
        if not fqn:
            continue
        class_lines[fqn] = link.class_lines
        test_lines[fqn] += link.test_lines
    return {
        fqn: (test_lines[fqn] / n if n > 0 else None)
        for fqn, n in class_lines.items()
    }


def _aggregate_occurrences(occurrences: Iterable[FrameOccurrence]):
    incidents = defaultdict(set)
    first = defaultdict(int)
    best = {}
    for occ in occurrences:
        key = occ.method
        incidents[key].add(occ.incident_id)
        if occ.position == 1:
            first[key] += 1
        if key not in best or occ.position < best[key]:
            best[key] = occ.position
    return incidents, first, best


def join(occurrences: Iterable[FrameOccurrence], report: CoverageReport,
         links: Iterable[TestLink]) -> list[JoinedMethodRecord]:
    """One record per method present both in the stack traces and the coverage report.

    Nested classes (``Outer$Inner``) count as tested when their top-level class
    is linked to a test. Records come back sorted by key.
    """
    tested = _tested_classes(links)
    incidents, first, best = _aggregate_occurrences(occurrences)
    records = []
    for key in sorted(incidents):
        mc = report.get(key)
        if mc is None:
            continue
        instr = mc.ratio("INSTRUCTION")
        in_tested = key.outer_class in tested
        pos = best[key]
        records.append(JoinedMethodRecord(
            key=key,
            incident_count=len(incidents[key]),
            first_frame_count=first[key],
            top6=pos <= 6,
            top10=pos <= 10,
            topmost=pos == 1,
            line_ratio=mc.ratio("LINE"),
            instr_ratio=instr,
            branch_ratio=mc.ratio("BRANCH"),
            covered=instr is not None and instr > 0,
            in_tested_class=in_tested,
            density=tested.get(key.outer_class) if in_tested else None,
        ))
    return records


def unmatched_methods(occurrences: Iterable[FrameOccurrence], report: CoverageReport) -> set[MethodKey]:
    """Crash methods without coverage data, typically JDK or third-party code."""
    return {occ.method for occ in occurrences if occ.method not in report}


def scope(records: Iterable[JoinedMethodRecord], max_depth: int = 10) -> list[JoinedMethodRecord]:
    """Keep methods that appeared at least once within the top ``max_depth`` frames."""
    depth = check_depth(max_depth)
    attr = {1: "topmost", 6: "top6", 10: "top10"}[depth]
    return [r for r in records if getattr(r, attr)]


def lower_median(values: Sequence[float]) -> float:
    if not values:
        raise ValueError("median of an empty population")
    ordered = sorted(values)
    return ordered[(len(ordered) - 1) // 2]


def threshold_population(records: Iterable[JoinedMethodRecord],
                         population: str = TESTED_CLASS_NONZERO) -> list[float]:
    if population not in POPULATIONS:
        raise InputError(f"unknown threshold population {population!r}")
    return [
        r.line_ratio for r in records
        if r.line_ratio is not None and r.line_ratio > 0
        and (population == ALL_NONZERO or r.in_tested_class)
    ]


def compute_threshold(records: Iterable[JoinedMethodRecord],
                      population: str = TESTED_CLASS_NONZERO) -> float:
    """Lower median of the nonzero line coverage ratios in the chosen population."""
    values = threshold_population(records, population)
    if not values:
        raise EmptyScopeError("threshold population is empty")
    return lower_median(values)


def classify(records: Iterable[JoinedMethodRecord], threshold: float) -> list[JoinedMethodRecord]:
    """Set the strict flags; tested needs line coverage strictly above ``threshold``."""
    out = []
    for r in records:
        tested = r.in_tested_class and r.line_ratio is not None and r.line_ratio > threshold
        out.append(replace(r, strict_tested=tested, strict_crashed=r.first_frame_count >= 1))
    return out


def build_table(records: Iterable[JoinedMethodRecord]) -> ContingencyTable:
    cells = defaultdict(int)
    for r in records:
        cells[(r.strict_tested, r.strict_crashed)] += 1
    return ContingencyTable(cells[True, True], cells[True, False], cells[False, True], cells[False, False])


def coverage_cross_tab(records: Iterable[JoinedMethodRecord]) -> ContingencyTable:
    """Counts by (in tested class, covered)."""
    cells = defaultdict(int)
    for r in records:
        cells[(r.in_tested_class, r.covered)] += 1
    return ContingencyTable(cells[True, True], cells[True, False], cells[False, True], cells[False, False])


def venn_regions(records: Sequence[JoinedMethodRecord]) -> dict[str, dict[str, int]]:
    t1 = coverage_cross_tab(records)
    t2 = build_table(records)
    return {
        "coverage": {
            "covered_only": t1.n01,
            "tested_class_only": t1.n10,
            "both": t1.n11,
            "neither": t1.n00,
        },
        "strict": {
            "tested_only": t2.n10,
            "crashed_only": t2.n01,
            "both": t2.n11,
            "neither": t2.n00,
        },
    }


def _compile(patterns):
    return [re.compile(p) for p in patterns]


def tag_names(records: Iterable[JoinedMethodRecord], debug_patterns=DEFAULT_DEBUG_PATTERNS,
              trigger_patterns=DEFAULT_TRIGGER_PATTERNS) -> list[JoinedMethodRecord]:
    """Mark methods whose name looks like debugging/reporting or dispatch code.

    Patterns must match the whole method name. Debug patterns win over trigger
    patterns. Tags are advisory and never touch the strict flags.
    """
    debug, trigger = _compile(debug_patterns), _compile(trigger_patterns)
    out = []
    for r in records:
        name = r.key.method_name
        if any(p.fullmatch(name) for p in debug):
            tag = DEBUG_LIKE
        elif any(p.fullmatch(name) for p in trigger):
            tag = TRIGGER_LIKE
        else:
            tag = None
        out.append(replace(r, name_tag=tag))
    return out


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return value


def write_records_csv(path, records: Iterable[JoinedMethodRecord]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RECORD_COLUMNS)
        for r in records:
            row = [r.key.class_fqn, r.key.method_name]
            row += [_cell(getattr(r, name)) for name in RECORD_COLUMNS[2:]]
            writer.writerow(row)


def _parse_bool(text):
    if text not in ("true", "false"):
        raise InputError(f"expected true/false, got {text!r}")
    return text == "true"


def _parse_opt_float(text):
    return None if text == "" else float(text)


def read_records_csv(path) -> list[JoinedMethodRecord]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = set(RECORD_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise InputError(f"{path}: missing columns {sorted(missing)}")
        for row in reader:
            out.append(JoinedMethodRecord(
                key=MethodKey(row["class_fqn"], row["method_name"]),
                incident_count=int(row["incident_count"]),
                first_frame_count=int(row["first_frame_count"]),
                top6=_parse_bool(row["top6"]),
                top10=_parse_bool(row["top10"]),
                topmost=_parse_bool(row["topmost"]),
                line_ratio=_parse_opt_float(row["line_ratio"]),
                instr_ratio=_parse_opt_float(row["instr_ratio"]),
                branch_ratio=_parse_opt_float(row["branch_ratio"]),
                covered=_parse_bool(row["covered"]),
                in_tested_class=_parse_bool(row["in_tested_class"]),
                density=_parse_opt_float(row["density"]),
                strict_tested=_parse_bool(row["strict_tested"]),
                strict_crashed=_parse_bool(row["strict_crashed"]),
                name_tag=row["name_tag"] or None,
            ))
    return out


def summarize(records: Sequence[JoinedMethodRecord], threshold: float) -> dict:
    """Counts that a report needs, all derivable from the classified records."""
    records = check_records(records)
    return {
        "scoped_count": len(records),
        "threshold": threshold,
        "table2_cells": build_table(records).to_dict(),
        "table1_cells": coverage_cross_tab(records).to_dict(),
        "venn_region_counts": venn_regions(records),
    }
