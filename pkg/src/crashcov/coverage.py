"""JaCoCo XML coverage report ingestion.

Parses ``report > [group >] package > class > method > counter`` into per
method counters keyed by (class, method name). Overloads are merged by
summing their counters because stack frames carry no parameter types.
"""

from __future__ import annotations

import csv
import io
import xml.etree.ElementTree as ET
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from .errors import CoverageParseError, CoverageStructureError, InputError
from .incidents import MethodKey

COUNTER_KINDS = ("INSTRUCTION", "BRANCH", "LINE", "COMPLEXITY", "METHOD", "CLASS")
METHOD_KINDS = ("INSTRUCTION", "BRANCH", "LINE", "COMPLEXITY")
METHODS_CSV_COLUMNS = (
    "class_fqn", "method_name", "overloads",
    "instr_covered", "instr_missed",
    "branch_covered", "branch_missed",
    "line_covered", "line_missed",
)
_CSV_KINDS = (("instr", "INSTRUCTION"), ("branch", "BRANCH"), ("line", "LINE"))


@dataclass(frozen=True)
class Counter:
    kind: str
    missed: int
    covered: int

    def __post_init__(self):
        if self.missed < 0 or self.covered < 0:
            raise CoverageStructureError(
                f"{self.kind} counter has negative value (missed={self.missed}, covered={self.covered})"
            )

    @property
    def total(self) -> int:
        return self.missed + self.covered

    @property
    def ratio(self) -> float | None:
        return coverage_ratio(self)

    def __add__(self, other: "Counter") -> "Counter":
        if other.kind != self.kind:
            raise ValueError(f"cannot add {other.kind} counter to {self.kind} counter")
        return Counter(self.kind, self.missed + other.missed, self.covered + other.covered)


def coverage_ratio(counter: Counter) -> float | None:
    """covered / (covered + missed), or None when nothing is countable."""
    total = counter.missed + counter.covered
    if total == 0:
        return None
    return counter.covered / total


def _zero_counters(kinds=METHOD_KINDS) -> dict[str, Counter]:
    return {k: Counter(k, 0, 0) for k in kinds}


@dataclass(frozen=True)
class MethodCoverage:
    key: MethodKey
    descriptor: str
    counters: Mapping[str, Counter]
    overload_count: int = 1

    def ratio(self, kind: str) -> float | None:
        counter = self.counters.get(kind)
        return None if counter is None else coverage_ratio(counter)

    @property
    def covered(self) -> bool:
        r = self.ratio("INSTRUCTION")
        return r is not None and r > 0


def aggregate_overloads(records: Iterable[MethodCoverage]) -> MethodCoverage:
    """Merge same-named methods by summing counters kind by kind."""
    records = list(records)
    if not records:
        raise ValueError("aggregate_overloads needs at least one record")
    key = records[0].key
    if any(r.key != key for r in records):
        raise ValueError(f"aggregate_overloads got mixed keys: {sorted({str(r.key) for r in records})}")
    kinds = sorted({k for r in records for k in r.counters}, key=_kind_order)
    counters = {}
    for kind in kinds:
        total = Counter(kind, 0, 0)
        for r in records:
            if kind in r.counters:
                total = total + r.counters[kind]
        counters[kind] = total
    overloads = sum(r.overload_count for r in records)
    descriptor = records[0].descriptor if len(records) == 1 else ""
    return MethodCoverage(key, descriptor, counters, overloads)


def _kind_order(kind):
    return COUNTER_KINDS.index(kind) if kind in COUNTER_KINDS else len(COUNTER_KINDS)


@dataclass
class CoverageReport:
    methods: dict[MethodKey, MethodCoverage] = field(default_factory=dict)
    classes: dict[str, dict[str, Counter]] = field(default_factory=dict)
    totals: dict[str, Counter] = field(default_factory=dict)
    # counters printed at report level by JaCoCo itself, when present
    declared_totals: dict[str, Counter] = field(default_factory=dict)
    raw_method_count: int = 0

    def get(self, key: MethodKey) -> MethodCoverage | None:
        return self.methods.get(key)

    def __contains__(self, key) -> bool:
        return key in self.methods

    def __len__(self) -> int:
        return len(self.methods)


def _read_counters(elem, where) -> dict[str, Counter]:
    out = {}
    for child in elem:
        if child.tag != "counter":
            continue
        kind = child.get("type")
        if kind is None:
            raise CoverageStructureError(f"{where}: counter without type")
        try:
            missed = int(child.get("missed", "0"))
            covered = int(child.get("covered", "0"))
        except ValueError:
            raise CoverageStructureError(f"{where}: non-integer {kind} counter") from None
        if missed < 0 or covered < 0:
            raise CoverageStructureError(f"{where}: {kind} counter has a negative value")
        out[kind] = Counter(kind, missed, covered)
    return out


def _open_source(source):
    if isinstance(source, (bytes, bytearray)):
        return io.BytesIO(source)
    if isinstance(source, str) and source.lstrip().startswith("<"):
        return io.BytesIO(source.encode("utf-8"))
    return open(Path(source), "rb")


def parse_report(source) -> CoverageReport:
    """Parse a JaCoCo XML report given as bytes, XML text or a file path.

    Streams the document, so multi-hundred-megabyte aggregate reports parse in
    bounded memory. Class names are converted to dotted form.
    """
    raw: dict[MethodKey, list[MethodCoverage]] = defaultdict(list)
    classes: dict[str, dict[str, Counter]] = {}
    declared: dict[str, Counter] = {}
    current_class = None
    depth = 0
    saw_root = False
    with _open_source(source) as fh:
        try:
            for event, elem in ET.iterparse(fh, events=("start", "end")):
                if event == "start":
                    depth += 1
                    if depth == 1:
                        saw_root = True
                        if elem.tag != "report":
                            raise CoverageStructureError(f"root element is <{elem.tag}>, expected <report>")
                    elif elem.tag == "class":
                        name = elem.get("name")
                        if not name:
                            raise CoverageStructureError("class element without a name")
                        current_class = name.replace("/", ".")
                    continue
                depth -= 1
                tag = elem.tag
                if tag == "method":
                    if current_class is None:
                        raise CoverageStructureError("method element outside a class")
                    name = elem.get("name")
                    if not name:
                        raise CoverageStructureError(f"{current_class}: method without a name")
                    counters = _zero_counters()
                    counters.update(
                        (k, c) for k, c in _read_counters(elem, f"{current_class}.{name}").items()
                        if k in METHOD_KINDS
                    )
                    key = MethodKey(current_class, name)
                    raw[key].append(MethodCoverage(key, elem.get("desc", ""), counters, 1))
                    elem.clear()
                elif tag == "class":
                    classes[current_class] = _read_counters(elem, current_class)
                    current_class = None
                    elem.clear()
                elif tag in ("sourcefile", "package", "group"):
                    elem.clear()
                elif tag == "report":
                    declared = _read_counters(elem, "report")
        except ET.ParseError as exc:
            raise CoverageParseError(f"malformed coverage XML: {exc}",
                                     getattr(exc, "position", None)) from exc
    if not saw_root:
        raise CoverageParseError("empty coverage document")

    methods = {key: aggregate_overloads(recs) for key, recs in sorted(raw.items())}
    totals = _zero_counters(("INSTRUCTION", "BRANCH", "LINE", "COMPLEXITY"))
    for mc in methods.values():
        for kind in METHOD_KINDS:
            totals[kind] = totals[kind] + mc.counters[kind]
    for kind in ("METHOD", "CLASS"):
        total = Counter(kind, 0, 0)
        for counters in classes.values():
            if kind in counters:
                total = total + counters[kind]
        totals[kind] = total
    return CoverageReport(
        methods=methods,
        classes=classes,
        totals=totals,
        declared_totals=declared,
        raw_method_count=sum(len(v) for v in raw.values()),
    )


def write_methods_csv(path, report: CoverageReport) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(METHODS_CSV_COLUMNS)
        for key in sorted(report.methods):
            mc = report.methods[key]
            row = [key.class_fqn, key.method_name, mc.overload_count]
            for _, kind in _CSV_KINDS:
                c = mc.counters.get(kind, Counter(kind, 0, 0))
                row += [c.covered, c.missed]
            writer.writerow(row)


def read_methods_csv(path) -> CoverageReport:
    """Rebuild a report from a methods CSV (no class-level or complexity data)."""
    methods = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = set(METHODS_CSV_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise InputError(f"{path}: missing columns {sorted(missing)}")
        for row in reader:
            key = MethodKey(row["class_fqn"], row["method_name"])
            counters = {
                kind: Counter(kind, int(row[f"{prefix}_missed"]), int(row[f"{prefix}_covered"]))
                for prefix, kind in _CSV_KINDS
            }
            methods[key] = MethodCoverage(key, "", counters, int(row["overloads"]))
    totals = _zero_counters(("INSTRUCTION", "BRANCH", "LINE"))
    for mc in methods.values():
        for _, kind in _CSV_KINDS:
            totals[kind] = totals[kind] + mc.counters[kind]
    return CoverageReport(methods=methods, totals=totals, raw_method_count=len(methods))
