"""Crash incident ingestion.

Reads AERI-style incident JSON files (one incident per file), keeps the ones
belonging to a target product and build, and turns each stack trace into
method occurrences that record where a method first appears in the trace.
"""

from __future__ import annotations

import csv
import gzip
import json
import logging
import os
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable

from .errors import CorpusError, IncidentParseError, IncidentStructureError, InputError

log = logging.getLogger(__name__)

DEFAULT_PRODUCT = "org.eclipse.epp.package.java.product"
DEFAULT_BUILD_ID = "4.5.2.M20160212-1500"

OCCURRENCE_COLUMNS = ("incident_id", "trace_index", "position", "class_fqn", "method_name")
PASS_THROUGH_KEYS = ("severity", "status", "kind")

_WHITESPACE = re.compile(r"\s+")


@dataclass(frozen=True)
class StackFrame:
    class_name: str
    file_name: str
    line_number: int
    method_name: str


@dataclass(frozen=True, order=True)
class MethodKey:
    """Join key shared by stack frames and coverage records."""

    class_fqn: str
    method_name: str

    @classmethod
    def normalized(cls, class_name: str, method_name: str) -> "MethodKey":
        # wrapped names such as "org.eclipse.jface.text.contentassist. ContentAssistant"
        return cls(
            _WHITESPACE.sub("", class_name),
            _WHITESPACE.sub("", method_name),
        )

    @property
    def outer_class(self) -> str:
        """Top-level class owning this method (nested ``$`` parts removed)."""
        return self.class_fqn.split("$", 1)[0]

    def __str__(self):
        return f"{self.class_fqn}.{self.method_name}"


@dataclass(frozen=True)
class RawIncident:
    incident_id: str
    eclipse_product: str
    build_id: str
    saved_on: str
    traces: tuple[tuple[StackFrame, ...], ...]
    extra: dict = field(default_factory=dict, compare=False)

    @property
    def malformed(self) -> bool:
        return not self.traces


@dataclass(frozen=True, order=True)
class FrameOccurrence:
    incident_id: str
    trace_index: int
    position: int
    method: MethodKey

    def as_row(self) -> tuple:
        return (
            self.incident_id,
            self.trace_index,
            self.position,
            self.method.class_fqn,
            self.method.method_name,
        )


def incident_id_for(path) -> str:
    name = Path(path).name
    for suffix in (".json.gz", ".json"):
        if name.endswith(suffix):
            return name[: -len(suffix)]
    return Path(path).stem


def _parse_frame(incident_id, raw, where) -> StackFrame:
    if not isinstance(raw, dict):
        raise IncidentStructureError(incident_id, f"{where}: frame is not an object")
    class_name = raw.get("cN")
    method_name = raw.get("mN")
    if not isinstance(class_name, str) or not class_name.strip():
        raise IncidentStructureError(incident_id, f"{where}: missing class name 'cN'", "cN")
    if not isinstance(method_name, str) or not method_name.strip():
        raise IncidentStructureError(incident_id, f"{where}: missing method name 'mN'", "mN")
    file_name = raw.get("fN") or ""
    line = raw.get("lN")
    if isinstance(line, bool) or not isinstance(line, int):
        line = 0
    # negative line numbers mark native or unknown locations
    return StackFrame(class_name, str(file_name), max(line, 0), method_name)


def parse_incident(data: bytes | str, incident_id: str) -> RawIncident:
    """Parse one incident file's content.

    Raises IncidentParseError for invalid JSON or encoding and
    IncidentStructureError when a required key is missing or mistyped.
    """
    try:
        text = data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data
        doc = json.loads(text)
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise IncidentParseError(incident_id, f"malformed incident: {exc}") from exc
    if not isinstance(doc, dict):
        raise IncidentStructureError(incident_id, "top level is not an object")
    for key in ("stacktraces", "eclipseProduct", "eclipseBuildId"):
        if key not in doc:
            raise IncidentStructureError(incident_id, f"missing field {key!r}", key)
    product, build = doc["eclipseProduct"], doc["eclipseBuildId"]
    if not isinstance(product, str) or not isinstance(build, str):
        raise IncidentStructureError(incident_id, "product and build id must be strings")
    raw_traces = doc["stacktraces"]
    if not isinstance(raw_traces, list) or not all(isinstance(t, list) for t in raw_traces):
        raise IncidentStructureError(
            incident_id, "'stacktraces' must be an array of arrays", "stacktraces"
        )
    traces = tuple(
        tuple(_parse_frame(incident_id, f, f"trace {ti} frame {fi}") for fi, f in enumerate(trace))
        for ti, trace in enumerate(raw_traces)
    )
    extra = {k: doc[k] for k in PASS_THROUGH_KEYS if k in doc}
    return RawIncident(incident_id, product, build, str(doc.get("savedOn", "")), traces, extra)


def matches_release(incident: RawIncident, product: str, build_id: str) -> bool:
    if not product or not build_id:
        return False
    return incident.eclipse_product == product and incident.build_id == build_id


def extract_occurrences(incident: RawIncident) -> list[FrameOccurrence]:
    """First appearance of every distinct method, per trace, ordered by position."""
    out = []
    for trace_index, trace in enumerate(incident.traces):
        seen = set()
        for position, frame in enumerate(trace, start=1):
            key = MethodKey.normalized(frame.class_name, frame.method_name)
            if key in seen:
                continue
            seen.add(key)
            out.append(FrameOccurrence(incident.incident_id, trace_index, position, key))
    return out


@dataclass
class CorpusStats:
    total_files: int = 0
    matched: int = 0
    malformed: int = 0
    traces: int = 0
    occurrences: int = 0
    trace_length_min: int | None = None
    trace_length_max: int | None = None
    trace_length_mean: float | None = None

    @property
    def unmatched(self) -> int:
        return self.total_files - self.matched - self.malformed

    def to_dict(self) -> dict:
        d = asdict(self)
        d["unmatched"] = self.unmatched
        return d


def iter_incident_files(root) -> list[Path]:
    root = Path(root)
    if not root.is_dir():
        raise CorpusError(f"corpus root is not a readable directory: {root}")
    if not os.access(root, os.R_OK | os.X_OK):
        raise CorpusError(f"corpus root is not readable: {root}")
    files = [
        p for p in root.rglob("*")
        if p.is_file() and (p.name.endswith(".json") or p.name.endswith(".json.gz"))
    ]
    return sorted(files)


def _read_bytes(path: Path) -> bytes:
    if path.name.endswith(".gz"):
        with gzip.open(path, "rb") as fh:
            return fh.read()
    return path.read_bytes()


def _process_file(args):
    path, product, build_id = args
    incident_id = incident_id_for(path)
    try:
        incident = parse_incident(_read_bytes(path), incident_id)
    except (InputError, OSError, EOFError) as exc:
        return "malformed", str(exc), (), ()
    if not matches_release(incident, product, build_id):
        return "unmatched", None, (), ()
    lengths = tuple(len(t) for t in incident.traces)
    return "matched", None, tuple(extract_occurrences(incident)), lengths


def scan_corpus(root, product: str = DEFAULT_PRODUCT, build_id: str = DEFAULT_BUILD_ID,
                jobs: int = 1) -> tuple[list[FrameOccurrence], CorpusStats]:
    """Walk every incident file under ``root``.

    Returns the occurrences of matching incidents, sorted by
    (incident_id, trace_index, position), and corpus statistics. Malformed
    files are counted and skipped; an unreadable root raises CorpusError.
    ``jobs > 1`` parses files in worker processes; the output does not depend
    on it.
    """
    files = iter_incident_files(root)
    stats = CorpusStats(total_files=len(files))
    work = [(p, product, build_id) for p in files]
    if jobs and jobs > 1 and len(work) > 1:
        chunksize = max(1, len(work) // (jobs * 8))
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_process_file, work, chunksize=chunksize))
    else:
        results = [_process_file(w) for w in work]

    occurrences: list[FrameOccurrence] = []
    lengths: list[int] = []
    for (path, _, _), (status, message, occs, trace_lengths) in zip(work, results):
        if status == "malformed":
            stats.malformed += 1
            log.warning("skipping %s: %s", path, message)
        elif status == "matched":
            stats.matched += 1
            occurrences.extend(occs)
            lengths.extend(trace_lengths)
    occurrences.sort(key=lambda o: (o.incident_id, o.trace_index, o.position))
    stats.traces = len(lengths)
    stats.occurrences = len(occurrences)
    if lengths:
        stats.trace_length_min = min(lengths)
        stats.trace_length_max = max(lengths)
        stats.trace_length_mean = sum(lengths) / len(lengths)
    return occurrences, stats


def write_occurrences_csv(path, occurrences: Iterable[FrameOccurrence]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(OCCURRENCE_COLUMNS)
        for occ in occurrences:
            writer.writerow(occ.as_row())


def read_occurrences_csv(path) -> list[FrameOccurrence]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = set(OCCURRENCE_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise InputError(f"{path}: missing columns {sorted(missing)}")
        for row in reader:
            out.append(FrameOccurrence(
                row["incident_id"],
                int(row["trace_index"]),
                int(row["position"]),
                MethodKey(row["class_fqn"], row["method_name"]),
            ))
    return out
