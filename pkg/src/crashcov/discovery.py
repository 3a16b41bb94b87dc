"""Test-class discovery.

Splits a source tree into test candidates and production classes, then links
each test file to the class it exercises using naming conventions, path
agreement and word overlap, with a manual override file as escape hatch.
"""

from __future__ import annotations

import csv
import logging
import re
import statistics
from collections import Counter as Multiset
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path, PurePosixPath
from typing import Iterable

from .errors import InputError, OverrideError

log = logging.getLogger(__name__)

NAME_STRIP = "NAME_STRIP"
PATH_RTL = "PATH_RTL"
WORD_OVERLAP = "WORD_OVERLAP"
MANUAL = "MANUAL"
RULES = (NAME_STRIP, PATH_RTL, WORD_OVERLAP, MANUAL)

LINK_COLUMNS = ("class_path", "class_fqn", "rule", "class_lines", "test_lines", "density", "test_paths")
QUEUE_COLUMNS = ("reason", "test_path", "candidates")

TEST_WORDS = frozenset({"test", "tests", "tester", "testers"})
_TEST_SEGMENTS = frozenset({"test", "tests"})
_CAMEL = re.compile(r"[A-Z]+(?=[A-Z][a-z])|[A-Z]?[a-z]+|[A-Z]+|\d+")
_SPLIT = re.compile(r"[^A-Za-z0-9]+")
_PACKAGE = re.compile(rb"^\s*package\s+([\w.]+)\s*;", re.MULTILINE)
_SOURCE_ROOTS = ("src", "java", "main")


def camel_tokens(text: str) -> list[str]:
    """Split on non-alphanumerics and camel-case humps."""
    out = []
    for chunk in _SPLIT.split(text):
        out.extend(_CAMEL.findall(chunk))
    return out


def is_test_name(stem: str, mode: str = "token") -> bool:
    """Whether a file stem names a test.

    ``token`` mode requires a whole word (``FooTest``, ``Test_x``, ``FooTester``)
    so ``LatestNews`` is not a test; ``substring`` mode is the literal reading.
    """
    if mode == "substring":
        return "test" in stem.lower()
    if mode != "token":
        raise ValueError(f"unknown test-name mode {mode!r}")
    return any(tok.lower() in TEST_WORDS for tok in camel_tokens(stem))


@dataclass(frozen=True)
class SourceEntry:
    path: str
    stem: str
    is_test_candidate: bool
    line_count: int
    class_fqn: str = ""

    @property
    def module(self) -> str:
        parts = PurePosixPath(self.path).parts
        return parts[0] if len(parts) > 1 else ""

    @property
    def directory(self) -> tuple[str, ...]:
        return PurePosixPath(self.path).parts[:-1]


@dataclass
class SourceSets:
    tests: list[SourceEntry]
    production: list[SourceEntry]
    skipped: list[str]

    def __iter__(self):
        return iter((self.tests, self.production))

    def by_path(self) -> dict[str, SourceEntry]:
        return {e.path: e for e in (*self.tests, *self.production)}


def _fqn_for(rel: PurePosixPath, data: bytes) -> str:
    m = _PACKAGE.search(data)
    if m:
        return f"{m.group(1).decode('ascii', 'replace')}.{rel.stem}"
    parts = rel.parts[:-1]
    for i in range(len(parts) - 1, -1, -1):
        if parts[i] in _SOURCE_ROOTS:
            return ".".join((*parts[i + 1:], rel.stem))
    return rel.stem


def _scan_file(args):
    root, path, mode = args
    rel = PurePosixPath(path.relative_to(root).as_posix())
    try:
        data = path.read_bytes()
    except OSError as exc:
        return None, f"{rel}: {exc}"
    entry = SourceEntry(
        path=str(rel),
        stem=rel.stem,
        is_test_candidate=is_test_name(rel.stem, mode),
        line_count=data.count(b"\n"),
        class_fqn=_fqn_for(rel, data),
    )
    return entry, None


def classify_files(root, extensions=(".java",), mode: str = "token", jobs: int = 1) -> SourceSets:
    """Partition source files under ``root`` into test candidates and production files.

    Unreadable files are skipped and listed in ``SourceSets.skipped``.
    """
    root = Path(root)
    if not root.is_dir():
        raise InputError(f"source root is not a directory: {root}")
    files = sorted(p for p in root.rglob("*") if p.is_file() and p.suffix in extensions)
    work = [(root, p, mode) for p in files]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_scan_file, work))
    else:
        results = [_scan_file(w) for w in work]
    tests, production, skipped = [], [], []
    for entry, error in results:
        if entry is None:
            log.warning("skipping unreadable source file %s", error)
            skipped.append(error)
        elif entry.is_test_candidate:
            tests.append(entry)
        else:
            production.append(entry)
    return SourceSets(tests, production, skipped)


def strip_test_name(stem: str) -> str | None:
    """Recover the production class stem from a test stem, or None.

    Tried in order: ``FooTests``, ``FooTest``, ``TestFoo`` (needs an upper-case
    letter after ``Test``), ``Test_pkg_path_Foo`` and ``FooTester``.
    """
    if stem.endswith("Tests") and len(stem) > 5:
        return stem[:-5]
    if stem.endswith("Test") and len(stem) > 4:
        return stem[:-4]
    if stem.startswith("Test") and len(stem) > 4 and stem[4].isupper():
        return stem[4:]
    if stem.startswith("Test_"):
        segments = [s for s in stem[5:].split("_") if s]
        if segments:
            return segments[-1]
    if stem.endswith("Tester") and len(stem) > 6:
        return stem[:-6]
    return None


def _normalized_dirs(entry: SourceEntry) -> list[str]:
    out = []
    for seg in entry.directory:
        if seg.lower() in _TEST_SEGMENTS:
            continue
        if "." in seg:
            kept = [p for p in seg.split(".") if p.lower() not in _TEST_SEGMENTS]
            seg = ".".join(kept)
            if not seg:
                continue
        out.append(seg)
    return out


def path_agreement(test: SourceEntry, candidate: SourceEntry) -> int:
    """Directory segments that agree, read right to left, after dropping test folders."""
    a, b = _normalized_dirs(test), _normalized_dirs(candidate)
    run = 0
    for x, y in zip(reversed(a), reversed(b)):
        if x != y:
            break
        run += 1
    return run


def _unique_best(scored):
    if not scored:
        return None
    best = max(score for score, _ in scored)
    winners = [c for score, c in scored if score == best]
    return (best, winners[0]) if len(winners) == 1 else (best, None)


def match_by_path(test: SourceEntry, candidates: list[SourceEntry], min_agreement: int = 1) -> str | None:
    """Candidate with the longest right-to-left directory agreement.

    Needs at least ``min_agreement`` agreeing directories; ties give None.
    """
    result = _unique_best([(path_agreement(test, c), c) for c in candidates])
    if result is None:
        return None
    best, winner = result
    if winner is None or best < min_agreement:
        return None
    return winner.path


def path_words(path: str) -> Multiset:
    """Lower-cased word multiset of a path, minus the test marker and extension."""
    p = PurePosixPath(path)
    words = camel_tokens(str(p.with_suffix("")))
    return Multiset(w.lower() for w in words if w.lower() not in TEST_WORDS)


def word_overlap(a: str, b: str) -> int:
    return sum((path_words(a) & path_words(b)).values())


def match_by_word_overlap(test: SourceEntry, candidates: list[SourceEntry]) -> str | None:
    """Candidate sharing the most path words with the test; ties give None."""
    result = _unique_best([(word_overlap(test.path, c.path), c) for c in candidates])
    if result is None or result[1] is None:
        return None
    return result[1].path


@dataclass(frozen=True)
class TestLink:
    class_path: str
    test_paths: tuple[str, ...]
    rule: str
    class_lines: int
    test_lines: int
    class_fqn: str = ""

    __test__ = False  # keep pytest from collecting this

    @property
    def density(self) -> float | None:
        if self.class_lines <= 0:
            return None
        return self.test_lines / self.class_lines


@dataclass(frozen=True)
class QueueEntry:
    reason: str
    test_path: str
    candidates: tuple[str, ...] = ()


@dataclass
class Discovery:
    links: list[TestLink]
    queue: list[QueueEntry]

    @property
    def linked_classes(self) -> set[str]:
        return {link.class_path for link in self.links}

    @property
    def linked_tests(self) -> set[str]:
        return {p for link in self.links for p in link.test_paths}


def group_links(pairs: Iterable[tuple[str, str, str]], entries: dict[str, SourceEntry]) -> list[TestLink]:
    """Fold (class_path, test_path, rule) triples into one link per (class, rule)."""
    grouped: dict[tuple[str, str], set[str]] = defaultdict(set)
    for class_path, test_path, rule in pairs:
        grouped[(class_path, rule)].add(test_path)
    links = []
    for (class_path, rule), tests in sorted(grouped.items(), key=lambda kv: (kv[0][0], RULES.index(kv[0][1]))):
        cls = entries[class_path]
        test_paths = tuple(sorted(tests))
        links.append(TestLink(
            class_path=class_path,
            test_paths=test_paths,
            rule=rule,
            class_lines=cls.line_count,
            test_lines=sum(entries[t].line_count for t in test_paths),
            class_fqn=cls.class_fqn,
        ))
    return links


def _pairs(links: Iterable[TestLink]):
    for link in links:
        for t in link.test_paths:
            yield link.class_path, t, link.rule


def match_tests(sets: SourceSets, min_agreement: int = 1) -> Discovery:
    """Run the heuristics over classified files.

    Candidates are production files whose stem equals the stripped test stem,
    looked up in the test's top-level module first and globally otherwise.
    """
    by_module_stem = defaultdict(list)
    by_stem = defaultdict(list)
    for e in sets.production:
        by_module_stem[(e.module, e.stem)].append(e)
        by_stem[e.stem].append(e)

    pairs, queue = [], []
    for test in sorted(sets.tests, key=lambda e: e.path):
        stem = strip_test_name(test.stem)
        if stem is None:
            queue.append(QueueEntry("NO_STRIP", test.path))
            continue
        candidates = by_module_stem.get((test.module, stem)) or by_stem.get(stem, [])
        if not candidates:
            queue.append(QueueEntry("NO_CANDIDATE", test.path))
            continue
        class_path = match_by_path(test, candidates, min_agreement)
        if class_path is not None:
            same_dir = PurePosixPath(class_path).parent == PurePosixPath(test.path).parent
            pairs.append((class_path, test.path, NAME_STRIP if same_dir else PATH_RTL))
            continue
        class_path = match_by_word_overlap(test, candidates)
        if class_path is not None:
            pairs.append((class_path, test.path, WORD_OVERLAP))
            continue
        queue.append(QueueEntry("TIE", test.path, tuple(sorted(c.path for c in candidates))))
    return Discovery(group_links(pairs, sets.by_path()), queue)


@dataclass(frozen=True)
class OverrideRow:
    lineno: int
    action: str
    class_paths: tuple[str, ...]
    test_path: str


def read_overrides(source) -> list[OverrideRow]:
    """Parse the tab-separated override file.

    Columns are ``action`` (ADD or SUPPRESS), ``class_path`` and ``test_path``.
    Several class paths may be joined with ``;``. Blank lines, ``#`` comments
    and a header row are ignored.
    """
    if isinstance(source, (str, Path)) and Path(source).is_file():
        text = Path(source).read_text(encoding="utf-8")
    else:
        text = str(source)
    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        fields = [f.strip() for f in line.split("\t")]
        if fields[0].lower() == "action":
            continue
        if len(fields) != 3 or fields[0].upper() not in ("ADD", "SUPPRESS"):
            raise InputError(f"override line {lineno}: expected ACTION<TAB>class_path<TAB>test_path, got {line!r}")
        classes = tuple(p for p in (s.strip() for s in fields[1].split(";")) if p)
        rows.append(OverrideRow(lineno, fields[0].upper(), classes, fields[2]))
    return rows


def apply_overrides(links: list[TestLink], overrides, sets: SourceSets) -> list[TestLink]:
    """Add MANUAL links and drop suppressed ones.

    ``overrides`` is a path, the file's text, or parsed rows. Every row must
    name known files (production class, test candidate); otherwise
    OverrideError lists the offending rows.
    """
    rows = overrides if isinstance(overrides, list) else read_overrides(overrides)
    production = {e.path for e in sets.production}
    tests = {e.path for e in sets.tests}
    bad = [
        (row.lineno, f"{row.action}\t{';'.join(row.class_paths)}\t{row.test_path}")
        for row in rows
        if not row.class_paths
        or row.test_path not in tests
        or any(c not in production for c in row.class_paths)
    ]
    if bad:
        raise OverrideError(bad)

    current = {(c, t): rule for c, t, rule in _pairs(links)}
    for row in rows:
        for class_path in row.class_paths:
            pair = (class_path, row.test_path)
            if row.action == "SUPPRESS":
                current.pop(pair, None)
            else:
                current.setdefault(pair, MANUAL)
    return group_links(((c, t, rule) for (c, t), rule in current.items()), sets.by_path())


def discover(root, overrides=None, mode: str = "token", min_agreement: int = 1, jobs: int = 1) -> Discovery:
    """Classify files, match tests, then apply the override file if given."""
    sets = classify_files(root, mode=mode, jobs=jobs)
    found = match_tests(sets, min_agreement)
    if overrides is None:
        return found
    rows = read_overrides(overrides)
    links = apply_overrides(found.links, rows, sets)
    resolved = {row.test_path for row in rows if row.action == "ADD"}
    queue = [q for q in found.queue if q.test_path not in resolved]
    return Discovery(links, queue)


def density_summary(links: Iterable[TestLink]) -> dict:
    """Aggregate and median per-class test line density over distinct classes."""
    class_lines: dict[str, int] = {}
    test_lines: dict[str, int] = defaultdict(int)
    tests: set[str] = set()
    for link in links:
        class_lines[link.class_path] = link.class_lines
        test_lines[link.class_path] += link.test_lines
        tests.update(link.test_paths)
    densities = [test_lines[c] / n for c, n in class_lines.items() if n > 0]
    total_class = sum(class_lines.values())
    total_test = sum(test_lines.values())
    return {
        "linked_classes": len(class_lines),
        "linked_tests": len(tests),
        "class_lines": total_class,
        "test_lines": total_test,
        "aggregate_density": total_test / total_class if total_class else None,
        "median_density": statistics.median(densities) if densities else None,
    }


def _format_float(value):
    return "" if value is None else repr(value)


def write_links_csv(path, links: Iterable[TestLink]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(LINK_COLUMNS)
        for link in links:
            writer.writerow([
                link.class_path, link.class_fqn, link.rule, link.class_lines,
                link.test_lines, _format_float(link.density), ";".join(link.test_paths),
            ])


def read_links_csv(path) -> list[TestLink]:
    links = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = set(LINK_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise InputError(f"{path}: missing columns {sorted(missing)}")
        for row in reader:
            if row["rule"] not in RULES:
                raise InputError(f"{path}: unknown rule {row['rule']!r}")
            links.append(TestLink(
                class_path=row["class_path"],
                test_paths=tuple(p for p in row["test_paths"].split(";") if p),
                rule=row["rule"],
                class_lines=int(row["class_lines"]),
                test_lines=int(row["test_lines"]),
                class_fqn=row["class_fqn"],
            ))
    return links


def write_queue_tsv(path, queue: Iterable[QueueEntry]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerow(QUEUE_COLUMNS)
        for q in queue:
            writer.writerow([q.reason, q.test_path, ";".join(q.candidates)])
