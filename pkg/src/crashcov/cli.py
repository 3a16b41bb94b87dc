"""Command line front end.

Subcommands mirror the pipeline stages and persist plain CSV/JSON
intermediates so each stage can be audited or re-run on its own::

    crashcov ingest-incidents --corpus-root incidents/ --out work/
    crashcov ingest-coverage --coverage-xml jacoco.xml --out work/
    crashcov match-tests --source-root eclipse/ --overrides overrides.tsv --out work/
    crashcov analyze --occurrences work/occurrences.csv --methods work/methods.csv \\
                     --links work/links.csv --out work/
    crashcov stats --table 67,522,1099,7835

Exit codes: 0 success, 2 input error, 3 nothing in scope, 4 invariant violation.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from . import coverage, discovery, exact, incidents, synthesis
from .errors import ConfigError, CrashcovError, EmptyScopeError, InputError, InvariantError
from .table import ContingencyTable
from .validation import check_conf_level, check_depth, check_fixed_threshold

log = logging.getLogger("crashcov")

DEFAULTS = {
    "product": incidents.DEFAULT_PRODUCT,
    "build_id": incidents.DEFAULT_BUILD_ID,
    "depth": 10,
    "threshold": "median",
    "threshold_population": synthesis.TESTED_CLASS_NONZERO,
    "conf_level": 0.95,
    "out": "crashcov-out",
    "jobs": 1,
    "test_name_mode": "token",
}

# keys accepted in a config file, with converters for their string values
CONFIG_KEYS = {
    "corpus_root": str,
    "coverage_xml": str,
    "source_root": str,
    "overrides": str,
    "occurrences": str,
    "methods": str,
    "links": str,
    "joined": str,
    "product": str,
    "build_id": str,
    "depth": int,
    "threshold": str,
    "threshold_population": str,
    "conf_level": float,
    "out": str,
    "jobs": int,
    "test_name_mode": str,
    "table": str,
}


@dataclass
class RunConfig:
    corpus_root: str | None = None
    coverage_report_path: str | None = None
    source_root: str | None = None
    overrides_path: str | None = None
    occurrences_path: str | None = None
    methods_path: str | None = None
    links_path: str | None = None
    product: str = incidents.DEFAULT_PRODUCT
    build_id: str = incidents.DEFAULT_BUILD_ID
    depth: int = 10
    threshold_mode: str = "MEDIAN"
    threshold_value: float | None = None
    threshold_population: str = synthesis.TESTED_CLASS_NONZERO
    conf_level: float = 0.95
    output_dir: str = "crashcov-out"
    jobs: int = 1
    test_name_mode: str = "token"

    def __post_init__(self):
        self.depth = check_depth(self.depth)
        self.conf_level = check_conf_level(self.conf_level)
        if self.threshold_mode == "FIXED":
            self.threshold_value = check_fixed_threshold(self.threshold_value)
        elif self.threshold_mode != "MEDIAN":
            raise ConfigError(f"unknown threshold mode {self.threshold_mode!r}")
        if self.threshold_population not in synthesis.POPULATIONS:
            raise ConfigError(f"threshold population must be one of {synthesis.POPULATIONS}")

    @property
    def threshold(self):
        return "median" if self.threshold_mode == "MEDIAN" else self.threshold_value


def read_config_file(path) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment, dashes in keys are allowed."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in CONFIG_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            values[key] = CONFIG_KEYS[key](value)
        except ValueError:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {value!r}") from None
    return values


def resolve_options(args: argparse.Namespace) -> dict:
    """CLI flags override the config file, which overrides the defaults."""
    merged = dict(DEFAULTS)
    if getattr(args, "config", None):
        merged.update(read_config_file(args.config))
    for key, value in vars(args).items():
        if value is not None and key not in ("command", "config", "func"):
            merged[key] = value
    return merged


def build_run_config(opts: dict) -> RunConfig:
    threshold = str(opts.get("threshold", "median"))
    if threshold.lower() == "median":
        mode, value = "MEDIAN", None
    else:
        try:
            value = float(threshold.rstrip("%")) / (100.0 if threshold.endswith("%") else 1.0)
        except ValueError:
            raise ConfigError(f"threshold must be 'median' or a number, got {threshold!r}") from None
        mode = "FIXED"
    return RunConfig(
        corpus_root=opts.get("corpus_root"),
        coverage_report_path=opts.get("coverage_xml"),
        source_root=opts.get("source_root"),
        overrides_path=opts.get("overrides"),
        occurrences_path=opts.get("occurrences"),
        methods_path=opts.get("methods"),
        links_path=opts.get("links"),
        product=opts["product"],
        build_id=opts["build_id"],
        depth=opts["depth"],
        threshold_mode=mode,
        threshold_value=value,
        threshold_population=opts["threshold_population"],
        conf_level=opts["conf_level"],
        output_dir=opts["out"],
        jobs=opts["jobs"],
        test_name_mode=opts["test_name_mode"],
    )


def _out_dir(config: RunConfig) -> Path:
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _require(value, flag):
    if not value:
        raise ConfigError(f"{flag} is required")
    return value


def cmd_ingest_incidents(config: RunConfig) -> int:
    root = _require(config.corpus_root, "--corpus-root")
    occs, stats = incidents.scan_corpus(root, config.product, config.build_id, jobs=config.jobs)
    out = _out_dir(config)
    incidents.write_occurrences_csv(out / "occurrences.csv", occs)
    payload = stats.to_dict()
    payload["product"] = config.product
    payload["build_id"] = config.build_id
    payload["generated_at"] = datetime.now(timezone.utc).isoformat()
    _write_json(out / "incident_stats.json", payload)
    print(f"{stats.matched} of {stats.total_files} incidents matched "
          f"({stats.malformed} malformed), {stats.occurrences} occurrences")
    return 0


def _totals_dict(counters):
    return {k: {"missed": c.missed, "covered": c.covered} for k, c in counters.items()}


def cmd_ingest_coverage(config: RunConfig) -> int:
    path = _require(config.coverage_report_path, "--coverage-xml")
    if not Path(path).is_file():
        raise InputError(f"coverage report not found: {path}")
    report = coverage.parse_report(path)
    out = _out_dir(config)
    coverage.write_methods_csv(out / "methods.csv", report)
    _write_json(out / "coverage_totals.json", {
        "methods": len(report.methods),
        "raw_methods": report.raw_method_count,
        "covered_methods": sum(1 for m in report.methods.values() if m.covered),
        "totals": _totals_dict(report.totals),
        "declared_totals": _totals_dict(report.declared_totals),
    })
    print(f"{len(report.methods)} methods ({report.raw_method_count} before merging overloads)")
    return 0


def cmd_match_tests(config: RunConfig) -> int:
    root = _require(config.source_root, "--source-root")
    found = discovery.discover(root, config.overrides_path, mode=config.test_name_mode, jobs=config.jobs)
    out = _out_dir(config)
    discovery.write_links_csv(out / "links.csv", found.links)
    discovery.write_queue_tsv(out / "manual_queue.tsv", found.queue)
    summary = discovery.density_summary(found.links)
    summary["queued"] = len(found.queue)
    _write_json(out / "discovery_summary.json", summary)
    print(f"{summary['linked_tests']} test files linked to {summary['linked_classes']} classes, "
          f"{len(found.queue)} queued for manual review")
    return 0


def _load_occurrences(config):
    if config.occurrences_path:
        return incidents.read_occurrences_csv(config.occurrences_path), None
    if config.corpus_root:
        return incidents.scan_corpus(config.corpus_root, config.product, config.build_id, jobs=config.jobs)
    raise ConfigError("analyze needs --occurrences or --corpus-root")


def _load_coverage(config):
    if config.methods_path:
        return coverage.read_methods_csv(config.methods_path)
    if config.coverage_report_path:
        return coverage.parse_report(config.coverage_report_path)
    raise ConfigError("analyze needs --methods or --coverage-xml")


def _load_links(config):
    if config.links_path:
        return discovery.read_links_csv(config.links_path)
    if config.source_root:
        return discovery.discover(config.source_root, config.overrides_path,
                                  mode=config.test_name_mode, jobs=config.jobs).links
    raise ConfigError("analyze needs --links or --source-root")


def check_invariants(records, table1: ContingencyTable, table2: ContingencyTable) -> None:
    n = len(records)
    if table1.total != n or table2.total != n:
        raise InvariantError(f"table totals {table1.total}/{table2.total} differ from {n} records")
    for r in records:
        if (r.topmost and not r.top6) or (r.top6 and not r.top10):
            raise InvariantError(f"{r.key}: depth flags are not nested")
        if r.strict_crashed != r.topmost:
            raise InvariantError(f"{r.key}: strict_crashed disagrees with topmost")
        if r.strict_tested and not (r.in_tested_class and r.covered):
            raise InvariantError(f"{r.key}: strictly tested but not covered in a tested class")


def analyze(config: RunConfig):
    """Run the whole analysis from raw inputs or intermediates; return (records, summary)."""
    from .estimators import DepthScope, FisherExactLess, NameTagger, StrictTestedClassifier

    occs, corpus_stats = _load_occurrences(config)
    report = _load_coverage(config)
    links = _load_links(config)

    joined = synthesis.join(occs, report, links)
    scoped = DepthScope(config.depth).fit_transform(joined)
    if not scoped:
        raise EmptyScopeError("no methods in scope")
    classifier = StrictTestedClassifier(config.threshold, config.threshold_population).fit(scoped)
    records = NameTagger().fit_transform(classifier.transform(scoped))

    table1 = synthesis.coverage_cross_tab(records)
    table2 = synthesis.build_table(records)
    check_invariants(records, table1, table2)
    fisher = FisherExactLess(config.conf_level).fit(table2).result_

    summary = synthesis.summarize(records, classifier.threshold_)
    summary.update({
        "depth": config.depth,
        "joined_count": len(joined),
        "unmatched_crash_methods": len(synthesis.unmatched_methods(occs, report)),
        "threshold_mode": config.threshold_mode,
        "threshold_population": config.threshold_population,
        "threshold_population_size": classifier.n_population_,
        "table1_percentages": exact.summarize_percentages(table1),
        "table2_percentages": exact.summarize_percentages(table2),
        "fisher": fisher.to_dict(),
        "name_tags": {
            tag: sum(1 for r in records if r.name_tag == tag)
            for tag in (synthesis.DEBUG_LIKE, synthesis.TRIGGER_LIKE)
        },
    })
    if corpus_stats is not None:
        summary["corpus"] = corpus_stats.to_dict()
    return records, summary


def render_table(t: ContingencyTable, title: str, row_var: str, col_var: str) -> str:
    """Lay out a table with the first flag across columns and the second down rows."""
    n = t.total
    pct = (lambda c: f"({exact.percent_half_up(c, n)})") if n else (lambda c: "")
    rows = [
        ("No", t.n00, t.n10),
        ("Yes", t.n01, t.n11),
        ("Total", t.n00 + t.n01, t.n10 + t.n11),
    ]
    lines = [title, f"{'':10}{col_var:^36}", f"{row_var:<10}{'No':>18}{'Yes':>18}{'Total':>18}"]
    for label, no, yes in rows:
        total = no + yes
        total_text = f"{total} {pct(total)}" if label != "Total" else f"{total}"
        lines.append(f"{label:<10}{f'{no} {pct(no)}':>18}{f'{yes} {pct(yes)}':>18}{total_text:>18}")
    return "\n".join(lines)


def render_report(summary: dict) -> str:
    t1 = ContingencyTable(**summary["table1_cells"])
    t2 = ContingencyTable(**summary["table2_cells"])
    fisher = exact.FisherResult.from_dict(summary["fisher"])
    threshold = summary["threshold"]
    parts = [
        f"Methods matched to coverage: {summary['joined_count']}",
        f"Methods within top-{summary['depth']} frames: {summary['scoped_count']}",
        f"Line coverage threshold: {exact.format_half_up(100 * threshold, 1)}% "
        f"({summary['threshold_mode'].lower()})",
        "",
        render_table(t1, "Code coverage of methods with class unit tests", "Covered", "Class unit test"),
        "",
        render_table(t2, "Crashes of tested methods", "Crashed", "Unit tested"),
        "",
        f"Fisher's exact test (alternative: less, {int(round(fisher.conf_level * 100))}% CI)",
        fisher.fisher_line(),
    ]
    return "\n".join(parts) + "\n"


def cmd_analyze(config: RunConfig) -> int:
    records, summary = analyze(config)
    out = _out_dir(config)
    synthesis.write_records_csv(out / "joined.csv", records)
    _write_json(out / "summary.json", summary)
    text = render_report(summary)
    (out / "report.txt").write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return 0


def cmd_stats(opts: dict) -> int:
    conf_level = check_conf_level(opts["conf_level"])
    if opts.get("table"):
        try:
            table = ContingencyTable.from_string(opts["table"])
        except (TypeError, ValueError) as exc:
            raise InputError(f"--table: {exc}") from None
    elif opts.get("joined"):
        table = synthesis.build_table(synthesis.read_records_csv(opts["joined"]))
    else:
        raise ConfigError("stats needs --table n11,n10,n01,n00 or --joined")
    result = exact.fisher_less(table, conf_level)
    if opts.get("json"):
        payload = {"table": table.to_dict(), "fisher": result.to_dict()}
        if table.total:
            payload["percentages"] = exact.summarize_percentages(table)
        sys.stdout.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    else:
        print(f"table: n11={table.n11} n10={table.n10} n01={table.n01} n00={table.n00}")
        if table.total:
            shares = exact.summarize_percentages(table)
            print("shares: " + " ".join(f"{k}={v}" for k, v in shares.items()))
        if result.degenerate:
            print("degenerate table (a margin is zero)")
        print(result.fisher_line())
    return 0


def _add_common(p):
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--out", help="output directory")
    p.add_argument("--jobs", type=int, help="worker processes for file scanning")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crashcov", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest-incidents", help="extract stack-trace occurrences")
    _add_common(p)
    p.add_argument("--corpus-root")
    p.add_argument("--product")
    p.add_argument("--build-id")

    p = sub.add_parser("ingest-coverage", help="parse a JaCoCo XML report")
    _add_common(p)
    p.add_argument("--coverage-xml")

    p = sub.add_parser("match-tests", help="link test files to production classes")
    _add_common(p)
    p.add_argument("--source-root")
    p.add_argument("--overrides")
    p.add_argument("--test-name-mode", choices=("token", "substring"))

    p = sub.add_parser("analyze", help="join inputs and run the exact test")
    _add_common(p)
    p.add_argument("--corpus-root")
    p.add_argument("--occurrences")
    p.add_argument("--coverage-xml")
    p.add_argument("--methods")
    p.add_argument("--source-root")
    p.add_argument("--links")
    p.add_argument("--overrides")
    p.add_argument("--product")
    p.add_argument("--build-id")
    p.add_argument("--depth", type=int, choices=(1, 6, 10))
    p.add_argument("--threshold", help="'median' or a fixed fraction such as 0.983")
    p.add_argument("--threshold-population", choices=synthesis.POPULATIONS)
    p.add_argument("--conf-level", type=float)
    p.add_argument("--test-name-mode", choices=("token", "substring"))

    p = sub.add_parser("stats", help="exact test on a 2x2 table")
    p.add_argument("--config")
    p.add_argument("--table", help="n11,n10,n01,n00 (tested&crashed, tested, crashed, neither)")
    p.add_argument("--joined", help="classified records CSV from analyze")
    p.add_argument("--conf-level", type=float)
    p.add_argument("--json", action="store_true", default=None)
    return parser


COMMANDS = {
    "ingest-incidents": cmd_ingest_incidents,
    "ingest-coverage": cmd_ingest_coverage,
    "match-tests": cmd_match_tests,
    "analyze": cmd_analyze,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    verbose = args.verbose
    del args.verbose
    try:
        opts = resolve_options(args)
        if args.command == "stats":
            return cmd_stats(opts)
        return COMMANDS[args.command](build_run_config(opts))
    except CrashcovError as exc:
        if verbose:
            log.exception("failed")
        print(f"crashcov: error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
