"""Brute-force reference pipeline.

Written without touching the package: plain json, minidom and loops. It takes
the tested-class set from the fixture's hand-declared links rather than
re-deriving it, so discovery is checked separately.
"""

from __future__ import annotations

import json
from collections import defaultdict
from pathlib import Path
from xml.dom import minidom


def _squash(s):
    return "".join(s.split())


def oracle_occurrences(corpus_root, product, build):
    """{(class, method): [(incident_id, trace_index, position), ...]} and counts."""
    found = defaultdict(list)
    matched = malformed = 0
    for path in sorted(Path(corpus_root).rglob("*.json")):
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
            traces = doc["stacktraces"]
            ok = doc["eclipseProduct"] == product and doc["eclipseBuildId"] == build
        except (ValueError, KeyError):
            malformed += 1
            continue
        if not ok:
            continue
        matched += 1
        for ti, trace in enumerate(traces):
            for pos, frame in enumerate(trace, start=1):
                key = (_squash(frame["cN"]), _squash(frame["mN"]))
                earlier = [(_squash(f["cN"]), _squash(f["mN"])) for f in trace[: pos - 1]]
                if key not in earlier:
                    found[key].append((path.stem, ti, pos))
    return found, matched, malformed


def oracle_coverage(xml_path):
    """{(class, method): {kind: [missed, covered]}} summing overloads."""
    doc = minidom.parse(str(xml_path))
    out = {}
    for cls in doc.getElementsByTagName("class"):
        cname = cls.getAttribute("name").replace("/", ".")
        for m in cls.getElementsByTagName("method"):
            key = (cname, m.getAttribute("name"))
            acc = out.setdefault(key, {k: [0, 0] for k in ("INSTRUCTION", "BRANCH", "LINE")})
            for c in m.getElementsByTagName("counter"):
                kind = c.getAttribute("type")
                if kind in acc:
                    acc[kind][0] += int(c.getAttribute("missed"))
                    acc[kind][1] += int(c.getAttribute("covered"))
    return out


def _ratio(pair):
    missed, covered = pair
    return None if missed + covered == 0 else covered / (missed + covered)


def _lines(path):
    with open(path, "rb") as fh:
        return fh.read().count(b"\n")


def oracle_density(source_root, expected_links):
    """{class_fqn: test_lines / class_lines} for the hand-declared links."""
    class_lines, test_lines = {}, defaultdict(int)
    for test_path, (class_path, _rule) in expected_links.items():
        parts = Path(class_path).with_suffix("").parts
        fqn = ".".join(parts[parts.index("src") + 1:])
        class_lines[fqn] = _lines(Path(source_root) / class_path)
        test_lines[fqn] += _lines(Path(source_root) / test_path)
    return {fqn: test_lines[fqn] / n for fqn, n in class_lines.items()}


def oracle_records(fx, product, build, depth=10, name_tags=None):
    """Every field of every scoped record, with the derived threshold and tables."""
    occ, matched, malformed = oracle_occurrences(fx.corpus_root, product, build)
    cov = oracle_coverage(fx.coverage_xml)
    density = oracle_density(fx.source_root, fx.expected_links)

    joined = []
    for key in sorted(occ):
        if key not in cov:
            continue
        hits = occ[key]
        best = min(p for _, _, p in hits)
        outer = key[0].split("$")[0]
        instr = _ratio(cov[key]["INSTRUCTION"])
        rec = {
            "class_fqn": key[0],
            "method_name": key[1],
            "incident_count": len({i for i, _, _ in hits}),
            "first_frame_count": sum(1 for _, _, p in hits if p == 1),
            "top6": best <= 6,
            "top10": best <= 10,
            "topmost": best == 1,
            "line_ratio": _ratio(cov[key]["LINE"]),
            "instr_ratio": instr,
            "branch_ratio": _ratio(cov[key]["BRANCH"]),
            "covered": bool(instr),
            "in_tested_class": outer in density,
            "density": density.get(outer),
        }
        joined.append(rec)

    limit = {1: 1, 6: 6, 10: 10}[depth]
    scoped = [r for r in joined if min(p for _, _, p in occ[(r["class_fqn"], r["method_name"])]) <= limit]
    population = sorted(r["line_ratio"] for r in scoped if r["in_tested_class"] and r["line_ratio"])
    threshold = population[(len(population) - 1) // 2]
    for r in scoped:
        r["strict_tested"] = r["in_tested_class"] and r["line_ratio"] is not None and r["line_ratio"] > threshold
        r["strict_crashed"] = r["first_frame_count"] > 0
        if name_tags is not None:
            r["name_tag"] = name_tags.get(r["method_name"])

    def cells(a, b):
        return {
            "n11": sum(1 for r in scoped if r[a] and r[b]),
            "n10": sum(1 for r in scoped if r[a] and not r[b]),
            "n01": sum(1 for r in scoped if not r[a] and r[b]),
            "n00": sum(1 for r in scoped if not r[a] and not r[b]),
        }

    return {
        "matched": matched,
        "malformed": malformed,
        "joined_count": len(joined),
        "records": scoped,
        "threshold": threshold,
        "table1": cells("in_tested_class", "covered"),
        "table2": cells("strict_tested", "strict_crashed"),
    }
