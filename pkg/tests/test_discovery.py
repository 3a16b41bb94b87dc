import pytest

from crashcov.discovery import (
    MANUAL,
    NAME_STRIP,
    PATH_RTL,
    WORD_OVERLAP,
    SourceEntry,
    TestLink,
    apply_overrides,
    camel_tokens,
    classify_files,
    density_summary,
    discover,
    is_test_name,
    match_by_path,
    match_by_word_overlap,
    match_tests,
    read_links_csv,
    read_overrides,
    strip_test_name,
    write_links_csv,
)
from crashcov.errors import InputError, OverrideError
from synthetic import ECLIPSE_LINKS, build_eclipse_tree, java_source


def entry(path, lines=10):
    stem = path.rsplit("/", 1)[-1].rsplit(".", 1)[0]
    return SourceEntry(path, stem, is_test_name(stem), lines)


def write_tree(root, paths):
    for p in paths:
        f = root / p
        f.parent.mkdir(parents=True, exist_ok=True)
        f.write_text(java_source("p", f.stem, 5), encoding="utf-8")
    return root


class TestNames:
    @pytest.mark.parametrize("stem,expected", [
        ("WidgetPropertiesTest", True),
        ("WidgetProperties", False),
        ("LatestNews", False),
        ("Test_org_eclipse_swt_widgets_Text", True),
        ("FooTester", True),
        ("AllTests", True),
        ("TESTUtil", True),
        ("Contest", False),
        ("Testimony", False),
    ])
    def test_is_test_name(self, stem, expected):
        assert is_test_name(stem) is expected

    def test_substring_mode(self):
        assert is_test_name("LatestNews", mode="substring")

    @pytest.mark.parametrize("stem,expected", [
        ("WidgetPropertiesTest", "WidgetProperties"),
        ("WidgetPropertiesTests", "WidgetProperties"),
        ("TestWidgetProperties", "WidgetProperties"),
        ("Test_org_eclipse_swt_widgets_Text", "Text"),
        ("WidgetPropertiesTester", "WidgetProperties"),
        ("Testimony", None),
        ("Test", None),
    ])
    def test_strip(self, stem, expected):
        assert strip_test_name(stem) == expected

    def test_camel_tokens(self):
        assert camel_tokens("org.eclipse/JFaceUITests_x") == ["org", "eclipse", "J", "Face", "UI", "Tests", "x"]


class TestMatching:
    def test_path_right_to_left(self):
        test = entry("ui/tests/org.eclipse.jface.tests.databinding/src/org/eclipse/jface/tests/databinding/swt/WidgetPropertiesTest.java")
        good = entry("ui/bundles/org.eclipse.jface.databinding/src/org/eclipse/jface/databinding/swt/WidgetProperties.java")
        other = entry("ui/bundles/org.eclipse.ui/src/org/eclipse/ui/internal/WidgetProperties.java")
        assert match_by_path(test, [other, good]) == good.path

    def test_identical_after_deletion(self):
        test = entry("m/tests/a/b/FooTest.java")
        cls = entry("m/a/b/Foo.java")
        assert match_by_path(test, [cls]) == cls.path

    def test_path_tie(self):
        test = entry("t/x/FooTest.java")
        assert match_by_path(test, [entry("a/x/Foo.java"), entry("b/x/Foo.java")]) is None

    def test_word_overlap(self):
        test = entry("ui/tests/org.eclipse.ui.tests/Eclipse JFace Tests/org/eclipse/jface/tests/preferences/BooleanFieldEditorTest.java")
        cls = entry("ui/bundles/org.eclipse.jface/src/org/eclipse/jface/preference/BooleanFieldEditor.java")
        assert match_by_path(test, [cls]) is None
        assert match_by_word_overlap(test, [cls]) == cls.path

    def test_word_overlap_tie(self):
        test = entry("t/q/FooTest.java")
        a, b = entry("x/y/Foo.java"), entry("y/x/Foo.java")
        assert match_by_word_overlap(test, [a, b]) is None

    def test_tie_goes_to_queue(self, tmp_path):
        write_tree(tmp_path, ["t/q/FooTest.java", "x/y/Foo.java", "y/x/Foo.java"])
        found = match_tests(classify_files(tmp_path))
        assert found.links == []
        assert [(q.reason, q.test_path) for q in found.queue] == [("TIE", "t/q/FooTest.java")]
        assert found.queue[0].candidates == ("x/y/Foo.java", "y/x/Foo.java")

    def test_same_directory_is_name_strip(self, tmp_path):
        write_tree(tmp_path, ["m/a/Foo.java", "m/a/FooTest.java"])
        found = match_tests(classify_files(tmp_path))
        assert [(l.class_path, l.rule) for l in found.links] == [("m/a/Foo.java", NAME_STRIP)]

    def test_no_tests(self, tmp_path):
        write_tree(tmp_path, ["m/a/Foo.java", "m/a/LatestNews.java"])
        sets = classify_files(tmp_path)
        assert sets.tests == []
        assert match_tests(sets).links == []

    def test_unstrippable_and_orphan(self, tmp_path):
        write_tree(tmp_path, ["m/a/SomeTestHelper.java", "m/a/BarTest.java"])
        found = match_tests(classify_files(tmp_path))
        assert {(q.reason, q.test_path) for q in found.queue} == {
            ("NO_STRIP", "m/a/SomeTestHelper.java"), ("NO_CANDIDATE", "m/a/BarTest.java")}


class TestClassify:
    def test_line_counts_and_fqn(self, tmp_path):
        f = tmp_path / "m" / "src" / "org" / "x" / "Foo.java"
        f.parent.mkdir(parents=True)
        f.write_text("package org.x;\nclass Foo {\n}\n// no newline", encoding="utf-8")
        (tmp_path / "m" / "notes.txt").write_text("ignored\n")
        sets = classify_files(tmp_path)
        (only,) = sets.production
        assert only.line_count == 3
        assert only.class_fqn == "org.x.Foo"
        assert sets.tests == []

    def test_every_file_in_one_set(self, fixture_tree):
        sets = classify_files(fixture_tree.source_root)
        paths = [e.path for e in sets.tests] + [e.path for e in sets.production]
        assert len(paths) == len(set(paths)) == 12
        assert all(e.is_test_candidate for e in sets.tests)
        assert "bundles/org.example.ui/src/org/example/ui/LatestNews.java" in {e.path for e in sets.production}

    def test_parallel_scan_identical(self, fixture_tree):
        a = classify_files(fixture_tree.source_root)
        b = classify_files(fixture_tree.source_root, jobs=4)
        assert (a.tests, a.production) == (b.tests, b.production)

    def test_missing_root(self, tmp_path):
        with pytest.raises(InputError):
            classify_files(tmp_path / "nope")


class TestFixtureTrees:
    def test_synthetic_links(self, fixture_tree):
        found = discover(fixture_tree.source_root)
        got = {t: (l.class_path, l.rule) for l in found.links for t in l.test_paths}
        assert got == fixture_tree.expected_links
        assert found.queue == []

    def test_eclipse_examples(self, tmp_path):
        src, overrides = build_eclipse_tree(tmp_path)
        found = discover(src, overrides)
        got = {}
        for link in found.links:
            for t in link.test_paths:
                classes, rule = got.get(t, ((), link.rule))
                assert rule == link.rule
                got[t] = (tuple(sorted(classes + (link.class_path,))), rule)
        assert got == ECLIPSE_LINKS
        assert found.queue == []

    def test_links_bipartite(self, tmp_path):
        src, overrides = build_eclipse_tree(tmp_path)
        sets = classify_files(src)
        tests = {e.path for e in sets.tests}
        for link in discover(src, overrides).links:
            assert link.class_path not in tests
            assert set(link.test_paths) <= tests

    def test_deterministic_output(self, tmp_path):
        src, overrides = build_eclipse_tree(tmp_path)
        write_links_csv(tmp_path / "a.csv", discover(src, overrides).links)
        write_links_csv(tmp_path / "b.csv", discover(src, overrides, jobs=3).links)
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


class TestOverrides:
    @pytest.fixture
    def tree(self, tmp_path):
        write_tree(tmp_path, ["m/a/Foo.java", "m/a/FooTest.java", "m/b/Bar.java", "m/b/Helper.java"])
        return classify_files(tmp_path)

    def test_empty_overrides_identity(self, tree):
        links = match_tests(tree).links
        assert apply_overrides(links, "", tree) == links

    def test_suppress(self, tree):
        links = match_tests(tree).links
        assert apply_overrides(links, "SUPPRESS\tm/a/Foo.java\tm/a/FooTest.java\n", tree) == []

    def test_add_multiple(self, tree):
        links = apply_overrides(match_tests(tree).links, "ADD\tm/b/Bar.java;m/b/Helper.java\tm/a/FooTest.java", tree)
        assert [(l.class_path, l.rule) for l in links] == [
            ("m/a/Foo.java", NAME_STRIP), ("m/b/Bar.java", MANUAL), ("m/b/Helper.java", MANUAL)]

    def test_add_existing_pair_is_deduplicated(self, tree):
        links = apply_overrides(match_tests(tree).links, "ADD\tm/a/Foo.java\tm/a/FooTest.java", tree)
        assert [(l.class_path, l.rule) for l in links] == [("m/a/Foo.java", NAME_STRIP)]

    def test_unknown_path(self, tree):
        with pytest.raises(OverrideError) as err:
            apply_overrides([], "# c\nADD\tm/a/Foo.java\tm/a/Gone.java\n", tree)
        assert err.value.rows[0][0] == 2
        assert "Gone.java" in str(err.value)

    def test_bad_row(self):
        with pytest.raises(InputError):
            read_overrides("LINK\ta\tb")


class TestOutputs:
    def test_links_csv_round_trip(self, tmp_path):
        links = [TestLink("a/Foo.java", ("a/FooTest.java", "b/FooTests.java"), PATH_RTL, 10, 7, "a.Foo")]
        write_links_csv(tmp_path / "l.csv", links)
        assert read_links_csv(tmp_path / "l.csv") == links
        assert links[0].density == 0.7

    def test_density_summary(self):
        links = [
            TestLink("A", ("t1",), PATH_RTL, 10, 5),
            TestLink("B", ("t2", "t3"), WORD_OVERLAP, 20, 30),
        ]
        s = density_summary(links)
        assert s["aggregate_density"] == 35 / 30
        assert s["median_density"] == (0.5 + 1.5) / 2
        assert (s["linked_classes"], s["linked_tests"]) == (2, 3)
