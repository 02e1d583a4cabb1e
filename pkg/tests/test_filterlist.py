"""Filter-engine tests, including oracle equivalence against the naive
regex translation (see oracle.py)."""

from __future__ import annotations

import random

import pytest

from sitegauge.filterlist import (
    classify_hosts,
    matches,
    parse_filter_list,
    serialize_rule,
)

from oracle import oracle_set_matches, random_pair, random_rule_text, random_url


class TestParse:
    def test_comment_and_domain_rule(self):
        fs = parse_filter_list("! comment\n||tracker.example^")
        assert len(fs.rules) == 1
        assert fs.rules[0].kind == "domain_anchor"
        assert fs.rules[0].anchor_host == "tracker.example"
        assert fs.skipped == 1

    def test_empty_input(self):
        fs = parse_filter_list("")
        assert len(fs.rules) == 0
        assert fs.skipped == 0

    def test_exception_rule(self):
        fs = parse_filter_list("@@||cdn.example^")
        assert len(fs.rules) == 1
        assert fs.rules[0].kind == "exception"
        assert fs.rules[0].anchor_host == "cdn.example"

    def test_element_hiding_skipped(self):
        fs = parse_filter_list("example.com##.ad\nexample.com#@#.ok\n||keep.example^")
        assert len(fs.rules) == 1
        assert fs.skipped == 2

    def test_section_header_skipped(self):
        fs = parse_filter_list("[Adblock Plus 2.0]\n||x.example^")
        assert fs.skipped == 1 and len(fs.rules) == 1

    def test_options_stripped_rule_kept(self):
        fs = parse_filter_list("||ads.example^$third-party,script")
        assert len(fs.rules) == 1
        assert fs.rules[0].options == "third-party,script"

    def test_document_negation_dropped(self):
        fs = parse_filter_list("||x.example^$~document\n||y.example^$elemhide")
        assert len(fs.rules) == 0
        assert fs.skipped == 2

    def test_unparseable_counted(self):
        fs = parse_filter_list("|| \n@@\nok.rule/path")
        assert len(fs.rules) == 1
        assert fs.skipped == 2

    def test_source_lines(self):
        fs = parse_filter_list("! c\n||a.example^\n\n||b.example^")
        assert [r.source_line for r in fs.rules] == [2, 4]

    def test_domain_index_reaches_every_anchor_rule(self):
        fs = parse_filter_list("||a.example^\n||b.example/x\n@@||a.example/ok\nplainrule")
        indexed = {i for ids in fs.domain_index.values() for i in ids}
        anchored = {i for i, r in enumerate(fs.rules) if r.anchor_host is not None}
        assert indexed == anchored


class TestRoundTrip:
    @pytest.mark.parametrize("raw", [
        "||tracker.example^",
        "@@||cdn.example^",
        "|http://exact.example/|",
        "/banner/*/ad.",
        "||ads.example^$script,image",
        "||x.example^*stats",
    ])
    def test_serialize_reproduces_raw(self, raw):
        fs = parse_filter_list(raw)
        assert serialize_rule(fs.rules[0]) == raw

    def test_serialize_random_rules(self):
        rng = random.Random(7)
        for _ in range(500):
            raw = random_rule_text(rng)
            fs = parse_filter_list(raw)
            if fs.rules:
                assert serialize_rule(fs.rules[0]) == raw


class TestMatches:
    def test_suffix_host_match(self):
        fs = parse_filter_list("||tracker.example^")
        assert matches(fs, "https://sub.tracker.example/a.js") is True

    def test_no_dot_boundary(self):
        fs = parse_filter_list("||tracker.example^")
        assert matches(fs, "https://nottracker.example/") is False

    def test_wildcard_pattern(self):
        # Verified against the regex-translation oracle.
        fs = parse_filter_list("/banner/*/ad.")
        url = "http://x.org/banner/32/ad.js"
        assert oracle_set_matches(fs, url) is True
        assert matches(fs, url) is True

    def test_separator_matches_end_of_url(self):
        fs = parse_filter_list("||t.example^")
        assert matches(fs, "https://t.example") is True

    def test_exception_dominates(self):
        fs = parse_filter_list("||shared.example^\n@@||cdn.shared.example^")
        assert matches(fs, "https://ads.shared.example/x.js") is True
        assert matches(fs, "https://cdn.shared.example/lib.js") is False

    def test_start_end_anchor(self):
        fs = parse_filter_list("|https://exact.example/path|")
        assert matches(fs, "https://exact.example/path") is True
        assert matches(fs, "https://exact.example/path/more") is False
        assert matches(fs, "http://pre.example/https://exact.example/path") is False

    def test_host_case_insensitive_path_case_sensitive(self):
        fs = parse_filter_list("||trk.example/Banner")
        assert matches(fs, "https://TRK.example/Banner") is True
        assert matches(fs, "https://trk.example/banner") is False


class TestClassifyHosts:
    def test_basic(self):
        fs = parse_filter_list("||trk.example^")
        urls = ["https://trk.example/a.js", "https://ok.example/b.js"]
        assert classify_hosts(fs, urls) == {"trk.example"}

    def test_empty(self):
        fs = parse_filter_list("||trk.example^")
        assert classify_hosts(fs, []) == set()

    def test_duplicates_collapse(self):
        fs = parse_filter_list("||trk.example^")
        urls = ["https://trk.example/a.js", "https://trk.example/b.js"]
        assert classify_hosts(fs, urls) == {"trk.example"}


class TestOracleEquivalence:
    """Randomized agreement between the token matcher and the regex oracle."""

    def test_single_rule_equivalence(self):
        rng = random.Random(20240810)
        for _ in range(2000):
            fs, rule, url = random_pair(rng)
            assert matches(fs, url) == oracle_set_matches(fs, url), \
                f"rule={rule.raw!r} url={url!r}"

    def test_multi_rule_sets_with_index_soundness(self):
        rng = random.Random(99)
        for _ in range(400):
            text = "\n".join(random_rule_text(rng) for _ in range(rng.randint(2, 6)))
            fs = parse_filter_list(text)
            for _ in range(5):
                url = random_url(rng, bias_host=next(
                    (r.anchor_host for r in fs.rules if r.anchor_host), None))
                indexed = matches(fs, url, use_index=True)
                linear = matches(fs, url, use_index=False)
                oracle = oracle_set_matches(fs, url)
                assert indexed == linear == oracle, f"rules={text!r} url={url!r}"
