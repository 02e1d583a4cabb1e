"""Core type, catalog, and URL-normalization tests."""

from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from sitegauge.model import (
    CheckGroup,
    Color,
    MalformedUrl,
    RankingScheme,
    SiteList,
    check_catalog,
    load_catalog,
    normalize_url,
)


class TestNormalizeUrl:
    def test_scheme_default_and_casefold(self):
        assert normalize_url("EXAMPLE.org") == "https://example.org/"

    def test_default_port_and_fragment_stripped(self):
        assert normalize_url("http://example.org:80/a#frag") == "http://example.org/a"

    def test_unparseable(self):
        with pytest.raises(MalformedUrl):
            normalize_url("ht!tp://")

    def test_https_default_port(self):
        assert normalize_url("https://example.org:443/x") == "https://example.org/x"

    def test_non_default_port_kept(self):
        assert normalize_url("http://example.org:8080/") == "http://example.org:8080/"

    def test_path_and_query_preserved(self):
        assert normalize_url("https://Ex.org/A/B?q=1#f") == "https://ex.org/A/B?q=1"

    @pytest.mark.parametrize("bad", ["", "   ", "https://", "ftp://x.org/", "http:// spa ce.org"])
    def test_rejects(self, bad):
        with pytest.raises(MalformedUrl):
            normalize_url(bad)

    @given(st.from_regex(r"(http://|https://|)[A-Za-z0-9][A-Za-z0-9.-]{0,20}(:[0-9]{1,4})?(/[A-Za-z0-9._~-]{0,8}){0,3}", fullmatch=True))
    def test_idempotent(self, raw):
        try:
            once = normalize_url(raw)
        except MalformedUrl:
            return
        assert normalize_url(once) == once


class TestCatalog:
    def test_expected_entries(self):
        entries = {(c.check_id, c.group, c.critical) for c in check_catalog()}
        assert ("third_party_trackers", CheckGroup.NO_TRACK, True) in entries
        assert ("leak_server_status", CheckGroup.ATTACKS, True) in entries
        assert ("mail_starttls", CheckGroup.ENC_MAIL, True) in entries

    def test_partition(self):
        ids = [c.check_id for c in check_catalog()]
        assert len(ids) == len(set(ids))
        assert {c.group for c in check_catalog()} == set(CheckGroup)

    def test_critical_set(self):
        critical = {c.check_id for c in check_catalog() if c.critical}
        assert critical == {
            "third_party_trackers", "https_offered", "https_redirect", "cert_valid",
            "mail_starttls", "leak_server_status", "leak_server_info",
            "leak_test_scripts", "leak_vcs", "leak_core",
        }

    def test_load_catalog_roundtrip(self, tmp_path):
        path = tmp_path / "catalog.tsv"
        lines = [
            f"{c.check_id}\t{c.group.value}\t{'critical' if c.critical else 'normal'}"
            for c in check_catalog()
        ]
        path.write_text("# comment\n" + "\n".join(lines) + "\n")
        loaded = load_catalog(str(path))
        assert [(c.check_id, c.group, c.critical) for c in loaded] == \
            [(c.check_id, c.group, c.critical) for c in check_catalog()]

    def test_load_catalog_rejects_duplicates(self, tmp_path):
        path = tmp_path / "catalog.tsv"
        path.write_text("a\tNoTrack\tcritical\na\tAttacks\tnormal\n")
        with pytest.raises(ValueError):
            load_catalog(str(path))


class TestColors:
    def test_order(self):
        assert Color.GREEN.rank < Color.YELLOW.rank < Color.NEUTRAL.rank < Color.RED.rank


class TestRankingScheme:
    def test_parse(self):
        s = RankingScheme.parse("EncWeb,NoTrack,Attacks,EncMail")
        assert s.group_order[0] == CheckGroup.ENC_WEB

    def test_rejects_non_permutation(self):
        with pytest.raises(ValueError):
            RankingScheme.parse("NoTrack,NoTrack,EncWeb,EncMail")
        with pytest.raises(ValueError):
            RankingScheme.parse("NoTrack")


class TestSiteList:
    def test_duplicate_urls_rejected(self):
        with pytest.raises(ValueError):
            SiteList.build_sites(["https://a.example/", "A.EXAMPLE"], ())

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            SiteList.build_sites([], ())

    def test_properties_aligned_to_schema(self):
        sites = SiteList.build_sites(
            [{"url": "https://a.example/", "properties": {"students": "500", "extra": "x"}}],
            ("students", "state"),
        )
        assert sites[0].properties == {"students": "500", "state": None}
