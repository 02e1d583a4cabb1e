"""DNS scanning and geolocation tests against the in-process stub resolver."""

from __future__ import annotations

import random

import pytest

from sitegauge import dnswire
from sitegauge.dnsprobe import (
    DnsFacts,
    GeoDb,
    geolocate,
    parse_dmarc_policy,
    parse_spf_policy,
    resolve_dns,
)

from dnsstub import StubResolver, Zone


@pytest.fixture()
def full_zone():
    zone = Zone()
    zone.add("good.test", dnswire.TYPE_A, "127.0.0.1")
    zone.add("good.test", dnswire.TYPE_MX, (20, "mx2.good.test"))
    zone.add("good.test", dnswire.TYPE_MX, (10, "mx1.good.test"))
    zone.add("good.test", dnswire.TYPE_NS, "ns1.good.test")
    zone.add("good.test", dnswire.TYPE_TXT, "some unrelated txt")
    zone.add("good.test", dnswire.TYPE_TXT, "v=spf1 mx -all")
    zone.add("_dmarc.good.test", dnswire.TYPE_TXT, "v=DMARC1; p=reject; rua=mailto:a@b")
    zone.add("good.test", dnswire.TYPE_RRSIG, b"\x00" * 18)
    zone.mark_validated("good.test")

    zone.add("bare.test", dnswire.TYPE_A, "192.0.2.7")
    zone.add("signed.test", dnswire.TYPE_A, "192.0.2.9")
    zone.add("signed.test", dnswire.TYPE_RRSIG, b"\x00" * 18)
    return zone


class TestResolveDns:
    def test_full_facts(self, full_zone):
        with StubResolver(full_zone) as stub:
            facts = resolve_dns("good.test", "127.0.0.1", port=stub.port)
        assert facts.a_records == ["127.0.0.1"]
        assert facts.mx_records == [(10, "mx1.good.test"), (20, "mx2.good.test")]
        assert facts.primary_mx == "mx1.good.test"
        assert facts.ns_records == ["ns1.good.test"]
        assert facts.spf_record == "v=spf1 mx -all"
        assert facts.spf_policy == "hard_fail"
        assert facts.dmarc_policy == "reject"
        assert facts.dnssec_signal == "validated"
        assert facts.error is None

    def test_no_txt_records(self, full_zone):
        with StubResolver(full_zone) as stub:
            facts = resolve_dns("bare.test", "127.0.0.1", port=stub.port)
        assert facts.spf_policy == "absent" and facts.spf_record is None
        assert facts.dmarc_policy == "absent" and facts.dmarc_record is None
        assert facts.dnssec_signal == "unsigned"

    def test_signed_unvalidated(self, full_zone):
        with StubResolver(full_zone) as stub:
            facts = resolve_dns("signed.test", "127.0.0.1", port=stub.port)
        assert facts.dnssec_signal == "signed_unvalidated"

    def test_nxdomain(self, full_zone):
        with StubResolver(full_zone) as stub:
            facts = resolve_dns("missing.test", "127.0.0.1", port=stub.port)
        assert facts.a_records == [] and facts.mx_records == []
        assert facts.spf_policy == "absent"

    def test_resolver_timeout(self):
        # Nothing listens on this port; UDP queries just time out.
        facts = resolve_dns("good.test", "127.0.0.1", port=1, timeout=0.2)
        assert facts.error is not None
        assert facts.dnssec_signal == "unknown"

    def test_mx_preference_tie_breaks_on_host(self):
        zone = Zone()
        zone.add("tie.test", dnswire.TYPE_A, "127.0.0.1")
        zone.add("tie.test", dnswire.TYPE_MX, (10, "zzz.tie.test"))
        zone.add("tie.test", dnswire.TYPE_MX, (10, "aaa.tie.test"))
        with StubResolver(zone) as stub:
            facts = resolve_dns("tie.test", "127.0.0.1", port=stub.port)
        assert facts.primary_mx == "aaa.tie.test"

    def test_roundtrip_dict(self, full_zone):
        with StubResolver(full_zone) as stub:
            facts = resolve_dns("good.test", "127.0.0.1", port=stub.port)
        assert DnsFacts.from_dict(facts.to_dict()) == facts


class TestPolicyParsers:
    @pytest.mark.parametrize("record,policy", [
        ("v=spf1 mx -all", "hard_fail"),
        ("v=spf1 include:x.test ~all", "soft_fail"),
        ("v=spf1 ?all", "neutral"),
        ("v=spf1 +all", "pass_all"),
        ("v=spf1 all", "pass_all"),
        ("v=spf1 ip4:192.0.2.0/24", "neutral"),
    ])
    def test_spf(self, record, policy):
        assert parse_spf_policy(record) == policy

    @pytest.mark.parametrize("record,policy", [
        ("v=DMARC1; p=reject; rua=mailto:a@b", "reject"),
        ("v=DMARC1; p=quarantine", "quarantine"),
        ("v=DMARC1; p=none", "none"),
        ("v=DMARC1; sp=reject", "none"),
    ])
    def test_dmarc(self, record, policy):
        assert parse_dmarc_policy(record) == policy

    def test_garbage_never_crashes(self):
        for garbage in ["", "v=spf1", "\x00\xff", ";;;=;;;", "v=DMARC1;;p==="]:
            parse_spf_policy(garbage)
            parse_dmarc_policy(garbage)


class TestGeoDb:
    def _db(self, tmp_path, rows):
        path = tmp_path / "geo.tsv"
        path.write_text("# test db\n" + "".join(f"{cidr}\t{cc}\n" for cidr, cc in rows))
        return GeoDb.load(str(path))

    def test_range_containment(self, tmp_path):
        db = self._db(tmp_path, [("192.0.2.0/24", "DE")])
        assert db.lookup("192.0.2.7") == "DE"

    def test_outside_all_ranges(self, tmp_path):
        db = self._db(tmp_path, [("192.0.2.0/24", "DE")])
        assert db.lookup("198.51.100.1") == "unknown"

    def test_longest_prefix_wins(self, tmp_path):
        db = self._db(tmp_path, [("10.0.0.0/8", "US"), ("10.1.0.0/16", "DE")])
        assert db.lookup("10.1.2.3") == "DE"
        assert db.lookup("10.2.2.3") == "US"

    def test_ipv6(self, tmp_path):
        db = self._db(tmp_path, [("2001:db8::/32", "SE")])
        assert db.lookup("2001:db8::1") == "SE"
        assert db.lookup("2001:db9::1") == "unknown"

    def test_index_agrees_with_linear_scan(self, tmp_path):
        rng = random.Random(424242)
        rows = []
        for _ in range(40):
            prefix = rng.randint(8, 28)
            base = rng.getrandbits(32) & (0xFFFFFFFF << (32 - prefix))
            octets = [(base >> s) & 0xFF for s in (24, 16, 8, 0)]
            rows.append((f"{'.'.join(map(str, octets))}/{prefix}",
                         rng.choice(["DE", "US", "FR", "SE", "JP"])))
        db = self._db(tmp_path, rows)
        for _ in range(3000):
            ip = ".".join(str(rng.randint(0, 255)) for _ in range(4))
            assert db.lookup(ip) == db.linear_lookup(ip), ip


class TestGeolocate:
    def test_roles_and_unknown(self, tmp_path):
        path = tmp_path / "geo.tsv"
        path.write_text("127.0.0.0/8\tDE\n")
        db = GeoDb.load(str(path))
        facts = geolocate(
            [("web", "a.test", "127.0.0.1"),
             ("web", "a.test", "127.0.0.1"),      # duplicate collapses
             ("mail", "mx.a.test", "127.0.0.2"),
             ("ns", "ns.a.test", "203.0.113.9")],
            db,
        )
        assert ("web", "a.test", "127.0.0.1", "DE") in facts.locations
        assert ("mail", "mx.a.test", "127.0.0.2", "DE") in facts.locations
        assert ("ns", "ns.a.test", "203.0.113.9", "unknown") in facts.locations
        assert len(facts.locations) == 3

    def test_two_web_ips_two_entries(self, tmp_path):
        path = tmp_path / "geo.tsv"
        path.write_text("127.0.0.0/8\tDE\n10.0.0.0/8\tFR\n")
        db = GeoDb.load(str(path))
        facts = geolocate([("web", "a.test", "127.0.0.1"), ("web", "a.test", "10.0.0.1")], db)
        assert len(facts.locations) == 2
        assert {loc[3] for loc in facts.locations} == {"DE", "FR"}
