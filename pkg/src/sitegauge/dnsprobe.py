"""DNS facts: MX, SPF, DMARC, DNSSEC signal, nameservers, and GeoIP lookup.

SPF/DMARC parsing is total: arbitrary TXT garbage yields `absent`, never an
exception. DNSSEC is signaled, not validated here: we trust the configured
validating resolver's AD flag and independently check RRSIG existence.
"""

from __future__ import annotations

import bisect
import ipaddress
import re
from dataclasses import dataclass, field

from . import dnswire

SPF_POLICIES = ("hard_fail", "soft_fail", "neutral", "pass_all", "absent")
DMARC_POLICIES = ("none", "quarantine", "reject", "absent")
DNSSEC_SIGNALS = ("validated", "signed_unvalidated", "unsigned", "unknown")


@dataclass
class DnsFacts:
    a_records: list[str] = field(default_factory=list)
    mx_records: list[tuple[int, str]] = field(default_factory=list)
    ns_records: list[str] = field(default_factory=list)
    spf_record: str | None = None
    spf_policy: str = "absent"
    dmarc_record: str | None = None
    dmarc_policy: str = "absent"
    dnssec_signal: str = "unknown"
    error: str | None = None

    @property
    def primary_mx(self) -> str | None:
        """Lowest preference number wins; ties break on the smaller hostname."""
        if not self.mx_records:
            return None
        return min(self.mx_records)[1]

    def to_dict(self) -> dict:
        return {
            "a_records": list(self.a_records),
            "mx_records": [[p, h] for p, h in self.mx_records],
            "ns_records": list(self.ns_records),
            "spf_record": self.spf_record,
            "spf_policy": self.spf_policy,
            "dmarc_record": self.dmarc_record,
            "dmarc_policy": self.dmarc_policy,
            "dnssec_signal": self.dnssec_signal,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DnsFacts":
        return cls(
            a_records=list(d.get("a_records") or []),
            mx_records=[(int(p), h) for p, h in d.get("mx_records") or []],
            ns_records=list(d.get("ns_records") or []),
            spf_record=d.get("spf_record"),
            spf_policy=d.get("spf_policy", "absent"),
            dmarc_record=d.get("dmarc_record"),
            dmarc_policy=d.get("dmarc_policy", "absent"),
            dnssec_signal=d.get("dnssec_signal", "unknown"),
            error=d.get("error"),
        )


@dataclass
class GeoFacts:
    # (role in {web, mail, ns}, host, ip, country code or "unknown")
    locations: list[tuple[str, str, str, str]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"locations": [list(t) for t in self.locations]}

    @classmethod
    def from_dict(cls, d: dict) -> "GeoFacts":
        return cls(locations=[tuple(t) for t in d.get("locations") or []])


_ALL_RE = re.compile(r"^([-~?+]?)all$")


def parse_spf_policy(record: str) -> str:
    """Policy from the `all` mechanism qualifier of an SPF record."""
    for token in record.split()[1:]:
        m = _ALL_RE.match(token.strip().lower())
        if not m:
            continue
        return {"-": "hard_fail", "~": "soft_fail", "?": "neutral"}.get(m.group(1), "pass_all")
    return "neutral"


def parse_dmarc_policy(record: str) -> str:
    for part in record.split(";"):
        if "=" not in part:
            continue
        key, _, value = part.partition("=")
        if key.strip().lower() == "p":
            value = value.strip().lower()
            if value in ("none", "quarantine", "reject"):
                return value
    return "none"


def resolve_dns(host: str, resolver: str, port: int = 53,
                timeout: float = 3.0) -> DnsFacts:
    """Query A/AAAA, MX, NS and TXT plus the _dmarc TXT and an RRSIG probe.

    A resolver timeout leaves the affected fields unknown/absent and records
    the failure; NXDOMAIN yields empty record lists.
    """
    facts = DnsFacts()
    qid = 0x2000

    def ask(name: str, qtype: int) -> dnswire.Message | None:
        nonlocal qid
        if facts.error == "resolver timeout":
            return None  # resolver already dead; don't pile up timeouts
        qid += 1
        try:
            return dnswire.query(resolver, port, name, qtype, timeout=timeout, qid=qid)
        except dnswire.DnsTimeout:
            facts.error = "resolver timeout"
            return None
        except dnswire.DnsError as exc:
            facts.error = str(exc)
            return None

    a_msg = ask(host, dnswire.TYPE_A)
    if a_msg is not None:
        if a_msg.rcode == dnswire.RCODE_NXDOMAIN:
            facts.error = facts.error or "nxdomain"
            return facts
        facts.a_records = [r.data for r in a_msg.answers if r.rtype == dnswire.TYPE_A]
    aaaa_msg = ask(host, dnswire.TYPE_AAAA)
    if aaaa_msg is not None:
        facts.a_records += [r.data for r in aaaa_msg.answers if r.rtype == dnswire.TYPE_AAAA]

    mx_msg = ask(host, dnswire.TYPE_MX)
    if mx_msg is not None:
        pairs = [r.data for r in mx_msg.answers if r.rtype == dnswire.TYPE_MX]
        facts.mx_records = sorted((int(p), h.lower()) for p, h in pairs)

    ns_msg = ask(host, dnswire.TYPE_NS)
    if ns_msg is not None:
        facts.ns_records = sorted(r.data.lower() for r in ns_msg.answers
                                  if r.rtype == dnswire.TYPE_NS)

    txt_msg = ask(host, dnswire.TYPE_TXT)
    if txt_msg is not None:
        for r in txt_msg.answers:
            if r.rtype == dnswire.TYPE_TXT and str(r.data).lower().startswith("v=spf1"):
                facts.spf_record = str(r.data)
                facts.spf_policy = parse_spf_policy(facts.spf_record)
                break

    dmarc_msg = ask(f"_dmarc.{host}", dnswire.TYPE_TXT)
    if dmarc_msg is not None:
        for r in dmarc_msg.answers:
            if r.rtype == dnswire.TYPE_TXT and str(r.data).lower().startswith("v=dmarc1"):
                facts.dmarc_record = str(r.data)
                facts.dmarc_policy = parse_dmarc_policy(facts.dmarc_record)
                break

    rrsig_msg = ask(host, dnswire.TYPE_RRSIG)
    if a_msg is not None:
        if a_msg.ad:
            facts.dnssec_signal = "validated"
        elif rrsig_msg is not None:
            has_rrsig = any(r.rtype == dnswire.TYPE_RRSIG for r in rrsig_msg.answers)
            facts.dnssec_signal = "signed_unvalidated" if has_rrsig else "unsigned"
    return facts


class GeoDb:
    """CIDR-to-country lookup over a sorted text database.

    File format: `CIDR <TAB> ISO-3166-alpha-2`, one row per line, `#`
    comments allowed. Nested CIDRs resolve longest-prefix-first. The lookup
    uses a flattened disjoint-interval index; `linear_lookup` is the naive
    reference used by the soundness tests.
    """

    def __init__(self, rows: list[tuple[ipaddress._BaseNetwork, str]]):
        seen: set[str] = set()
        self.rows = []
        for net, cc in rows:
            key = str(net)
            if key not in seen:
                seen.add(key)
                self.rows.append((net, cc))
        self._segments = {4: self._flatten(4), 6: self._flatten(6)}

    @classmethod
    def load(cls, path: str) -> "GeoDb":
        rows = []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                try:
                    cidr, cc = line.split("\t")
                    rows.append((ipaddress.ip_network(cidr.strip(), strict=False), cc.strip()))
                except ValueError as exc:
                    raise ValueError(f"{path}:{lineno}: bad geodb row: {line!r}") from exc
        return cls(rows)

    def _flatten(self, version: int) -> tuple[list[int], list[tuple[int, str]]]:
        ranges = sorted(
            ((int(net.network_address), int(net.broadcast_address), cc)
             for net, cc in self.rows if net.version == version),
            key=lambda t: (t[0], -t[1]),
        )
        starts: list[int] = []
        segments: list[tuple[int, str]] = []  # (end, cc), aligned with starts
        stack: list[tuple[int, int, str]] = []
        pos = 0

        def emit(start: int, end: int, cc: str) -> None:
            if start <= end:
                starts.append(start)
                segments.append((end, cc))

        for s, e, cc in ranges:
            while stack and stack[-1][1] < s:
                _, top_end, top_cc = stack.pop()
                emit(pos, top_end, top_cc)
                pos = top_end + 1
            if stack and pos < s:
                emit(pos, s - 1, stack[-1][2])
            pos = s
            stack.append((s, e, cc))
        while stack:
            _, top_end, top_cc = stack.pop()
            emit(pos, top_end, top_cc)
            pos = top_end + 1
        return starts, segments

    def lookup(self, ip: str) -> str:
        try:
            addr = ipaddress.ip_address(ip)
        except ValueError:
            return "unknown"
        starts, segments = self._segments[addr.version]
        value = int(addr)
        i = bisect.bisect_right(starts, value) - 1
        if i >= 0:
            end, cc = segments[i]
            if value <= end:
                return cc
        return "unknown"

    def linear_lookup(self, ip: str) -> str:
        """Reference implementation: scan every range, longest prefix wins."""
        try:
            addr = ipaddress.ip_address(ip)
        except ValueError:
            return "unknown"
        best_cc = "unknown"
        best_len = -1
        for net, cc in self.rows:
            if net.version == addr.version and addr in net and net.prefixlen > best_len:
                best_len = net.prefixlen
                best_cc = cc
        return best_cc


def geolocate(ips: list[tuple[str, str, str]], geodb: GeoDb) -> GeoFacts:
    """Map each (role, host, ip) triple to a country code; each IP appears once per role."""
    seen: set[tuple[str, str]] = set()
    locations = []
    for role, host, ip in ips:
        if (role, ip) in seen:
            continue
        seen.add((role, ip))
        locations.append((role, host, ip, geodb.lookup(ip)))
    return GeoFacts(locations=locations)
