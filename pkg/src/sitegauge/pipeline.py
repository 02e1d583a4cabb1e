"""The full scan pipeline for one site: DNS, content+leaks, web TLS,
mail TLS, geolocation, then check evaluation.

Module order and partial-failure handling: every scanner failure is
recorded per module and scanning continues; evaluation runs over whatever
facts exist.
"""

from __future__ import annotations

from urllib.parse import urlsplit

from . import dnswire
from .config import ScanConfig, system_resolver
from .content import SignatureTables, extract_content_facts, fetch_site, probe_leaks
from .dnsprobe import GeoDb, GeoFacts, geolocate, resolve_dns
from .fetch import FetchError, FetchLimits, HttpTransport
from .filterlist import load_filter_file, parse_filter_list
from .model import CheckDef, CheckResult, check_catalog, load_catalog, url_host
from .rating import ScanFacts, evaluate_checks
from .suffix import PublicSuffixes
from .tlsprobe import scan_mail_tls, scan_web_tls

from importlib import resources

#: nameserver lookups per scan are bounded; enough for "where is this hosted"
_MAX_NS_GEO_LOOKUPS = 3


class Scanner:
    """Loads scan resources once; scan() is safe for concurrent callers."""

    def __init__(self, config: ScanConfig):
        self.config = config
        if config.filter_list:
            self.filters = load_filter_file(config.filter_list)
        else:
            bundled = resources.files("sitegauge").joinpath("data/tracker_filters.txt")
            self.filters = parse_filter_list(bundled.read_text("utf-8"))
        self.tables = (SignatureTables.load(config.signatures_dir)
                       if config.signatures_dir else SignatureTables.bundled())
        self.suffixes = PublicSuffixes.bundled()
        self.geodb = GeoDb.load(config.geodb) if config.geodb else GeoDb([])
        self.catalog: tuple[CheckDef, ...] = (
            load_catalog(config.catalog_file) if config.catalog_file else check_catalog())
        self.lib_latest = {name: latest for name, latest, _rx in self.tables.libs}
        self.transport = HttpTransport(
            resolve_overrides=config.resolve_overrides,
            http_port=config.http_port,
            https_port=config.https_port,
            user_agent=config.user_agent,
        )
        self.limits = FetchLimits(max_redirects=config.max_redirects,
                                  timeout=config.timeout,
                                  max_body=config.max_body)
        self.resolver = config.resolver or system_resolver()

    def scan(self, url: str) -> tuple[ScanFacts, list[CheckResult]]:
        facts = self.collect_facts(url)
        return facts, evaluate_checks(facts, self.catalog, self.lib_latest)

    def collect_facts(self, url: str) -> ScanFacts:
        host = url_host(url)
        facts = ScanFacts()

        dns_facts = resolve_dns(host, self.resolver, self.config.resolver_port,
                                timeout=self.config.timeout)
        if dns_facts.error and dns_facts.error != "nxdomain":
            facts.errors["dns"] = dns_facts.error
        else:
            facts.dns = dns_facts

        try:
            bundle = fetch_site(self.transport, url, limits=self.limits)
            facts.content = extract_content_facts(
                bundle, self.filters, host, self.tables, self.suffixes)
        except FetchError as exc:
            facts.errors["content"] = f"{type(exc).__name__}: {exc}"
        except Exception as exc:  # defensive: a scanner bug must not kill the job
            facts.errors["content"] = f"content scanner error: {exc}"

        try:
            facts.leaks = probe_leaks(self.transport, url, limits=self.limits)
        except Exception as exc:
            facts.errors["leaks"] = f"leak prober error: {exc}"

        try:
            facts.tls = scan_web_tls(host, self.transport,
                                     trust_store=self.config.trust_store,
                                     limits=self.limits)
        except Exception as exc:
            facts.errors["tls"] = f"TLS scanner error: {exc}"

        if facts.dns is None:
            facts.errors["mail_tls"] = "primary MX unknown: DNS scan failed"
        else:
            try:
                facts.mail_tls = scan_mail_tls(
                    facts.dns.primary_mx, self.transport,
                    smtp_port=self.config.smtp_port,
                    trust_store=self.config.trust_store,
                    timeout=self.config.timeout)
            except Exception as exc:
                facts.errors["mail_tls"] = f"mail scanner error: {exc}"

        facts.geo = self._geolocate(host, facts)
        return facts

    def _geolocate(self, host: str, facts: ScanFacts) -> GeoFacts | None:
        if facts.dns is None:
            return None
        triples: list[tuple[str, str, str]] = []
        for ip in facts.dns.a_records:
            triples.append(("web", host, ip))
        mx = facts.dns.primary_mx
        if mx:
            for ip in self._a_records(mx):
                triples.append(("mail", mx, ip))
        for ns in facts.dns.ns_records[:_MAX_NS_GEO_LOOKUPS]:
            for ip in self._a_records(ns):
                triples.append(("ns", ns, ip))
        return geolocate(triples, self.geodb)

    def _a_records(self, name: str) -> list[str]:
        try:
            msg = dnswire.query(self.resolver, self.config.resolver_port, name,
                                dnswire.TYPE_A, timeout=self.config.timeout)
        except dnswire.DnsError:
            return []
        return [r.data for r in msg.answers if r.rtype == dnswire.TYPE_A]
