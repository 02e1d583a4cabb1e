"""Check evaluation, per-group color rating, and lexicographic ranking.

Rating semantics: a group rates green when all of its checks pass, red when
a critical check fails, neutral when every check is neutral or errored
(e.g. the mail group without an MX record), yellow otherwise. A site's
overall rating is the rating of its worst group. Ranking sorts sites
lexicographically over the user-chosen group order; reordering groups can
never change any color, only row order.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .content import ContentFacts, LeakFacts
from .dnsprobe import DnsFacts, GeoFacts
from .model import (
    CheckDef,
    CheckGroup,
    CheckResult,
    Color,
    Outcome,
    RankingScheme,
    check_catalog,
)
from .tlsprobe import MailTlsFacts, OFFERED, REFUSED, TlsFacts


class EmptyGroup(ValueError):
    """rate_group called without any check results."""


@dataclass
class ScanFacts:
    """Everything the scanners produced for one site; each part optional
    (absent means that scanner failed, recorded in `errors`)."""

    content: ContentFacts | None = None
    leaks: LeakFacts | None = None
    tls: TlsFacts | None = None
    mail_tls: MailTlsFacts | None = None
    dns: DnsFacts | None = None
    geo: GeoFacts | None = None
    errors: dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "content": self.content.to_dict() if self.content else None,
            "leaks": self.leaks.to_dict() if self.leaks else None,
            "tls": self.tls.to_dict() if self.tls else None,
            "mail_tls": self.mail_tls.to_dict() if self.mail_tls else None,
            "dns": self.dns.to_dict() if self.dns else None,
            "geo": self.geo.to_dict() if self.geo else None,
            "errors": dict(sorted(self.errors.items())),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScanFacts":
        return cls(
            content=ContentFacts.from_dict(d["content"]) if d.get("content") else None,
            leaks=LeakFacts.from_dict(d["leaks"]) if d.get("leaks") else None,
            tls=TlsFacts.from_dict(d["tls"]) if d.get("tls") else None,
            mail_tls=MailTlsFacts.from_dict(d["mail_tls"]) if d.get("mail_tls") else None,
            dns=DnsFacts.from_dict(d["dns"]) if d.get("dns") else None,
            geo=GeoFacts.from_dict(d["geo"]) if d.get("geo") else None,
            errors=dict(d.get("errors") or {}),
        )


def version_tuple(version: str) -> tuple[int, ...]:
    return tuple(int(x) for x in re.findall(r"\d+", version))


_LEAK_CHECK_PATHS = {
    "leak_server_status": ("/server-status/",),
    "leak_server_info": ("/server-info/",),
    "leak_test_scripts": ("/test.php", "/phpinfo.php"),
    "leak_vcs": ("/.git/HEAD", "/.svn/entries"),
    "leak_core": ("/core",),
}

_HEADER_CHECKS = {
    "header_content_security_policy": "Content-Security-Policy",
    "header_x_xss_protection": "X-XSS-Protection",
    "header_x_frame_options": "X-Frame-Options",
    "header_x_content_type_options": "X-Content-Type-Options",
    "header_referrer_policy": "Referrer-Policy",
}


def default_lib_latest() -> dict[str, str]:
    from .content import SignatureTables
    return {name: latest for name, latest, _rx in SignatureTables.bundled().libs}


def evaluate_checks(facts: ScanFacts,
                    catalog: tuple[CheckDef, ...] | None = None,
                    lib_latest: dict[str, str] | None = None) -> list[CheckResult]:
    """One CheckResult per catalog entry, in catalog order. Total: a missing
    fact bundle turns its dependent checks into outcome=error, never an
    exception."""
    catalog = catalog or check_catalog()
    if lib_latest is None:
        lib_latest = default_lib_latest()

    outcomes: dict[str, tuple[Outcome, str]] = {}

    def put(check_id: str, outcome: Outcome, evidence: str) -> None:
        outcomes[check_id] = (outcome, evidence)

    _eval_no_track(facts, put)
    _eval_enc_web(facts, put)
    _eval_attacks(facts, put, lib_latest)
    _eval_enc_mail(facts, put)

    results = []
    for check in catalog:
        outcome, evidence = outcomes.get(
            check.check_id, (Outcome.ERROR, "no evaluator emitted this check"))
        results.append(CheckResult(check.check_id, check.group, outcome,
                                   check.critical, evidence))
    return results


def _eval_no_track(facts: ScanFacts, put) -> None:
    content = facts.content
    if content is None:
        err = facts.errors.get("content", "content scan failed")
        for check_id in ("third_party_trackers", "third_party_cookies",
                         "fingerprinting", "cdn_usage"):
            put(check_id, Outcome.ERROR, err)
        return
    if content.tracker_hosts:
        put("third_party_trackers", Outcome.FAIL,
            "known trackers: " + ", ".join(sorted(content.tracker_hosts)))
    else:
        put("third_party_trackers", Outcome.PASS,
            f"no known trackers among {len(content.third_party_hosts)} third-party hosts")
    if content.cookies_third_party > 0:
        put("third_party_cookies", Outcome.FAIL,
            f"{content.cookies_third_party} third-party cookies "
            f"({content.cookies_first_party} first-party)")
    else:
        put("third_party_cookies", Outcome.PASS,
            f"no third-party cookies ({content.cookies_first_party} first-party)")
    if content.fingerprint_hits:
        put("fingerprinting", Outcome.FAIL,
            "fingerprinting patterns: " + ", ".join(sig for sig, _ in content.fingerprint_hits))
    else:
        put("fingerprinting", Outcome.PASS, "no known fingerprinting patterns")
    if content.cdn_hosts:
        put("cdn_usage", Outcome.FAIL,
            "; ".join(f"{host} ({name})" for host, name in content.cdn_hosts))
    else:
        put("cdn_usage", Outcome.PASS, "no popular CDN detected")


def _eval_enc_web(facts: ScanFacts, put) -> None:
    tls = facts.tls
    if tls is None:
        err = facts.errors.get("tls", "TLS scan failed")
        for check_id in ("https_offered", "https_redirect", "cert_valid", "hsts",
                         "legacy_tls", "poodle_sslv3"):
            put(check_id, Outcome.ERROR, err)
    else:
        offered = [p for p, status in sorted(tls.protocols.items()) if status == OFFERED]
        if tls.https_offered:
            put("https_offered", Outcome.PASS, "TLS offered: " + ", ".join(offered))
        else:
            put("https_offered", Outcome.FAIL, tls.error or "no TLS service reachable")
        put("https_redirect",
            Outcome.PASS if tls.https_redirect else Outcome.FAIL,
            "plain HTTP forwards to HTTPS" if tls.https_redirect
            else "plain HTTP does not forward to HTTPS")

        if not tls.https_offered:
            put("cert_valid", Outcome.NEUTRAL, "no HTTPS service to present a certificate")
            put("hsts", Outcome.NEUTRAL, "no HTTPS service")
            put("legacy_tls", Outcome.NEUTRAL, "no HTTPS service")
            put("poodle_sslv3", Outcome.NEUTRAL, "no HTTPS service")
        else:
            if tls.cert_valid is None:
                put("cert_valid", Outcome.ERROR, "certificate could not be evaluated")
            elif tls.cert_valid:
                put("cert_valid", Outcome.PASS, "trusted chain, hostname match, not expired")
            else:
                problems = []
                if tls.cert_hostname_match is False:
                    problems.append("hostname mismatch")
                if tls.cert_not_expired is False:
                    problems.append("expired")
                if not problems:
                    problems.append("chain not trusted")
                put("cert_valid", Outcome.FAIL, ", ".join(problems))
            if tls.hsts_present:
                age = f"max-age={tls.hsts_max_age}" if tls.hsts_max_age is not None else "no max-age"
                put("hsts", Outcome.PASS, f"Strict-Transport-Security present ({age})")
            else:
                put("hsts", Outcome.FAIL, "no Strict-Transport-Security header")

            legacy = {p: tls.protocols[p] for p in ("TLS1.0", "TLS1.1")}
            if any(v == OFFERED for v in legacy.values()):
                put("legacy_tls", Outcome.FAIL,
                    "offered: " + ", ".join(p for p, v in sorted(legacy.items()) if v == OFFERED))
            elif all(v == REFUSED for v in legacy.values()):
                put("legacy_tls", Outcome.PASS, "TLS 1.0/1.1 refused")
            else:
                put("legacy_tls", Outcome.NEUTRAL, "TLS 1.0/1.1 support unknown")

            sslv3 = tls.protocols["SSLv3"]
            if sslv3 == OFFERED:
                put("poodle_sslv3", Outcome.FAIL, "SSLv3 offered: POODLE-susceptible")
            elif sslv3 == REFUSED:
                put("poodle_sslv3", Outcome.PASS, "SSLv3 refused")
            else:
                put("poodle_sslv3", Outcome.NEUTRAL, "SSLv3 support unknown")

    content = facts.content
    if content is None:
        put("mixed_content", Outcome.ERROR, facts.errors.get("content", "content scan failed"))
    elif not content.final_url.lower().startswith("https://"):
        put("mixed_content", Outcome.NEUTRAL, "page not served over HTTPS")
    elif content.mixed_content_urls:
        put("mixed_content", Outcome.FAIL,
            "plain-HTTP subresources: " + ", ".join(content.mixed_content_urls[:5]))
    else:
        put("mixed_content", Outcome.PASS, "no plain-HTTP subresources on the HTTPS page")


def _eval_attacks(facts: ScanFacts, put, lib_latest: dict[str, str]) -> None:
    content = facts.content
    if content is None:
        err = facts.errors.get("content", "content scan failed")
        for check_id in (*_HEADER_CHECKS, "server_version_banner",
                         "cms_generator_version", "outdated_js_libs"):
            put(check_id, Outcome.ERROR, err)
    else:
        for check_id, header in _HEADER_CHECKS.items():
            value = content.security_headers.get(header)
            if value is None:
                put(check_id, Outcome.FAIL, f"{header} not set")
            else:
                put(check_id, Outcome.PASS, f"{header}: {value[:120]}")

        banner = content.server_banner
        if banner and re.search(r"\d+\.\d+", banner):
            put("server_version_banner", Outcome.FAIL, f"Server: {banner}")
        else:
            put("server_version_banner", Outcome.PASS,
                f"Server: {banner}" if banner else "no Server header")

        generator = content.generator
        if generator and re.search(r"\d", generator):
            put("cms_generator_version", Outcome.FAIL, f"generator: {generator}")
        else:
            put("cms_generator_version", Outcome.PASS,
                f"generator: {generator}" if generator else "no generator attribute")

        outdated = []
        for name, version in content.script_libs:
            latest = lib_latest.get(name)
            if latest and version_tuple(version) < version_tuple(latest):
                outdated.append(f"{name} {version} < {latest}")
        if outdated:
            put("outdated_js_libs", Outcome.FAIL, "; ".join(sorted(outdated)))
        else:
            put("outdated_js_libs", Outcome.PASS,
                "libraries current" if content.script_libs else "no versioned libraries detected")

    leaks = facts.leaks
    if leaks is None:
        err = facts.errors.get("leaks", "leak probes failed")
        for check_id in _LEAK_CHECK_PATHS:
            put(check_id, Outcome.ERROR, err)
    else:
        by_path = {path: (detected, sig, status) for path, detected, sig, status in leaks.findings}
        for check_id, paths in _LEAK_CHECK_PATHS.items():
            findings = [(p, *by_path.get(p, (False, None, 0))) for p in paths]
            hits = [(p, sig) for p, detected, sig, _ in findings if detected]
            if hits:
                put(check_id, Outcome.FAIL,
                    "; ".join(f"{p} ({sig})" for p, sig in hits))
            elif all(status == 0 for _p, _d, _s, status in findings):
                put(check_id, Outcome.ERROR, "probe could not reach the server")
            else:
                put(check_id, Outcome.PASS, "not exposed")

    dns = facts.dns
    if dns is None:
        put("dnssec", Outcome.ERROR, facts.errors.get("dns", "DNS scan failed"))
    elif dns.dnssec_signal == "validated":
        put("dnssec", Outcome.PASS, "resolver validated the zone (AD flag)")
    elif dns.dnssec_signal == "unsigned":
        put("dnssec", Outcome.FAIL, "no DNSSEC signatures found")
    elif dns.dnssec_signal == "signed_unvalidated":
        put("dnssec", Outcome.NEUTRAL, "RRSIG present but resolver did not validate")
    else:
        put("dnssec", Outcome.ERROR, dns.error or "DNSSEC state unknown")


def _eval_enc_mail(facts: ScanFacts, put) -> None:
    dns = facts.dns
    mail = facts.mail_tls
    mail_checks = ("mail_starttls", "mail_cert_valid", "spf_policy", "dmarc_policy")

    if dns is not None and not dns.mx_records:
        for check_id in mail_checks:
            put(check_id, Outcome.NEUTRAL, "no MX record: domain receives no mail")
        return

    if mail is None:
        err = facts.errors.get("mail_tls", "mail TLS scan failed")
        put("mail_starttls", Outcome.ERROR, err)
        put("mail_cert_valid", Outcome.ERROR, err)
    else:
        if mail.starttls_offered is True:
            put("mail_starttls", Outcome.PASS, f"{mail.mx_host} offers STARTTLS")
        elif mail.starttls_offered is False:
            put("mail_starttls", Outcome.FAIL, f"{mail.mx_host} does not offer STARTTLS")
        else:
            put("mail_starttls", Outcome.ERROR, mail.error or "mail server unreachable")
        if mail.cert_valid is True:
            put("mail_cert_valid", Outcome.PASS, "mail certificate verifies")
        elif mail.cert_valid is False:
            put("mail_cert_valid", Outcome.FAIL, "mail certificate does not verify")
        elif mail.starttls_offered is False:
            put("mail_cert_valid", Outcome.NEUTRAL, "no STARTTLS, no certificate to check")
        else:
            put("mail_cert_valid", Outcome.ERROR, mail.error or "mail server unreachable")

    if dns is None:
        err = facts.errors.get("dns", "DNS scan failed")
        put("spf_policy", Outcome.ERROR, err)
        put("dmarc_policy", Outcome.ERROR, err)
        return
    if dns.spf_policy in ("hard_fail", "soft_fail"):
        put("spf_policy", Outcome.PASS, f"SPF {dns.spf_policy}: {dns.spf_record}")
    elif dns.spf_policy == "absent":
        put("spf_policy", Outcome.FAIL, "no SPF record")
    else:
        put("spf_policy", Outcome.FAIL, f"SPF policy too permissive ({dns.spf_policy})")
    if dns.dmarc_policy in ("quarantine", "reject"):
        put("dmarc_policy", Outcome.PASS, f"DMARC {dns.dmarc_policy}")
    elif dns.dmarc_policy == "absent":
        put("dmarc_policy", Outcome.FAIL, "no DMARC record")
    else:
        put("dmarc_policy", Outcome.FAIL, "DMARC policy is none")


def rate_group(results: list[CheckResult]) -> Color:
    """green: all pass; red: a critical check failed; neutral: nothing but
    neutral/error outcomes; yellow otherwise."""
    if not results:
        raise EmptyGroup("cannot rate a group without check results")
    if all(r.outcome == Outcome.PASS for r in results):
        return Color.GREEN
    if any(r.outcome == Outcome.FAIL and r.critical for r in results):
        return Color.RED
    if all(r.outcome in (Outcome.NEUTRAL, Outcome.ERROR) for r in results):
        return Color.NEUTRAL
    return Color.YELLOW


@dataclass(frozen=True)
class SiteRating:
    site_ref: str  # the site's normalized URL
    group_ratings: dict[CheckGroup, Color]
    overall: Color

    def to_dict(self) -> dict:
        return {
            "site_ref": self.site_ref,
            "group_ratings": {g.value: c.value for g, c in self.group_ratings.items()},
            "overall": self.overall.value,
        }


def rate_site(site_ref: str, results: list[CheckResult]) -> SiteRating:
    group_ratings = {}
    for group in CheckGroup:
        group_results = [r for r in results if r.group == group]
        group_ratings[group] = rate_group(group_results)
    overall = max(group_ratings.values(), key=lambda c: c.rank)
    return SiteRating(site_ref=site_ref, group_ratings=group_ratings, overall=overall)


def rank_sites(ratings: list[SiteRating], scheme: RankingScheme) -> list[str]:
    """Stable lexicographic sort over the scheme's group order; ties after
    all four groups break on ascending normalized URL."""
    def key(rating: SiteRating):
        return (tuple(rating.group_ratings[g].rank for g in scheme.group_order),
                rating.site_ref)

    return [r.site_ref for r in sorted(ratings, key=key)]


def aggregate_list_stats(ratings: list[SiteRating]) -> dict[str, dict[str, int]]:
    stats = {g.value: {c.value: 0 for c in Color} for g in CheckGroup}
    for rating in ratings:
        for group, color in rating.group_ratings.items():
            stats[group.value][color.value] += 1
    return stats
