"""Shared domain types, the check catalog, and URL normalization.

Everything here is an immutable value object; instances are safe to share
across concurrent scan workers.
"""

from __future__ import annotations

import enum
import ipaddress
import re
from dataclasses import dataclass, field
from urllib.parse import urlsplit


class MalformedUrl(ValueError):
    """Raised when an input cannot be interpreted as an absolute http(s) URL."""


class CheckGroup(str, enum.Enum):
    NO_TRACK = "NoTrack"
    ATTACKS = "Attacks"
    ENC_WEB = "EncWeb"
    ENC_MAIL = "EncMail"


#: Canonical group listing, also the default ranking priority order.
GROUPS = (CheckGroup.NO_TRACK, CheckGroup.ATTACKS, CheckGroup.ENC_WEB, CheckGroup.ENC_MAIL)


class Color(str, enum.Enum):
    """Group rating colors, ordered best to worst: green < yellow < neutral < red.

    Neutral sits between yellow and red by design decision (the source
    material does not pin its position).
    """

    GREEN = "green"
    YELLOW = "yellow"
    NEUTRAL = "neutral"
    RED = "red"

    @property
    def rank(self) -> int:
        return _COLOR_RANK[self]


_COLOR_RANK = {Color.GREEN: 0, Color.YELLOW: 1, Color.NEUTRAL: 2, Color.RED: 3}


class Outcome(str, enum.Enum):
    PASS = "pass"
    FAIL = "fail"
    NEUTRAL = "neutral"
    ERROR = "error"


@dataclass(frozen=True)
class CheckResult:
    check_id: str
    group: CheckGroup
    outcome: Outcome
    critical: bool
    evidence: str

    def to_dict(self) -> dict:
        return {
            "check_id": self.check_id,
            "group": self.group.value,
            "outcome": self.outcome.value,
            "critical": self.critical,
            "evidence": self.evidence,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CheckResult":
        return cls(
            check_id=d["check_id"],
            group=CheckGroup(d["group"]),
            outcome=Outcome(d["outcome"]),
            critical=bool(d["critical"]),
            evidence=d["evidence"],
        )


@dataclass(frozen=True)
class CheckDef:
    """One catalog entry: a named check, its group, and its criticality."""

    check_id: str
    group: CheckGroup
    critical: bool
    doc: str = ""


# The default check catalog. Criticality follows the documented decision:
# critical = trackers, https offered/redirect, cert validity, mail STARTTLS,
# and the five leak checks; everything else is normal.
DEFAULT_CATALOG: tuple[CheckDef, ...] = (
    # NoTrack: privacy checks.
    CheckDef("third_party_trackers", CheckGroup.NO_TRACK, True,
             "No embedded third party matches the advertiser/tracker filter list."),
    CheckDef("third_party_cookies", CheckGroup.NO_TRACK, False,
             "No cookies are set by third-party hosts."),
    CheckDef("fingerprinting", CheckGroup.NO_TRACK, False,
             "No known browser-fingerprinting patterns in the site's scripts."),
    CheckDef("cdn_usage", CheckGroup.NO_TRACK, False,
             "Neither the site nor its subresources are served from a popular CDN."),
    # EncWeb: transport encryption of the web server.
    CheckDef("https_offered", CheckGroup.ENC_WEB, True,
             "The site is reachable over HTTPS."),
    CheckDef("https_redirect", CheckGroup.ENC_WEB, True,
             "Plain-HTTP requests are forwarded to the HTTPS site."),
    CheckDef("cert_valid", CheckGroup.ENC_WEB, True,
             "The TLS certificate chains to a trusted root, matches the hostname and is not expired."),
    CheckDef("hsts", CheckGroup.ENC_WEB, False,
             "A Strict-Transport-Security header is sent over HTTPS."),
    CheckDef("mixed_content", CheckGroup.ENC_WEB, False,
             "The HTTPS page embeds no plain-HTTP subresources."),
    CheckDef("legacy_tls", CheckGroup.ENC_WEB, False,
             "The deprecated TLS 1.0/1.1 protocol versions are not offered."),
    CheckDef("poodle_sslv3", CheckGroup.ENC_WEB, False,
             "SSLv3 is not offered (offering it makes the server POODLE-susceptible)."),
    # Attacks: hardening headers, information leaks, software hygiene, DNS integrity.
    CheckDef("header_content_security_policy", CheckGroup.ATTACKS, False,
             "A Content-Security-Policy header is set."),
    CheckDef("header_x_xss_protection", CheckGroup.ATTACKS, False,
             "An X-XSS-Protection header is set."),
    CheckDef("header_x_frame_options", CheckGroup.ATTACKS, False,
             "An X-Frame-Options header is set."),
    CheckDef("header_x_content_type_options", CheckGroup.ATTACKS, False,
             "An X-Content-Type-Options header is set."),
    CheckDef("header_referrer_policy", CheckGroup.ATTACKS, False,
             "A Referrer-Policy header is set."),
    CheckDef("leak_server_status", CheckGroup.ATTACKS, True,
             "/server-status/ does not expose the server status page."),
    CheckDef("leak_server_info", CheckGroup.ATTACKS, True,
             "/server-info/ does not expose the server configuration page."),
    CheckDef("leak_test_scripts", CheckGroup.ATTACKS, True,
             "Leftover /test.php or /phpinfo.php scripts are not reachable."),
    CheckDef("leak_vcs", CheckGroup.ATTACKS, True,
             "Version-control metadata (/.git/, /.svn/) is not readable."),
    CheckDef("leak_core", CheckGroup.ATTACKS, True,
             "No core dump is exposed at /core."),
    CheckDef("server_version_banner", CheckGroup.ATTACKS, False,
             "The Server header does not disclose a software version."),
    CheckDef("cms_generator_version", CheckGroup.ATTACKS, False,
             "The HTML generator attribute does not disclose a CMS version."),
    CheckDef("outdated_js_libs", CheckGroup.ATTACKS, False,
             "No embedded JavaScript library is older than its known latest release."),
    CheckDef("dnssec", CheckGroup.ATTACKS, False,
             "The site's DNS records are protected with DNSSEC."),
    # EncMail: transport encryption and authentication of the primary mail server.
    CheckDef("mail_starttls", CheckGroup.ENC_MAIL, True,
             "The primary mail server offers STARTTLS."),
    CheckDef("mail_cert_valid", CheckGroup.ENC_MAIL, False,
             "The mail server's TLS certificate is valid."),
    CheckDef("spf_policy", CheckGroup.ENC_MAIL, False,
             "An SPF record with a restrictive (-all/~all) policy is published."),
    CheckDef("dmarc_policy", CheckGroup.ENC_MAIL, False,
             "A DMARC record with a quarantine or reject policy is published."),
)


def check_catalog() -> tuple[CheckDef, ...]:
    """The static check catalog; every check id any evaluator emits, exactly once."""
    return DEFAULT_CATALOG


def catalog_by_id(catalog: tuple[CheckDef, ...] | None = None) -> dict[str, CheckDef]:
    return {c.check_id: c for c in (catalog or DEFAULT_CATALOG)}


def load_catalog(path: str) -> tuple[CheckDef, ...]:
    """Load a catalog config file: `check_id <TAB> group <TAB> critical|normal` per line.

    Lines starting with `#` and blank lines are ignored. Docs fall back to the
    default catalog's text for known ids.
    """
    default_docs = {c.check_id: c.doc for c in DEFAULT_CATALOG}
    defs: list[CheckDef] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ValueError(f"{path}:{lineno}: expected 3 tab-separated fields")
            check_id, group_name, crit = parts
            if check_id in seen:
                raise ValueError(f"{path}:{lineno}: duplicate check id {check_id!r}")
            if crit not in ("critical", "normal"):
                raise ValueError(f"{path}:{lineno}: criticality must be critical|normal")
            seen.add(check_id)
            defs.append(CheckDef(check_id, CheckGroup(group_name), crit == "critical",
                                 default_docs.get(check_id, "")))
    return tuple(defs)


_SCHEME_RE = re.compile(r"^[a-zA-Z][a-zA-Z0-9+.-]*://")
_HOST_RE = re.compile(r"^[a-z0-9]([a-z0-9._-]*[a-z0-9])?$")


def normalize_url(raw: str) -> str:
    """Normalize a URL to its canonical scan form.

    Scheme defaults to https when absent, the host is lowercased, default
    ports are stripped, the fragment is removed and the path is preserved
    (empty path becomes "/"). Idempotent for every parseable input.

    Raises MalformedUrl when the input is not an absolute or host-only
    http(s) URL.
    """
    raw = (raw or "").strip()
    if not raw:
        raise MalformedUrl("empty URL")
    if not _SCHEME_RE.match(raw):
        if "://" in raw:
            raise MalformedUrl(f"unparseable URL: {raw!r}")
        raw = "https://" + raw
    try:
        parts = urlsplit(raw)
        host = parts.hostname
        port = parts.port
    except ValueError as exc:
        raise MalformedUrl(f"unparseable URL: {raw!r}") from exc
    scheme = parts.scheme.lower()
    if scheme not in ("http", "https"):
        raise MalformedUrl(f"unsupported scheme: {scheme!r}")
    if not host:
        raise MalformedUrl(f"missing host in {raw!r}")
    host = host.lower().rstrip(".")
    if not _valid_host(host):
        raise MalformedUrl(f"invalid host: {host!r}")
    default_port = 443 if scheme == "https" else 80
    netloc = host if (port is None or port == default_port) else f"{host}:{port}"
    path = parts.path or "/"
    url = f"{scheme}://{netloc}{path}"
    if parts.query:
        url += "?" + parts.query
    return url


def _valid_host(host: str) -> bool:
    if not host or any(ch.isspace() for ch in host):
        return False
    try:
        ipaddress.ip_address(host)
        return True
    except ValueError:
        pass
    return bool(_HOST_RE.match(host))


def url_host(url: str) -> str:
    """The lowercased hostname of an absolute URL (no port)."""
    host = urlsplit(url).hostname
    if not host:
        raise MalformedUrl(f"missing host in {url!r}")
    return host.lower()


@dataclass(frozen=True)
class Site:
    """One scan target within a site list."""

    url: str
    properties: dict[str, str | None] = field(default_factory=dict)
    final_url: str | None = None

    def to_dict(self) -> dict:
        return {"url": self.url, "properties": dict(self.properties),
                "final_url": self.final_url}


@dataclass(frozen=True)
class SiteList:
    id: str
    title: str
    description: str
    tags: frozenset[str]
    sites: tuple[Site, ...]
    property_schema: tuple[str, ...]
    access_token_hash: str
    private: bool
    rescan_enabled: bool
    honor_robots: bool
    created_at: float

    @staticmethod
    def build_sites(raw_sites: list[dict | str],
                    property_schema: tuple[str, ...]) -> tuple[Site, ...]:
        """Normalize raw site entries, enforcing the list invariants.

        Duplicate normalized URLs are rejected; property maps are completed
        to exactly the schema's keys (missing values become None).
        """
        sites: list[Site] = []
        seen: set[str] = set()
        for entry in raw_sites:
            if isinstance(entry, str):
                url, props = entry, {}
            else:
                url, props = entry["url"], dict(entry.get("properties") or {})
            norm = normalize_url(url)
            if norm in seen:
                raise ValueError(f"duplicate site URL after normalization: {norm}")
            seen.add(norm)
            aligned = {name: props.get(name) for name in property_schema}
            sites.append(Site(url=norm, properties=aligned))
        if not sites:
            raise ValueError("a site list must contain at least one site")
        return tuple(sites)


@dataclass(frozen=True)
class RankingScheme:
    """A priority order over the four check groups.

    `kind` tags the scheme family; only "group_order" ships, the tag exists
    so alternative schemes can be added without breaking the interface.
    """

    group_order: tuple[CheckGroup, ...]
    name: str = "custom"
    kind: str = "group_order"

    def __post_init__(self) -> None:
        if sorted(g.value for g in self.group_order) != sorted(g.value for g in GROUPS):
            raise ValueError("group_order must be a permutation of the four check groups")

    @classmethod
    def default(cls) -> "RankingScheme":
        return cls(group_order=GROUPS, name="default")

    @classmethod
    def parse(cls, order: str) -> "RankingScheme":
        """Parse a comma-separated group order like "EncWeb,NoTrack,Attacks,EncMail"."""
        try:
            groups = tuple(CheckGroup(part.strip()) for part in order.split(","))
        except ValueError as exc:
            raise ValueError(f"unknown check group in order: {order!r}") from exc
        return cls(group_order=groups)


RunStatus = ("queued", "running", "done", "failed", "blacklisted")


@dataclass
class ScanRun:
    """One execution of all scan modules against one site."""

    id: str
    site_ref: str
    list_ref: str | None
    started_at: float
    finished_at: float | None
    status: str
    facts: dict
    check_results: list[CheckResult]

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "site_ref": self.site_ref,
            "list_ref": self.list_ref,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "status": self.status,
            "facts": self.facts,
            "check_results": [r.to_dict() for r in self.check_results],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScanRun":
        return cls(
            id=d["id"],
            site_ref=d["site_ref"],
            list_ref=d.get("list_ref"),
            started_at=d["started_at"],
            finished_at=d.get("finished_at"),
            status=d["status"],
            facts=d.get("facts") or {},
            check_results=[CheckResult.from_dict(r) for r in d.get("check_results") or []],
        )
