"""Content scanning: fetch a site, extract privacy/security facts from the
response, and probe well-known information-leak paths.

JavaScript is never executed; analysis is static over the landing page, its
redirect chain, and fetched script subresources. Dynamic tracker injection
is therefore out of reach by design; the fetch interface is shaped so a
browser-driven fetcher could replace it later.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from urllib.parse import urlsplit

from .fetch import ConnectionFailed, FetchError, FetchLimits, HttpTransport, Response
from .filterlist import FilterSet, classify_hosts
from .htmlinfo import PageInfo, parse_html
from .suffix import PublicSuffixes

SECURITY_HEADERS = (
    "Content-Security-Policy",
    "X-XSS-Protection",
    "X-Frame-Options",
    "X-Content-Type-Options",
    "Strict-Transport-Security",
    "Referrer-Policy",
)

#: (path, human label) for the leak probes; detection needs 2xx plus a signature.
LEAK_PATHS = (
    "/server-status/",
    "/server-info/",
    "/test.php",
    "/phpinfo.php",
    "/.git/HEAD",
    "/.svn/entries",
    "/core",
)

LEAK_BODY_CAP = 64 * 1024

_VERSION_RE = re.compile(r"\d+(?:\.\d+)+")
_SVN_ENTRIES_RE = re.compile(r"^\d+\s*$", re.MULTILINE)


@dataclass
class ContentFacts:
    final_url: str
    redirect_chain: list[str] = field(default_factory=list)
    third_party_hosts: set[str] = field(default_factory=set)
    tracker_hosts: set[str] = field(default_factory=set)
    cookies_first_party: int = 0
    cookies_third_party: int = 0
    security_headers: dict[str, str | None] = field(default_factory=dict)
    mixed_content_urls: list[str] = field(default_factory=list)
    fingerprint_hits: list[tuple[str, str]] = field(default_factory=list)
    server_banner: str | None = None
    generator: str | None = None
    script_libs: list[tuple[str, str]] = field(default_factory=list)
    cdn_hosts: list[tuple[str, str]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "final_url": self.final_url,
            "redirect_chain": list(self.redirect_chain),
            "third_party_hosts": sorted(self.third_party_hosts),
            "tracker_hosts": sorted(self.tracker_hosts),
            "cookies_first_party": self.cookies_first_party,
            "cookies_third_party": self.cookies_third_party,
            "security_headers": dict(sorted(self.security_headers.items())),
            "mixed_content_urls": list(self.mixed_content_urls),
            "fingerprint_hits": [list(t) for t in self.fingerprint_hits],
            "server_banner": self.server_banner,
            "generator": self.generator,
            "script_libs": [list(t) for t in self.script_libs],
            "cdn_hosts": [list(t) for t in self.cdn_hosts],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ContentFacts":
        return cls(
            final_url=d["final_url"],
            redirect_chain=list(d.get("redirect_chain") or []),
            third_party_hosts=set(d.get("third_party_hosts") or []),
            tracker_hosts=set(d.get("tracker_hosts") or []),
            cookies_first_party=d.get("cookies_first_party", 0),
            cookies_third_party=d.get("cookies_third_party", 0),
            security_headers=dict(d.get("security_headers") or {}),
            mixed_content_urls=list(d.get("mixed_content_urls") or []),
            fingerprint_hits=[tuple(t) for t in d.get("fingerprint_hits") or []],
            server_banner=d.get("server_banner"),
            generator=d.get("generator"),
            script_libs=[tuple(t) for t in d.get("script_libs") or []],
            cdn_hosts=[tuple(t) for t in d.get("cdn_hosts") or []],
        )


@dataclass
class LeakFacts:
    # (path, detected, signature or None, http status; status 0 = unreachable)
    findings: list[tuple[str, bool, str | None, int]] = field(default_factory=list)

    def detected_paths(self) -> list[str]:
        return [path for path, detected, _, _ in self.findings if detected]

    def to_dict(self) -> dict:
        return {"findings": [list(t) for t in self.findings]}

    @classmethod
    def from_dict(cls, d: dict) -> "LeakFacts":
        return cls(findings=[tuple(t) for t in d.get("findings") or []])


@dataclass
class SignatureTables:
    """Fingerprint regexes, CDN signatures, and the JS library version table.

    All three are data files (`fingerprints.tsv`, `cdn.tsv`, `libs.tsv`):
    the shipped set is a starter set, meant to be replaced or extended per
    deployment.
    """

    fingerprints: list[tuple[str, re.Pattern]] = field(default_factory=list)
    cdn: list[tuple[str, str]] = field(default_factory=list)
    libs: list[tuple[str, str, re.Pattern]] = field(default_factory=list)

    @classmethod
    def load(cls, directory: str) -> "SignatureTables":
        import os
        tables = cls()
        with open(os.path.join(directory, "fingerprints.tsv"), encoding="utf-8") as fh:
            tables.fingerprints = cls._parse_fingerprints(fh.read())
        with open(os.path.join(directory, "cdn.tsv"), encoding="utf-8") as fh:
            tables.cdn = cls._parse_cdn(fh.read())
        with open(os.path.join(directory, "libs.tsv"), encoding="utf-8") as fh:
            tables.libs = cls._parse_libs(fh.read())
        return tables

    @classmethod
    def bundled(cls) -> "SignatureTables":
        data = resources.files("sitegauge").joinpath("data")
        tables = cls()
        tables.fingerprints = cls._parse_fingerprints(
            data.joinpath("fingerprints.tsv").read_text("utf-8"))
        tables.cdn = cls._parse_cdn(data.joinpath("cdn.tsv").read_text("utf-8"))
        tables.libs = cls._parse_libs(data.joinpath("libs.tsv").read_text("utf-8"))
        return tables

    @staticmethod
    def _rows(text: str, n: int, what: str):
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != n:
                raise ValueError(f"{what} line {lineno}: expected {n} tab-separated fields")
            yield parts

    @classmethod
    def _parse_fingerprints(cls, text: str):
        return [(sig_id, re.compile(rx)) for sig_id, rx in cls._rows(text, 2, "fingerprints.tsv")]

    @classmethod
    def _parse_cdn(cls, text: str):
        return [(name, sig) for name, sig in cls._rows(text, 2, "cdn.tsv")]

    @classmethod
    def _parse_libs(cls, text: str):
        return [(name, latest, re.compile(rx))
                for name, latest, rx in cls._rows(text, 3, "libs.tsv")]


@dataclass
class FetchBundle:
    """Raw material handed from fetch_site to extract_content_facts."""

    requested_url: str
    final: Response
    chain: list[Response]
    page: PageInfo
    subresource_urls: list[str]
    script_bodies: dict[str, str] = field(default_factory=dict)
    cookies: list[tuple[str, str]] = field(default_factory=list)  # (host, name)

    @property
    def final_url(self) -> str:
        return self.final.url

    @property
    def redirect_chain(self) -> list[str]:
        return [r.url for r in self.chain]


def _cookies_from_response(resp: Response) -> list[tuple[str, str]]:
    host = urlsplit(resp.url).hostname or ""
    out = []
    for raw in resp.header_all("Set-Cookie"):
        name = raw.split("=", 1)[0].strip()
        if name:
            out.append((host.lower(), name))
    return out


def fetch_site(transport: HttpTransport, url: str,
               limits: FetchLimits = FetchLimits()) -> FetchBundle:
    """Fetch the landing page, following redirects, then its script subresources.

    Cookies are collected from Set-Cookie headers of every response in the
    chain and of fetched scripts, plus document.cookie assignments found
    textually in inline scripts. Network errors on subresources are
    tolerated (the script body is simply absent); errors on the landing
    page propagate as FetchError subclasses.
    """
    chain = transport.fetch(url, limits=limits)
    final = chain[-1]
    page = parse_html(final.text, final.url)

    seen: set[str] = set()
    subresource_urls: list[str] = []
    for _tag, sub_url in page.subresources:
        if sub_url not in seen:
            seen.add(sub_url)
            subresource_urls.append(sub_url)

    cookies: list[tuple[str, str]] = []
    for resp in chain:
        cookies.extend(_cookies_from_response(resp))

    script_bodies: dict[str, str] = {}
    for script_url in page.script_urls():
        try:
            resp = transport.request(script_url, limits=limits, truncate=True)
        except FetchError:
            continue
        script_bodies[script_url] = resp.text
        cookies.extend(_cookies_from_response(resp))

    final_host = (urlsplit(final.url).hostname or "").lower()
    for name in page.cookie_names():
        cookies.append((final_host, name))

    return FetchBundle(
        requested_url=url,
        final=final,
        chain=chain,
        page=page,
        subresource_urls=subresource_urls,
        script_bodies=script_bodies,
        cookies=cookies,
    )


def _host_of(url: str) -> str:
    return (urlsplit(url).hostname or "").lower()


def _matches_cdn_host(host: str, suffix: str) -> bool:
    suffix = suffix.lower()
    bare = suffix.lstrip(".")
    return host == bare or host.endswith("." + bare)


def extract_content_facts(bundle: FetchBundle, fs: FilterSet, site_host: str,
                          tables: SignatureTables,
                          suffixes: PublicSuffixes) -> ContentFacts:
    """Pure transformation of a FetchBundle into ContentFacts."""
    site_host = site_host.lower()
    facts = ContentFacts(final_url=bundle.final_url,
                         redirect_chain=bundle.redirect_chain)

    third_party_urls = []
    for sub_url in bundle.subresource_urls:
        host = _host_of(sub_url)
        if host and not suffixes.same_party(host, site_host):
            facts.third_party_hosts.add(host)
            third_party_urls.append(sub_url)
    facts.tracker_hosts = classify_hosts(fs, third_party_urls)

    distinct_cookies = set(bundle.cookies)
    first = sum(1 for host, _name in distinct_cookies
                if suffixes.same_party(host, site_host))
    facts.cookies_first_party = first
    facts.cookies_third_party = len(distinct_cookies) - first

    for header in SECURITY_HEADERS:
        facts.security_headers[header] = bundle.final.header(header)

    if urlsplit(bundle.final_url).scheme == "https":
        facts.mixed_content_urls = [u for u in bundle.subresource_urls
                                    if u.lower().startswith("http://")]

    scripts: list[str] = list(bundle.page.inline_scripts)
    scripts.extend(bundle.script_bodies.values())
    hits: dict[str, str] = {}
    for sig_id, pattern in tables.fingerprints:
        for text in scripts:
            m = pattern.search(text)
            if m:
                snippet = text[max(0, m.start() - 20):m.end() + 20].strip()
                hits.setdefault(sig_id, snippet)
                break
    facts.fingerprint_hits = sorted(hits.items())

    facts.server_banner = bundle.final.header("Server")
    facts.generator = bundle.page.generator

    libs: dict[tuple[str, str], None] = {}
    for name, _latest, pattern in tables.libs:
        for script_url in bundle.page.script_urls():
            m = pattern.search(urlsplit(script_url).path)
            if m:
                libs[(name, m.group(1))] = None
        banner_re = re.compile(rf"{re.escape(name)}\s+v?(\d+(?:\.\d+)+)", re.IGNORECASE)
        for body in bundle.script_bodies.values():
            m = banner_re.search(body[:300])
            if m:
                libs[(name, m.group(1))] = None
    facts.script_libs = sorted(libs)

    hosts_in_play = sorted({_host_of(u) for u in bundle.subresource_urls} | {site_host,
                           _host_of(bundle.final_url)})
    cdn: dict[tuple[str, str], None] = {}
    for name, sig in tables.cdn:
        if ":" in sig:
            header_name, _, pattern = sig.partition(":")
            value = bundle.final.header(header_name.strip())
            if value is not None and re.search(pattern.strip(), value, re.IGNORECASE):
                cdn[(_host_of(bundle.final_url), name)] = None
        else:
            for host in hosts_in_play:
                if host and _matches_cdn_host(host, sig):
                    cdn[(host, name)] = None
    facts.cdn_hosts = sorted(cdn)
    return facts


def _leak_signature(path: str, status: int, body: bytes) -> str | None:
    """Content signature for a leak path; None when nothing matched."""
    if not (200 <= status <= 299):
        return None
    if path == "/core":
        return "ELF core dump" if body[:4] == b"\x7fELF" else None
    text = body.decode("utf-8", "replace")
    if path == "/server-status/":
        return "Apache Server Status" if "Apache Server Status" in text else None
    if path == "/server-info/":
        return "Apache Server Information" if "Apache Server Information" in text else None
    if path in ("/test.php", "/phpinfo.php"):
        for marker in ("phpinfo()", "PHP Version"):
            if marker in text:
                return marker
        return None
    if path == "/.git/HEAD":
        return "ref: refs/" if text.lstrip().startswith("ref: refs/") else None
    if path == "/.svn/entries":
        stripped = text.strip()
        if _SVN_ENTRIES_RE.match(stripped) or (stripped.startswith("<?xml") and "svn" in stripped):
            return "svn entries format"
        return None
    return None


def probe_leaks(transport: HttpTransport, base_url: str,
                limits: FetchLimits = FetchLimits()) -> LeakFacts:
    """One GET per catalog leak path; 2xx status alone is never enough,
    a content signature must match. Bodies are capped at 64 KiB."""
    parts = urlsplit(base_url)
    root = f"{parts.scheme}://{parts.netloc}"
    findings = []
    for path in LEAK_PATHS:
        try:
            resp = transport.request(root + path, limits=limits,
                                     max_body=LEAK_BODY_CAP, truncate=True)
        except FetchError:
            findings.append((path, False, None, 0))
            continue
        signature = _leak_signature(path, resp.status, resp.body)
        findings.append((path, signature is not None, signature, resp.status))
    return LeakFacts(findings=findings)
