"""Tracker/advertiser blocklist engine.

Parses the Adblock-filter grammar subset used by common tracker lists and
decides whether a request URL is a known tracker. Supported syntax:

* ``!`` comments and ``[...]`` section headers (skipped)
* element-hiding rules containing ``##`` or ``#@#`` (skipped)
* ``||host`` domain anchors, ``|`` start/end anchors
* ``@@`` exception prefix
* ``*`` wildcard and ``^`` separator placeholder
* ``$option,...`` suffixes (stripped; the rule is kept unless the options
  negate document-wide applicability)

Anything else is skipped and counted, never fatal. A FilterSet is immutable
after parsing and matching is pure, so one set may serve unlimited
concurrent callers.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from urllib.parse import urlsplit

from .model import MalformedUrl

# Token kinds: ("lit", text) | ("star", "*") | ("sep", "^")
Token = tuple[str, str]

# Characters that are NOT separators for the ^ placeholder.
_NON_SEPARATOR = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_-.%")

# Option names whose presence means the rule does not apply to plain
# document/request blocking, so we drop the whole rule.
_DROP_OPTIONS = {"elemhide", "generichide", "genericblock", "~document"}

_HOST_CHARS = set("abcdefghijklmnopqrstuvwxyz0123456789.-")


@dataclass(frozen=True)
class FilterRule:
    raw: str
    kind: str  # domain_anchor | plain | exception
    pattern_tokens: tuple[Token, ...]
    source_line: int
    anchor_host: str | None = None
    start_anchor: bool = False
    end_anchor: bool = False
    options: str | None = None

    @property
    def is_exception(self) -> bool:
        return self.kind == "exception"


@dataclass(frozen=True)
class FilterSet:
    rules: tuple[FilterRule, ...]
    domain_index: dict[str, tuple[int, ...]] = field(default_factory=dict)
    skipped: int = 0

    def __len__(self) -> int:
        return len(self.rules)


def serialize_rule(rule: FilterRule) -> str:
    """Reproduce the original rule text from the parsed structure."""
    out = []
    if rule.is_exception:
        out.append("@@")
    if rule.anchor_host is not None:
        out.append("||")
        out.append(rule.anchor_host)
    elif rule.start_anchor:
        out.append("|")
    for kind, text in rule.pattern_tokens:
        out.append(text if kind == "lit" else ("*" if kind == "star" else "^"))
    if rule.end_anchor:
        out.append("|")
    if rule.options is not None:
        out.append("$")
        out.append(rule.options)
    return "".join(out)


def _tokenize(pattern: str) -> tuple[Token, ...] | None:
    """Split a pattern body into literal/wildcard/separator tokens.

    Returns None for patterns we refuse (embedded whitespace).
    """
    tokens: list[Token] = []
    lit: list[str] = []

    def flush() -> None:
        if lit:
            tokens.append(("lit", "".join(lit)))
            lit.clear()

    for ch in pattern:
        if ch == "*":
            flush()
            tokens.append(("star", "*"))
        elif ch == "^":
            flush()
            tokens.append(("sep", "^"))
        elif ch.isspace():
            return None
        else:
            lit.append(ch)
    flush()
    return tuple(tokens)


def _parse_rule(line: str, lineno: int) -> FilterRule | None:
    raw = line
    body = line
    exception = body.startswith("@@")
    if exception:
        body = body[2:]

    options: str | None = None
    if "$" in body:
        body, options = body.rsplit("$", 1)
        opts = {o.strip() for o in options.split(",") if o.strip()}
        if opts & _DROP_OPTIONS:
            return None

    anchor_host: str | None = None
    start_anchor = end_anchor = False
    if body.startswith("||"):
        body = body[2:]
        i = 0
        while i < len(body) and body[i].lower() in _HOST_CHARS:
            i += 1
        anchor_host = body[:i].lower()
        body = body[i:]
        if not anchor_host:
            return None
    elif body.startswith("|"):
        start_anchor = True
        body = body[1:]
    if body.endswith("|"):
        end_anchor = True
        body = body[:-1]

    tokens = _tokenize(body)
    if tokens is None:
        return None
    if anchor_host is None and not tokens:
        # Nothing but anchors would match everything; refuse.
        return None

    if exception:
        kind = "exception"
    elif anchor_host is not None:
        kind = "domain_anchor"
    else:
        kind = "plain"
    return FilterRule(
        raw=raw,
        kind=kind,
        pattern_tokens=tokens,
        source_line=lineno,
        anchor_host=anchor_host,
        start_anchor=start_anchor,
        end_anchor=end_anchor,
        options=options,
    )


def parse_filter_list(text: str) -> FilterSet:
    """Parse filter-list text into a FilterSet.

    Total: unparseable or unsupported lines (comments, section headers,
    element-hiding rules, dialect extensions) are skipped and counted in
    FilterSet.skipped, never raised.
    """
    rules: list[FilterRule] = []
    skipped = 0
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("!") or line.startswith("["):
            skipped += 1
            continue
        if "##" in line or "#@#" in line:
            skipped += 1
            continue
        rule = _parse_rule(line, lineno)
        if rule is None:
            skipped += 1
            continue
        rules.append(rule)

    index: dict[str, list[int]] = {}
    for i, rule in enumerate(rules):
        if rule.anchor_host is not None:
            index.setdefault(rule.anchor_host, []).append(i)
    return FilterSet(
        rules=tuple(rules),
        domain_index={h: tuple(v) for h, v in index.items()},
        skipped=skipped,
    )


def load_filter_file(path: str) -> FilterSet:
    with open(path, encoding="utf-8") as fh:
        return parse_filter_list(fh.read())


def _canonical_url(url: str) -> tuple[str, str, int, int]:
    """Lowercase scheme+authority, keep the rest verbatim, drop the fragment.

    Returns (canonical_text, host, authority_start, authority_end). Host
    matching is case-insensitive while path matching stays case-sensitive,
    so the canonical text folds only the authority.
    """
    parts = urlsplit(url)
    host = parts.hostname
    if not parts.scheme or host is None or not host:
        raise MalformedUrl(f"not an absolute URL: {url!r}")
    scheme = parts.scheme.lower()
    netloc = parts.netloc.lower()
    rest = parts.path
    if parts.query:
        rest += "?" + parts.query
    start = len(scheme) + 3
    return f"{scheme}://{netloc}{rest}", host.lower(), start, start + len(netloc)


def _match_tokens(tokens: tuple[Token, ...], text: str, pos: int, ti: int,
                  require_end: bool) -> bool:
    """Backtracking token match of tokens[ti:] against text[pos:]."""
    if ti == len(tokens):
        return pos == len(text) if require_end else True
    kind, lit = tokens[ti]
    if kind == "lit":
        if text.startswith(lit, pos):
            return _match_tokens(tokens, text, pos + len(lit), ti + 1, require_end)
        return False
    if kind == "sep":
        # One separator character, or the end of the URL.
        if pos < len(text) and text[pos] not in _NON_SEPARATOR:
            if _match_tokens(tokens, text, pos + 1, ti + 1, require_end):
                return True
        if pos == len(text):
            return _match_tokens(tokens, text, pos, ti + 1, require_end)
        return False
    # star: try every span, shortest first
    for nxt in range(pos, len(text) + 1):
        if _match_tokens(tokens, text, nxt, ti + 1, require_end):
            return True
    return False


def _rule_hits(rule: FilterRule, canon: str, host: str,
               auth_start: int, auth_end: int) -> bool:
    if rule.anchor_host is not None:
        return _domain_rule_hits(rule, canon, auth_start, auth_end)
    if rule.start_anchor:
        return _match_tokens(rule.pattern_tokens, canon, 0, 0, rule.end_anchor)
    for start in range(len(canon) + 1):
        if _match_tokens(rule.pattern_tokens, canon, start, 0, rule.end_anchor):
            return True
    return False


def _domain_rule_hits(rule: FilterRule, canon: str,
                      auth_start: int, auth_end: int) -> bool:
    anchor = rule.anchor_host
    # The anchor must cover a dot-boundary suffix of the URL host: it starts
    # at the first label or right after a dot inside the authority, and the
    # character following it must not be another host character (so ||h
    # never matches h.evil.example).
    positions = []
    if canon.startswith(anchor, auth_start):
        positions.append(auth_start)
    idx = auth_start
    while True:
        idx = canon.find("." + anchor, idx, auth_end)
        if idx < 0:
            break
        positions.append(idx + 1)
        idx += 1
    for p in positions:
        q = p + len(anchor)
        if q < len(canon) and canon[q].lower() in _HOST_CHARS:
            continue
        if _match_tokens(rule.pattern_tokens, canon, q, 0, rule.end_anchor):
            return True
    return False


def matches(fs: FilterSet, url: str, *, use_index: bool = True) -> bool:
    """True iff some block rule matches `url` and no exception rule does.

    With use_index=False every rule is scanned linearly; the result is the
    same (the index is a pure accelerator for ``||host`` rules).
    """
    canon, host, auth_start, auth_end = _canonical_url(url)

    if use_index:
        candidates: list[int] = []
        labels = host.split(".")
        for i in range(len(labels)):
            suffix = ".".join(labels[i:])
            candidates.extend(fs.domain_index.get(suffix, ()))
        candidates.extend(i for i, r in enumerate(fs.rules) if r.anchor_host is None)
    else:
        candidates = list(range(len(fs.rules)))

    blocked = False
    for i in candidates:
        rule = fs.rules[i]
        if not _rule_hits(rule, canon, host, auth_start, auth_end):
            continue
        if rule.is_exception:
            return False
        blocked = True
    return blocked


def classify_hosts(fs: FilterSet, request_urls: list[str] | set[str]) -> set[str]:
    """The set of hosts whose request URL matched the filter set."""
    hosts: set[str] = set()
    for url in request_urls:
        if matches(fs, url):
            hosts.add(_canonical_url(url)[1])
    return hosts
