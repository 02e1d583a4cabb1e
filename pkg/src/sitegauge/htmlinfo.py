"""Static HTML analysis: subresource references, inline scripts/styles,
generator meta tag, and textual document.cookie assignments."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from html.parser import HTMLParser
from urllib.parse import urljoin, urlsplit

_CSS_URL_RE = re.compile(r"url\(\s*['\"]?([^'\")\s]+)['\"]?\s*\)", re.IGNORECASE)
_COOKIE_ASSIGN_RE = re.compile(
    r"document\.cookie\s*=\s*[\"']([^=\"';]+)=", re.IGNORECASE)

# (tag, attribute) pairs whose values reference subresources
_SRC_ATTRS = {
    ("script", "src"),
    ("img", "src"),
    ("link", "href"),
    ("iframe", "src"),
}


@dataclass
class PageInfo:
    subresources: list[tuple[str, str]] = field(default_factory=list)  # (tag, url)
    inline_scripts: list[str] = field(default_factory=list)
    generator: str | None = None

    def script_urls(self) -> list[str]:
        return [url for tag, url in self.subresources if tag == "script"]

    def cookie_names(self) -> list[str]:
        names = []
        for script in self.inline_scripts:
            names.extend(m.group(1).strip() for m in _COOKIE_ASSIGN_RE.finditer(script))
        return names


class _Extractor(HTMLParser):
    def __init__(self, base_url: str):
        super().__init__(convert_charrefs=True)
        self.base_url = base_url
        self.info = PageInfo()
        self._in_script = False
        self._in_style = False
        self._buffer: list[str] = []

    def handle_starttag(self, tag, attrs):
        attrs_d = dict(attrs)
        if tag == "base" and attrs_d.get("href"):
            self.base_url = urljoin(self.base_url, attrs_d["href"])
        if tag == "meta":
            name = (attrs_d.get("name") or "").lower()
            if name == "generator" and attrs_d.get("content"):
                self.info.generator = attrs_d["content"].strip()
        for key, value in attrs:
            if (tag, key) in _SRC_ATTRS and value:
                self._add_subresource(tag, value)
            elif key == "style" and value:
                self._add_css_urls(value)
        if tag == "script" and "src" not in attrs_d:
            self._in_script = True
            self._buffer = []
        elif tag == "style":
            self._in_style = True
            self._buffer = []

    def handle_endtag(self, tag):
        if tag == "script" and self._in_script:
            self._in_script = False
            self.info.inline_scripts.append("".join(self._buffer))
        elif tag == "style" and self._in_style:
            self._in_style = False
            self._add_css_urls("".join(self._buffer))

    def handle_data(self, data):
        if self._in_script or self._in_style:
            self._buffer.append(data)

    def _add_subresource(self, tag: str, raw: str) -> None:
        url = self._absolute(raw)
        if url:
            self.info.subresources.append((tag, url))

    def _add_css_urls(self, css: str) -> None:
        for m in _CSS_URL_RE.finditer(css):
            url = self._absolute(m.group(1))
            if url:
                self.info.subresources.append(("css", url))

    def _absolute(self, raw: str) -> str | None:
        raw = raw.strip()
        lowered = raw.lower()
        if not raw or lowered.startswith(("data:", "javascript:", "mailto:", "about:", "#")):
            return None
        url = urljoin(self.base_url, raw)
        if urlsplit(url).scheme not in ("http", "https"):
            return None
        return url


def parse_html(text: str, base_url: str) -> PageInfo:
    """Best-effort extraction; malformed markup never raises."""
    extractor = _Extractor(base_url)
    try:
        extractor.feed(text)
        extractor.close()
    except Exception:
        pass
    return extractor.info
