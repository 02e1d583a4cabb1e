"""Registrable-domain computation over a bundled public-suffix snapshot.

A "third party" is a host whose registrable domain (public suffix plus one
label) differs from the scanned site's. The snapshot format is one suffix
per line; `#`-comments and blanks are ignored. Unknown TLDs fall back to
treating the last label as the suffix.
"""

from __future__ import annotations

import ipaddress
from importlib import resources


def _load_default() -> frozenset[str]:
    text = resources.files("sitegauge").joinpath("data/public_suffix.dat").read_text("utf-8")
    return _parse(text)


def _parse(text: str) -> frozenset[str]:
    out = set()
    for line in text.splitlines():
        line = line.strip().lower()
        if line and not line.startswith("#"):
            out.add(line)
    return frozenset(out)


class PublicSuffixes:
    def __init__(self, suffixes: frozenset[str]):
        self._suffixes = suffixes

    @classmethod
    def bundled(cls) -> "PublicSuffixes":
        return cls(_load_default())

    @classmethod
    def from_file(cls, path: str) -> "PublicSuffixes":
        with open(path, encoding="utf-8") as fh:
            return cls(_parse(fh.read()))

    def registrable_domain(self, host: str) -> str:
        """Longest matching public suffix plus one label.

        IP addresses and single-label hosts are their own registrable
        domain.
        """
        host = host.lower().rstrip(".")
        try:
            ipaddress.ip_address(host)
            return host
        except ValueError:
            pass
        labels = host.split(".")
        if len(labels) < 2:
            return host
        best = None
        for i in range(len(labels)):
            cand = ".".join(labels[i:])
            if cand in self._suffixes:
                best = i
                break
        if best is None:
            best = len(labels) - 1  # unknown TLD: last label acts as suffix
        if best == 0:
            # The whole host is a public suffix; treat it as its own domain.
            return host
        return ".".join(labels[best - 1:])

    def same_party(self, host_a: str, host_b: str) -> bool:
        return self.registrable_domain(host_a) == self.registrable_domain(host_b)
