"""HTTP(S) fetch transport used by the content and leak scanners.

Built directly on http.client so the scanner controls what "requests"-style
clients hide: the full redirect chain with per-response Set-Cookie headers,
mid-stream body caps, host resolution overrides and per-scheme port
overrides for fixture servers, and SNI independent of the connect address.
Page fetching never verifies certificates; certificate validity is the TLS
scanner's job and an invalid cert must not stop a content scan.
"""

from __future__ import annotations

import http.client
import socket
import ssl
from dataclasses import dataclass, field
from urllib.parse import urljoin, urlsplit

from .config import USER_AGENT


class FetchError(Exception):
    pass


class Timeout(FetchError):
    pass


class ConnectionFailed(FetchError):
    pass


class TooManyRedirects(FetchError):
    pass


class BodyTooLarge(FetchError):
    pass


@dataclass(frozen=True)
class FetchLimits:
    max_redirects: int = 10
    timeout: float = 10.0
    max_body: int = 5 * 1024 * 1024


@dataclass
class Response:
    url: str
    status: int
    headers: list[tuple[str, str]]
    body: bytes

    def header(self, name: str) -> str | None:
        name = name.lower()
        for key, value in self.headers:
            if key.lower() == name:
                return value
        return None

    def header_all(self, name: str) -> list[str]:
        name = name.lower()
        return [value for key, value in self.headers if key.lower() == name]

    @property
    def text(self) -> str:
        return self.body.decode("utf-8", "replace")


_REDIRECT_CODES = {301, 302, 303, 307, 308}


class HttpTransport:
    """Issues individual requests and redirect-following fetches.

    `resolve_overrides` maps hostnames (or `*.suffix` wildcards) to connect
    addresses; `http_port`/`https_port` replace the scheme default ports.
    A `request_counter` list collects every URL actually requested so tests
    can assert traffic invariants.
    """

    def __init__(self, resolve_overrides: dict[str, str] | None = None,
                 http_port: int | None = None, https_port: int | None = None,
                 user_agent: str = USER_AGENT):
        self.resolve_overrides = resolve_overrides or {}
        self.http_port = http_port
        self.https_port = https_port
        self.user_agent = user_agent
        self.request_log: list[str] = []
        self._ssl_ctx = ssl.SSLContext(ssl.PROTOCOL_TLS_CLIENT)
        self._ssl_ctx.check_hostname = False
        self._ssl_ctx.verify_mode = ssl.CERT_NONE

    def resolve(self, host: str) -> str:
        if host in self.resolve_overrides:
            return self.resolve_overrides[host]
        for pattern, ip in self.resolve_overrides.items():
            if pattern.startswith("*.") and host.endswith(pattern[1:]):
                return ip
        return host

    def _port(self, scheme: str, explicit: int | None) -> int:
        if explicit is not None:
            return explicit
        if scheme == "https":
            return self.https_port if self.https_port is not None else 443
        return self.http_port if self.http_port is not None else 80

    def request(self, url: str, method: str = "GET",
                limits: FetchLimits = FetchLimits(),
                max_body: int | None = None,
                truncate: bool = False) -> Response:
        """One request, no redirect following.

        With truncate=True an oversized body is cut at the cap instead of
        raising BodyTooLarge (used by the leak probes).
        """
        parts = urlsplit(url)
        scheme = parts.scheme.lower()
        if scheme not in ("http", "https") or not parts.hostname:
            raise ConnectionFailed(f"unsupported URL: {url!r}")
        host = parts.hostname
        port = self._port(scheme, parts.port)
        address = self.resolve(host)
        cap = limits.max_body if max_body is None else max_body

        path = parts.path or "/"
        if parts.query:
            path += "?" + parts.query

        self.request_log.append(url)
        conn: http.client.HTTPConnection | None = None
        try:
            sock = socket.create_connection((address, port), timeout=limits.timeout)
            if scheme == "https":
                sock = self._ssl_ctx.wrap_socket(sock, server_hostname=host)
                conn = http.client.HTTPSConnection(host, port, timeout=limits.timeout)
            else:
                conn = http.client.HTTPConnection(host, port, timeout=limits.timeout)
            conn.sock = sock
            conn.request(method, path, headers={
                "Host": host if port in (80, 443) else f"{host}:{port}",
                "User-Agent": self.user_agent,
                "Accept": "*/*",
                "Connection": "close",
            })
            resp = conn.getresponse()
            body = b"" if method == "HEAD" else resp.read(cap + 1)
            if len(body) > cap:
                if truncate:
                    body = body[:cap]
                else:
                    raise BodyTooLarge(f"body of {url} exceeds {cap} bytes")
            return Response(url=url, status=resp.status,
                            headers=list(resp.getheaders()), body=body)
        except (socket.timeout, TimeoutError) as exc:
            raise Timeout(f"{method} {url}: {exc}") from exc
        except ssl.SSLError as exc:
            raise ConnectionFailed(f"TLS failure for {url}: {exc}") from exc
        except (OSError, http.client.HTTPException) as exc:
            raise ConnectionFailed(f"{method} {url}: {exc}") from exc
        finally:
            if conn is not None:
                conn.close()

    def fetch(self, url: str, limits: FetchLimits = FetchLimits(),
              method: str = "GET") -> list[Response]:
        """Follow redirects; returns every response, the last one final."""
        chain: list[Response] = []
        current = url
        for _hop in range(limits.max_redirects + 1):
            resp = self.request(current, method=method, limits=limits)
            chain.append(resp)
            if resp.status in _REDIRECT_CODES:
                location = resp.header("Location")
                if not location:
                    return chain
                current = urljoin(current, location)
                continue
            return chain
        raise TooManyRedirects(f"more than {limits.max_redirects} redirects from {url}")
