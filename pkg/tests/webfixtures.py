"""Local fixture servers: virtual-host HTTP, TLS with legacy-hello peeking,
and a minimal SMTP server. Zero external network access.

The TLS server inspects the first bytes of each connection: handcrafted
legacy ClientHellos (SSLv3/TLS1.0/1.1, recognizable by the hello body
version) are answered with a canned ServerHello when the fixture is
configured to "offer" that version, otherwise with a handshake_failure
alert. Everything else is wrapped by the real ssl server context.
"""

from __future__ import annotations

import datetime
import socket
import socketserver
import ssl
import struct
import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from cryptography import x509
from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric import ec
from cryptography.x509.oid import NameOID


# ---------------------------------------------------------------------------
# certificates

def _make_key():
    return ec.generate_private_key(ec.SECP256R1())


def _name(cn: str) -> x509.Name:
    return x509.Name([x509.NameAttribute(NameOID.COMMON_NAME, cn)])


def make_ca(cn: str = "sitegauge fixture CA"):
    key = _make_key()
    now = datetime.datetime.now(datetime.timezone.utc)
    cert = (
        x509.CertificateBuilder()
        .subject_name(_name(cn))
        .issuer_name(_name(cn))
        .public_key(key.public_key())
        .serial_number(x509.random_serial_number())
        .not_valid_before(now - datetime.timedelta(days=1))
        .not_valid_after(now + datetime.timedelta(days=365))
        .add_extension(x509.BasicConstraints(ca=True, path_length=None), critical=True)
        .sign(key, hashes.SHA256())
    )
    return key, cert


def make_leaf(ca_key, ca_cert, names: list[str], days: int = 30):
    key = _make_key()
    now = datetime.datetime.now(datetime.timezone.utc)
    san = x509.SubjectAlternativeName([x509.DNSName(n) for n in names])
    cert = (
        x509.CertificateBuilder()
        .subject_name(_name(names[0]))
        .issuer_name(ca_cert.subject)
        .public_key(key.public_key())
        .serial_number(x509.random_serial_number())
        .not_valid_before(now - datetime.timedelta(days=1))
        .not_valid_after(now + datetime.timedelta(days=days))
        .add_extension(san, critical=False)
        .sign(ca_key, hashes.SHA256())
    )
    return key, cert


def write_pem(path, *objects) -> str:
    with open(path, "wb") as fh:
        for obj in objects:
            if hasattr(obj, "private_bytes"):
                fh.write(obj.private_bytes(
                    serialization.Encoding.PEM,
                    serialization.PrivateFormat.PKCS8,
                    serialization.NoEncryption()))
            else:
                fh.write(obj.public_bytes(serialization.Encoding.PEM))
    return str(path)


# ---------------------------------------------------------------------------
# virtual-host HTTP application

@dataclass
class Page:
    body: bytes = b""
    status: int = 200
    headers: list[tuple[str, str]] = field(default_factory=list)
    content_type: str = "text/html; charset=utf-8"


@dataclass
class FixtureApp:
    """Routes (scheme, host, path) to configured pages and counts requests.

    Pages added without a scheme serve both the plain and the TLS server;
    scheme-specific pages win, which lets one fixture redirect http:// to
    the https:// variant of the same path.
    """

    pages: dict[tuple[str | None, str, str], Page] = field(default_factory=dict)
    requests: list[tuple[str, str, str, str]] = field(default_factory=list)  # (scheme, method, host, path)
    lock: threading.Lock = field(default_factory=threading.Lock)

    def add(self, host: str, path: str, body: str | bytes = b"", status: int = 200,
            headers: list[tuple[str, str]] | None = None,
            content_type: str = "text/html; charset=utf-8",
            scheme: str | None = None) -> None:
        data = body.encode("utf-8") if isinstance(body, str) else body
        self.pages[(scheme, host.lower(), path)] = Page(data, status, headers or [], content_type)

    def redirect(self, host: str, path: str, target: str, status: int = 301,
                 scheme: str | None = None) -> None:
        self.add(host, path, status=status, headers=[("Location", target)], scheme=scheme)

    def request_count(self, host: str | None = None, scheme: str | None = None) -> int:
        with self.lock:
            return sum(1 for s, _m, h, _p in self.requests
                       if (host is None or h == host.lower())
                       and (scheme is None or s == scheme))

    def reset_counters(self) -> None:
        with self.lock:
            self.requests.clear()

    def handle(self, scheme: str, method: str, host: str, path: str) -> Page:
        host = host.lower().split(":")[0]
        with self.lock:
            self.requests.append((scheme, method, host, path))
        page = self.pages.get((scheme, host, path)) or self.pages.get((None, host, path))
        if page is None:
            return Page(b"not found", 404)
        return page


class _AppHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"

    def _serve(self, include_body: bool) -> None:
        app: FixtureApp = self.server.app  # type: ignore[attr-defined]
        scheme = getattr(self.server, "scheme", "http")
        host = self.headers.get("Host", "")
        page = app.handle(scheme, self.command, host, self.path)
        # send_response_only: pages control all headers, incl. Server.
        self.send_response_only(page.status)
        self.send_header("Content-Type", page.content_type)
        self.send_header("Content-Length", str(len(page.body)))
        for key, value in page.headers:
            self.send_header(key, value)
        self.send_header("Connection", "close")
        self.end_headers()
        if include_body and self.command != "HEAD":
            self.wfile.write(page.body)

    def do_GET(self):
        self._serve(True)

    def do_HEAD(self):
        self._serve(False)

    def log_message(self, *args):
        pass


class HttpFixtureServer:
    def __init__(self, app: FixtureApp):
        self.server = ThreadingHTTPServer(("127.0.0.1", 0), _AppHandler)
        self.server.app = app  # type: ignore[attr-defined]
        self.server.scheme = "http"  # type: ignore[attr-defined]
        self.port = self.server.server_address[1]
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)

    def __enter__(self):
        self.thread.start()
        return self

    def __exit__(self, *exc):
        self.server.shutdown()
        self.server.server_close()


# ---------------------------------------------------------------------------
# TLS fixture server

_LEGACY_VERSIONS = {b"\x03\x00": "SSLv3", b"\x03\x01": "TLS1.0", b"\x03\x02": "TLS1.1"}


def _server_hello(version: bytes) -> bytes:
    body = version + b"\x00" * 32 + b"\x00" + b"\x00\x2f" + b"\x00"
    handshake = b"\x02" + len(body).to_bytes(3, "big") + body
    return b"\x16" + version + len(handshake).to_bytes(2, "big") + handshake


def _alert(version: bytes) -> bytes:
    return b"\x15" + version + b"\x00\x02" + b"\x02\x28"  # fatal handshake_failure


class TlsFixtureServer:
    """HTTPS for the fixture app plus configurable legacy-protocol behavior.

    `legacy_offered` names the legacy protocols ("SSLv3", "TLS1.0",
    "TLS1.1") the server pretends to accept. `connections` counts TCP
    accepts so tests can assert the scanner's connection budget.
    """

    def __init__(self, app: FixtureApp, certfile: str, keyfile: str,
                 legacy_offered: set[str] | None = None,
                 min_version: ssl.TLSVersion = ssl.TLSVersion.TLSv1_2):
        self.app = app
        self.legacy_offered = legacy_offered or set()
        self.connections = 0
        self._lock = threading.Lock()
        self.ctx = ssl.SSLContext(ssl.PROTOCOL_TLS_SERVER)
        self.ctx.minimum_version = min_version
        self.ctx.load_cert_chain(certfile, keyfile)
        self.sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self.sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self.sock.bind(("127.0.0.1", 0))
        self.sock.listen(16)
        self.port = self.sock.getsockname()[1]
        self.thread = threading.Thread(target=self._loop, daemon=True)
        self._stop = threading.Event()

    def __enter__(self):
        self.thread.start()
        return self

    def __exit__(self, *exc):
        self._stop.set()
        try:
            poker = socket.create_connection(("127.0.0.1", self.port), timeout=1)
            poker.close()
        except OSError:
            pass
        self.sock.close()

    def _loop(self):
        while not self._stop.is_set():
            try:
                conn, _addr = self.sock.accept()
            except OSError:
                return
            if self._stop.is_set():
                conn.close()
                return
            with self._lock:
                self.connections += 1
            threading.Thread(target=self._serve_one, args=(conn,), daemon=True).start()

    def _serve_one(self, conn: socket.socket) -> None:
        try:
            conn.settimeout(10)
            head = b""
            for _ in range(20):
                head = conn.recv(11, socket.MSG_PEEK)
                if len(head) >= 11 or not head:
                    break
            if len(head) >= 11 and head[0] == 0x16 and head[9:11] in _LEGACY_VERSIONS:
                version = head[9:11]
                proto = _LEGACY_VERSIONS[version]
                conn.recv(65535)  # consume the hello
                if proto in self.legacy_offered:
                    conn.sendall(_server_hello(version))
                else:
                    conn.sendall(_alert(version))
                return
            try:
                tls_conn = self.ctx.wrap_socket(conn, server_side=True)
            except (ssl.SSLError, OSError):
                return
            _AppHandler(tls_conn, ("127.0.0.1", 0), _FakeServer(self.app))
        except OSError:
            pass
        finally:
            try:
                conn.close()
            except OSError:
                pass


class _FakeServer:
    """Just enough server surface for BaseHTTPRequestHandler."""

    def __init__(self, app: FixtureApp):
        self.app = app
        self.scheme = "https"


# ---------------------------------------------------------------------------
# SMTP fixture server

class SmtpFixtureServer:
    def __init__(self, starttls: bool = True, certfile: str | None = None,
                 keyfile: str | None = None, banner: str = "fixture ESMTP"):
        self.starttls = starttls
        self.banner = banner
        self.ctx = None
        if certfile:
            self.ctx = ssl.SSLContext(ssl.PROTOCOL_TLS_SERVER)
            self.ctx.load_cert_chain(certfile, keyfile)
        self.server = socketserver.ThreadingTCPServer(("127.0.0.1", 0), self._make_handler())
        self.server.daemon_threads = True
        self.port = self.server.server_address[1]
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)

    def _make_handler(self):
        fixture = self

        class Handler(socketserver.StreamRequestHandler):
            def handle(self):
                try:
                    self._dialog()
                except (ssl.SSLError, OSError):
                    pass  # peer closed mid-dialog; fine for a fixture

            def _dialog(self):
                sock = self.connection
                sock.sendall(f"220 {fixture.banner}\r\n".encode())
                reader = self.rfile
                while True:
                    line = reader.readline(1024)
                    if not line:
                        return
                    cmd = line.decode("utf-8", "replace").strip().upper()
                    if cmd.startswith("EHLO") or cmd.startswith("HELO"):
                        if fixture.starttls:
                            sock.sendall(b"250-fixture\r\n250-STARTTLS\r\n250 OK\r\n")
                        else:
                            sock.sendall(b"250-fixture\r\n250 OK\r\n")
                    elif cmd.startswith("STARTTLS"):
                        if not (fixture.starttls and fixture.ctx):
                            sock.sendall(b"454 TLS not available\r\n")
                            continue
                        sock.sendall(b"220 ready to start TLS\r\n")
                        sock = fixture.ctx.wrap_socket(sock, server_side=True)
                        reader = sock.makefile("rb")
                    elif cmd.startswith("QUIT"):
                        sock.sendall(b"221 bye\r\n")
                        return
                    else:
                        sock.sendall(b"250 OK\r\n")

        return Handler

    def __enter__(self):
        self.thread.start()
        return self

    def __exit__(self, *exc):
        self.server.shutdown()
        self.server.server_close()
