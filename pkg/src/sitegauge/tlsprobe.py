"""TLS probing of web and mail servers.

Protocol support is tested one version per handshake, highest first. TLS
1.2/1.3 use the ssl module; SSLv3/TLS1.0/TLS1.1 are probed with a
handcrafted ClientHello because modern OpenSSL builds cannot initiate them
(the ServerHello's version byte is all we need). A version the local stack
truly cannot ask about is reported as unknown, never refused: honest
unknowns beat false negatives.

Certificate validity decomposes into hostname match and expiry (parsed from
the served certificate) and chain verification (one handshake against the
configured trust store); cert_valid is the conjunction.
"""

from __future__ import annotations

import http.client
import re
import socket
import ssl
import struct
from dataclasses import dataclass, field
from datetime import datetime, timezone

from cryptography import x509
from cryptography.x509.oid import NameOID

from .fetch import FetchError, FetchLimits, HttpTransport

PROTO_SSLV3 = "SSLv3"
PROTO_TLS10 = "TLS1.0"
PROTO_TLS11 = "TLS1.1"
PROTO_TLS12 = "TLS1.2"
PROTO_TLS13 = "TLS1.3"

#: highest-first probe order
PROTOCOLS = (PROTO_TLS13, PROTO_TLS12, PROTO_TLS11, PROTO_TLS10, PROTO_SSLV3)

_LEGACY_VERSION_BYTES = {
    PROTO_SSLV3: b"\x03\x00",
    PROTO_TLS10: b"\x03\x01",
    PROTO_TLS11: b"\x03\x02",
}

_MODERN_TLS_VERSIONS = {
    PROTO_TLS12: ssl.TLSVersion.TLSv1_2,
    PROTO_TLS13: ssl.TLSVersion.TLSv1_3,
}

OFFERED = "offered"
REFUSED = "refused"
UNKNOWN = "unknown"


@dataclass
class TlsFacts:
    https_offered: bool = False
    https_redirect: bool = False
    protocols: dict[str, str] = field(
        default_factory=lambda: {p: UNKNOWN for p in PROTOCOLS})
    cert_valid: bool | None = None
    cert_hostname_match: bool | None = None
    cert_not_expired: bool | None = None
    hsts_present: bool = False
    hsts_max_age: int | None = None
    error: str | None = None

    @property
    def poodle_susceptible(self) -> bool:
        return self.protocols.get(PROTO_SSLV3) == OFFERED

    def to_dict(self) -> dict:
        return {
            "https_offered": self.https_offered,
            "https_redirect": self.https_redirect,
            "protocols": dict(sorted(self.protocols.items())),
            "cert_valid": self.cert_valid,
            "cert_hostname_match": self.cert_hostname_match,
            "cert_not_expired": self.cert_not_expired,
            "hsts_present": self.hsts_present,
            "hsts_max_age": self.hsts_max_age,
            "poodle_susceptible": self.poodle_susceptible,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TlsFacts":
        facts = cls(
            https_offered=d.get("https_offered", False),
            https_redirect=d.get("https_redirect", False),
            protocols={p: d.get("protocols", {}).get(p, UNKNOWN) for p in PROTOCOLS},
            cert_valid=d.get("cert_valid"),
            cert_hostname_match=d.get("cert_hostname_match"),
            cert_not_expired=d.get("cert_not_expired"),
            hsts_present=d.get("hsts_present", False),
            hsts_max_age=d.get("hsts_max_age"),
            error=d.get("error"),
        )
        return facts


@dataclass
class MailTlsFacts:
    mx_host: str | None = None
    starttls_offered: bool | None = None  # None = unknown
    protocols: dict[str, str] = field(
        default_factory=lambda: {p: UNKNOWN for p in PROTOCOLS})
    cert_valid: bool | None = None
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "mx_host": self.mx_host,
            "starttls_offered": self.starttls_offered,
            "protocols": dict(sorted(self.protocols.items())),
            "cert_valid": self.cert_valid,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MailTlsFacts":
        return cls(
            mx_host=d.get("mx_host"),
            starttls_offered=d.get("starttls_offered"),
            protocols={p: d.get("protocols", {}).get(p, UNKNOWN) for p in PROTOCOLS},
            cert_valid=d.get("cert_valid"),
            error=d.get("error"),
        )


def _client_hello(version: bytes) -> bytes:
    """A legacy ClientHello: record and body carry the same target version."""
    ciphers = struct.pack(">H", 12) + struct.pack(
        ">6H", 0xC013, 0xC014, 0x002F, 0x0035, 0x000A, 0x0005)
    body = version + b"\x00" * 32 + b"\x00" + ciphers + b"\x01\x00"
    handshake = b"\x01" + len(body).to_bytes(3, "big") + body
    return b"\x16" + version + len(handshake).to_bytes(2, "big") + handshake


def legacy_hello_probe(address: str, port: int, proto: str,
                       timeout: float = 5.0) -> str:
    """offered / refused / unknown for one legacy protocol version.

    The server accepting the hello answers a ServerHello carrying the same
    version; an alert or closed connection means refusal; connect failures
    leave the answer unknown.
    """
    version = _LEGACY_VERSION_BYTES[proto]
    try:
        sock = socket.create_connection((address, port), timeout=timeout)
    except OSError:
        return UNKNOWN
    try:
        sock.settimeout(timeout)
        sock.sendall(_client_hello(version))
        head = b""
        while len(head) < 11:
            chunk = sock.recv(11 - len(head))
            if not chunk:
                return REFUSED
            head += chunk
        if head[0] != 0x16 or head[5] != 0x02:
            return REFUSED  # alert or anything that is not a ServerHello
        return OFFERED if head[9:11] == version else REFUSED
    except socket.timeout:
        return UNKNOWN
    except OSError:
        return REFUSED
    finally:
        sock.close()


def _hostname_matches(host: str, names: list[str]) -> bool:
    host = host.lower().rstrip(".")
    for name in names:
        name = name.lower().rstrip(".")
        if name == host:
            return True
        if name.startswith("*.") and "." in host and host.split(".", 1)[1] == name[2:]:
            return True
    return False


def _cert_names(cert: x509.Certificate) -> list[str]:
    names: list[str] = []
    try:
        san = cert.extensions.get_extension_for_class(x509.SubjectAlternativeName).value
        names.extend(san.get_values_for_type(x509.DNSName))
        names.extend(str(ip) for ip in san.get_values_for_type(x509.IPAddress))
    except x509.ExtensionNotFound:
        pass
    if not names:
        names.extend(attr.value for attr in
                     cert.subject.get_attributes_for_oid(NameOID.COMMON_NAME))
    return names


def _cert_window(cert: x509.Certificate) -> tuple[datetime, datetime]:
    nb = getattr(cert, "not_valid_before_utc", None)
    na = getattr(cert, "not_valid_after_utc", None)
    if nb is None:
        nb = cert.not_valid_before.replace(tzinfo=timezone.utc)
    if na is None:
        na = cert.not_valid_after.replace(tzinfo=timezone.utc)
    return nb, na


def _verify_chain(address: str, port: int, host: str,
                  trust_store: str | None, timeout: float) -> bool | None:
    """One verifying handshake; True also for certs failing only on expiry
    (expiry is assessed separately from the certificate itself)."""
    ctx = ssl.create_default_context()
    ctx.check_hostname = False
    if trust_store:
        ctx.load_verify_locations(cafile=trust_store)
    try:
        with socket.create_connection((address, port), timeout=timeout) as sock:
            with ctx.wrap_socket(sock, server_hostname=host):
                return True
    except ssl.SSLCertVerificationError as exc:
        return exc.verify_code == 10  # X509_V_ERR_CERT_HAS_EXPIRED
    except (OSError, ssl.SSLError):
        return None


_MAX_AGE_RE = re.compile(r"max-age\s*=\s*\"?(\d+)", re.IGNORECASE)


def parse_hsts(value: str | None) -> tuple[bool, int | None]:
    if value is None:
        return False, None
    m = _MAX_AGE_RE.search(value)
    return True, (int(m.group(1)) if m else None)


def _modern_probe(address: str, port: int, host: str, proto: str,
                  timeout: float, want_headers: bool) -> tuple[str, bytes | None, str | None]:
    """(status, der_cert, hsts_header) for one pinned TLS1.2/1.3 handshake.

    When want_headers is set a HEAD request rides on the probe connection to
    read the HSTS header without an extra connection.
    """
    ctx = ssl.SSLContext(ssl.PROTOCOL_TLS_CLIENT)
    ctx.check_hostname = False
    ctx.verify_mode = ssl.CERT_NONE
    version = _MODERN_TLS_VERSIONS[proto]
    try:
        ctx.minimum_version = version
        ctx.maximum_version = version
    except (ValueError, ssl.SSLError):
        return UNKNOWN, None, None
    try:
        sock = socket.create_connection((address, port), timeout=timeout)
    except OSError:
        return UNKNOWN, None, None
    try:
        ssock = ctx.wrap_socket(sock, server_hostname=host)
    except ssl.SSLError:
        sock.close()
        return REFUSED, None, None
    except OSError:
        sock.close()
        return UNKNOWN, None, None
    try:
        der = ssock.getpeercert(binary_form=True)
        hsts = None
        if want_headers:
            conn = http.client.HTTPSConnection(host, port, timeout=timeout)
            conn.sock = ssock
            try:
                conn.request("HEAD", "/", headers={"Host": host, "Connection": "close"})
                resp = conn.getresponse()
                hsts = resp.getheader("Strict-Transport-Security")
            except (OSError, http.client.HTTPException):
                hsts = None
        return OFFERED, der, hsts
    finally:
        ssock.close()


def scan_web_tls(host: str, transport: HttpTransport, *,
                 https_port: int | None = None,
                 trust_store: str | None = None,
                 limits: FetchLimits = FetchLimits()) -> TlsFacts:
    """Probe the web server's TLS configuration.

    Issues at most one connection per protocol version plus one verifying
    handshake on the HTTPS port and one plain-HTTP HEAD for the redirect
    check.
    """
    facts = TlsFacts()
    port = https_port if https_port is not None else (
        transport.https_port if transport.https_port is not None else 443)
    address = transport.resolve(host)
    timeout = limits.timeout

    der: bytes | None = None
    for proto in PROTOCOLS:
        if proto in _MODERN_TLS_VERSIONS:
            status, probe_der, hsts_value = _modern_probe(
                address, port, host, proto, timeout, want_headers=der is None)
            facts.protocols[proto] = status
            if status == OFFERED and der is None:
                der = probe_der
                facts.hsts_present, facts.hsts_max_age = parse_hsts(hsts_value)
        else:
            facts.protocols[proto] = legacy_hello_probe(address, port, proto, timeout)

    facts.https_offered = any(
        facts.protocols[p] == OFFERED for p in PROTOCOLS)

    if der is not None:
        cert = x509.load_der_x509_certificate(der)
        facts.cert_hostname_match = _hostname_matches(host, _cert_names(cert))
        not_before, not_after = _cert_window(cert)
        now = datetime.now(timezone.utc)
        facts.cert_not_expired = not_before <= now <= not_after
        chain_ok = _verify_chain(address, port, host, trust_store, timeout)
        if chain_ok is None:
            facts.cert_valid = None
        else:
            facts.cert_valid = bool(
                facts.cert_hostname_match and facts.cert_not_expired and chain_ok)

    try:
        chain = transport.fetch(f"http://{host}/", limits=limits, method="HEAD")
        facts.https_redirect = chain[-1].url.lower().startswith("https://")
    except FetchError as exc:
        facts.https_redirect = False
        if not facts.https_offered:
            facts.error = str(exc)
    return facts


def _read_smtp_reply(reader) -> tuple[int, list[str]]:
    lines = []
    while True:
        line = reader.readline(2048)
        if not line:
            raise ConnectionError("SMTP server closed the connection")
        text = line.decode("utf-8", "replace").rstrip("\r\n")
        lines.append(text[4:])
        if len(text) < 4 or text[3] != "-":
            try:
                return int(text[:3]), lines
            except ValueError as exc:
                raise ConnectionError(f"bad SMTP reply: {text!r}") from exc


def scan_mail_tls(mx_host: str | None, transport: HttpTransport, *,
                  smtp_port: int = 25,
                  trust_store: str | None = None,
                  timeout: float = 10.0) -> MailTlsFacts:
    """SMTP dialog on the mail port: greeting, EHLO, STARTTLS, handshake.

    With no MX host every field stays unknown (the mail group then rates
    neutral). One connection; the negotiated protocol version is recorded
    as offered and unprobed versions stay unknown.
    """
    facts = MailTlsFacts(mx_host=mx_host)
    if not mx_host:
        return facts
    address = transport.resolve(mx_host)
    try:
        sock = socket.create_connection((address, smtp_port), timeout=timeout)
    except OSError as exc:
        facts.error = f"connect failed: {exc}"
        return facts
    try:
        sock.settimeout(timeout)
        reader = sock.makefile("rb")
        code, _ = _read_smtp_reply(reader)
        if code != 220:
            facts.error = f"unexpected greeting code {code}"
            return facts
        sock.sendall(b"EHLO sitegauge.scanner\r\n")
        code, capabilities = _read_smtp_reply(reader)
        if code != 250:
            facts.error = f"EHLO rejected with {code}"
            return facts
        facts.starttls_offered = any(
            cap.strip().upper().startswith("STARTTLS") for cap in capabilities)
        if not facts.starttls_offered:
            return facts
        sock.sendall(b"STARTTLS\r\n")
        code, _ = _read_smtp_reply(reader)
        if code != 220:
            facts.starttls_offered = False
            return facts

        ctx = ssl.create_default_context()
        if trust_store:
            ctx.load_verify_locations(cafile=trust_store)
        try:
            ssock = ctx.wrap_socket(sock, server_hostname=mx_host)
        except ssl.SSLCertVerificationError:
            facts.cert_valid = False
            return facts
        except (ssl.SSLError, OSError) as exc:
            facts.error = f"STARTTLS handshake failed: {exc}"
            return facts
        with ssock:
            facts.cert_valid = True
            negotiated = ssock.version()
            mapping = {"SSLv3": PROTO_SSLV3, "TLSv1": PROTO_TLS10, "TLSv1.1": PROTO_TLS11,
                       "TLSv1.2": PROTO_TLS12, "TLSv1.3": PROTO_TLS13}
            proto = mapping.get(negotiated or "")
            if proto:
                facts.protocols[proto] = OFFERED
            try:
                ssock.sendall(b"QUIT\r\n")
            except OSError:
                pass
        return facts
    except (ConnectionError, socket.timeout, OSError) as exc:
        facts.error = str(exc)
        facts.starttls_offered = facts.starttls_offered or None
        return facts
    finally:
        sock.close()
