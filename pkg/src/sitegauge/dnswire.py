"""Minimal DNS wire-format codec and client.

Covers exactly what the scanner needs: UDP (with TCP fallback on
truncation) queries for A/AAAA/NS/MX/TXT/RRSIG, answer parsing with name
compression, and visibility of the authenticated-data (AD) header flag.
"""

from __future__ import annotations

import socket
import struct
from dataclasses import dataclass, field

TYPE_A = 1
TYPE_NS = 2
TYPE_CNAME = 5
TYPE_MX = 15
TYPE_TXT = 16
TYPE_AAAA = 28
TYPE_RRSIG = 46

CLASS_IN = 1

RCODE_NOERROR = 0
RCODE_NXDOMAIN = 3


class DnsError(Exception):
    pass


class DnsTimeout(DnsError):
    pass


@dataclass
class Record:
    name: str
    rtype: int
    ttl: int
    data: object  # parsed per type; raw bytes for unknown types


@dataclass
class Message:
    qid: int
    flags: int
    qname: str
    qtype: int
    answers: list[Record] = field(default_factory=list)

    @property
    def rcode(self) -> int:
        return self.flags & 0x000F

    @property
    def ad(self) -> bool:
        return bool(self.flags & 0x0020)

    @property
    def truncated(self) -> bool:
        return bool(self.flags & 0x0200)


def encode_name(name: str) -> bytes:
    out = b""
    for label in name.rstrip(".").split("."):
        if not label:
            continue
        raw = label.encode("ascii")
        if len(raw) > 63:
            raise DnsError(f"label too long: {label!r}")
        out += bytes([len(raw)]) + raw
    return out + b"\x00"


def encode_query(qid: int, qname: str, qtype: int) -> bytes:
    # RD set so a recursive resolver answers; AD set to signal that we
    # understand (and want) the authenticated-data flag in the response.
    flags = 0x0100 | 0x0020
    header = struct.pack(">HHHHHH", qid, flags, 1, 0, 0, 0)
    return header + encode_name(qname) + struct.pack(">HH", qtype, CLASS_IN)


def _decode_name(data: bytes, offset: int, depth: int = 0) -> tuple[str, int]:
    if depth > 16:
        raise DnsError("compression pointer loop")
    labels: list[str] = []
    while True:
        if offset >= len(data):
            raise DnsError("truncated name")
        length = data[offset]
        if length == 0:
            offset += 1
            break
        if length & 0xC0 == 0xC0:
            if offset + 1 >= len(data):
                raise DnsError("truncated pointer")
            ptr = ((length & 0x3F) << 8) | data[offset + 1]
            suffix, _ = _decode_name(data, ptr, depth + 1)
            labels.append(suffix)
            offset += 2
            return ".".join(filter(None, labels)), offset
        offset += 1
        labels.append(data[offset:offset + length].decode("ascii", "replace"))
        offset += length
    return ".".join(labels), offset


def _decode_rdata(rtype: int, data: bytes, start: int, rdlength: int) -> object:
    end = start + rdlength
    blob = data[start:end]
    if rtype == TYPE_A and rdlength == 4:
        return socket.inet_ntop(socket.AF_INET, blob)
    if rtype == TYPE_AAAA and rdlength == 16:
        return socket.inet_ntop(socket.AF_INET6, blob)
    if rtype in (TYPE_NS, TYPE_CNAME):
        return _decode_name(data, start)[0]
    if rtype == TYPE_MX:
        pref = struct.unpack(">H", blob[:2])[0]
        host, _ = _decode_name(data, start + 2)
        return (pref, host)
    if rtype == TYPE_TXT:
        chunks = []
        i = 0
        while i < len(blob):
            n = blob[i]
            chunks.append(blob[i + 1:i + 1 + n].decode("utf-8", "replace"))
            i += 1 + n
        return "".join(chunks)
    return blob


def decode_message(data: bytes) -> Message:
    if len(data) < 12:
        raise DnsError("short message")
    qid, flags, qdcount, ancount, _nscount, _arcount = struct.unpack(">HHHHHH", data[:12])
    offset = 12
    qname, qtype = "", 0
    for _ in range(qdcount):
        qname, offset = _decode_name(data, offset)
        qtype, _qclass = struct.unpack(">HH", data[offset:offset + 4])
        offset += 4
    answers: list[Record] = []
    for _ in range(ancount):
        name, offset = _decode_name(data, offset)
        rtype, _rclass, ttl, rdlength = struct.unpack(">HHIH", data[offset:offset + 10])
        offset += 10
        answers.append(Record(name, rtype, ttl, _decode_rdata(rtype, data, offset, rdlength)))
        offset += rdlength
    return Message(qid=qid, flags=flags, qname=qname, qtype=qtype, answers=answers)


def query(server: str, port: int, qname: str, qtype: int,
          timeout: float = 3.0, qid: int = 0x1234) -> Message:
    """One DNS query over UDP; falls back to TCP when the reply is truncated.

    Raises DnsTimeout when no reply arrives, DnsError on malformed replies.
    """
    payload = encode_query(qid, qname, qtype)
    with socket.socket(socket.AF_INET, socket.SOCK_DGRAM) as sock:
        sock.settimeout(timeout)
        try:
            sock.sendto(payload, (server, port))
            data, _addr = sock.recvfrom(65535)
        except socket.timeout as exc:
            raise DnsTimeout(f"no answer from {server}:{port} for {qname}") from exc
        except OSError as exc:
            raise DnsError(str(exc)) from exc
    msg = decode_message(data)
    if not msg.truncated:
        return msg
    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as sock:
        sock.settimeout(timeout)
        try:
            sock.connect((server, port))
            sock.sendall(struct.pack(">H", len(payload)) + payload)
            head = _read_exact(sock, 2)
            (length,) = struct.unpack(">H", head)
            data = _read_exact(sock, length)
        except socket.timeout as exc:
            raise DnsTimeout(f"tcp retry timed out for {qname}") from exc
        except OSError as exc:
            raise DnsError(str(exc)) from exc
    return decode_message(data)


def _read_exact(sock: socket.socket, n: int) -> bytes:
    buf = b""
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            raise DnsError("connection closed mid-message")
        buf += chunk
    return buf
