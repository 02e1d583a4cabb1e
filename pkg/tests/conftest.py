"""Shared fixtures: certificate material, fixture servers, and two fully
configured scan targets ("clean" and "worst-case") used across the suite."""

from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from webfixtures import (  # noqa: E402
    FixtureApp,
    HttpFixtureServer,
    SmtpFixtureServer,
    TlsFixtureServer,
    make_ca,
    make_leaf,
    write_pem,
)

FIXTURE_HOSTS = ["site.test", "worst.test", "tracker.test", "static.other.test",
                 "cdn.site.test", "mx.site.test", "mx.worst.test", "localhost"]


@pytest.fixture(scope="session")
def cert_material(tmp_path_factory):
    """Trusted CA + leaf for *.test, and an untrusted leaf for the worst case."""
    tmp = tmp_path_factory.mktemp("certs")
    ca_key, ca_cert = make_ca()
    leaf_key, leaf_cert = make_leaf(
        ca_key, ca_cert,
        ["site.test", "*.test", "*.site.test", "*.other.test", "localhost"])
    rogue_ca_key, rogue_ca_cert = make_ca("rogue CA")
    rogue_key, rogue_cert = make_leaf(
        rogue_ca_key, rogue_ca_cert, ["worst.test", "*.test", "*.worst.test"])

    return {
        "trust_store": write_pem(tmp / "ca.pem", ca_cert),
        "cert": write_pem(tmp / "leaf.pem", leaf_cert),
        "key": write_pem(tmp / "leaf.key", leaf_key),
        "rogue_cert": write_pem(tmp / "rogue.pem", rogue_cert),
        "rogue_key": write_pem(tmp / "rogue.key", rogue_key),
    }


@pytest.fixture()
def app():
    return FixtureApp()


@pytest.fixture()
def http_server(app):
    with HttpFixtureServer(app) as server:
        yield server


@pytest.fixture()
def tls_server(app, cert_material):
    with TlsFixtureServer(app, cert_material["cert"], cert_material["key"]) as server:
        yield server


def make_transport(http_server=None, tls_server=None, hosts=FIXTURE_HOSTS):
    from sitegauge.fetch import HttpTransport

    return HttpTransport(
        resolve_overrides={host: "127.0.0.1" for host in hosts} | {"*.test": "127.0.0.1"},
        http_port=http_server.port if http_server else None,
        https_port=tls_server.port if tls_server else None,
    )


@pytest.fixture()
def transport(http_server):
    return make_transport(http_server)
