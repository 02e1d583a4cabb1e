"""Scan/service configuration, shared by the orchestrator, API and CLI.

Config files are plain `key=value` text; `#` comments and blank lines are
ignored. Unknown keys raise, so typos fail fast.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

USER_AGENT = "sitegauge/0.1 (+https://sitegauge.invalid/opt-out)"


@dataclass(frozen=True)
class ScanConfig:
    resolver: str | None = None            # None: first nameserver from /etc/resolv.conf
    resolver_port: int = 53
    geodb: str | None = None               # no database: locations report "unknown"
    signatures_dir: str | None = None      # None: bundled starter signatures
    filter_list: str | None = None         # None: bundled starter list
    trust_store: str | None = None         # None: system trust store
    blacklist_file: str | None = None
    catalog_file: str | None = None        # None: built-in check catalog
    database: str = "sitegauge.db"
    listen_host: str = "127.0.0.1"
    listen_port: int = 8417
    webui_dir: str | None = None           # built frontend assets, served at /ui
    worker_count: int = 8
    per_host_min_interval: float = 600.0
    rescan_interval: float = 7 * 86400.0
    timeout: float = 10.0
    max_redirects: int = 10
    max_body: int = 5 * 1024 * 1024
    user_agent: str = USER_AGENT
    # Fixture/port overrides. None means the scheme's default port.
    http_port: int | None = None
    https_port: int | None = None
    smtp_port: int = 25
    resolve_overrides: dict[str, str] = field(default_factory=dict)

    def with_overrides(self, **kwargs) -> "ScanConfig":
        return replace(self, **kwargs)


_INT_KEYS = {"resolver_port", "worker_count", "http_port", "https_port",
             "smtp_port", "max_redirects", "max_body", "listen_port"}
_FLOAT_KEYS = {"per_host_min_interval", "rescan_interval", "timeout"}
_STR_KEYS = {"resolver", "geodb", "signatures_dir", "filter_list", "trust_store",
             "blacklist_file", "catalog_file", "database", "user_agent", "listen_host",
             "webui_dir"}


def load_config(path: str) -> ScanConfig:
    values: dict = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            key, _, raw = line.partition("=")
            key, raw = key.strip(), raw.strip()
            if key in _INT_KEYS:
                values[key] = int(raw)
            elif key in _FLOAT_KEYS:
                values[key] = float(raw)
            elif key in _STR_KEYS:
                values[key] = raw
            elif key == "resolve_overrides":
                overrides = {}
                for pair in raw.split(","):
                    if not pair.strip():
                        continue
                    host, _, ip = pair.partition(":")
                    overrides[host.strip()] = ip.strip()
                values[key] = overrides
            else:
                raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
    return ScanConfig(**values)


def system_resolver() -> str:
    try:
        with open("/etc/resolv.conf", encoding="utf-8") as fh:
            for line in fh:
                parts = line.split()
                if len(parts) >= 2 and parts[0] == "nameserver":
                    return parts[1]
    except OSError:
        pass
    return "1.1.1.1"
