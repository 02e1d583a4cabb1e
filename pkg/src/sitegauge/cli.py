"""Command-line front-end: one-off scans, list scans with ranking output,
the API server, and blacklist management.

Exit codes: 0 scan completed (whatever the colors), 1 usage or config
error, 2 site unreachable, 3 site blacklisted.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .config import ScanConfig, load_config
from .model import CheckGroup, MalformedUrl, RankingScheme, check_catalog, normalize_url
from .orchestrator import Blacklist, Orchestrator
from .pipeline import Scanner
from .rating import ScanFacts, rank_sites, rate_site
from .storage import Storage

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_UNREACHABLE = 2
EXIT_BLACKLISTED = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="sitegauge",
        description="Scan websites for privacy and security properties, rate "
                    "them per check group, and rank site lists.",
        epilog="Exit codes: 0 scan completed, 1 usage/config error, "
               "2 site unreachable, 3 site blacklisted.")
    parser.add_argument("--config", help="key=value config file")
    sub = parser.add_subparsers(dest="command", required=True)

    scan = sub.add_parser("scan", help="scan one URL and print its check table")
    scan.add_argument("url")
    scan.add_argument("--json", action="store_true", help="print machine-readable results")

    scan_list = sub.add_parser("scan-list", help="scan a CSV of sites and print the ranking")
    scan_list.add_argument("csv_file")
    scan_list.add_argument("--order", help="comma-separated check-group priority "
                           "(default NoTrack,Attacks,EncWeb,EncMail)")
    scan_list.add_argument("--json", action="store_true")

    serve = sub.add_parser("serve", help="start the REST API with embedded scan workers")
    serve.add_argument("--config", dest="serve_config", required=False)

    blacklist = sub.add_parser("blacklist", help="manage the opt-out blacklist")
    bl_sub = blacklist.add_subparsers(dest="blacklist_command", required=True)
    bl_add = bl_sub.add_parser("add", help="add a host (or URL prefix) to the blacklist")
    bl_add.add_argument("host")
    bl_add.add_argument("--note", default="", help="why the entry was added")
    bl_sub.add_parser("list", help="show all blacklist entries")
    return parser


def _load_config(path: str | None) -> ScanConfig:
    if path is None:
        return ScanConfig()
    try:
        return load_config(path)
    except (OSError, ValueError) as exc:
        print(f"sitegauge: cannot read config: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _results_document(url: str, facts: ScanFacts, results) -> dict:
    """Same shape as the API's per-site results payload."""
    docs = {c.check_id: c.doc for c in check_catalog()}
    rating = rate_site(url, results)
    return {
        "url": url,
        "final_url": facts.content.final_url if facts.content else None,
        "blacklisted": False,
        "check_results": [{**r.to_dict(), "doc": docs.get(r.check_id, "")} for r in results],
        "facts": facts.to_dict(),
        "colors": {g.value: c.value for g, c in rating.group_ratings.items()},
        "overall": rating.overall.value,
    }


_COLOR_CODES = {"green": "32", "yellow": "33", "red": "31", "neutral": "90", "unknown": "90"}


def _paint(text: str, color: str) -> str:
    if not sys.stdout.isatty():
        return text
    return f"\033[{_COLOR_CODES.get(color, '0')}m{text}\033[0m"


def _print_check_table(url: str, facts: ScanFacts, results) -> None:
    rating = rate_site(url, results)
    print(f"scan results for {url}")
    for group in CheckGroup:
        color = rating.group_ratings[group]
        print(f"\n[{group.value}] {_paint(color.value.upper(), color.value)}")
        for result in results:
            if result.group != group:
                continue
            marker = {"pass": "+", "fail": "-", "neutral": "o", "error": "!"}[result.outcome.value]
            crit = " (critical)" if result.critical and result.outcome.value == "fail" else ""
            print(f"  {marker} {result.check_id:<32} {result.outcome.value:<7}{crit} {result.evidence[:90]}")
    print(f"\noverall: {_paint(rating.overall.value.upper(), rating.overall.value)}")


def cmd_scan(args, config: ScanConfig) -> int:
    try:
        url = normalize_url(args.url)
    except MalformedUrl as exc:
        print(f"sitegauge: {exc}", file=sys.stderr)
        return EXIT_USAGE
    blacklist = Blacklist(config.blacklist_file)
    if blacklist.matches(url):
        print(f"sitegauge: {url} is blacklisted (operator opt-out); not scanning",
              file=sys.stderr)
        return EXIT_BLACKLISTED
    scanner = Scanner(config)
    facts, results = scanner.scan(url)
    unreachable = facts.content is None and not (facts.tls and facts.tls.https_offered)
    if args.json:
        print(json.dumps(_results_document(url, facts, results), sort_keys=True, indent=2))
    else:
        _print_check_table(url, facts, results)
    if unreachable:
        print(f"sitegauge: {url} is unreachable", file=sys.stderr)
        return EXIT_UNREACHABLE
    return EXIT_OK


def cmd_scan_list(args, config: ScanConfig) -> int:
    from .api import ApiError, parse_csv_sites
    from .model import SiteList

    try:
        with open(args.csv_file, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        print(f"sitegauge: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        raw_sites, schema = parse_csv_sites(text)
        if not raw_sites:
            print("sitegauge: the CSV contains no sites", file=sys.stderr)
            return EXIT_USAGE
        sites = SiteList.build_sites(raw_sites, tuple(schema))
    except (ApiError, MalformedUrl, ValueError) as exc:
        message = getattr(exc, "message", str(exc))
        print(f"sitegauge: {message}", file=sys.stderr)
        return EXIT_USAGE
    try:
        scheme = RankingScheme.parse(args.order) if args.order else RankingScheme.default()
    except ValueError as exc:
        print(f"sitegauge: {exc}", file=sys.stderr)
        return EXIT_USAGE

    scanner = Scanner(config)
    blacklist = Blacklist(config.blacklist_file)
    ratings = []
    rows = {}
    for site in sites:
        if blacklist.matches(site.url):
            rows[site.url] = {"url": site.url, "colors": None, "note": "blacklisted"}
            continue
        facts, results = scanner.scan(site.url)
        rating = rate_site(site.url, results)
        ratings.append(rating)
        rows[site.url] = {
            "url": site.url,
            "colors": {g.value: c.value for g, c in rating.group_ratings.items()},
            "overall": rating.overall.value,
        }

    ordered = rank_sites(ratings, scheme)
    ordered += [url for url in rows if url not in ordered]
    if args.json:
        print(json.dumps({"order": [g.value for g in scheme.group_order],
                          "rows": [rows[url] for url in ordered]}, sort_keys=True, indent=2))
        return EXIT_OK
    header = ["site".ljust(40)] + [g.value.ljust(8) for g in scheme.group_order] + ["overall"]
    print("  ".join(header))
    for url in ordered:
        row = rows[url]
        if row.get("colors") is None:
            print(f"{url:<40}  (blacklisted, not scanned)")
            continue
        cells = [_paint(row["colors"][g.value].ljust(8), row["colors"][g.value])
                 for g in scheme.group_order]
        print("  ".join([url.ljust(40)] + cells + [_paint(row["overall"], row["overall"])]))
    return EXIT_OK


def cmd_serve(args, config: ScanConfig) -> int:
    import uvicorn

    from .api import create_app, write_openapi

    storage = Storage(config.database)
    orchestrator = Orchestrator(storage, config)
    app = create_app(storage, orchestrator, webui_dir=config.webui_dir)
    try:
        os.makedirs("docs", exist_ok=True)
        write_openapi(app, os.path.join("docs", "openapi.json"))
    except OSError:
        pass
    orchestrator.start_workers()
    try:
        uvicorn.run(app, host=config.listen_host, port=config.listen_port,
                    log_level="warning")
    except (OSError, SystemExit) as exc:
        print(f"sitegauge: cannot serve on {config.listen_host}:{config.listen_port}: {exc}",
              file=sys.stderr)
        return EXIT_USAGE
    finally:
        orchestrator.stop_workers()
    return EXIT_OK


def cmd_blacklist(args, config: ScanConfig) -> int:
    path = config.blacklist_file or "blacklist.txt"
    blacklist = Blacklist(path)
    if args.blacklist_command == "add":
        blacklist.add(args.host, args.note)
        print(f"added {args.host} to {path}")
        return EXIT_OK
    for entry, note in sorted(blacklist.entries.items()):
        print(f"{entry}\t{note}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    config_path = getattr(args, "serve_config", None) or args.config
    if args.command == "serve" and config_path is None:
        print("sitegauge: serve requires --config", file=sys.stderr)
        return EXIT_USAGE
    try:
        config = _load_config(config_path)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    handlers = {
        "scan": cmd_scan,
        "scan-list": cmd_scan_list,
        "serve": cmd_serve,
        "blacklist": cmd_blacklist,
    }
    return handlers[args.command](args, config)


if __name__ == "__main__":
    sys.exit(main())
