"""REST API: site-list CRUD with token auth, scan triggering, rankings with
on-the-fly scheme parameters, per-site results, and open-data export/import.

The API layer is the only reader of the store; the database itself is never
exposed. All data is public by default; private lists require the list's
bearer token on every read and never appear in listings, search, or export
without it.
"""

from __future__ import annotations

import csv
import io
import json

from fastapi import FastAPI, Header, Query, Request, Response
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .model import (
    CheckGroup,
    CheckResult,
    Color,
    MalformedUrl,
    RankingScheme,
    SiteList,
    normalize_url,
    url_host,
)
from .orchestrator import BLACKLIST_ANNOTATION, Orchestrator
from .rating import SiteRating, aggregate_list_stats, rank_sites, rate_site
from .storage import Storage, hash_token, new_token, verify_token

EXPORT_SCHEMA = "sitegauge-list-v1"


class ApiError(Exception):
    def __init__(self, status: int, message: str):
        self.status = status
        self.message = message


class SiteIn(BaseModel):
    url: str
    properties: dict[str, str | None] = Field(default_factory=dict)


class ListIn(BaseModel):
    title: str
    description: str = ""
    tags: list[str] = Field(default_factory=list)
    sites: list[SiteIn] = Field(default_factory=list)
    csv: str | None = None
    private: bool = False
    rescan: bool = True
    honor_robots: bool = False


class ListUpdate(BaseModel):
    title: str | None = None
    description: str | None = None
    tags: list[str] | None = None
    sites: list[SiteIn] | None = None
    csv: str | None = None
    private: bool | None = None
    rescan: bool | None = None
    honor_robots: bool | None = None


class ScanIn(BaseModel):
    url: str


def parse_csv_sites(text: str) -> tuple[list[dict], list[str]]:
    """CSV upload: first column `url`, remaining headers become the
    property schema."""
    reader = csv.reader(io.StringIO(text))
    rows = [row for row in reader if row and any(cell.strip() for cell in row)]
    if not rows:
        return [], []
    header = [cell.strip() for cell in rows[0]]
    if not header or header[0].lower() != "url":
        raise ApiError(400, "CSV must have a 'url' first column")
    schema = header[1:]
    sites = []
    for row in rows[1:]:
        if not row or not row[0].strip():
            continue
        properties = {name: (row[i + 1].strip() if i + 1 < len(row) and row[i + 1].strip() != ""
                             else None)
                      for i, name in enumerate(schema)}
        sites.append({"url": row[0].strip(), "properties": properties})
    return sites, schema


def _sites_and_schema(body: ListIn | ListUpdate) -> tuple[list[tuple[str, dict]], list[str]]:
    if body.csv is not None:
        raw_sites, schema = parse_csv_sites(body.csv)
    else:
        raw_sites = [s.model_dump() for s in body.sites or []]
        schema = []
        for site in raw_sites:
            for key in site.get("properties") or {}:
                if key not in schema:
                    schema.append(key)
    if not raw_sites:
        raise ApiError(422, "a site list needs at least one site")
    try:
        sites = SiteList.build_sites(raw_sites, tuple(schema))
    except MalformedUrl as exc:
        raise ApiError(400, str(exc))
    except ValueError as exc:
        raise ApiError(400, str(exc))
    return [(s.url, dict(s.properties)) for s in sites], schema


def _bearer(authorization: str | None) -> str | None:
    if not authorization:
        return None
    scheme, _, token = authorization.partition(" ")
    if scheme.lower() != "bearer" or not token:
        return None
    return token.strip()


UNKNOWN_COLORS = {g.value: "unknown" for g in CheckGroup}


def create_app(storage: Storage, orchestrator: Orchestrator,
               webui_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="sitegauge", version="0.1.0",
                  description="Crowd-sourced website privacy and security benchmarks")
    catalog = orchestrator.scanner.catalog
    docs_by_id = {c.check_id: c.doc for c in catalog}
    if webui_dir:
        from fastapi.staticfiles import StaticFiles
        app.mount("/ui", StaticFiles(directory=webui_dir, html=True), name="webui")

    @app.exception_handler(ApiError)
    async def handle_api_error(_request: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status, content={"error": exc.message})

    def require_list(list_id: int) -> dict:
        data = storage.get_list(list_id)
        if data is None:
            raise ApiError(404, "unknown list")
        return data

    def require_token(list_id: int, authorization: str | None) -> None:
        token = _bearer(authorization)
        stored = storage.token_hash_of(list_id)
        if stored is None:
            raise ApiError(404, "unknown list")
        if not token or not verify_token(token, stored):
            raise ApiError(403, "missing or invalid access token")

    def check_read_access(data: dict, authorization: str | None) -> None:
        if data["private"]:
            require_token(data["id"], authorization)

    def list_summary(data: dict) -> dict:
        return {
            "id": data["id"],
            "title": data["title"],
            "description": data["description"],
            "tags": data["tags"],
            "private": data["private"],
            "rescan_enabled": data["rescan_enabled"],
            "honor_robots": data["honor_robots"],
            "property_schema": data["property_schema"],
            "created_at": data["created_at"],
            "site_count": len(data.get("sites", [])),
        }

    def site_rating_row(site: dict) -> dict:
        run = storage.latest_run(site["id"])
        row = {
            "site_id": site["id"],
            "url": site["url"],
            "final_url": site["final_url"],
            "properties": site["properties"],
            "run_id": None,
            "finished_at": None,
            "colors": dict(UNKNOWN_COLORS),
            "overall": "unknown",
            "scanned": False,
        }
        if run is None or not run["check_results"]:
            return row
        results = [CheckResult.from_dict(r) for r in run["check_results"]]
        rating = rate_site(site["url"], results)
        row.update({
            "run_id": run["id"],
            "finished_at": run["finished_at"],
            "colors": {g.value: c.value for g, c in rating.group_ratings.items()},
            "overall": rating.overall.value,
            "scanned": True,
        })
        return row

    # -- lists --------------------------------------------------------------

    @app.post("/api/v1/lists", status_code=201)
    def create_list(body: ListIn):
        sites, schema = _sites_and_schema(body)
        token = new_token()
        list_id = storage.create_list(
            title=body.title, description=body.description, tags=body.tags,
            property_schema=schema, sites=sites, token_hash=hash_token(token),
            private=body.private, rescan_enabled=body.rescan,
            honor_robots=body.honor_robots)
        for site in storage.sites_of_list(list_id):
            orchestrator.enqueue_scan(site["url"], list_id, site["id"])
        return {"list_id": list_id, "token": token}

    @app.get("/api/v1/lists")
    def search_lists(q: str | None = None, tag: str | None = None,
                     limit: int = Query(50, ge=1, le=500), offset: int = Query(0, ge=0)):
        found, total = storage.search_lists(q=q, tag=tag, limit=limit, offset=offset)
        summaries = []
        for data in found:
            data["sites"] = storage.sites_of_list(data["id"])
            summaries.append(list_summary(data))
        return {"lists": summaries, "total": total, "limit": limit, "offset": offset}

    @app.get("/api/v1/lists/{list_id}")
    def get_list(list_id: int, authorization: str | None = Header(default=None)):
        data = require_list(list_id)
        check_read_access(data, authorization)
        out = list_summary(data)
        out["sites"] = [{"site_id": s["id"], "url": s["url"], "final_url": s["final_url"],
                         "properties": s["properties"]} for s in data["sites"]]
        return out

    @app.put("/api/v1/lists/{list_id}")
    def update_list(list_id: int, body: ListUpdate,
                    authorization: str | None = Header(default=None)):
        require_list(list_id)
        require_token(list_id, authorization)
        sites = schema = None
        if body.csv is not None or body.sites is not None:
            sites, schema = _sites_and_schema(body)
        storage.update_list(
            list_id, title=body.title, description=body.description, tags=body.tags,
            private=body.private, rescan_enabled=body.rescan,
            honor_robots=body.honor_robots, property_schema=schema, sites=sites)
        if sites is not None:
            for site in storage.sites_of_list(list_id):
                if storage.latest_run(site["id"], completed_only=False) is None:
                    orchestrator.enqueue_scan(site["url"], list_id, site["id"])
        return list_summary(require_list(list_id))

    @app.delete("/api/v1/lists/{list_id}")
    def delete_list(list_id: int, authorization: str | None = Header(default=None)):
        require_list(list_id)
        require_token(list_id, authorization)
        storage.delete_list(list_id)
        return {"deleted": True}

    # -- ranking and results --------------------------------------------------

    @app.get("/api/v1/lists/{list_id}/ranking")
    def ranking(list_id: int, order: str | None = None,
                authorization: str | None = Header(default=None)):
        data = require_list(list_id)
        check_read_access(data, authorization)
        if order:
            try:
                scheme = RankingScheme.parse(order)
            except ValueError as exc:
                raise ApiError(400, str(exc))
        else:
            scheme = RankingScheme.default()

        rows = [site_rating_row(site) for site in data["sites"]]
        scanned = {row["url"]: row for row in rows if row["scanned"]}
        ratings = [
            SiteRating(
                site_ref=row["url"],
                group_ratings={CheckGroup(g): Color(c) for g, c in row["colors"].items()},
                overall=Color(row["overall"]))
            for row in scanned.values()
        ]
        ordered_urls = rank_sites(ratings, scheme)
        ordered = [scanned[url] for url in ordered_urls]
        unscanned = sorted((row for row in rows if not row["scanned"]),
                           key=lambda r: r["url"])
        return {
            "list_id": list_id,
            "order": [g.value for g in scheme.group_order],
            "rows": ordered + unscanned,
            "stats": aggregate_list_stats(ratings),
        }

    @app.get("/api/v1/sites/{site_id}/results")
    def site_results(site_id: int, authorization: str | None = Header(default=None)):
        site = storage.get_site(site_id)
        if site is None:
            raise ApiError(404, "unknown site")
        if site["list_id"] is not None:
            data = storage.get_list(site["list_id"], with_sites=False)
            if data is not None:
                check_read_access(data, authorization)
        run = storage.latest_run(site_id)
        blacklisted = orchestrator.blacklist.matches(site["url"]) is not None
        out = {
            "site_id": site_id,
            "url": site["url"],
            "final_url": site["final_url"],
            "properties": site["properties"],
            "list_id": site["list_id"],
            "blacklisted": blacklisted,
            "history": storage.run_history(site_id),
            "run": None,
            "check_results": [],
            "facts": None,
        }
        if blacklisted:
            out["annotation"] = BLACKLIST_ANNOTATION
        if run is not None:
            out["run"] = {"id": run["id"], "started_at": run["started_at"],
                          "finished_at": run["finished_at"], "status": run["status"]}
            out["check_results"] = [
                {**r, "doc": docs_by_id.get(r["check_id"], "")}
                for r in run["check_results"]]
            out["facts"] = run["facts"]
        return out

    @app.get("/api/v1/runs/{run_id}")
    def get_run(run_id: int):
        run = storage.get_run(run_id)
        if run is None:
            raise ApiError(404, "unknown run")
        return {
            "run_id": run["id"],
            "site_id": run["site_id"],
            "status": run["status"],
            "started_at": run["started_at"],
            "finished_at": run["finished_at"],
            "check_results": run["check_results"],
            "facts": run["facts"],
        }

    # -- export / import --------------------------------------------------------

    def export_document(data: dict) -> dict:
        sites_out = []
        for site in data["sites"]:
            run = storage.latest_run(site["id"])
            entry = {"url": site["url"], "final_url": site["final_url"],
                     "properties": site["properties"], "latest_run": None}
            if run is not None:
                entry["latest_run"] = {
                    "started_at": run["started_at"],
                    "finished_at": run["finished_at"],
                    "status": run["status"],
                    "facts": run["facts"],
                    "check_results": run["check_results"],
                }
            sites_out.append(entry)
        return {
            "schema": EXPORT_SCHEMA,
            "title": data["title"],
            "description": data["description"],
            "tags": data["tags"],
            "property_schema": data["property_schema"],
            "private": data["private"],
            "rescan_enabled": data["rescan_enabled"],
            "honor_robots": data["honor_robots"],
            "sites": sites_out,
        }

    def export_csv(data: dict) -> str:
        check_ids = [c.check_id for c in catalog]
        schema = data["property_schema"]
        group_cols = [g.value for g in CheckGroup]
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["url", *schema, "overall", *group_cols, *check_ids])
        for site in data["sites"]:
            row = site_rating_row(site)
            run = storage.latest_run(site["id"])
            outcomes = {}
            if run is not None:
                outcomes = {r["check_id"]: r["outcome"] for r in run["check_results"]}
            writer.writerow([
                site["url"],
                *[site["properties"].get(p) or "" for p in schema],
                row["overall"],
                *[row["colors"][g] for g in group_cols],
                *[outcomes.get(cid, "") for cid in check_ids],
            ])
        return buf.getvalue()

    @app.get("/api/v1/export/lists/{filename}")
    def export_list(filename: str, authorization: str | None = Header(default=None)):
        stem, _, fmt = filename.rpartition(".")
        if fmt not in ("json", "csv") or not stem.isdigit():
            raise ApiError(404, "export as <list_id>.json or <list_id>.csv")
        data = require_list(int(stem))
        check_read_access(data, authorization)
        if fmt == "json":
            return JSONResponse(export_document(data))
        return Response(content=export_csv(data), media_type="text/csv")

    @app.post("/api/v1/import", status_code=201)
    def import_list(document: dict):
        if document.get("schema") != EXPORT_SCHEMA:
            raise ApiError(400, f"expected an export document with schema {EXPORT_SCHEMA!r}")
        raw_sites = [{"url": s["url"], "properties": s.get("properties") or {}}
                     for s in document.get("sites") or []]
        if not raw_sites:
            raise ApiError(422, "a site list needs at least one site")
        try:
            sites = SiteList.build_sites(raw_sites, tuple(document.get("property_schema") or ()))
        except (MalformedUrl, ValueError) as exc:
            raise ApiError(400, str(exc))
        token = new_token()
        list_id = storage.create_list(
            title=document.get("title", "imported list"),
            description=document.get("description", ""),
            tags=list(document.get("tags") or []),
            property_schema=list(document.get("property_schema") or []),
            sites=[(s.url, dict(s.properties)) for s in sites],
            token_hash=hash_token(token),
            private=bool(document.get("private", False)),
            rescan_enabled=bool(document.get("rescan_enabled", True)),
            honor_robots=bool(document.get("honor_robots", False)))
        by_url = {s["url"]: s for s in storage.sites_of_list(list_id)}
        for entry in document["sites"]:
            run = entry.get("latest_run")
            url = normalize_url(entry["url"])
            if run and run.get("check_results"):
                storage.insert_run(
                    by_url[url]["id"], started_at=run["started_at"],
                    finished_at=run["finished_at"], status=run["status"],
                    facts=run.get("facts"), check_results=run["check_results"])
                if entry.get("final_url"):
                    storage.set_final_url(by_url[url]["id"], entry["final_url"])
        return {"list_id": list_id, "token": token}

    # -- single-site scans ----------------------------------------------------

    @app.post("/api/v1/scan", status_code=202)
    def scan_site(body: ScanIn):
        try:
            url = normalize_url(body.url)
        except MalformedUrl as exc:
            raise ApiError(400, str(exc))
        host = url_host(url)
        if orchestrator.rate_limiter.would_defer(host):
            raise ApiError(429, "host was scanned recently; try again later")
        job = orchestrator.enqueue_scan(url)
        return {"job_id": job["id"], "run_id": job["run_id"],
                "site_id": job["site_id"], "state": job["state"]}

    # -- metadata ----------------------------------------------------------------

    @app.get("/api/v1/checks")
    def checks():
        return {"checks": [
            {"check_id": c.check_id, "group": c.group.value,
             "critical": c.critical, "doc": c.doc} for c in catalog]}

    return app


def write_openapi(app: FastAPI, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(app.openapi(), fh, indent=2, sort_keys=True)
        fh.write("\n")
