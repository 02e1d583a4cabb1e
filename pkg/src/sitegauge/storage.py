"""Relational persistence for lists, sites, runs, and the job queue.

SQLite behind a narrow interface; the REST layer is the only reader, the
database file itself is never exposed. One connection guarded by an RLock
keeps writes atomic across worker threads; job claiming is a single UPDATE
so no job can run twice concurrently.
"""

from __future__ import annotations

import hashlib
import hmac
import json
import secrets
import sqlite3
import threading
import time


def new_token() -> str:
    """32 random bytes, URL-safe base64 without padding (43 chars)."""
    return secrets.token_urlsafe(32)


def hash_token(raw: str, salt: str | None = None) -> str:
    salt = salt or secrets.token_hex(8)
    digest = hashlib.sha256((salt + raw).encode("utf-8")).hexdigest()
    return f"{salt}${digest}"


def verify_token(raw: str, stored: str) -> bool:
    if not stored or "$" not in stored:
        return False
    salt, _, _digest = stored.partition("$")
    return hmac.compare_digest(hash_token(raw, salt), stored)


_SCHEMA = """
CREATE TABLE IF NOT EXISTS lists (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    title TEXT NOT NULL,
    description TEXT NOT NULL DEFAULT '',
    tags TEXT NOT NULL DEFAULT '[]',
    property_schema TEXT NOT NULL DEFAULT '[]',
    token_hash TEXT NOT NULL,
    private INTEGER NOT NULL DEFAULT 0,
    rescan_enabled INTEGER NOT NULL DEFAULT 1,
    honor_robots INTEGER NOT NULL DEFAULT 0,
    created_at REAL NOT NULL
);
CREATE TABLE IF NOT EXISTS sites (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    list_id INTEGER REFERENCES lists(id),
    url TEXT NOT NULL,
    final_url TEXT,
    properties TEXT NOT NULL DEFAULT '{}',
    UNIQUE(list_id, url)
);
CREATE TABLE IF NOT EXISTS runs (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    site_id INTEGER NOT NULL REFERENCES sites(id),
    started_at REAL NOT NULL,
    finished_at REAL,
    status TEXT NOT NULL,
    facts TEXT NOT NULL DEFAULT 'null',
    check_results TEXT NOT NULL DEFAULT '[]'
);
CREATE TABLE IF NOT EXISTS jobs (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    site_id INTEGER NOT NULL REFERENCES sites(id),
    list_id INTEGER,
    enqueued_at REAL NOT NULL,
    attempts INTEGER NOT NULL DEFAULT 0,
    state TEXT NOT NULL DEFAULT 'queued',
    run_id INTEGER
);
CREATE INDEX IF NOT EXISTS idx_sites_list ON sites(list_id);
CREATE INDEX IF NOT EXISTS idx_runs_site ON runs(site_id, id);
CREATE INDEX IF NOT EXISTS idx_jobs_state ON jobs(state, enqueued_at);
"""


def _row_to_dict(row: sqlite3.Row) -> dict:
    return dict(row)


class Storage:
    def __init__(self, path: str = ":memory:"):
        self._conn = sqlite3.connect(path, check_same_thread=False)
        self._conn.row_factory = sqlite3.Row
        self._lock = threading.RLock()
        with self._lock, self._conn:
            self._conn.executescript(_SCHEMA)

    def close(self) -> None:
        with self._lock:
            self._conn.close()

    # -- lists ------------------------------------------------------------

    def create_list(self, *, title: str, description: str, tags: list[str],
                    property_schema: list[str],
                    sites: list[tuple[str, dict]], token_hash: str,
                    private: bool, rescan_enabled: bool, honor_robots: bool,
                    created_at: float | None = None) -> int:
        with self._lock, self._conn:
            cur = self._conn.execute(
                "INSERT INTO lists (title, description, tags, property_schema,"
                " token_hash, private, rescan_enabled, honor_robots, created_at)"
                " VALUES (?,?,?,?,?,?,?,?,?)",
                (title, description, json.dumps(sorted(tags)), json.dumps(property_schema),
                 token_hash, int(private), int(rescan_enabled), int(honor_robots),
                 created_at if created_at is not None else time.time()))
            list_id = cur.lastrowid
            for url, properties in sites:
                self._conn.execute(
                    "INSERT INTO sites (list_id, url, properties) VALUES (?,?,?)",
                    (list_id, url, json.dumps(properties)))
            return list_id

    def get_list(self, list_id: int, with_sites: bool = True) -> dict | None:
        with self._lock:
            row = self._conn.execute("SELECT * FROM lists WHERE id=?", (list_id,)).fetchone()
            if row is None:
                return None
            data = self._decode_list(row)
            if with_sites:
                data["sites"] = self.sites_of_list(list_id)
            return data

    @staticmethod
    def _decode_list(row: sqlite3.Row) -> dict:
        data = _row_to_dict(row)
        data["tags"] = json.loads(data["tags"])
        data["property_schema"] = json.loads(data["property_schema"])
        for key in ("private", "rescan_enabled", "honor_robots"):
            data[key] = bool(data[key])
        return data

    def search_lists(self, q: str | None = None, tag: str | None = None,
                     include_private: bool = False,
                     limit: int = 50, offset: int = 0) -> tuple[list[dict], int]:
        with self._lock:
            rows = self._conn.execute("SELECT * FROM lists ORDER BY id").fetchall()
        found = []
        for row in rows:
            data = self._decode_list(row)
            if data["private"] and not include_private:
                continue
            if q and q.lower() not in (data["title"] + "\n" + data["description"]).lower():
                continue
            if tag and tag not in data["tags"]:
                continue
            found.append(data)
        return found[offset:offset + limit], len(found)

    def update_list(self, list_id: int, *, title=None, description=None, tags=None,
                    private=None, rescan_enabled=None, honor_robots=None,
                    property_schema=None,
                    sites: list[tuple[str, dict]] | None = None) -> None:
        updates, params = [], []
        for column, value, encode in (
                ("title", title, str),
                ("description", description, str),
                ("tags", tags, lambda v: json.dumps(sorted(v))),
                ("private", private, int),
                ("rescan_enabled", rescan_enabled, int),
                ("honor_robots", honor_robots, int),
                ("property_schema", property_schema, json.dumps)):
            if value is not None:
                updates.append(f"{column}=?")
                params.append(encode(value))
        with self._lock, self._conn:
            if updates:
                self._conn.execute(
                    f"UPDATE lists SET {', '.join(updates)} WHERE id=?",
                    (*params, list_id))
            if sites is not None:
                existing = {row["url"]: row["id"] for row in self._conn.execute(
                    "SELECT id, url FROM sites WHERE list_id=?", (list_id,))}
                wanted = {url for url, _p in sites}
                for url, site_id in existing.items():
                    if url not in wanted:
                        self._conn.execute("DELETE FROM runs WHERE site_id=?", (site_id,))
                        self._conn.execute("DELETE FROM jobs WHERE site_id=?", (site_id,))
                        self._conn.execute("DELETE FROM sites WHERE id=?", (site_id,))
                for url, properties in sites:
                    if url in existing:
                        self._conn.execute("UPDATE sites SET properties=? WHERE id=?",
                                           (json.dumps(properties), existing[url]))
                    else:
                        self._conn.execute(
                            "INSERT INTO sites (list_id, url, properties) VALUES (?,?,?)",
                            (list_id, url, json.dumps(properties)))

    def delete_list(self, list_id: int) -> bool:
        """Deleting a list removes its sites, runs, jobs, and token."""
        with self._lock, self._conn:
            if self._conn.execute("SELECT 1 FROM lists WHERE id=?", (list_id,)).fetchone() is None:
                return False
            site_ids = [row["id"] for row in self._conn.execute(
                "SELECT id FROM sites WHERE list_id=?", (list_id,))]
            for site_id in site_ids:
                self._conn.execute("DELETE FROM runs WHERE site_id=?", (site_id,))
                self._conn.execute("DELETE FROM jobs WHERE site_id=?", (site_id,))
            self._conn.execute("DELETE FROM sites WHERE list_id=?", (list_id,))
            self._conn.execute("DELETE FROM lists WHERE id=?", (list_id,))
            return True

    def token_hash_of(self, list_id: int) -> str | None:
        with self._lock:
            row = self._conn.execute("SELECT token_hash FROM lists WHERE id=?",
                                     (list_id,)).fetchone()
            return row["token_hash"] if row else None

    # -- sites ------------------------------------------------------------

    def sites_of_list(self, list_id: int) -> list[dict]:
        with self._lock:
            rows = self._conn.execute(
                "SELECT * FROM sites WHERE list_id=? ORDER BY id", (list_id,)).fetchall()
        return [self._decode_site(r) for r in rows]

    @staticmethod
    def _decode_site(row: sqlite3.Row) -> dict:
        data = _row_to_dict(row)
        data["properties"] = json.loads(data["properties"])
        return data

    def get_site(self, site_id: int) -> dict | None:
        with self._lock:
            row = self._conn.execute("SELECT * FROM sites WHERE id=?", (site_id,)).fetchone()
        return self._decode_site(row) if row else None

    def ensure_single_site(self, url: str) -> int:
        """Site row for a one-off scan (no list); reused per URL."""
        with self._lock, self._conn:
            row = self._conn.execute(
                "SELECT id FROM sites WHERE list_id IS NULL AND url=?", (url,)).fetchone()
            if row:
                return row["id"]
            cur = self._conn.execute(
                "INSERT INTO sites (list_id, url, properties) VALUES (NULL, ?, '{}')", (url,))
            return cur.lastrowid

    def set_final_url(self, site_id: int, final_url: str | None) -> None:
        with self._lock, self._conn:
            self._conn.execute("UPDATE sites SET final_url=? WHERE id=?",
                               (final_url, site_id))

    # -- runs ---------------------------------------------------------------

    def start_run(self, site_id: int, started_at: float, status: str = "running") -> int:
        with self._lock, self._conn:
            cur = self._conn.execute(
                "INSERT INTO runs (site_id, started_at, status) VALUES (?,?,?)",
                (site_id, started_at, status))
            return cur.lastrowid

    def mark_run_running(self, run_id: int, started_at: float) -> None:
        with self._lock, self._conn:
            self._conn.execute(
                "UPDATE runs SET status='running', started_at=? WHERE id=?",
                (started_at, run_id))

    def reset_run_queued(self, run_id: int) -> None:
        with self._lock, self._conn:
            self._conn.execute("UPDATE runs SET status='queued' WHERE id=?", (run_id,))

    def finish_run(self, run_id: int, *, status: str, finished_at: float | None,
                   facts: dict | None, check_results: list[dict]) -> None:
        with self._lock, self._conn:
            self._conn.execute(
                "UPDATE runs SET status=?, finished_at=?, facts=?, check_results=? WHERE id=?",
                (status, finished_at,
                 json.dumps(facts, sort_keys=True),
                 json.dumps(check_results, sort_keys=True), run_id))

    def insert_run(self, site_id: int, *, started_at: float, finished_at: float | None,
                   status: str, facts: dict | None, check_results: list[dict]) -> int:
        with self._lock, self._conn:
            cur = self._conn.execute(
                "INSERT INTO runs (site_id, started_at, finished_at, status, facts,"
                " check_results) VALUES (?,?,?,?,?,?)",
                (site_id, started_at, finished_at, status,
                 json.dumps(facts, sort_keys=True),
                 json.dumps(check_results, sort_keys=True)))
            return cur.lastrowid

    @staticmethod
    def _decode_run(row: sqlite3.Row) -> dict:
        data = _row_to_dict(row)
        data["facts"] = json.loads(data["facts"])
        data["check_results"] = json.loads(data["check_results"])
        return data

    def get_run(self, run_id: int) -> dict | None:
        with self._lock:
            row = self._conn.execute("SELECT * FROM runs WHERE id=?", (run_id,)).fetchone()
        return self._decode_run(row) if row else None

    def latest_run(self, site_id: int, completed_only: bool = True) -> dict | None:
        query = "SELECT * FROM runs WHERE site_id=?"
        if completed_only:
            query += " AND status IN ('done','failed')"
        query += " ORDER BY id DESC LIMIT 1"
        with self._lock:
            row = self._conn.execute(query, (site_id,)).fetchone()
        return self._decode_run(row) if row else None

    def run_history(self, site_id: int) -> list[dict]:
        with self._lock:
            rows = self._conn.execute(
                "SELECT id, started_at, finished_at, status FROM runs"
                " WHERE site_id=? ORDER BY id", (site_id,)).fetchall()
        return [_row_to_dict(r) for r in rows]

    # -- jobs ---------------------------------------------------------------

    def active_job_for_site(self, site_id: int) -> dict | None:
        with self._lock:
            row = self._conn.execute(
                "SELECT * FROM jobs WHERE site_id=? AND state IN ('queued','running')"
                " ORDER BY id LIMIT 1", (site_id,)).fetchone()
        return _row_to_dict(row) if row else None

    def insert_job(self, site_id: int, list_id: int | None, enqueued_at: float,
                   state: str = "queued", run_id: int | None = None) -> dict:
        with self._lock, self._conn:
            cur = self._conn.execute(
                "INSERT INTO jobs (site_id, list_id, enqueued_at, state, run_id)"
                " VALUES (?,?,?,?,?)",
                (site_id, list_id, enqueued_at, state, run_id))
            return self.get_job(cur.lastrowid)

    def get_job(self, job_id: int) -> dict | None:
        with self._lock:
            row = self._conn.execute("SELECT * FROM jobs WHERE id=?", (job_id,)).fetchone()
        return _row_to_dict(row) if row else None

    def queued_jobs(self) -> list[dict]:
        with self._lock:
            rows = self._conn.execute(
                "SELECT jobs.*, sites.url AS url FROM jobs JOIN sites ON sites.id=jobs.site_id"
                " WHERE state='queued' ORDER BY jobs.id").fetchall()
        return [_row_to_dict(r) for r in rows]

    def claim_job(self, job_id: int) -> bool:
        """queued -> running, atomically; False when someone else won."""
        with self._lock, self._conn:
            cur = self._conn.execute(
                "UPDATE jobs SET state='running', attempts=attempts+1"
                " WHERE id=? AND state='queued'", (job_id,))
            return cur.rowcount == 1

    def finish_job(self, job_id: int, state: str, run_id: int | None = None) -> None:
        with self._lock, self._conn:
            self._conn.execute("UPDATE jobs SET state=?, run_id=? WHERE id=?",
                               (state, run_id, job_id))

    def requeue_job(self, job_id: int) -> None:
        with self._lock, self._conn:
            self._conn.execute("UPDATE jobs SET state='queued' WHERE id=?", (job_id,))

    def running_jobs(self) -> list[dict]:
        with self._lock:
            rows = self._conn.execute("SELECT * FROM jobs WHERE state='running'").fetchall()
        return [_row_to_dict(r) for r in rows]

    # -- rescan scheduling ----------------------------------------------------

    def sites_due_for_rescan(self, cutoff: float) -> list[dict]:
        """Sites in rescan-enabled lists whose newest completed run is older
        than the cutoff (and that have been scanned at least once)."""
        with self._lock:
            rows = self._conn.execute(
                """
                SELECT sites.id AS site_id, sites.list_id AS list_id, sites.url AS url,
                       MAX(runs.started_at) AS last_scan
                FROM sites
                JOIN lists ON lists.id = sites.list_id AND lists.rescan_enabled = 1
                JOIN runs ON runs.site_id = sites.id AND runs.status IN ('done','failed')
                GROUP BY sites.id
                HAVING last_scan < ?
                """, (cutoff,)).fetchall()
        return [_row_to_dict(r) for r in rows]
