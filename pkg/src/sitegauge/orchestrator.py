"""Scan orchestration: job queue, worker pool, per-host rate limiting,
opt-out blacklist, robots.txt honoring, and periodic rescans.

Jobs live in the same store as results, so a restart loses nothing and a
worker crash leaves the job re-queueable (at-least-once execution; scans
are idempotent so duplicates are harmless). The rate limiter is the single
synchronized authority for its deployment: job claiming and host-slot
acquisition happen under one lock, so two jobs for the same host can never
start within the configured interval.
"""

from __future__ import annotations

import threading
import time
import urllib.robotparser
from dataclasses import dataclass
from urllib.parse import urlsplit

from .config import ScanConfig
from .fetch import FetchError
from .model import url_host
from .pipeline import Scanner
from .storage import Storage

MAX_ATTEMPTS = 2

ROBOTS_AGENT_TOKEN = "sitegauge"

BLACKLIST_ANNOTATION = ("The site operator has opted out of scanning;"
                        " results shown are the last before opt-out.")


class RateLimiter:
    """Grants at most one scan start per host per min_interval."""

    def __init__(self, min_interval: float, clock=time.monotonic):
        self.min_interval = min_interval
        self.clock = clock
        self._last: dict[str, float] = {}
        self._lock = threading.Lock()

    def try_acquire(self, host: str) -> bool:
        now = self.clock()
        with self._lock:
            last = self._last.get(host)
            if last is not None and now - last < self.min_interval:
                return False
            self._last[host] = now
            return True

    def would_defer(self, host: str) -> bool:
        with self._lock:
            last = self._last.get(host)
        return last is not None and self.clock() - last < self.min_interval


class Blacklist:
    """Opt-out entries: host suffixes or URL prefixes, persisted to a file."""

    def __init__(self, path: str | None = None):
        self.path = path
        self.entries: dict[str, str] = {}
        self._lock = threading.Lock()
        if path:
            self._load()

    def _load(self) -> None:
        try:
            with open(self.path, encoding="utf-8") as fh:
                for line in fh:
                    line = line.rstrip("\n")
                    if not line.strip() or line.startswith("#"):
                        continue
                    entry, _, note = line.partition("\t")
                    self.entries[entry.strip()] = note.strip()
        except FileNotFoundError:
            pass

    def save(self) -> None:
        if not self.path:
            return
        with self._lock, open(self.path, "w", encoding="utf-8") as fh:
            fh.write("# sitegauge opt-out blacklist: entry <TAB> note\n")
            for entry, note in sorted(self.entries.items()):
                fh.write(f"{entry}\t{note}\n")

    def add(self, entry: str, note: str = "") -> None:
        with self._lock:
            self.entries[entry.strip()] = note
        self.save()

    def matches(self, url: str) -> str | None:
        """The matching entry, or None. Hosts match on dot-boundary
        suffixes, entries with a path match as URL prefixes."""
        host = url_host(url)
        with self._lock:
            for entry in self.entries:
                if "/" in entry:
                    if url.startswith(entry):
                        return entry
                elif host == entry or host.endswith("." + entry):
                    return entry
        return None


@dataclass
class JobOutcome:
    job: dict
    run_id: int | None
    status: str


class Orchestrator:
    def __init__(self, storage: Storage, config: ScanConfig,
                 scanner: Scanner | None = None, clock=time.time):
        self.storage = storage
        self.config = config
        self.scanner = scanner or Scanner(config)
        self.clock = clock
        self.rate_limiter = RateLimiter(config.per_host_min_interval, clock)
        self.blacklist = Blacklist(config.blacklist_file)
        self._claim_lock = threading.Lock()
        self._workers: list[threading.Thread] = []
        self._stop = threading.Event()
        self._wake = threading.Event()

    # -- queueing -----------------------------------------------------------

    def enqueue_scan(self, url: str, list_id: int | None = None,
                     site_id: int | None = None) -> dict:
        """Queue one scan job. Blacklisted sites get a blacklisted job (and
        run) without any network activity; an identical active job is
        returned instead of a duplicate."""
        if site_id is None:
            site_id = self.storage.ensure_single_site(url)
        existing = self.storage.active_job_for_site(site_id)
        if existing is not None:
            return existing
        now = self.clock()
        if self.blacklist.matches(url):
            run_id = self.storage.insert_run(
                site_id, started_at=now, finished_at=now, status="blacklisted",
                facts=None, check_results=[])
            return self.storage.insert_job(site_id, list_id, now,
                                           state="blacklisted", run_id=run_id)
        run_id = self.storage.start_run(site_id, now, status="queued")
        job = self.storage.insert_job(site_id, list_id, now, run_id=run_id)
        self._wake.set()
        return job

    def schedule_rescans(self, now: float | None = None) -> list[dict]:
        """One job per site whose newest run is older than the rescan
        interval, in rescan-enabled lists only."""
        now = self.clock() if now is None else now
        cutoff = now - self.config.rescan_interval
        jobs = []
        for row in self.storage.sites_due_for_rescan(cutoff):
            if self.storage.active_job_for_site(row["site_id"]) is not None:
                continue
            jobs.append(self.enqueue_scan(row["url"], row["list_id"], row["site_id"]))
        return jobs

    # -- robots -------------------------------------------------------------

    def check_robots(self, url: str, honor: bool) -> bool:
        """True = allow. With honor unset robots.txt is never even fetched;
        with honor set we deny only a root disallow for `*` or our token."""
        if not honor:
            return True
        parts = urlsplit(url)
        robots_url = f"{parts.scheme}://{parts.netloc}/robots.txt"
        try:
            resp = self.scanner.transport.request(
                robots_url, limits=self.scanner.limits, truncate=True,
                max_body=64 * 1024)
        except FetchError:
            return True
        if resp.status != 200:
            return True
        parser = urllib.robotparser.RobotFileParser()
        parser.parse(resp.text.splitlines())
        base = f"{parts.scheme}://{parts.netloc}/"
        return parser.can_fetch(ROBOTS_AGENT_TOKEN, base)

    # -- job execution --------------------------------------------------------

    def run_job(self, job: dict) -> JobOutcome:
        """Execute one claimed job: scan, evaluate, persist."""
        site = self.storage.get_site(job["site_id"])
        url = site["url"]
        run_id = job["run_id"]
        started = self.clock()
        self.storage.mark_run_running(run_id, started)
        try:
            honor = False
            if job["list_id"] is not None:
                lst = self.storage.get_list(job["list_id"], with_sites=False)
                honor = bool(lst and lst["honor_robots"])
            if not self.check_robots(url, honor):
                self.storage.finish_run(
                    run_id, status="done", finished_at=self.clock(),
                    facts={"errors": {"robots": "robots.txt disallows scanning"}},
                    check_results=[])
                self.storage.finish_job(job["id"], "done", run_id)
                return JobOutcome(self.storage.get_job(job["id"]), run_id, "done")

            facts, results = self.scanner.scan(url)
            final_url = facts.content.final_url if facts.content else None
            self.storage.finish_run(
                run_id, status="done", finished_at=self.clock(),
                facts=facts.to_dict(),
                check_results=[r.to_dict() for r in results])
            self.storage.set_final_url(job["site_id"], final_url)
            self.storage.finish_job(job["id"], "done", run_id)
            return JobOutcome(self.storage.get_job(job["id"]), run_id, "done")
        except Exception as exc:
            # Scanner-level failures degrade to per-module errors inside
            # scan(); reaching here means infrastructure trouble.
            job_now = self.storage.get_job(job["id"])
            if job_now["attempts"] < MAX_ATTEMPTS:
                self.storage.reset_run_queued(run_id)
                self.storage.requeue_job(job["id"])
                return JobOutcome(self.storage.get_job(job["id"]), None, "queued")
            self.storage.finish_run(
                run_id, status="failed", finished_at=self.clock(),
                facts={"errors": {"job": str(exc)}}, check_results=[])
            self.storage.finish_job(job["id"], "failed", run_id)
            return JobOutcome(self.storage.get_job(job["id"]), run_id, "failed")

    def claim_eligible_job(self) -> dict | None:
        """Oldest queued job whose host has a free rate-limit slot.

        Claim and slot acquisition are atomic under one lock, which is what
        enforces the per-host minimum interval between job starts.
        """
        with self._claim_lock:
            for job in self.storage.queued_jobs():
                host = url_host(job["url"])
                if not self.rate_limiter.try_acquire(host):
                    continue
                if self.storage.claim_job(job["id"]):
                    return self.storage.get_job(job["id"])
        return None

    def process_one(self) -> JobOutcome | None:
        job = self.claim_eligible_job()
        if job is None:
            return None
        return self.run_job(job)

    def drain(self, max_jobs: int = 1000) -> int:
        """Run queued jobs synchronously until none is eligible (tests, CLI)."""
        done = 0
        while done < max_jobs:
            if self.process_one() is None:
                break
            done += 1
        return done

    # -- worker pool ----------------------------------------------------------

    def start_workers(self, count: int | None = None) -> None:
        count = count or self.config.worker_count
        self._stop.clear()
        for i in range(count):
            thread = threading.Thread(target=self._worker_loop,
                                      name=f"sitegauge-worker-{i}", daemon=True)
            thread.start()
            self._workers.append(thread)

    def stop_workers(self) -> None:
        self._stop.set()
        self._wake.set()
        for thread in self._workers:
            thread.join(timeout=5)
        self._workers.clear()

    def _worker_loop(self) -> None:
        while not self._stop.is_set():
            outcome = self.process_one()
            if outcome is None:
                self._wake.wait(timeout=0.2)
                self._wake.clear()
