"""Budgeted REST client for a GitHub-compatible forge, with record/replay cache.

Every request goes through :func:`issue_budgeted_request`, which checks the
on-disk cache first, then picks the credential with the most remaining
quota, rotates on exhaustion and retries transient failures.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional
from urllib.parse import parse_qsl, urlencode, urlsplit

logger = logging.getLogger(__name__)

DEFAULT_BASE_URL = "https://api.github.com"
DEFAULT_QUOTA = 5000
CACHED_HEADERS = ("content-type", "link")


class ForgeError(RuntimeError):
    pass


class NotFoundError(ForgeError):
    pass


class BudgetExhaustedError(ForgeError):
    pass


class TransportError(ForgeError):
    pass


class DecodeError(ForgeError):
    pass


class ReplayMissError(ForgeError):
    """Replay mode asked for a URL that was never recorded."""


@dataclass
class Response:
    status: int
    headers: dict[str, str] = field(default_factory=dict)
    body: Any = None


Transport = Callable[[str, dict], Response]


def requests_transport(timeout: float = 30.0) -> Transport:
    import requests

    session = requests.Session()

    def send(url: str, headers: dict) -> Response:
        try:
            r = session.get(url, headers=headers, timeout=timeout)
        except requests.RequestException as exc:
            raise TransportError(f"GET {url}: {exc}") from exc
        body: Any = None
        if r.content:
            try:
                body = r.json()
            except ValueError:
                body = r.text
        return Response(r.status_code, {k.lower(): v for k, v in r.headers.items()}, body)

    return send


def normalize_url(url: str) -> str:
    """Cache key form of a URL: path plus sorted query, host and scheme dropped."""
    parts = urlsplit(url)
    path = "/" + parts.path.strip("/")
    query = sorted(parse_qsl(parts.query, keep_blank_values=True))
    return path + ("?" + urlencode(query) if query else "")


class ResponseCache:
    """One JSON file per normalized URL plus a ``manifest.json`` of hash -> URL."""

    def __init__(self, root: os.PathLike | str):
        self.root = Path(root)
        self._lock = threading.Lock()

    @staticmethod
    def key(url: str) -> str:
        return hashlib.sha256(normalize_url(url).encode("utf-8")).hexdigest()

    def _path(self, url: str) -> Path:
        return self.root / f"{self.key(url)}.json"

    def get(self, url: str) -> Optional[Response]:
        path = self._path(url)
        if not path.exists():
            return None
        with path.open(encoding="utf-8") as fh:
            data = json.load(fh)
        return Response(data["status"], data.get("headers", {}), data.get("body"))

    def put(self, url: str, resp: Response) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        record = {
            "url": normalize_url(url),
            "status": resp.status,
            "headers": {k: v for k, v in sorted(resp.headers.items()) if k in CACHED_HEADERS},
            "body": resp.body,
        }
        with self._lock:
            _atomic_write(self._path(url), json.dumps(record, indent=1, sort_keys=True) + "\n")
            manifest_path = self.root / "manifest.json"
            manifest = {}
            if manifest_path.exists():
                with manifest_path.open(encoding="utf-8") as fh:
                    manifest = json.load(fh)
            manifest[self.key(url)] = normalize_url(url)
            _atomic_write(manifest_path, json.dumps(manifest, indent=1, sort_keys=True) + "\n")


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@dataclass
class RetryPolicy:
    max_attempts: int = 4
    backoff: tuple[float, ...] = (1.0, 2.0, 4.0, 8.0)
    # longest we will sleep waiting for a quota reset before giving up
    max_wait: float = 3600.0

    def delay(self, attempt: int) -> float:
        if not self.backoff:
            return 0.0
        return self.backoff[min(attempt - 1, len(self.backoff) - 1)]


class RequestBudget:
    """Per-credential quota accounting.

    Remaining counts start at ``initial_quota`` and are corrected from the
    ``X-RateLimit-Remaining``/``X-RateLimit-Reset`` headers of each response.
    """

    def __init__(
        self,
        tokens: list[str],
        retry_policy: Optional[RetryPolicy] = None,
        initial_quota: int = DEFAULT_QUOTA,
        clock: Callable[[], float] = time.time,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.tokens = list(tokens)
        self.retry_policy = retry_policy or RetryPolicy()
        self.remaining = {t: initial_quota for t in self.tokens}
        self.reset_at = {t: 0.0 for t in self.tokens}
        self.initial_quota = initial_quota
        self.clock = clock
        self.sleep = sleep
        self.lock = threading.RLock()

    def pick(self) -> Optional[str]:
        now = self.clock()
        for t in self.tokens:
            if self.remaining[t] <= 0 and self.reset_at[t] and now >= self.reset_at[t]:
                self.remaining[t] = self.initial_quota
        best = None
        for t in self.tokens:
            if self.remaining[t] > 0 and (best is None or self.remaining[t] > self.remaining[best]):
                best = t
        return best

    def next_reset(self) -> Optional[float]:
        resets = [self.reset_at[t] for t in self.tokens if self.reset_at[t]]
        return min(resets) if resets else None

    def charge(self, token: str) -> None:
        self.remaining[token] -= 1

    def observe(self, token: str, headers: dict) -> None:
        rem = headers.get("x-ratelimit-remaining")
        reset = headers.get("x-ratelimit-reset")
        if rem is not None:
            try:
                self.remaining[token] = int(rem)
            except ValueError:
                pass
        if reset is not None:
            try:
                self.reset_at[token] = float(reset)
            except ValueError:
                pass

    def exhaust(self, token: str) -> None:
        self.remaining[token] = 0


def _is_rate_limited(resp: Response) -> bool:
    if resp.status == 429:
        return True
    return resp.status == 403 and resp.headers.get("x-ratelimit-remaining") == "0"


def issue_budgeted_request(
    budget: Optional[RequestBudget],
    url: str,
    transport: Optional[Transport] = None,
    cache: Optional[ResponseCache] = None,
    replay: bool = False,
) -> Response:
    """GET ``url`` through the cache and the token budget.

    Raises ReplayMissError in replay mode on a cache miss,
    BudgetExhaustedError when no credential can be used within the retry
    policy, and TransportError after repeated transient failures.
    """
    if cache is not None:
        hit = cache.get(url)
        if hit is not None:
            return hit
    if replay:
        raise ReplayMissError(f"no recorded response for {normalize_url(url)}")
    if budget is None or not budget.tokens:
        raise BudgetExhaustedError("no API tokens configured")
    if transport is None:
        raise TransportError("no transport configured")

    policy = budget.retry_policy
    attempt = 0
    while True:
        with budget.lock:
            token = budget.pick()
            if token is None:
                reset = budget.next_reset()
                wait = None if reset is None else max(0.0, reset - budget.clock())
                if wait is None or wait > policy.max_wait:
                    raise BudgetExhaustedError(f"all {len(budget.tokens)} token(s) exhausted requesting {url}")
                logger.warning("all tokens exhausted; sleeping %.0fs until quota reset", wait)
                budget.sleep(wait + 1)
                continue
            budget.charge(token)
        headers = {"Accept": "application/vnd.github+json", "Authorization": f"token {token}"}
        try:
            resp = transport(url, headers)
        except TransportError as exc:
            resp, error = None, exc
        else:
            error = None
            with budget.lock:
                budget.observe(token, resp.headers)
            if _is_rate_limited(resp):
                with budget.lock:
                    budget.exhaust(token)
                logger.info("token #%d rate limited; rotating", budget.tokens.index(token))
                continue
            if resp.status < 500:
                if cache is not None:
                    cache.put(url, resp)
                return resp
        attempt += 1
        if attempt >= policy.max_attempts:
            if error is not None:
                raise TransportError(f"GET {url} failed after {attempt} attempts: {error}")
            raise TransportError(f"GET {url} failed after {attempt} attempts: HTTP {resp.status}")
        logger.warning("transient failure on %s (attempt %d); retrying", url, attempt)
        budget.sleep(policy.delay(attempt))


class ForgeClient:
    def __init__(
        self,
        base_url: str = DEFAULT_BASE_URL,
        budget: Optional[RequestBudget] = None,
        cache: Optional[ResponseCache] = None,
        replay: bool = False,
        transport: Optional[Transport] = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.budget = budget
        self.cache = cache
        self.replay = replay
        if transport is None and not replay:
            transport = requests_transport()
        self.transport = transport

    def url(self, path: str, **params) -> str:
        query = urlencode(sorted((k, str(v)) for k, v in params.items()))
        return f"{self.base_url}{path}" + (f"?{query}" if query else "")

    def get(self, path: str, **params) -> Response:
        return issue_budgeted_request(self.budget, self.url(path, **params), self.transport, self.cache, self.replay)

    def get_json(self, path: str, **params) -> Any:
        url = self.url(path, **params)
        resp = self.get(path, **params)
        if resp.status == 404:
            raise NotFoundError(f"HTTP 404 for {url}")
        if not 200 <= resp.status < 300:
            raise ForgeError(f"HTTP {resp.status} for {url}")
        if isinstance(resp.body, str) or resp.body is None:
            raise DecodeError(f"response from {url} is not JSON")
        return resp.body

    def get_pages(self, path: str, page_cap: int, per_page: int = 30, **params) -> list:
        items: list = []
        for page in range(1, page_cap + 1):
            batch = self.get_json(path, per_page=per_page, page=page, **params)
            if not isinstance(batch, list):
                raise DecodeError(f"expected a JSON list from {self.url(path, page=page, **params)}")
            items.extend(batch)
            if len(batch) < per_page:
                break
        return items
