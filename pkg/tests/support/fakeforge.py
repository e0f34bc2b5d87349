"""In-memory GitHub-compatible REST server used as a mock transport.

Serves list/get endpoints from a compact manifest::

    {"projects": [{"owner", "repo", "pulls": [...], "issues": [...], "forks": [...]}]}

Pull entries: number, title, body, state, merged, created_at, user,
assignees, comments ([user, text]), review_comments, commits (messages).
Fork entries: full_name and either "pulls" ([{"number", "state", "merged"}])
or "inaccessible": true.
"""

from __future__ import annotations

import re
from urllib.parse import parse_qsl, urlsplit

from forkhealth.forge.client import Response

_USER = lambda login: {"login": login}  # noqa: E731


class FakeForge:
    def __init__(self, manifest: dict, fail_first: int = 0):
        self.calls: list[str] = []
        self.repos = {}
        self.fail_first = fail_first
        for proj in manifest["projects"]:
            self.repos[f"{proj['owner']}/{proj['repo']}"] = proj
            for fork in proj.get("forks", []):
                if not fork.get("inaccessible"):
                    self.repos[fork["full_name"]] = {"pulls": fork.get("pulls", []), "forks": []}

    def __call__(self, url: str, headers: dict) -> Response:
        self.calls.append(url)
        if self.fail_first:
            self.fail_first -= 1
            return Response(502, {}, {"message": "bad gateway"})
        parts = urlsplit(url)
        q = dict(parse_qsl(parts.query))
        path = parts.path
        m = re.fullmatch(r"/repos/([^/]+/[^/]+)(/.*)?", path)
        if not m or m.group(1) not in self.repos:
            return Response(404, {}, {"message": "Not Found"})
        repo, rest = self.repos[m.group(1)], m.group(2) or ""
        per_page, page = int(q.get("per_page", 30)), int(q.get("page", 1))

        def paged(items):
            return Response(200, {"content-type": "application/json"}, items[(page - 1) * per_page: page * per_page])

        if rest == "/pulls":
            pulls = sorted(repo.get("pulls", []), key=lambda p: p.get("created_at", ""), reverse=True)
            return paged([self._pull(p) for p in pulls])
        if rest == "/forks":
            return paged([{"full_name": f["full_name"]} for f in repo.get("forks", [])])
        m = re.fullmatch(r"/pulls/(\d+)(/merge|/comments|/commits)?", rest)
        if m:
            pr = next((p for p in repo.get("pulls", []) if p["number"] == int(m.group(1))), None)
            if pr is None:
                return Response(404, {}, {"message": "Not Found"})
            if m.group(2) == "/merge":
                return Response(204 if pr.get("merged") else 404, {}, None)
            if m.group(2) == "/comments":
                return paged([{"user": _USER(u), "body": t} for u, t in pr.get("review_comments", [])])
            if m.group(2) == "/commits":
                return paged([{"commit": {"message": msg}} for msg in pr.get("commits", [])])
            return Response(200, {}, self._pull(pr))
        m = re.fullmatch(r"/issues/(\d+)(/comments)?", rest)
        if m:
            n = int(m.group(1))
            pr = next((p for p in repo.get("pulls", []) if p["number"] == n), None)
            issue = next((i for i in repo.get("issues", []) if i["number"] == n), None)
            if m.group(2):
                source = pr if pr is not None else issue
                if source is None:
                    return Response(404, {}, {"message": "Not Found"})
                return paged([{"user": _USER(u), "body": t} for u, t in source.get("comments", [])])
            if issue is None:
                return Response(404, {}, {"message": "Not Found"})
            return Response(200, {}, {
                "number": n,
                "user": _USER(issue["user"]),
                "assignees": [_USER(a) for a in issue.get("assignees", [])],
            })
        return Response(404, {}, {"message": "Not Found"})

    @staticmethod
    def _pull(p: dict) -> dict:
        merged = p.get("merged", False)
        return {
            "number": p["number"],
            "title": p.get("title", ""),
            "body": p.get("body"),
            "state": p.get("state", "open"),
            "merged_at": "2021-06-01T00:00:00Z" if merged else None,
            "created_at": p.get("created_at", "2021-01-01T00:00:00Z"),
            "user": _USER(p.get("user", "ghost")),
            "assignees": [_USER(a) for a in p.get("assignees", [])],
        }


class NoNetwork:
    """Transport that fails the test on any call."""

    def __init__(self):
        self.calls = 0

    def __call__(self, url, headers):
        self.calls += 1
        raise AssertionError(f"network call in replay mode: {url}")
