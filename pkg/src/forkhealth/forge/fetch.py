"""Fetch pull requests, forks and issues for a project through a ForgeClient."""

from __future__ import annotations

import logging
from datetime import datetime
from typing import Iterable, Optional

from ..model import ProjectRecord
from .client import ForgeClient, ForgeError, NotFoundError
from .metrics import DEFAULT_DUPLICATE_STEMS, Fork, IssueRef, PullRequest, pre_communication_step
from . import metrics as fm

logger = logging.getLogger(__name__)

PER_PAGE = 30
# comment and commit listings are followed for at most this many pages
DETAIL_PAGE_CAP = 10


class ProjectNotFoundError(NotFoundError):
    pass


def _parse_time(value: Optional[str]) -> Optional[datetime]:
    if not value:
        return None
    return datetime.fromisoformat(value.replace("Z", "+00:00"))


def _login(obj: Optional[dict]) -> str:
    return (obj or {}).get("login") or ""


def _repo_path(project: ProjectRecord) -> str:
    return f"/repos/{project.owner}/{project.repo}"


def fetch_pull_requests(client: ForgeClient, project: ProjectRecord, page_cap: int = 5) -> list[PullRequest]:
    """Newest-first PRs (open and closed) up to ``page_cap`` pages of 30, with comments and commits."""
    if page_cap < 1:
        raise ValueError("page_cap must be >= 1")
    base = _repo_path(project)
    try:
        raw = client.get_pages(f"{base}/pulls", page_cap, PER_PAGE, state="all", sort="created", direction="desc")
    except NotFoundError as exc:
        raise ProjectNotFoundError(f"project {project.name} not found on forge: {exc}") from exc

    prs = []
    for item in raw:
        try:
            number = int(item["number"])
            state = item["state"]
        except (KeyError, TypeError, ValueError) as exc:
            raise ForgeError(f"malformed pull request payload from {base}/pulls: {exc}") from exc
        comments = []
        for path in (f"{base}/issues/{number}/comments", f"{base}/pulls/{number}/comments"):
            for c in _optional_pages(client, path):
                comments.append((_login(c.get("user")), c.get("body") or ""))
        commits = [
            (c.get("commit") or {}).get("message") or ""
            for c in _optional_pages(client, f"{base}/pulls/{number}/commits")
        ]
        prs.append(
            PullRequest(
                number=number,
                title=item.get("title") or "",
                body=item.get("body") or "",
                state=state,
                merged=item.get("merged_at") is not None,
                created_at=_parse_time(item.get("created_at")),
                author=_login(item.get("user")),
                assignees=frozenset(_login(a) for a in item.get("assignees") or []),
                comments=tuple(comments),
                commit_messages=tuple(commits),
            )
        )
    return prs


def _optional_pages(client: ForgeClient, path: str, page_cap: int = DETAIL_PAGE_CAP) -> list:
    try:
        return client.get_pages(path, page_cap, 100)
    except NotFoundError:
        logger.warning("listing %s returned 404; treating as empty", path)
        return []


def fetch_forks(client: ForgeClient, project: ProjectRecord, page_cap: int = 5) -> list[Fork]:
    """Forks of the project with the number of PRs merged inside each fork.

    Merge status is checked with the ``/pulls/{n}/merge`` endpoint
    (204 merged, 404 not merged). A fork whose PR listing is inaccessible
    is reported with a count of 0.
    """
    base = _repo_path(project)
    try:
        raw = client.get_pages(f"{base}/forks", page_cap, PER_PAGE, sort="oldest")
    except NotFoundError as exc:
        raise ProjectNotFoundError(f"project {project.name} not found on forge: {exc}") from exc
    forks = []
    for item in raw:
        full_name = item.get("full_name")
        if not full_name:
            raise ForgeError(f"fork entry without full_name in {base}/forks")
        try:
            pulls = client.get_pages(f"/repos/{full_name}/pulls", page_cap, PER_PAGE, state="all")
        except NotFoundError:
            logger.warning("PR listing of fork %s is inaccessible; counting 0 merged PRs", full_name)
            forks.append(Fork(full_name, 0))
            continue
        merged = 0
        for pr in pulls:
            if pr.get("state") != "closed":
                continue
            status = client.get(f"/repos/{full_name}/pulls/{pr['number']}/merge").status
            if status == 204:
                merged += 1
            elif status != 404:
                logger.warning("unexpected HTTP %s from merge check of %s#%s", status, full_name, pr["number"])
        forks.append(Fork(full_name, merged))
    return forks


def fetch_issues(client: ForgeClient, project: ProjectRecord, numbers: Iterable[int]) -> dict[int, IssueRef]:
    """Resolve issue numbers; unresolvable ones (deleted, off-forge) are left out."""
    base = _repo_path(project)
    issues = {}
    for n in sorted(set(numbers)):
        try:
            item = client.get_json(f"{base}/issues/{n}")
        except NotFoundError:
            continue
        except ForgeError as exc:
            logger.warning("cannot resolve issue #%d of %s: %s", n, project.name, exc)
            continue
        comments = _optional_pages(client, f"{base}/issues/{n}/comments")
        issues[n] = IssueRef(
            number=n,
            author=_login(item.get("user")),
            assignees=frozenset(_login(a) for a in item.get("assignees") or []),
            comment_authors=frozenset(_login(c.get("user")) for c in comments),
        )
    return issues


def issues_needed(prs: Iterable[PullRequest]) -> set[int]:
    """Linked issues of PRs that the first two cascade steps do not settle."""
    needed = set()
    for pr in prs:
        if pre_communication_step(pr, {}) is None:
            needed.update(pr.linked_issue_numbers)
    return needed


def forge_metrics(
    client: ForgeClient,
    project: ProjectRecord,
    page_cap: int = 5,
    interval_days: int = 30,
    duplicate_stems=DEFAULT_DUPLICATE_STEMS,
    dup_denominator: str = "closed",
) -> dict[str, Optional[float]]:
    prs = fetch_pull_requests(client, project, page_cap)
    issues = fetch_issues(client, project, issues_needed(prs))
    forks = fetch_forks(client, project, page_cap)
    return {
        "frequency_index": fm.frequency_index(prs, interval_days),
        "central_management_index": fm.central_management_index(prs),
        "pre_communication_index": fm.pre_communication_index(prs, issues),
        "duplicate_pr_ratio": fm.duplicate_pr_ratio(prs, duplicate_stems, dup_denominator),
        "hard_fork_present": fm.hard_fork_present(forks),
    }
