"""Forge objects and the five collaboration metrics computed from them."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from typing import Iterable, Mapping, Optional, Sequence

DEFAULT_DUPLICATE_STEMS = ("duplicat", "supersed", "replicat")
HARD_FORK_MIN_MERGED = 2

# "#123" or "issue #123"; a '#' glued to a word (C#5, repo#5) is not a reference
_ISSUE_REF = re.compile(r"(?<![\w#&])(?:issue\s*)?#(\d+)\b", re.I)
_WIP = re.compile(r"(?<![A-Za-z0-9])wip(?![A-Za-z0-9])", re.I)


@dataclass(frozen=True)
class PullRequest:
    number: int
    title: str = ""
    body: str = ""
    state: str = "open"
    merged: bool = False
    created_at: Optional[datetime] = None
    author: str = ""
    assignees: frozenset[str] = frozenset()
    comments: tuple[tuple[str, str], ...] = ()
    commit_messages: tuple[str, ...] = ()
    linked_issue_numbers: frozenset[int] = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.number < 1:
            raise ValueError("PR number must be positive")
        if self.state not in ("open", "closed"):
            raise ValueError(f"PR state must be open or closed, got {self.state!r}")
        if self.merged and self.state != "closed":
            raise ValueError(f"PR #{self.number} is merged but not closed")
        object.__setattr__(self, "assignees", frozenset(self.assignees))
        object.__setattr__(self, "comments", tuple(tuple(c) for c in self.comments))
        object.__setattr__(self, "commit_messages", tuple(self.commit_messages))
        if self.linked_issue_numbers is None:
            object.__setattr__(self, "linked_issue_numbers", frozenset(extract_issue_links(self)))
        else:
            object.__setattr__(self, "linked_issue_numbers", frozenset(self.linked_issue_numbers))


@dataclass(frozen=True)
class IssueRef:
    number: int
    author: str = ""
    assignees: frozenset[str] = frozenset()
    comment_authors: frozenset[str] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "assignees", frozenset(self.assignees))
        object.__setattr__(self, "comment_authors", frozenset(self.comment_authors))


@dataclass(frozen=True)
class Fork:
    full_name: str
    merged_pr_count: int = 0

    def __post_init__(self):
        if self.merged_pr_count < 0:
            raise ValueError("merged_pr_count must be >= 0")


def _pr_texts(pr: PullRequest) -> Iterable[str]:
    yield pr.title or ""
    yield pr.body or ""
    for _, text in pr.comments:
        yield text or ""
    yield from pr.commit_messages


def extract_issue_links(pr: PullRequest) -> set[int]:
    """Issue numbers referenced as ``#N`` in title, body, comments or commit messages."""
    found = set()
    for text in _pr_texts(pr):
        for m in _ISSUE_REF.finditer(text):
            n = int(m.group(1))
            if n > 0:
                found.add(n)
    return found


def central_management_index(prs: Sequence[PullRequest]) -> Optional[float]:
    if not prs:
        return None
    return sum(1 for pr in prs if pr.linked_issue_numbers) / len(prs)


def duplicate_pattern(stems: Sequence[str] = DEFAULT_DUPLICATE_STEMS) -> re.Pattern:
    alts = "|".join(re.escape(s) for s in stems)
    return re.compile(rf"\b(?:{alts})\w*", re.I)


def is_duplicate_rejection(pr: PullRequest, pattern: re.Pattern) -> bool:
    if pr.state != "closed" or pr.merged:
        return False
    return any(pattern.search(text or "") for _, text in pr.comments)


def duplicate_pr_ratio(
    prs: Sequence[PullRequest],
    stems: Sequence[str] = DEFAULT_DUPLICATE_STEMS,
    denominator: str = "closed",
) -> Optional[float]:
    """Closed, unmerged PRs with a duplicate-style comment over closed (or all) PRs."""
    if denominator not in ("closed", "all"):
        raise ValueError("denominator must be 'closed' or 'all'")
    pattern = duplicate_pattern(stems)
    pool = [pr for pr in prs if pr.state == "closed"] if denominator == "closed" else list(prs)
    if not pool:
        return None
    return sum(1 for pr in prs if is_duplicate_rejection(pr, pattern)) / len(pool)


def hard_fork_present(forks: Iterable[Fork], min_merged: int = HARD_FORK_MIN_MERGED) -> int:
    return int(any(f.merged_pr_count >= min_merged for f in forks))


def pre_communication_step(pr: PullRequest, issues: Mapping[int, IssueRef]) -> Optional[int]:
    """First satisfied step of the pre-communication cascade, or None.

    1. the PR announces work in progress ("WIP") in title or body
    2. the author is assigned to the PR
    3. the author opened, or is assigned to, a linked issue
    4. the author commented on a linked issue
    """
    if _WIP.search(pr.title or "") or _WIP.search(pr.body or ""):
        return 1
    if pr.author in pr.assignees:
        return 2
    linked = [issues[n] for n in sorted(pr.linked_issue_numbers) if n in issues]
    if any(pr.author == iss.author or pr.author in iss.assignees for iss in linked):
        return 3
    if any(pr.author in iss.comment_authors for iss in linked):
        return 4
    return None


def pre_communicated(pr: PullRequest, issues: Mapping[int, IssueRef]) -> bool:
    return pre_communication_step(pr, issues) is not None


def pre_communication_index(prs: Sequence[PullRequest], issues: Mapping[int, IssueRef]) -> Optional[float]:
    if not prs:
        return None
    return sum(1 for pr in prs if pre_communicated(pr, issues)) / len(prs)


def frequency_index(prs: Sequence[PullRequest], interval_days: int = 30) -> Optional[float]:
    """PRs per window, windows tiling [first, last] creation instant from the first PR.

    Empty windows between the first and last PR count toward the denominator.
    """
    if interval_days < 1:
        raise ValueError("interval_days must be positive")
    stamps = [pr.created_at for pr in prs if pr.created_at is not None]
    if not stamps:
        return None
    span = max(stamps) - min(stamps)
    windows = span // timedelta(days=interval_days) + 1
    return len(stamps) / windows
