"""Commit-history mining and the three commit-structure metrics.

History is read with a single ``git log`` over the first-parent chain of
HEAD. Each commit is diffed against its first parent (root commits against
the empty tree) with rename detection on. The file count of each commit's
tree is derived from one ``git ls-tree`` at the newest commit, walking the
diffs backwards.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import subprocess
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from math import comb
from pathlib import Path
from typing import Optional, Sequence

logger = logging.getLogger(__name__)

ADDED, MODIFIED, DELETED, RENAMED = "added", "modified", "deleted", "renamed"
FILE_KINDS = (ADDED, MODIFIED, DELETED, RENAMED)

# git raw status letter -> change kind; copies are new files in the tree
_STATUS_KIND = {"A": ADDED, "C": ADDED, "M": MODIFIED, "T": MODIFIED, "D": DELETED, "R": RENAMED}

_COMMIT_MARK = "\x01"
_NUMSTAT = re.compile(r"^(\d+|-)\t(\d+|-)\t(.*)$", re.S)


class GitError(RuntimeError):
    pass


@dataclass(frozen=True)
class FileChange:
    path: str
    kind: str
    lines_added: int = 0
    lines_deleted: int = 0

    def __post_init__(self):
        if self.kind not in FILE_KINDS:
            raise ValueError(f"unknown change kind {self.kind!r}")
        if self.lines_added < 0 or self.lines_deleted < 0:
            raise ValueError("line counts must be non-negative")


@dataclass(frozen=True)
class CommitSummary:
    commit_id: str
    timestamp: datetime
    changes: tuple[FileChange, ...]
    snapshot_file_count: int

    def __post_init__(self):
        paths = [c.path for c in self.changes]
        if len(paths) != len(set(paths)):
            raise ValueError(f"commit {self.commit_id}: duplicate paths in changes")
        live = sum(1 for c in self.changes if c.kind in (ADDED, MODIFIED))
        if self.snapshot_file_count < live:
            raise ValueError(
                f"commit {self.commit_id}: snapshot_file_count {self.snapshot_file_count} "
                f"< {live} added/modified files"
            )

    def count(self, *kinds: str) -> int:
        return sum(1 for c in self.changes if c.kind in kinds)

    @property
    def churn(self) -> int:
        return sum(c.lines_added + c.lines_deleted for c in self.changes)

    def to_json(self) -> dict:
        d = asdict(self)
        d["timestamp"] = self.timestamp.isoformat()
        return d

    @classmethod
    def from_json(cls, d: dict) -> "CommitSummary":
        return cls(
            commit_id=d["commit_id"],
            timestamp=datetime.fromisoformat(d["timestamp"]),
            changes=tuple(FileChange(**c) for c in d["changes"]),
            snapshot_file_count=d["snapshot_file_count"],
        )


def _git(repo: Path, *args: str) -> bytes:
    try:
        proc = subprocess.run(
            ["git", "-C", str(repo), *args],
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            check=False,
        )
    except OSError as exc:
        raise GitError(f"cannot run git: {exc}") from exc
    if proc.returncode != 0:
        msg = proc.stderr.decode("utf-8", "replace").strip()
        raise GitError(f"git {args[0]} failed in {repo}: {msg}")
    return proc.stdout


def head_commit(clone_path: os.PathLike | str) -> str:
    repo = Path(clone_path)
    if not repo.exists():
        raise GitError(f"repository path does not exist: {repo}")
    try:
        out = _git(repo, "rev-parse", "--verify", "-q", "HEAD^{commit}")
    except GitError as exc:
        raise GitError(f"repository has no commits or is unreadable: {repo} ({exc})") from None
    return out.decode().strip()


def _parse_changes(body: str) -> list[tuple[str, str, int, int]]:
    """Parse the ``--raw --numstat -z`` block of one commit into (path, kind, added, deleted)."""
    tokens = body.split("\0")
    kinds: dict[str, str] = {}
    order: list[str] = []
    lines: dict[str, tuple[int, int]] = {}
    i = 0
    while i < len(tokens):
        tok = tokens[i].lstrip("\n")
        i += 1
        if not tok:
            continue
        if tok.startswith(":"):
            status = tok.split()[-1]
            letter = status[0]
            if letter in ("R", "C"):
                path = tokens[i + 1]
                i += 2
            else:
                path = tokens[i]
                i += 1
            kind = _STATUS_KIND.get(letter)
            if kind is None:
                logger.warning("ignoring change with status %s on %s", status, path)
                continue
            if path not in kinds:
                order.append(path)
            kinds[path] = kind
            continue
        m = _NUMSTAT.match(tok)
        if m is None:
            raise GitError(f"unexpected token in git log output: {tok!r}")
        if m.group(3):
            path = m.group(3)
        else:
            path = tokens[i + 1]
            i += 2
        # binary files report "-" and carry no line churn
        add = 0 if m.group(1) == "-" else int(m.group(1))
        dele = 0 if m.group(2) == "-" else int(m.group(2))
        lines[path] = (add, dele)
    return [(p, kinds[p], *lines.get(p, (0, 0))) for p in order]


def scan_history(clone_path: os.PathLike | str, commit_limit: Optional[int] = None) -> list[CommitSummary]:
    """Summarize the first-parent history of HEAD, newest first.

    ``commit_limit`` truncates to the most recent commits; None reads all.
    """
    if commit_limit is not None and commit_limit < 1:
        raise ValueError("commit_limit must be positive")
    repo = Path(clone_path)
    head = head_commit(repo)
    args = [
        "log",
        "--first-parent",
        "--diff-merges=first-parent",
        "--root",
        "-M",
        "--raw",
        "--numstat",
        "-z",
        "--no-color",
        "--no-abbrev",
        f"--format={_COMMIT_MARK}%H %ct",
    ]
    if commit_limit is not None:
        args.append(f"-n{commit_limit}")
    args.append(head)
    out = _git(repo, *args).decode("utf-8", "surrogateescape")

    raw_commits = []
    for chunk in out.split(_COMMIT_MARK)[1:]:
        header, _, body = chunk.partition("\0")
        sha, ts = header.strip().split()
        stamp = datetime.fromtimestamp(int(ts), tz=timezone.utc)
        raw_commits.append((sha, stamp, _parse_changes(body)))
    if not raw_commits:
        raise GitError(f"repository has no commits: {repo}")

    tree = _git(repo, "ls-tree", "-r", "-z", "--name-only", head).decode("utf-8", "surrogateescape")
    count = sum(1 for p in tree.split("\0") if p)

    summaries = []
    for sha, stamp, changes in raw_commits:
        summaries.append(
            CommitSummary(
                commit_id=sha,
                timestamp=stamp,
                changes=tuple(FileChange(p, k, a, d) for p, k, a, d in changes),
                snapshot_file_count=count,
            )
        )
        # step back to the first parent's tree
        count += sum(1 for _, k, _, _ in changes if k == DELETED)
        count -= sum(1 for _, k, _, _ in changes if k == ADDED)
    return summaries


# --- cache -----------------------------------------------------------------


def _cache_file(cache_dir: Path, clone_path: Path, head: str, commit_limit: Optional[int]) -> Path:
    key = json.dumps(
        {"repo": str(Path(clone_path).resolve()), "head": head, "first_parent": True, "rename": True,
         "limit": commit_limit},
        sort_keys=True,
    )
    return cache_dir / "git" / (hashlib.sha256(key.encode()).hexdigest()[:32] + ".jsonl")


def scan_history_cached(
    clone_path: os.PathLike | str,
    commit_limit: Optional[int] = None,
    cache_dir: Optional[os.PathLike | str] = None,
) -> list[CommitSummary]:
    """scan_history with an optional JSON-lines cache keyed by repo, HEAD and settings."""
    if cache_dir is None:
        return scan_history(clone_path, commit_limit)
    clone_path = Path(clone_path)
    path = _cache_file(Path(cache_dir), clone_path, head_commit(clone_path), commit_limit)
    if path.exists():
        logger.info("git cache hit for %s (%s)", clone_path, path.name)
        with path.open(encoding="utf-8") as fh:
            return [CommitSummary.from_json(json.loads(line)) for line in fh if line.strip()]
    commits = scan_history(clone_path, commit_limit)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp")
    with tmp.open("w", encoding="utf-8") as fh:
        for c in commits:
            fh.write(json.dumps(c.to_json(), sort_keys=True) + "\n")
    os.replace(tmp, path)
    return commits


# --- metrics -----------------------------------------------------------------


def _mean(values: list[float]) -> Optional[float]:
    return sum(values) / len(values) if values else None


def logic_coupling_ratio(commit: CommitSummary) -> Optional[float]:
    """Changed file pairs over all file pairs in the commit's tree; None if fewer than 2 files."""
    if commit.snapshot_file_count < 2:
        return None
    changed = commit.count(ADDED, MODIFIED)
    return comb(changed, 2) / comb(commit.snapshot_file_count, 2)


def logic_coupling_index(commits: Sequence[CommitSummary]) -> Optional[float]:
    return _mean([r for r in map(logic_coupling_ratio, commits) if r is not None])


def additive_ratio(commit: CommitSummary) -> Optional[float]:
    live = commit.count(ADDED, MODIFIED)
    if live == 0:
        return None
    return commit.count(ADDED) / live


def additive_contribution_index(commits: Sequence[CommitSummary]) -> Optional[float]:
    return _mean([r for r in map(additive_ratio, commits) if r is not None])


def dimensionality_ratio(commit: CommitSummary) -> Optional[float]:
    if not commit.changes:
        return None
    return commit.churn / len(commit.changes)


def dimensionality_index(commits: Sequence[CommitSummary]) -> Optional[float]:
    return _mean([r for r in map(dimensionality_ratio, commits) if r is not None])


def git_metrics(
    clone_path: os.PathLike | str,
    commit_limit: Optional[int] = 150,
    full_history_limit: Optional[int] = None,
    cache_dir: Optional[os.PathLike | str] = None,
) -> dict[str, Optional[float]]:
    """The three git metrics for one clone.

    ``commit_limit`` caps the logic coupling window; ``full_history_limit``
    caps the history used by the additive and dimensionality indices.
    """
    history = scan_history_cached(clone_path, full_history_limit, cache_dir)
    recent = history if commit_limit is None else history[:commit_limit]
    return {
        "dimensionality_index": dimensionality_index(history),
        "additive_contribution_index": additive_contribution_index(history),
        "logic_coupling_index": logic_coupling_index(recent),
    }
