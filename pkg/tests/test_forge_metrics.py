from datetime import datetime, timedelta, timezone

import pytest
from hypothesis import given
from hypothesis import strategies as st

from forkhealth.forge.metrics import (
    Fork,
    IssueRef,
    PullRequest,
    central_management_index,
    duplicate_pr_ratio,
    extract_issue_links,
    frequency_index,
    hard_fork_present,
    pre_communicated,
    pre_communication_index,
    pre_communication_step,
)

T0 = datetime(2021, 1, 1, tzinfo=timezone.utc)


def pr(n=1, **kw):
    return PullRequest(number=n, **kw)


# --- issue links ---------------------------------------------------------------


def test_fixes_reference():
    assert extract_issue_links(pr(body="Fixes #123")) == {123}


def test_no_text_no_links():
    assert extract_issue_links(pr()) == set()


def test_deduplicated():
    assert extract_issue_links(pr(comments=[("a", "see issue #7 and #7 again")])) == {7}


@pytest.mark.parametrize(
    "text,expected",
    [
        ("ISSUE #12", {12}),
        ("issue#12", {12}),
        ("(#5), [#6]; #7.", {5, 6, 7}),
        ("C#5 port", set()),
        ("apache/repo#9", set()),
        ("#12abc", set()),
        ("##3", set()),
        ("&#39;quoted&#39;", set()),
        ("#0", set()),
    ],
)
def test_link_boundaries(text, expected):
    assert extract_issue_links(pr(title=text)) == expected


def test_links_from_all_sources():
    p = pr(title="#1", body="#2", comments=[("x", "#3")], commit_messages=["closes #4"])
    assert p.linked_issue_numbers == {1, 2, 3, 4}


# --- central management ----------------------------------------------------------


def test_central_management_three_of_four():
    prs = [pr(1, body="#10"), pr(2, title="issue #11"), pr(3, comments=[("a", "#12")]), pr(4)]
    assert central_management_index(prs) == 0.75


def test_central_management_none_and_missing():
    assert central_management_index([pr(1), pr(2)]) == 0.0
    assert central_management_index([]) is None


# --- duplicates -------------------------------------------------------------------


def closed(n, merged=False, comments=()):
    return pr(n, state="closed", merged=merged, comments=comments)


def test_duplicate_ratio_fixture():
    prs = [closed(i) for i in range(1, 9)]
    prs += [closed(9, comments=[("m", "duplicate of #4")]), closed(10, comments=[("m", "Duplicate of #4")])]
    assert duplicate_pr_ratio(prs) == pytest.approx(0.2)


def test_duplicate_ratio_zero_and_missing():
    assert duplicate_pr_ratio([closed(1, comments=[("m", "thanks")])]) == 0.0
    assert duplicate_pr_ratio([pr(1)]) is None


@pytest.mark.parametrize("word", ["duplicated", "Superseded", "REPLICATES", "supersedes", "duplicate"])
def test_duplicate_stems(word):
    assert duplicate_pr_ratio([closed(1, comments=[("m", f"this is {word}")])]) == 1.0


def test_duplicate_ignores_merged_and_open_and_body():
    prs = [
        closed(1, merged=True, comments=[("m", "duplicated")]),
        pr(2, comments=[("m", "duplicate")]),
        pr(3, state="closed", body="duplicate"),
    ]
    assert duplicate_pr_ratio(prs) == 0.0


def test_duplicate_denominator_all():
    prs = [closed(1, comments=[("m", "dup: superseded")]), pr(2), pr(3), closed(4)]
    assert duplicate_pr_ratio(prs, denominator="closed") == 0.5
    assert duplicate_pr_ratio(prs, denominator="all") == 0.25


def test_duplicate_custom_keywords():
    prs = [closed(1, comments=[("m", "redundant work")])]
    assert duplicate_pr_ratio(prs) == 0.0
    assert duplicate_pr_ratio(prs, stems=("redundan",)) == 1.0


# --- hard forks --------------------------------------------------------------------


@pytest.mark.parametrize("counts,expected", [([0, 1], 0), ([0, 2], 1), ([], 0), ([5], 1)])
def test_hard_fork(counts, expected):
    assert hard_fork_present([Fork(f"u{i}/r", c) for i, c in enumerate(counts)]) == expected


@given(st.lists(st.integers(0, 5), max_size=6), st.data())
def test_hard_fork_monotone(counts, data):
    forks = [Fork(f"u{i}/r", c) for i, c in enumerate(counts)]
    before = hard_fork_present(forks)
    if counts:
        i = data.draw(st.integers(0, len(counts) - 1))
        forks[i] = Fork(forks[i].full_name, counts[i] + data.draw(st.integers(1, 3)))
    assert hard_fork_present(forks) >= before


# --- pre-communication -------------------------------------------------------------


@pytest.mark.parametrize("title", ["[WIP] add parser", "WIP: add parser", "wip - parser", "Parser (wip)"])
def test_wip_announcement(title):
    assert pre_communication_step(pr(title=title, author="a"), {}) == 1


@pytest.mark.parametrize("title", ["Wipe cache", "swipe handler", "wipes"])
def test_wip_needs_token(title):
    assert not pre_communicated(pr(title=title, author="a"), {})


def test_author_assigned():
    assert pre_communication_step(pr(author="a", assignees={"a", "b"}), {}) == 2


def test_nothing_is_false():
    assert not pre_communicated(pr(author="a", title="Add thing"), {})


def test_linked_issue_author_or_assignee():
    issues = {5: IssueRef(5, author="a"), 6: IssueRef(6, author="z", assignees={"a"})}
    assert pre_communication_step(pr(author="a", body="#5"), issues) == 3
    assert pre_communication_step(pr(author="a", body="#6"), issues) == 3


def test_linked_issue_comment():
    issues = {5: IssueRef(5, author="z", comment_authors={"a"})}
    assert pre_communication_step(pr(author="a", body="#5"), issues) == 4


def test_unresolvable_links_ignored():
    assert not pre_communicated(pr(author="a", body="#99"), {})


def test_cascade_short_circuits():
    # satisfied at step 1 even though the linked issue would fail steps 3-4
    issues = {5: IssueRef(5, author="z")}
    p = pr(author="a", title="[WIP] x", body="#5")
    assert pre_communication_step(p, issues) == 1
    # step 2 wins over step 4
    issues = {5: IssueRef(5, author="z", comment_authors={"a"})}
    assert pre_communication_step(pr(author="a", assignees={"a"}, body="#5"), issues) == 2


def test_pre_communication_index():
    prs = [pr(1, title="WIP", author="a"), pr(2, author="b", assignees={"b"})] + [pr(i, author="c") for i in range(3, 9)]
    assert pre_communication_index(prs, {}) == 0.25
    assert pre_communication_index([pr(i, title="[wip]") for i in range(1, 4)], {}) == 1.0
    assert pre_communication_index([], {}) is None


# --- frequency -----------------------------------------------------------------------


def at(days):
    return [pr(i + 1, created_at=T0 + timedelta(days=d)) for i, d in enumerate(days)]


def test_frequency_two_windows():
    assert frequency_index(at([0, 10, 35, 40])) == 2.0


def test_frequency_single():
    assert frequency_index(at([0])) == 1.0


def test_frequency_empty_middle_window():
    assert frequency_index(at([0, 65])) == pytest.approx(2 / 3)


def test_frequency_window_edge_half_open():
    assert frequency_index(at([0, 30])) == 1.0
    assert frequency_index(at([0, 29.99])) == 2.0


def test_frequency_missing_and_order():
    assert frequency_index([]) is None
    assert frequency_index(at([40, 0, 35, 10])) == 2.0


def brute_windows(days, width):
    # count windows by stepping from the first PR until the last one is covered
    start, last = min(days), max(days)
    n = 1
    while start + n * width <= last:
        n += 1
    return n


@given(st.lists(st.integers(0, 400), min_size=1, max_size=30), st.integers(1, 60))
def test_frequency_against_stepping(days, width):
    assert frequency_index(at(days), width) == len(days) / brute_windows(days, width)


# --- invariance ------------------------------------------------------------------------


@given(st.lists(st.tuples(st.booleans(), st.booleans(), st.sampled_from(["", "#3", "duplicate"])), max_size=10),
       st.randoms())
def test_ratio_metrics_permutation_invariant(layout, rnd):
    prs = [
        PullRequest(i + 1, state="closed" if c else "open", merged=c and m, comments=[("x", t)])
        for i, (c, m, t) in enumerate(layout)
    ]
    shuffled = list(prs)
    rnd.shuffle(shuffled)
    assert central_management_index(prs) == central_management_index(shuffled)
    assert duplicate_pr_ratio(prs) == duplicate_pr_ratio(shuffled)
    for v in (central_management_index(prs), duplicate_pr_ratio(prs)):
        assert v is None or 0 <= v <= 1


def test_pull_request_invariants():
    with pytest.raises(ValueError):
        PullRequest(1, state="open", merged=True)
    with pytest.raises(ValueError):
        PullRequest(0)
    with pytest.raises(ValueError):
        Fork("a/b", -1)
