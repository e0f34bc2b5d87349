import json
from fractions import Fraction

import pytest

from forkhealth.forge import (
    BudgetExhaustedError,
    DecodeError,
    ForgeClient,
    ProjectNotFoundError,
    ReplayMissError,
    RequestBudget,
    Response,
    ResponseCache,
    RetryPolicy,
    TransportError,
    fetch_forks,
    fetch_issues,
    fetch_pull_requests,
    issue_budgeted_request,
    normalize_url,
)
from forkhealth.model import ProjectRecord, ProjectStatus
from support.fakeforge import FakeForge, NoNetwork

DEMO = ProjectRecord("demo", "https://github.com/apache/incubator-demo", ProjectStatus.GRADUATED)
EMPTY = ProjectRecord("empty", "https://github.com/apache/empty", ProjectStatus.RETIRED)


class Script:
    """Transport returning canned responses in order and recording the token used."""

    def __init__(self, *responses):
        self.responses = list(responses)
        self.tokens = []

    def __call__(self, url, headers):
        self.tokens.append(headers["Authorization"].split()[-1])
        r = self.responses.pop(0)
        if isinstance(r, Exception):
            raise r
        return r


def budget(tokens=("t1",), **kw):
    return RequestBudget(list(tokens), RetryPolicy(**kw), sleep=lambda s: None)


# --- issue_budgeted_request ------------------------------------------------------------


def test_rotates_past_exhausted_token():
    b = budget(("t1", "t2"))
    b.remaining["t1"] = 0
    t = Script(Response(200, {}, []))
    issue_budgeted_request(b, "https://x/repos/a/b", t)
    assert t.tokens == ["t2"]


def test_picks_token_with_most_quota():
    b = budget(("t1", "t2", "t3"))
    b.remaining.update({"t1": 10, "t2": 300, "t3": 20})
    t = Script(Response(200, {"x-ratelimit-remaining": "299"}, []))
    issue_budgeted_request(b, "https://x/a", t)
    assert t.tokens == ["t2"] and b.remaining["t2"] == 299


def test_rate_limit_response_rotates():
    b = budget(("t1", "t2"))
    t = Script(
        Response(403, {"x-ratelimit-remaining": "0", "x-ratelimit-reset": "9999999999"}, {}),
        Response(200, {}, [1]),
    )
    assert issue_budgeted_request(b, "https://x/a", t).body == [1]
    assert t.tokens == ["t1", "t2"]
    assert b.remaining["t1"] == 0


def test_global_exhaustion_raises_when_reset_too_far():
    clock = [1000.0]
    b = RequestBudget(["t1"], RetryPolicy(max_wait=60), clock=lambda: clock[0], sleep=lambda s: None)
    b.remaining["t1"] = 0
    b.reset_at["t1"] = 5000.0
    with pytest.raises(BudgetExhaustedError):
        issue_budgeted_request(b, "https://x/a", Script())


def test_global_exhaustion_waits_for_reset():
    clock = [1000.0]
    slept = []

    def sleep(s):
        slept.append(s)
        clock[0] += s

    b = RequestBudget(["t1"], RetryPolicy(max_wait=600), clock=lambda: clock[0], sleep=sleep)
    b.remaining["t1"] = 0
    b.reset_at["t1"] = 1100.0
    t = Script(Response(200, {}, []))
    issue_budgeted_request(b, "https://x/a", t)
    assert slept == [101.0] and t.tokens == ["t1"]


def test_transient_failures_then_success():
    t = Script(Response(502), Response(502), Response(502), Response(200, {}, {"ok": 1}))
    assert issue_budgeted_request(budget(max_attempts=4), "https://x/a", t).body == {"ok": 1}


def test_transient_failures_exhaust_retries():
    t = Script(Response(502), TransportError("reset"), Response(503), Response(200, {}, {}))
    with pytest.raises(TransportError):
        issue_budgeted_request(budget(max_attempts=3), "https://x/a", t)


def test_backoff_schedule_used():
    slept = []
    b = RequestBudget(["t"], RetryPolicy(max_attempts=4, backoff=(1, 5)), sleep=slept.append)
    issue_budgeted_request(b, "https://x/a", Script(Response(500), Response(500), Response(500), Response(200)))
    assert slept == [1, 5, 5]


def test_no_tokens():
    with pytest.raises(BudgetExhaustedError):
        issue_budgeted_request(RequestBudget([]), "https://x/a", Script())


def test_replay_uses_cache_only(tmp_path):
    cache = ResponseCache(tmp_path)
    cache.put("https://api.example/repos/a/b/pulls?page=1&state=all", Response(200, {"link": "x", "etag": "y"}, [1]))
    guard = NoNetwork()
    for _ in range(2):
        r = issue_budgeted_request(None, "https://other.host/repos/a/b/pulls?state=all&page=1", guard, cache, replay=True)
        assert r.body == [1] and r.headers == {"link": "x"}
    assert guard.calls == 0
    with pytest.raises(ReplayMissError):
        issue_budgeted_request(None, "https://x/repos/a/b/forks", guard, cache, replay=True)


def test_cache_layout(tmp_path):
    cache = ResponseCache(tmp_path)
    url = "https://api.github.com/repos/a/b/pulls?state=all&page=2"
    cache.put(url, Response(404, {}, {"message": "Not Found"}))
    key = ResponseCache.key(url)
    stored = json.loads((tmp_path / f"{key}.json").read_text())
    assert stored == {"url": "/repos/a/b/pulls?page=2&state=all", "status": 404, "headers": {},
                      "body": {"message": "Not Found"}}
    assert json.loads((tmp_path / "manifest.json").read_text()) == {key: "/repos/a/b/pulls?page=2&state=all"}
    assert not [p for p in tmp_path.iterdir() if p.name.startswith(".tmp")]


def test_online_requests_recorded(tmp_path):
    cache = ResponseCache(tmp_path)
    t = Script(Response(200, {}, {"n": 1}))
    issue_budgeted_request(budget(), "https://x/a?b=1", t, cache)
    assert issue_budgeted_request(budget(), "https://x/a?b=1", NoNetwork(), cache).body == {"n": 1}


def test_transient_responses_not_cached(tmp_path):
    cache = ResponseCache(tmp_path)
    t = Script(Response(502), Response(200, {}, []))
    issue_budgeted_request(budget(max_attempts=2), "https://x/a", t, cache)
    assert cache.get("https://x/a").status == 200


def test_normalize_url():
    assert normalize_url("https://API.github.com/repos/a/b/?z=1&a=2") == "/repos/a/b?a=2&z=1"


# --- fetchers ------------------------------------------------------------------------


def client_for(manifest, **kw):
    return ForgeClient("https://forge.test", budget(), transport=FakeForge(manifest), **kw)


def test_fetch_pull_requests_hydrated(forge_manifest):
    prs = fetch_pull_requests(client_for(forge_manifest), DEMO)
    assert [p.number for p in prs] == list(range(12, 0, -1))
    by_n = {p.number: p for p in prs}
    assert by_n[3].comments == (("dave", "Closing as duplicate of #2"),)
    assert by_n[12].comments == (("alice", "Looks duplicated? no, fine"),)
    assert by_n[6].commit_messages == ("Implement feature, see issue #102",)
    assert by_n[6].linked_issue_numbers == {102}
    assert by_n[1].merged and by_n[1].state == "closed" and not by_n[3].merged
    assert by_n[10].assignees == {"alice"}
    assert by_n[1].created_at.isoformat() == "2021-01-01T00:00:00+00:00"


def test_fetch_zero_prs():
    manifest = {"projects": [{"owner": "apache", "repo": "empty", "pulls": [], "issues": [], "forks": []}]}
    assert fetch_pull_requests(client_for(manifest), EMPTY) == []
    assert fetch_forks(client_for(manifest), EMPTY) == []


def _many(n):
    pulls = [{"number": i, "state": "open", "created_at": f"2021-01-{1 + i % 28:02d}T{i % 24:02d}:00:00Z",
              "user": "u"} for i in range(1, n + 1)]
    return {"projects": [{"owner": "apache", "repo": "empty", "pulls": pulls, "issues": [], "forks": []}]}


def test_page_cap():
    manifest = _many(45)
    assert len(fetch_pull_requests(client_for(manifest), EMPTY, page_cap=1)) == 30
    assert len(fetch_pull_requests(client_for(manifest), EMPTY, page_cap=5)) == 45


def test_project_not_found(forge_manifest):
    gone = ProjectRecord("gone", "https://github.com/apache/gone", ProjectStatus.RETIRED)
    with pytest.raises(ProjectNotFoundError, match="404"):
        fetch_pull_requests(client_for(forge_manifest), gone)


def test_malformed_payload_names_url():
    c = ForgeClient("https://forge.test", budget(), transport=Script(Response(200, {}, "<html>")))
    with pytest.raises(DecodeError, match="forge.test/repos/apache/empty/pulls"):
        fetch_pull_requests(c, EMPTY)


def test_fetch_forks_counts_merged(forge_manifest, caplog):
    with caplog.at_level("WARNING"):
        forks = fetch_forks(client_for(forge_manifest), DEMO)
    assert [(f.full_name, f.merged_pr_count) for f in forks] == [
        ("alice/incubator-demo", 2),
        ("bob/incubator-demo", 1),
        ("carol/incubator-demo", 0),
        ("dave/incubator-demo", 0),
    ]
    assert "dave/incubator-demo" in caplog.text


def test_fetch_issues_skips_unresolvable(forge_manifest):
    issues = fetch_issues(client_for(forge_manifest), DEMO, [2, 101, 102, 999])
    assert sorted(issues) == [101, 102]
    assert issues[102].author == "frank" and issues[102].comment_authors == {"erin"}


def test_fixture_demo_metric_values(forge_manifest):
    from forkhealth.forge import forge_metrics

    got = forge_metrics(client_for(forge_manifest), DEMO)
    # float(count / total) is correctly rounded, so exact equality with the rational holds
    assert got["duplicate_pr_ratio"] == float(Fraction(3, 10))
    assert got["central_management_index"] == float(Fraction(1, 2))
