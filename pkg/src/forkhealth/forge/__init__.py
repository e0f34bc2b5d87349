from .client import (
    BudgetExhaustedError,
    DecodeError,
    ForgeClient,
    ForgeError,
    NotFoundError,
    ReplayMissError,
    RequestBudget,
    Response,
    ResponseCache,
    RetryPolicy,
    TransportError,
    issue_budgeted_request,
    normalize_url,
)
from .fetch import ProjectNotFoundError, fetch_forks, fetch_issues, fetch_pull_requests, forge_metrics
from .metrics import (
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
)
