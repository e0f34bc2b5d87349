"""Pipeline stages behind the command line: mine git, mine forge, analyze, report."""

from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

from . import gitmine
from .analysis import AnalysisResult, clean_outliers, run_analysis
from .forge import (
    BudgetExhaustedError,
    ForgeClient,
    ForgeError,
    RequestBudget,
    ResponseCache,
    forge_metrics,
)
from .forge.client import DEFAULT_BASE_URL
from .forge.metrics import DEFAULT_DUPLICATE_STEMS
from .model import (
    FORGE_METRICS,
    GIT_METRICS,
    AnalysisRow,
    MetricTable,
    MetricVector,
    ParseError,
    ProjectRecord,
    parse_metric_csv,
    parse_project_list,
    to_analysis_rows,
)
from .report import render_reports
from .stats import DegenerateOutcomeError

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2
METRICS_FILE = "metrics.csv"
ANALYSIS_FILE = "analysis.json"


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    pass


@dataclass
class RunConfig:
    project_list_path: Optional[str] = None
    clone_root_dir: Optional[str] = None
    cache_dir: Optional[str] = None
    output_dir: str = "forkhealth-out"
    commit_limit: int = 150
    full_history_limit: Optional[int] = None
    pr_page_cap: int = 5
    interval_days: int = 30
    duplicate_keywords: tuple[str, ...] = DEFAULT_DUPLICATE_STEMS
    dup_denominator: str = "closed"
    offline_replay: bool = False
    histogram_bins: int = 20
    base_url: str = DEFAULT_BASE_URL
    tokens: tuple[str, ...] = field(default=(), repr=False)
    workers: Optional[int] = None
    paper_layout: bool = False

    def validate(self) -> "RunConfig":
        for name in ("commit_limit", "pr_page_cap", "interval_days", "histogram_bins"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.full_history_limit is not None and self.full_history_limit < 1:
            raise ConfigError("full_history_limit must be positive")
        if self.workers is not None and self.workers < 1:
            raise ConfigError("workers must be positive")
        if self.dup_denominator not in ("closed", "all"):
            raise ConfigError("dup_denominator must be 'closed' or 'all'")
        if not self.duplicate_keywords:
            raise ConfigError("duplicate_keywords must not be empty")
        if self.offline_replay and not (self.cache_dir and Path(self.cache_dir).is_dir()):
            raise ConfigError(f"offline replay needs an existing cache directory (got {self.cache_dir!r})")
        return self

    @property
    def out(self) -> Path:
        return Path(self.output_dir)

    @property
    def metrics_path(self) -> Path:
        return self.out / METRICS_FILE


_ENV = {
    "FORKHEALTH_BASE_URL": "base_url",
    "FORKHEALTH_CACHE_DIR": "cache_dir",
}


def _coerce(name: str, value):
    kind = {f.name: f.type for f in fields(RunConfig)}[name]
    if value is None:
        return None
    if "tuple" in str(kind):
        if isinstance(value, str):
            return tuple(v.strip() for v in value.split(",") if v.strip())
        return tuple(value)
    if "bool" in str(kind):
        if isinstance(value, str):
            return value.strip().lower() in ("1", "true", "yes", "on")
        return bool(value)
    if "int" in str(kind):
        try:
            return int(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{name} must be an integer, got {value!r}") from None
    return str(value)


def load_config(
    flags: dict,
    config_path: Optional[str] = None,
    env: Optional[dict] = None,
) -> RunConfig:
    """Merge defaults < config file (JSON) < environment < flags."""
    env = os.environ if env is None else env
    known = {f.name for f in fields(RunConfig)}
    values: dict = {}
    if config_path:
        path = Path(config_path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {config_path}")
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {config_path} is not valid JSON: {exc}") from None
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
        values.update(data)
    for var, name in _ENV.items():
        if env.get(var):
            values[name] = env[var]
    if env.get("FORKHEALTH_TOKENS"):
        values["tokens"] = env["FORKHEALTH_TOKENS"]
    values.update({k: v for k, v in flags.items() if v is not None and k in known})
    return RunConfig(**{k: _coerce(k, v) for k, v in values.items()}).validate()


def load_projects(cfg: RunConfig) -> list[ProjectRecord]:
    if not cfg.project_list_path:
        raise ConfigError("a project list is required (--projects)")
    path = Path(cfg.project_list_path)
    if not path.is_file():
        raise ConfigError(f"project list not found: {path}")
    with path.open(encoding="utf-8", newline="") as fh:
        try:
            return parse_project_list(fh)
        except ParseError as exc:
            raise ConfigError(f"{path}: {exc}") from None


def _load_table(cfg: RunConfig, records: list[ProjectRecord]) -> MetricTable:
    table = MetricTable.for_projects(records)
    if cfg.metrics_path.exists():
        with cfg.metrics_path.open(encoding="utf-8", newline="") as fh:
            for mv in parse_metric_csv(fh):
                if mv.project in table.vectors:
                    table.update(mv, GIT_METRICS + FORGE_METRICS)
    return table


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _clone_path(cfg: RunConfig, rec: ProjectRecord) -> Optional[Path]:
    candidates = []
    if rec.local_clone_path:
        p = Path(rec.local_clone_path)
        if not p.is_absolute() and cfg.project_list_path:
            candidates.append(Path(cfg.project_list_path).parent / p)
        candidates.append(p)
    if cfg.clone_root_dir:
        root = Path(cfg.clone_root_dir)
        candidates += [root / rec.name, root / rec.repo, root / rec.owner / rec.repo]
    return next((c for c in candidates if c.exists()), None)


def cmd_mine_git(cfg: RunConfig) -> int:
    records = load_projects(cfg)
    table = _load_table(cfg, records)
    clones = {r.name: _clone_path(cfg, r) for r in records}
    missing = [name for name, p in clones.items() if p is None]
    if missing:
        logger.warning("no local clone for %d project(s): %s", len(missing), ", ".join(missing))

    git_cache = cfg.cache_dir

    def mine(rec: ProjectRecord):
        path = clones[rec.name]
        if path is None:
            return rec, None
        try:
            return rec, gitmine.git_metrics(path, cfg.commit_limit, cfg.full_history_limit, git_cache)
        except gitmine.GitError as exc:
            logger.warning("cannot mine %s: %s", rec.name, exc)
            return rec, None

    workers = cfg.workers or os.cpu_count() or 1
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(mine, records))
    mined = 0
    for rec, values in results:
        if values is None:
            values = {m: None for m in GIT_METRICS}
        else:
            mined += 1
        table.update(MetricVector(project=rec.name, status=rec.status, **values), GIT_METRICS)
    _write(cfg.metrics_path, table.to_csv())
    if mined == 0:
        logger.error("no project could be mined from git; missing clones: %s", ", ".join(missing) or "none")
        return EXIT_FAILURE
    logger.info("mined git history for %d of %d project(s)", mined, len(records))
    return EXIT_OK


def make_forge_client(cfg: RunConfig, transport=None) -> ForgeClient:
    if not cfg.offline_replay and not cfg.tokens:
        raise ConfigError("online forge mining needs API tokens (FORKHEALTH_TOKENS)")
    cache_dir = Path(cfg.cache_dir) if cfg.cache_dir else cfg.out / "cache"
    budget = RequestBudget(list(cfg.tokens)) if cfg.tokens else None
    return ForgeClient(
        base_url=cfg.base_url,
        budget=budget,
        cache=ResponseCache(cache_dir / "forge"),
        replay=cfg.offline_replay,
        transport=transport,
    )


def cmd_mine_forge(cfg: RunConfig, transport=None) -> int:
    records = load_projects(cfg)
    client = make_forge_client(cfg, transport)
    table = _load_table(cfg, records)
    status = EXIT_OK
    for rec in records:
        try:
            values = forge_metrics(
                client, rec, cfg.pr_page_cap, cfg.interval_days, cfg.duplicate_keywords, cfg.dup_denominator
            )
        except BudgetExhaustedError as exc:
            logger.error("request budget exhausted at project %s: %s", rec.name, exc)
            status = EXIT_FAILURE
            break
        except ForgeError as exc:
            logger.warning("forge metrics for %s set MISSING: %s", rec.name, exc)
            values = {m: None for m in FORGE_METRICS}
        table.update(MetricVector(project=rec.name, status=rec.status, **values), FORGE_METRICS)
        # flush after every project so partial progress survives
        _write(cfg.metrics_path, table.to_csv())
    _write(cfg.metrics_path, table.to_csv())
    return status


def _analysis_inputs(cfg: RunConfig) -> tuple[list[MetricVector], list[AnalysisRow]]:
    if not cfg.metrics_path.exists():
        raise StageError(f"metric CSV not found: {cfg.metrics_path}")
    with cfg.metrics_path.open(encoding="utf-8", newline="") as fh:
        vectors = parse_metric_csv(fh)
    if cfg.project_list_path:
        records = load_projects(cfg)
    else:
        records = [
            ProjectRecord(v.project, "https://forge.invalid/unknown/" + v.project, v.status)
            for v in vectors
            if v.status is not None
        ]
        vectors = [v for v in vectors if v.status is not None]
    return vectors, to_analysis_rows(records, vectors)


def write_reports(cfg: RunConfig, result: AnalysisResult, rows: list[AnalysisRow]) -> dict[str, str]:
    cleaned, _ = clean_outliers(rows)
    docs = render_reports(
        result,
        [r.metrics for r in rows],
        [r.metrics for r in cleaned],
        cfg.histogram_bins,
        cfg.paper_layout,
    )
    for name, text in docs.items():
        _write(cfg.out / name, text)
    return docs


def cmd_analyze(cfg: RunConfig, echo=print) -> int:
    try:
        _, rows = _analysis_inputs(cfg)
        result = run_analysis(rows)
    except (DegenerateOutcomeError, StageError) as exc:
        logger.error("analysis failed: %s", exc)
        return EXIT_FAILURE
    _write(cfg.out / ANALYSIS_FILE, json.dumps(result.to_json(), indent=2) + "\n")
    docs = write_reports(cfg, result, rows)
    echo(docs["univariate_summary.txt"])
    echo(docs["stepwise_summary.txt"])
    return EXIT_OK


def cmd_report(cfg: RunConfig, echo=print) -> int:
    path = cfg.out / ANALYSIS_FILE
    if not path.exists():
        logger.error("no analysis results at %s; run 'forkhealth analyze' first", path)
        return EXIT_FAILURE
    result = AnalysisResult.from_json(json.loads(path.read_text(encoding="utf-8")))
    try:
        _, rows = _analysis_inputs(cfg)
    except StageError as exc:
        logger.error("%s", exc)
        return EXIT_FAILURE
    docs = write_reports(cfg, result, rows)
    echo(docs["univariate_summary.txt"])
    echo(docs["stepwise_summary.txt"])
    return EXIT_OK


def cmd_run_all(cfg: RunConfig, transport=None, echo=print) -> int:
    for stage, run in (
        ("mine git", lambda: cmd_mine_git(cfg)),
        ("mine forge", lambda: cmd_mine_forge(cfg, transport)),
        ("analyze", lambda: cmd_analyze(cfg, echo)),
    ):
        code = run()
        if code != EXIT_OK:
            logger.error("stage '%s' failed; stopping", stage)
            return code
    return EXIT_OK
