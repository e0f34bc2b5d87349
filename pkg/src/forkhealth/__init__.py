"""Fork-practice metrics for open-source projects and their relation to project outcome."""

from .model import MetricVector, ProjectRecord, ProjectStatus, parse_project_list, to_analysis_rows

__version__ = "0.1.0"
