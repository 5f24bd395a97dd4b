from qudit_odmr.workflows.experiments import RUNNERS, RunResult, Table
from qudit_odmr.workflows.selftest import CHECKS, run_selftest

__all__ = ["CHECKS", "RUNNERS", "RunResult", "Table", "run_selftest"]
