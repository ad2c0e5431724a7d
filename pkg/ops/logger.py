"""
mmlat — Logging and run tracking
--------------------------------
configure_logging() sets up stderr logging once for the CLI; library modules
only call logging.getLogger(__name__).

RunLogger is a thin MLflow wrapper for optional experiment tracking:

Usage:
    from ops.logger import RunLogger
    log = RunLogger(run_name="lyrrc_M64")
    log.log_params({"system.M": 64})
    log.log_metric("latency_frames", 1.000005)
    log.end_run()

View runs:
    mlflow ui --port 5000
"""

import logging
import os
import sys
from typing import Any, Dict, Optional

LOG_FORMAT = "%(asctime)s - %(levelname)s - %(message)s"
TRACKING_DIR = "./mlruns"


def configure_logging(verbose: int = 0) -> None:
    level = logging.WARNING
    if verbose == 1:
        level = logging.INFO
    elif verbose >= 2:
        level = logging.DEBUG
    logging.basicConfig(stream=sys.stderr, level=level, format=LOG_FORMAT, force=True)


def flatten(doc: Dict[str, Any], prefix: str = "") -> Dict[str, Any]:
    """{"a": {"b": 1}} -> {"a.b": 1}"""
    out: Dict[str, Any] = {}
    for k, v in doc.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(flatten(v, key + "."))
        else:
            out[key] = v
    return out


# ------------------------------------------------------------
# MLflow tracking
# ------------------------------------------------------------

class RunLogger:
    """
    One MLflow run per CLI invocation. Tracking never touches the
    artifacts the CLI writes, so outputs stay reproducible.
    """

    def __init__(self, run_name: str, tracking_dir: str = TRACKING_DIR):
        import mlflow

        self._mlflow = mlflow
        os.makedirs(tracking_dir, exist_ok=True)
        mlflow.set_tracking_uri(f"file:{tracking_dir}")
        self.run = mlflow.start_run(run_name=run_name)
        mlflow.set_tag("system", "mmlat")

    # -----------------------------
    # PARAMETERS / METRICS
    # -----------------------------
    def log_params(self, params: Dict[str, Any]):
        for k, v in flatten(params).items():
            # MLflow caps parameter values at 500 characters
            self._mlflow.log_param(k, str(v)[:500])

    def log_metric(self, key: str, value: Optional[float], step: Optional[int] = None):
        if value is None:
            return
        self._mlflow.log_metric(key, float(value), step=step)

    def log_metrics(self, metrics: Dict[str, Optional[float]], step: Optional[int] = None):
        for k, v in metrics.items():
            self.log_metric(k, v, step=step)

    def log_artifact(self, path: str):
        if os.path.exists(path):
            self._mlflow.log_artifact(path)

    def end_run(self):
        self._mlflow.end_run()
