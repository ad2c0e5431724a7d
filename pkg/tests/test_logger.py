import logging

import pytest

from ops.logger import LOG_FORMAT, configure_logging, flatten


def test_flatten():
    assert flatten({"a": {"b": 1, "c": {"d": 2}}, "e": 3}) == {"a.b": 1, "a.c.d": 2, "e": 3}


@pytest.mark.parametrize("verbose, level", [(0, logging.WARNING), (1, logging.INFO),
                                            (2, logging.DEBUG)])
def test_configure_logging_levels(verbose, level):
    configure_logging(verbose)
    root = logging.getLogger()
    assert root.level == level
    assert root.handlers[0].formatter._fmt == LOG_FORMAT


def test_run_logger(tmp_path):
    pytest.importorskip("mlflow")
    from ops.logger import RunLogger

    tracker = RunLogger(run_name="test", tracking_dir=str(tmp_path / "mlruns"))
    try:
        tracker.log_params({"system": {"M": 64, "note": "x" * 900}})
        tracker.log_metrics({"latency_frames": 1.0005, "avg_power": None})
        artifact = tmp_path / "result.json"
        artifact.write_text("{}")
        tracker.log_artifact(str(artifact))
        tracker.log_artifact(str(tmp_path / "missing.json"))
        run_id = tracker.run.info.run_id
    finally:
        tracker.end_run()

    import mlflow

    run = mlflow.get_run(run_id)
    assert run.data.params["system.M"] == "64"
    assert len(run.data.params["system.note"]) == 500
    assert run.data.metrics == {"latency_frames": 1.0005}
    assert [f.path for f in mlflow.MlflowClient().list_artifacts(run_id)] == ["result.json"]
