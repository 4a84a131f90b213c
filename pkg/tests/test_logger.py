import logging
from pathlib import Path

from measured_ising.core.logger import RunContextFilter, current_run, run_log, setup_logging

PACKAGE = logging.getLogger("measured_ising")


def test_records_outside_a_run_carry_a_dash():
    record = logging.LogRecord("measured_ising.services.sampler", logging.INFO, __file__, 1,
                               "hello", None, None)
    assert RunContextFilter().filter(record)
    assert record.run == "-"


def test_run_log_writes_labelled_lines(tmp_path):
    previous = PACKAGE.level
    PACKAGE.setLevel(logging.DEBUG)
    try:
        with run_log(tmp_path / "runs" / "sample_chain_4", "sample_chain_4") as path:
            assert current_run() == "sample_chain_4"
            logging.getLogger("measured_ising.services.sampler").info("chain 0 done")
    finally:
        PACKAGE.setLevel(previous)

    assert current_run() == "-"
    assert path == tmp_path / "runs" / "sample_chain_4" / "run.log"
    assert "sample_chain_4 - measured_ising.services.sampler - INFO - chain 0 done" in path.read_text()
    assert all(Path(getattr(h, "baseFilename", "")) != path for h in PACKAGE.handlers)


def test_run_log_restores_the_label_after_errors(tmp_path):
    try:
        with run_log(tmp_path, "exact_cube"):
            raise RuntimeError("boom")
    except RuntimeError:
        pass
    assert current_run() == "-"


def test_packaged_config_installs_the_run_filter():
    try:
        setup_logging(verbose=True)
        assert PACKAGE.level == logging.DEBUG
        files = [h for h in PACKAGE.handlers if isinstance(h, logging.FileHandler)]
        assert files
        assert any(isinstance(f, RunContextFilter) for f in files[0].filters)
    finally:
        setup_logging(verbose=False)
