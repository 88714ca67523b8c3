import io
import json
import logging

from mageom.utils import setup_logging


def test_json_records_escape_quotes():
    stream = io.StringIO()
    logger = setup_logging("mageom.test.json", level="DEBUG", fmt="json", stream=stream)
    logger.debug('Zero test of "x*y - 1" failed')
    entry = json.loads(stream.getvalue())
    assert entry["level"] == "DEBUG"
    assert entry["name"] == "mageom.test.json"
    assert entry["message"] == 'Zero test of "x*y - 1" failed'


def test_simple_format_and_level():
    stream = io.StringIO()
    logger = setup_logging("mageom.test.simple", level="WARNING", fmt="simple", stream=stream)
    logger.info("hidden")
    logger.warning("shown")
    output = stream.getvalue()
    assert "hidden" not in output
    assert " - WARNING - mageom.test.simple - shown" in output
    assert logger.level == logging.WARNING


def test_repeated_setup_keeps_one_handler():
    logger = setup_logging("mageom.test.repeat", stream=io.StringIO())
    logger = setup_logging("mageom.test.repeat", stream=io.StringIO())
    assert len(logger.handlers) == 1
    assert not logger.propagate
