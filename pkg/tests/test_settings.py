import logging

import pytest

from logger import setup_logger
from qfode.errors import ConfigurationError
from qfode.settings import get_settings


def test_settings_are_read_once(monkeypatch):
    monkeypatch.setenv("QFODE_MAX_QUBITS", "10")
    first = get_settings()
    assert get_settings() is first

    monkeypatch.setenv("QFODE_MAX_QUBITS", "12")
    assert get_settings().max_qubits == 10
    get_settings.cache_clear()
    assert get_settings().max_qubits == 12


def test_invalid_cap_rejected(monkeypatch):
    monkeypatch.setenv("QFODE_MAX_NESTING", "zero")
    with pytest.raises(ConfigurationError):
        get_settings()


def test_empty_output_dir_means_no_override(monkeypatch):
    monkeypatch.setenv("QFODE_OUTPUT_DIR", "")
    assert get_settings().output_dir is None


def test_logger_handlers_built_once(tmp_path, monkeypatch):
    monkeypatch.setenv("QFODE_LOG_FILE", str(tmp_path / "qfode.log"))
    root = logging.getLogger()
    saved, level = root.handlers[:], root.level
    root.handlers = []
    try:
        setup_logger("qfode.one")
        setup_logger("qfode.two")
        file_handlers = [h for h in root.handlers if isinstance(h, logging.FileHandler)]
        assert len(file_handlers) == 1
        assert len(root.handlers) == 2
    finally:
        for handler in root.handlers:
            handler.close()
        root.handlers = saved
        root.setLevel(level)


def test_logger_reuses_existing_handlers():
    root = logging.getLogger()
    saved = root.handlers[:]
    existing = logging.NullHandler()
    root.handlers = [existing]
    try:
        logger = setup_logger("qfode.reuse")
        assert root.handlers == [existing]
        assert logger.name == "qfode.reuse"
    finally:
        root.handlers = saved
