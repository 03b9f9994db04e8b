# project/logger.py
import logging
import os


def setup_logger(name: str = "qfode"):
    root = logging.getLogger()
    # handlers are built once per process
    if not root.handlers:
        handlers = [logging.StreamHandler()]
        log_file = os.getenv("QFODE_LOG_FILE", "qfode.log")
        if log_file:
            handlers.append(logging.FileHandler(log_file))

        logging.basicConfig(
            level=os.getenv("QFODE_LOG_LEVEL", "INFO").upper(),
            format="%(asctime)s [%(levelname)s] %(message)s",
            handlers=handlers
        )
    return logging.getLogger(name)
