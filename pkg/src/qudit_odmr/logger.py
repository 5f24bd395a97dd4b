# Centralized logging configuration for the qudit ODMR simulator

import logging
import logging.handlers
import os
from pathlib import Path
from typing import Optional

import colorlog

LOG_FORMAT = "%(asctime)s | %(levelname)-8s | %(name)-28s | %(funcName)-20s | %(message)s"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S"


def setup_logging(log_level: str = "INFO",
                  log_to_file: bool = False,
                  log_dir: str = "logs",
                  max_file_size: int = 10 * 1024 * 1024,  # 10MB
                  backup_count: int = 5) -> logging.Logger:
    """
    Set up logging for simulator runs.

    Args:
        log_level: Logging level (DEBUG, INFO, WARNING, ERROR, CRITICAL)
        log_to_file: Whether to log to rotating files as well as the console
        log_dir: Directory for log files
        max_file_size: Maximum size of each log file in bytes
        backup_count: Number of backup log files to keep

    Returns:
        Configured root logger
    """
    level = getattr(logging, log_level.upper(), logging.INFO)

    logger = logging.getLogger()
    logger.setLevel(level)
    logger.handlers.clear()

    console_handler = colorlog.StreamHandler()
    console_handler.setLevel(level)
    console_handler.setFormatter(colorlog.ColoredFormatter(
        fmt="%(log_color)s" + LOG_FORMAT,
        datefmt=DATE_FORMAT,
        log_colors={
            "DEBUG": "cyan",
            "INFO": "green",
            "WARNING": "yellow",
            "ERROR": "red",
            "CRITICAL": "bold_red",
        },
    ))
    logger.addHandler(console_handler)

    if log_to_file:
        log_path = Path(log_dir)
        log_path.mkdir(parents=True, exist_ok=True)
        formatter = logging.Formatter(fmt=LOG_FORMAT, datefmt=DATE_FORMAT)

        file_handler = logging.handlers.RotatingFileHandler(
            log_path / "qudit_odmr.log",
            maxBytes=max_file_size,
            backupCount=backup_count,
            encoding="utf-8",
        )
        file_handler.setLevel(level)
        file_handler.setFormatter(formatter)
        logger.addHandler(file_handler)

        # Errors only
        error_handler = logging.handlers.RotatingFileHandler(
            log_path / "qudit_odmr_errors.log",
            maxBytes=max_file_size,
            backupCount=backup_count,
            encoding="utf-8",
        )
        error_handler.setLevel(logging.ERROR)
        error_handler.setFormatter(formatter)
        logger.addHandler(error_handler)

    logger.debug("=" * 80)
    logger.debug("QUDIT ODMR LOGGING INITIALIZED")
    logger.debug(f"Log Level: {log_level}")
    if log_to_file:
        logger.debug(f"Log Directory: {os.path.abspath(log_dir)}")
    logger.debug("=" * 80)

    return logger


def log_system_event(event_type: str, message: str, level: str = "INFO"):
    """
    Log a system event with consistent formatting.

    Args:
        event_type: Type of event (e.g., "STARTUP", "CONFIG", "SELFTEST")
        message: Event message
        level: Log level name
    """
    logger = logging.getLogger(__name__)
    log_level = getattr(logging, level.upper(), logging.INFO)
    logger.log(log_level, f"SYSTEM_EVENT | {event_type} | {message}")


def log_run_step(subcommand: str, step: str, result: str, details: Optional[str] = None):
    """
    Log one step of a simulator run.

    Args:
        subcommand: CLI subcommand being executed (e.g., "odmr", "ramsey")
        step: Step name (e.g., "ENUMERATE_PACKETS", "WRITE_OUTPUT")
        result: "SUCCESS", "FAILED" or "SKIPPED"
        details: Additional details
    """
    logger = logging.getLogger(__name__)
    message = f"RUN | {subcommand} | {step} | {result}"
    if details:
        message += f" | {details}"

    if result == "SUCCESS":
        logger.info(message)
    elif result == "FAILED":
        logger.error(message)
    else:
        logger.warning(message)


def log_performance_metric(operation: str, duration_seconds: float, item_count: int = 0):
    """
    Log performance metrics for a sweep.

    Args:
        operation: Operation name (e.g., "FIELD_MAP", "RAMSEY_SWEEP")
        duration_seconds: Time taken in seconds
        item_count: Number of work units processed (packets, columns, delays)
    """
    logger = logging.getLogger(__name__)
    message = f"PERFORMANCE | {operation} | Duration: {duration_seconds:.2f}s"
    if item_count > 0:
        message += f" | Items: {item_count}"
        if duration_seconds > 0:
            message += f" | Rate: {item_count / duration_seconds:.1f}/s"
    logger.info(message)
