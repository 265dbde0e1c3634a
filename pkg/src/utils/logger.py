"""
Logging configuration for the DPMIL pipeline.

Uses Loguru for structured, coloured logging. Each module binds a component
name so log lines can be filtered per stage.
"""

import sys
from pathlib import Path
from typing import Optional, Union

from loguru import logger


class PipelineLogger:
    """
    Centralised logging system for the pipeline.

    Features:
    - Coloured console output (stderr, so stdout stays clean for CLI output)
    - Optional file logging with rotation
    - Separate errors-only log
    - Component context on every record
    """

    CONSOLE_FORMAT = (
        "<green>{time:YYYY-MM-DD HH:mm:ss}</green> | <level>{level: <8}</level> | "
        "<cyan>{extra[component]}</cyan> | <level>{message}</level>"
    )
    FILE_FORMAT = "{time:YYYY-MM-DD HH:mm:ss} | {level: <8} | {extra[component]} | {name}:{function}:{line} | {message}"

    def __init__(
        self,
        log_dir: Union[str, Path] = "logs",
        log_level: str = "INFO",
        rotation: str = "10 MB",
        retention: str = "30 days",
        console_output: bool = True,
        log_to_file: bool = False,
    ):
        """
        Initialise the logging system.

        Args:
            log_dir: Directory to store log files (never the run output directory)
            log_level: Minimum log level (DEBUG, INFO, WARNING, ERROR, CRITICAL)
            rotation: When to rotate logs (time or size)
            retention: How long to keep old logs
            console_output: Whether to output to stderr
            log_to_file: Whether to write dpmil.log and errors.log
        """
        self.log_dir = Path(log_dir)
        self.log_level = log_level.upper()
        self.rotation = rotation
        self.retention = retention
        self.console_output = console_output
        self.log_to_file = log_to_file

        logger.remove()
        logger.configure(extra={"component": "general"})

        self._setup_console_logger()
        if self.log_to_file:
            self._setup_file_loggers()

    def _setup_console_logger(self):
        if self.console_output:
            logger.add(
                sys.stderr,
                level=self.log_level,
                format=self.CONSOLE_FORMAT,
                colorize=True,
            )

    def _setup_file_loggers(self):
        self.log_dir.mkdir(parents=True, exist_ok=True)
        logger.add(
            self.log_dir / "dpmil.log",
            level=self.log_level,
            rotation=self.rotation,
            retention=self.retention,
            format=self.FILE_FORMAT,
        )
        logger.add(
            self.log_dir / "errors.log",
            level="ERROR",
            rotation=self.rotation,
            retention=self.retention,
            format=self.FILE_FORMAT,
            backtrace=True,
            diagnose=False,
        )


def setup_logging(
    log_dir: Union[str, Path] = "logs",
    log_level: str = "INFO",
    console_output: bool = True,
    log_to_file: bool = False,
):
    """
    Set up logging for the application.

    Returns:
        Logger bound to the 'general' component
    """
    PipelineLogger(
        log_dir=log_dir,
        log_level=log_level,
        console_output=console_output,
        log_to_file=log_to_file,
    )
    return get_logger()


def get_logger(component: str = "general"):
    """
    Get a logger for a specific component.

    Args:
        component: Component name (coteach, lof, mil, fusion, data, ...)
    """
    return logger.bind(component=component)


def log_stage_result(stage: str, metric_name: str, value: float, extra: Optional[str] = None):
    """Log a one-line stage summary."""
    message = f"Stage {stage} | {metric_name}: {value:.4f}"
    if extra:
        message += f" | {extra}"
    logger.bind(component=stage).info(message)
