"""Centralized logging configuration using AWS Lambda Powertools."""

import sys
from typing import Any

from aws_lambda_powertools import Logger

SERVICE_NAME = "critical-wave-lab"

# Reports go to stdout, structured logs to stderr
logger = Logger(service=SERVICE_NAME, stream=sys.stderr)


def get_logger(name: str) -> Logger:
    """
    Get a logger instance for a specific module.

    Args:
        name: The name of the module requesting the logger

    Returns:
        Logger: Configured logger instance
    """
    return Logger(service=SERVICE_NAME, stream=sys.stderr, name=name)


def log_run_event(subcommand: str, manifest: dict[str, Any]) -> None:
    """
    Log one structured record per command line invocation.

    Args:
        subcommand: Name of the subcommand being run
        manifest: Resolved experiment manifest
    """
    logger.info(
        "Lab invocation",
        extra={
            "subcommand": subcommand,
            "seed": manifest.get("seed"),
            "dimension": manifest.get("dimension"),
            "out_dir": manifest.get("out_dir"),
        },
    )
