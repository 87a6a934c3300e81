"""
Lazy-loaded structured logging.

Configures structlog on first use and routes it through the stdlib
logging module to stderr, so CLI summaries on stdout stay clean.
"""

import logging
import sys

import structlog

from .config import LOG_LEVEL

_structlog_configured = False


def get_logger():
    """Get or configure structured logging."""
    global _structlog_configured
    if not _structlog_configured:
        logging.basicConfig(
            format="%(message)s",
            stream=sys.stderr,
            level=getattr(logging, LOG_LEVEL, logging.WARNING),
        )
        structlog.configure(
            processors=[
                structlog.stdlib.filter_by_level,
                structlog.stdlib.add_logger_name,
                structlog.stdlib.add_log_level,
                structlog.stdlib.PositionalArgumentsFormatter(),
                structlog.processors.TimeStamper(fmt="iso"),
                structlog.processors.StackInfoRenderer(),
                structlog.processors.format_exc_info,
                structlog.dev.ConsoleRenderer(colors=False)
            ],
            context_class=dict,
            logger_factory=structlog.stdlib.LoggerFactory(),
            cache_logger_on_first_use=True,
        )
        _structlog_configured = True
    return structlog.get_logger()


def set_log_level(level: str):
    """Override the stdlib root level (used by the CLI --log-level flag)."""
    logging.getLogger().setLevel(getattr(logging, level.upper(), logging.WARNING))
