#!/usr/bin/env python3
"""
Centralized logging configuration for lagcal.
Provides consistent logging across the numerical modules and the scenario runner.
"""

import os
import sys
import json
import logging
import threading
import time
from datetime import datetime
from functools import wraps
from pathlib import Path
from typing import Any, Dict, Optional


def _default_log_dir() -> Path:
    return Path(os.environ.get("LAGCAL_LOG_DIR", Path.cwd() / "logs"))


class LagCalLogger:
    """Centralized logger for lagcal."""

    def __init__(self, name: str = "lagcal", log_dir: Optional[str] = None):
        """Initialize logger."""
        self.name = name
        self.log_dir = Path(log_dir) if log_dir else _default_log_dir()
        self.log_dir.mkdir(parents=True, exist_ok=True)

        self.logger = logging.getLogger(name)
        self.logger.setLevel(logging.DEBUG)
        self.logger.propagate = False
        self.logger.handlers.clear()
        self._setup_handlers()

        self.performance_data: Dict[str, Dict[str, Any]] = {}
        self._json_loggers: Dict[str, logging.Logger] = {}

    def _setup_handlers(self):
        """Setup logging handlers."""
        console_handler = logging.StreamHandler(sys.stdout)
        console_handler.setLevel(logging.INFO)
        console_handler.setFormatter(logging.Formatter(
            '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
        ))
        self.logger.addHandler(console_handler)

        file_format = logging.Formatter(
            '%(asctime)s - %(name)s - %(levelname)s - %(funcName)s:%(lineno)d - %(message)s'
        )
        file_handler = logging.FileHandler(self.log_dir / f"{self.name}.log")
        file_handler.setLevel(logging.DEBUG)
        file_handler.setFormatter(file_format)
        self.logger.addHandler(file_handler)

        error_handler = logging.FileHandler(self.log_dir / f"{self.name}_errors.log")
        error_handler.setLevel(logging.ERROR)
        error_handler.setFormatter(file_format)
        self.logger.addHandler(error_handler)

    def set_console_level(self, level: int):
        """Change the console verbosity (file handlers keep DEBUG)."""
        for handler in self.logger.handlers:
            if isinstance(handler, logging.StreamHandler) and not isinstance(handler, logging.FileHandler):
                handler.setLevel(level)

    def info(self, message: str, *args):
        self.logger.info(message, *args)

    def debug(self, message: str, *args):
        self.logger.debug(message, *args)

    def warning(self, message: str, *args):
        self.logger.warning(message, *args)

    def error(self, message: str, *args):
        self.logger.error(message, *args)

    def exception(self, message: str, *args):
        self.logger.exception(message, *args)

    def _json_sink(self, channel: str, filename: str) -> logging.Logger:
        """Return the cached logger writing raw JSON lines to ``filename``."""
        sink = self._json_loggers.get(channel)
        if sink is None:
            sink = logging.getLogger(f"{self.name}.{channel}")
            sink.setLevel(logging.INFO)
            sink.propagate = False
            sink.handlers.clear()
            handler = logging.FileHandler(self.log_dir / filename)
            handler.setFormatter(logging.Formatter('%(message)s'))
            sink.addHandler(handler)
            self._json_loggers[channel] = sink
        return sink

    def log_performance(self, operation: str, duration: float, **metadata):
        """Log performance data."""
        perf_data = {
            "operation": operation,
            "duration": duration,
            "timestamp": datetime.now().isoformat(),
            **metadata,
        }
        self.performance_data[operation] = perf_data
        self._json_sink("performance", f"{self.name}_performance.log").info(
            json.dumps(perf_data, default=str)
        )

    def log_functional(self, name: str, value: float, **residuals):
        """Log a computed functional with its residuals."""
        data = {
            "functional": name,
            "value": value,
            "residuals": residuals,
            "timestamp": datetime.now().isoformat(),
        }
        self.debug("%s = %.12g", name, value)
        self._json_sink("functionals", "functionals.log").info(json.dumps(data, default=float))

    def log_scenario(self, report: Dict[str, Any]):
        """Log a finished scenario report."""
        data = {"report": report, "timestamp": datetime.now().isoformat()}
        self._json_sink("scenarios", "scenarios.log").info(json.dumps(data, default=str))

    def log_system_event(self, event_type: str, message: str, **metadata):
        """Log system events."""
        data = {
            "event_type": event_type,
            "message": message,
            "timestamp": datetime.now().isoformat(),
            **metadata,
        }
        self._json_sink("system", "system_events.log").info(json.dumps(data, default=str))

    def get_performance_summary(self) -> Dict[str, Any]:
        """Get performance summary."""
        if not self.performance_data:
            return {}
        operations = list(self.performance_data.values())
        durations = [op.get("duration", 0.0) for op in operations]
        return {
            "total_operations": len(operations),
            "average_duration": sum(durations) / len(durations),
            "min_duration": min(durations),
            "max_duration": max(durations),
            "operations": operations,
        }


_loggers: Dict[str, LagCalLogger] = {}
_loggers_lock = threading.Lock()


def get_logger(name: str = "lagcal") -> LagCalLogger:
    """Get the cached logger instance for ``name``."""
    with _loggers_lock:
        logger = _loggers.get(name)
        if logger is None:
            logger = LagCalLogger(name)
            _loggers[name] = logger
        return logger


def set_console_level(level: int):
    """Apply a console level to every logger created so far."""
    with _loggers_lock:
        for logger in _loggers.values():
            logger.set_console_level(level)


class PerformanceLogger:
    """Context manager for logging performance."""

    def __init__(self, logger: LagCalLogger, operation: str, **metadata):
        self.logger = logger
        self.operation = operation
        self.metadata = metadata
        self.start_time = None
        self.duration = 0.0

    def __enter__(self):
        self.start_time = time.perf_counter()
        self.logger.debug(f"Starting {self.operation}")
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.duration = time.perf_counter() - self.start_time
        self.logger.log_performance(self.operation, self.duration, **self.metadata)
        if exc_type:
            self.logger.error(f"Error in {self.operation}: {exc_val}")
        else:
            self.logger.debug(f"Completed {self.operation} in {self.duration:.3f}s")
        return False


def log_performance(operation_name: Optional[str] = None, **metadata):
    """Decorator for automatic performance logging."""
    def decorator(func):
        @wraps(func)
        def wrapper(*args, **kwargs):
            logger = get_logger()
            op_name = operation_name or f"{func.__module__}.{func.__name__}"
            with PerformanceLogger(logger, op_name, **metadata):
                return func(*args, **kwargs)
        return wrapper
    return decorator
