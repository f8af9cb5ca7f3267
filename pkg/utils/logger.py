"""
Logger utility for tracing pipeline stages
"""

import logging
import os
from datetime import datetime
from typing import Any, Dict, Optional


class PipelineLogger:
    """Centralized logging for the raw-granule pipeline"""

    def __init__(self, name: str = "rawband"):
        self.logger = logging.getLogger(name)
        self.logger.setLevel(logging.DEBUG)
        # Library use stays silent until a file handler is attached
        self.logger.propagate = False
        if not self.logger.handlers:
            self.logger.addHandler(logging.NullHandler())
        self.log_path: Optional[str] = None

    def attach_file(self, log_dir: str = "logs", log_file: str = "rawband.log",
                    level: int = logging.DEBUG) -> str:
        """Send records to a log file; returns its path"""
        os.makedirs(log_dir, exist_ok=True)
        log_path = os.path.join(log_dir, log_file)
        if self.log_path == log_path:
            return log_path

        file_handler = logging.FileHandler(log_path, mode='a')
        file_handler.setLevel(level)
        file_handler.setFormatter(logging.Formatter(
            '%(asctime)s - %(levelname)s - %(funcName)s:%(lineno)d - %(message)s'
        ))
        self.logger.addHandler(file_handler)
        self.log_path = log_path

        self.logger.info("=" * 60)
        self.logger.info(f"NEW RUN STARTED - {datetime.now()}")
        self.logger.info("=" * 60)
        return log_path

    def detach_files(self):
        """Close and remove every file handler"""
        for handler in list(self.logger.handlers):
            if isinstance(handler, logging.FileHandler):
                handler.close()
                self.logger.removeHandler(handler)
        self.log_path = None

    @staticmethod
    def _format(message: str, context: Optional[Dict[str, Any]]) -> str:
        if context:
            return f"{message} | Context: {context}"
        return message

    def debug(self, message: str, context: Dict[str, Any] = None):
        self.logger.debug(self._format(message, context), stacklevel=2)

    def info(self, message: str, context: Dict[str, Any] = None):
        self.logger.info(self._format(message, context), stacklevel=2)

    def warning(self, message: str, context: Dict[str, Any] = None):
        self.logger.warning(self._format(message, context), stacklevel=2)

    def error(self, message: str, context: Dict[str, Any] = None, exception: Exception = None):
        """Log error message with optional context and exception"""
        text = self._format(message, context)
        if exception is not None:
            text = f"{text} | Exception: {exception}"
        self.logger.error(text, stacklevel=2)

    def stage_start(self, stage: str, granule_id: str = None, context: Dict[str, Any] = None):
        """Log the start of a pipeline stage"""
        details = {"stage": stage, "granule": granule_id}
        if context:
            details.update(context)
        self.debug(f"STAGE START - {stage.upper()}", details)

    def stage_done(self, stage: str, granule_id: str = None, context: Dict[str, Any] = None):
        details = {"stage": stage, "granule": granule_id}
        if context:
            details.update(context)
        self.debug(f"STAGE DONE - {stage.upper()}", details)

    def shift_applied(self, band: str, reference: str, shift: Any, fill: str):
        self.debug("BAND SHIFT", {
            "band": band,
            "reference": reference,
            "shift": shift,
            "fill": fill,
        })

    def outliers_trimmed(self, couple: str, kept: int, total: int, low: Any, high: Any):
        """Log the outcome of the outlier trimming for one band couple"""
        context = {"couple": couple, "kept": kept, "total": total, "low": low, "high": high}
        if kept < total:
            self.warning("OUTLIERS TRIMMED", context)
        else:
            self.debug("NO OUTLIERS", context)

    def box_dropped(self, box: Any, reason: str):
        self.warning("BOX DROPPED", {"box": box, "reason": reason})

    def granule_verdict(self, granule_id: str, verdict: str, boxes: int, reason: str = None):
        self.info("GRANULE VERDICT", {
            "granule": granule_id,
            "verdict": verdict,
            "boxes": boxes,
            "reason": reason,
        })

    def bench_result(self, method: str, mean_ms: float, runs: int):
        self.info("BENCH RESULT", {"method": method, "mean_ms": round(mean_ms, 3), "runs": runs})

    def exception_caught(self, exception: Exception, location: str, context: Dict[str, Any] = None):
        """Log caught exceptions with full context"""
        error_context = {
            "location": location,
            "exception_type": type(exception).__name__,
            "exception_message": str(exception),
            "additional_context": context
        }
        self.error("EXCEPTION CAUGHT", error_context, exception)


# Global logger instance
pipeline_logger = PipelineLogger()
