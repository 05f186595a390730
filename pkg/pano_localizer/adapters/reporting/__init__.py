"""
Reporting Adapters Package
"""

from .report_adapter import FileReportWriter

__all__ = ["FileReportWriter"]
