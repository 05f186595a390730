"""
Pipeline Package
Localization and evaluation pipelines
"""

from .evaluate import EvaluationPipeline
from .localize import LocalizationPipeline

__all__ = ["EvaluationPipeline", "LocalizationPipeline"]
