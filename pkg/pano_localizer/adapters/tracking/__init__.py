"""
Tracking Adapters Package
"""

from .mlflow_adapter import MLflowTracker

__all__ = ["MLflowTracker"]
