"""
Domain Package
Scene model, spherical camera, renderer, matcher, refiner and evaluation
"""

from .entities import Pose, Scene
from .services import LocalizationService, ReferenceSetBuilder

__all__ = ["Pose", "Scene", "LocalizationService", "ReferenceSetBuilder"]
