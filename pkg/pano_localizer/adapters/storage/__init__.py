"""
Storage Adapters Package
"""

from .reference_cache import DiskReferenceCache, InMemoryReferenceCache
from .scene_adapter import JsonSceneRepository

__all__ = ["DiskReferenceCache", "InMemoryReferenceCache", "JsonSceneRepository"]
