"""
Pano Localizer Package
Semantic panorama 6D indoor localization with hexagonal architecture
"""

__version__ = "1.0.0"
__description__ = "6D camera localization against rendered semantic panoramas"
