"""
Adapters Package
External integrations following hexagonal architecture
"""

__all__ = []
