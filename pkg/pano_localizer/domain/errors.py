"""
Domain Errors - Pano Localizer
Excepciones del dominio (todas son ValueError)
"""

from typing import Optional


class SceneSyntaxError(ValueError):
    """El documento de escena no es JSON válido"""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        self.line = line
        self.column = column
        where = f"line {line} column {column}: " if line is not None else ""
        super().__init__(f"{where}{message}")


class SceneSchemaError(ValueError):
    """Campo faltante o de tipo incorrecto en el documento de escena"""


class InvalidSceneError(ValueError):
    """La escena viola invariantes semánticos (ver validate_scene)"""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class InvalidParamsError(ValueError):
    """Parámetros fuera de rango"""


class RasterMismatchError(ValueError):
    """Rasters con dimensiones incompatibles"""


class OutOfBoundsError(ValueError):
    """Pose o posición fuera de los límites de la escena"""


class LocalizationError(ValueError):
    """La localización no se puede ejecutar (query vacía, sin referencias)"""


class QuerySamplingError(ValueError):
    """No se pudieron muestrear suficientes queries válidas"""
