"""
Main Application Entry Point - Pano Localizer
"""

import sys
from pathlib import Path

# Añadir el directorio del proyecto al path
project_root = Path(__file__).parent
sys.path.append(str(project_root))

from pano_localizer.cli import main

if __name__ == "__main__":
    sys.exit(main())
