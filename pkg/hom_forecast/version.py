"""
This module contains project version information.

.. currentmodule:: hom_forecast.version
"""

try:
    from dunamai import Version, get_version

    __version__ = Version.from_git().serialize()
except RuntimeError:
    __version__ = get_version("hom-forecast").serialize()
except ImportError:
    __version__ = "v2026.1019"
