"""Boundary-vortex laboratory for thin ferromagnetic films.

Submodules are imported lazily by callers; this file stays import-light so the
CLI can adjust thread settings before numpy loads.
"""

__version__ = "0.1.0"
