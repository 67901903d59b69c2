"""Political kinship networks: graph construction, clan detection, dynastic indicators and panel analysis."""

__version__ = "0.1.0"
