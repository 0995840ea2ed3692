"""Digital quantum simulation of a thin-film topological-insulator QPT on an NV register."""

__version__ = "0.1.0"
