"""Deterministic 2D jigsaw manipulation benchmark."""

__version__ = "1.0.0"

from .errors import JigsawBenchError  # noqa: E402

__all__ = ["__version__", "JigsawBenchError"]
