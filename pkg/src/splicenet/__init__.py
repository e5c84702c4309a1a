"""Hybrid noise/spatial/frequency image-splicing detector with a Siamese embedding head."""
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
