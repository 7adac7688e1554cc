"""Point cloud attribute coding with successive subspace graph transforms."""
__version__ = "0.1.0"
