"""stagedcausal: staged event trees for causal inference on categorical data."""

__version__ = "0.1.0"
__all__ = ["__version__"]
