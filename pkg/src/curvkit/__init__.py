"""Semi-discrete exterior calculus and zero-curvature verification."""

__version__ = "0.1.0"
