"""VisualSplit: reconstruction-driven representation learning from classical
visual descriptors (edges, colour segments, grey-level histogram)."""

__version__ = "0.1.0"
