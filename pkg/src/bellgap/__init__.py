"""Bell-inequality analysis for LHV, classical and quantum correlation scenarios."""

__version__ = "0.1.0"
