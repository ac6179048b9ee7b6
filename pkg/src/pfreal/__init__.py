"""Real solution counts of lossless power flow equations via monodromy and parameter homotopy."""

__version__ = "0.1.0"
