"""Rule-driven layout synthesis, DRC and hotspot-learning toolkit."""

__version__ = "0.1.0"
