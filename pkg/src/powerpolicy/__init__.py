"""Context-aware, preference-learning mobile power management with verified policies."""

__version__ = "0.1.0"
