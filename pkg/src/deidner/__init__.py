"""Neural named-entity recognition for de-identifying clinical free text."""

__version__ = "0.1.0"
