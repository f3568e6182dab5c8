"""Memory-centred multimodal affect inference engine."""

__version__ = "0.1.0"
