"""CI-embedded exercise engine: hidden feature tests as tickets, plus progress analytics."""

__version__ = "0.1.0"
