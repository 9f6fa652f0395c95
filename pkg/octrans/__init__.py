"""octrans: optimal control DSL, direct transcription and interior-point solver."""

__version__ = "0.1.0"
