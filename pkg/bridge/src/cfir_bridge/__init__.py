"""Scoring server speaking the cfir external-model protocol."""

__version__ = "0.1.0"

from .server import CrossEncoderScorer, FakeOverlapScorer, handle_line, serve_stream

__all__ = ["CrossEncoderScorer", "FakeOverlapScorer", "handle_line", "serve_stream"]
