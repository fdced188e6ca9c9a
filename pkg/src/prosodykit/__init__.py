"""Audiobook prosody toolkit: extraction, prediction, and SSML emission."""

__version__ = "0.1.0"
