"""sqgen: knowledge-base expansion through similar question generation."""

__version__ = "0.1.0"
