"""Command-line interface: train, attack, eval and verify."""

from .main import build_parser, main

__all__ = ["build_parser", "main"]
