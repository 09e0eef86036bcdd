"""Python bindings for the negmt toolkit."""

from ._negmt import *  # noqa: F401,F403
from ._negmt import __version__, run_cli

__all__ = [name for name in dir() if not name.startswith("_")]
