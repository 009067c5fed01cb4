"""Compositional symbolic execution for a small heap-manipulating language."""

from . import genheap as _genheap  # noqa: F401  installs the deferred-cell hooks

__version__ = "0.1.0"
