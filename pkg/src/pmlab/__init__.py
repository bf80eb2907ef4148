"""Desk-scale laboratory for pointer-machine and semi-group lower-bound
constructions: hard-instance generators, exact and Monte-Carlo property
checks, bound certificates and reference indexing structures."""

__version__ = "0.1.0"
