"""Uniform exponential decay envelopes for families of analytic semigroups."""

__version__ = "0.1.0"
