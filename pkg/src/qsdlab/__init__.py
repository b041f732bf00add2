"""Quasi-stationary distributions of Kummer diffusions: closed forms and numerics."""

__version__ = "0.1.0"
