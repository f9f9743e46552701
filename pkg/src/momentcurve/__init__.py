"""Computable objects around l^2 decoupling for the moment curve."""

__version__ = "0.1.0"
