"""Simulator for delegated quantum sensing with asymmetric information gain."""

__version__ = "0.1.0"
