"""Discrete-event emulation of smartphone mobile ad-hoc networks."""

__version__ = "0.1.0"
