"""Simulator of an SLA-driven server cluster with admission control and
dynamic server allocation."""

__version__ = "0.1.0"
