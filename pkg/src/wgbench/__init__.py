"""Micro-segmented home network model, tunnel protocol state machine, and
IoT control latency benchmark."""

__version__ = "0.1.0"
