"""Desk-scale sustainable-fishing stack.

A simulated camera bob streams frames over a framed binary protocol to a
session engine that detects fish, estimates length from depth-gated camera
geometry, checks local regulations and drives an electrically clamped lure.
Everything runs against synthetic inputs and a virtual clock so hour-long
scenarios finish in milliseconds.
"""

from catchkit.images import ImageBuffer

__all__ = ["ImageBuffer"]

__version__ = "0.1.0"
