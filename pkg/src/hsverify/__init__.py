"""Hybrid systems verification toolkit.

Lens-based stores, framed symbolic derivatives, weakest-precondition VC
generation, differential-induction proof tactics, flow certification, and a
seeded numeric falsifier, with a small model language on top.
"""

__version__ = "0.1.0"
