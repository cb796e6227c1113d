"""Desk-scale remote neuromonitoring relay.

Simulated operating-room acquisition nodes stream averaged evoked-potential
records through a discovery + reliable-datagram layer to an oversight
session with waterfall displays, change detection, chat, and renderers for
both a vector-terminal path and a screen-capture path.
"""

__version__ = "0.1.0"
