"""Time-slotted simulator for opportunistic routing in LEO constellations."""
__version__ = "0.1.0"
