"""junctionlab: scattering on thin quantum-network junctions."""

__version__ = "0.1.0"
