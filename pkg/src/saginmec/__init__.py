"""Cache-assisted space-air-ground MEC: system model and joint optimiser."""

__version__ = "0.1.0"
