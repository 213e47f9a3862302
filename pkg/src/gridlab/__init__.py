"""Reduced-order frequency-dynamics analysis of SG and grid-forming inverter fleets."""

__version__ = "0.1.0"
