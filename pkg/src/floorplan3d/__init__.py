"""Thermal-aware 3D-IC floorplanning toolkit.

Places functional units, through-silicon vias, liquid microchannels and air
isolation walls on a stacked chip via staged NSGA-II searches, validated by a
finite-difference RC thermal simulator.
"""

__version__ = "0.1.0"
