"""Simulation and analysis toolkit for atomic-frequency-comb photon-echo
storage in warm Rb-87 vapour.

Subpackages cover: static atomic data and comb arithmetic (`atoms`),
velocity-selective optical pumping (`pumping`), D2 probe spectra
(`spectrum`), time-domain storage and recall (`echo`), quantum-performance
metrics (`metrics`), and model fitting (`fitting`).  `cli` provides the
config-driven command-line front end.
"""

__version__ = "0.1.0"
