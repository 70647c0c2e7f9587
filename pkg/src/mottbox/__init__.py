"""Deterministic hidden-variable simulations of quantum measurement.

Two constructions share one numerical substrate: an EPR spin-correlation
Monte Carlo whose individual outcomes are fixed by apparatus-internal
variables yet reproduce the singlet correlation and violate the Bell
inequality, and a cloud-chamber model in which the positions of the gas
atoms deterministically select the observed alpha track via flux-conserving
reduction of a Born-scattered spherical wave.
"""

from . import bell, chamber, cli, mott, numerics, render

__all__ = ["bell", "chamber", "cli", "mott", "numerics", "render"]
__version__ = "0.1.0"
