"""Simulation of bounded-type thin local sets of the planar Gaussian free field.

Radial SLE(4, -2) explorations, nested CLE(4) labels, two-valued sets
A(-a, b) and a discrete GFF laboratory, each paired with analytic oracles.
"""

import math

#: Height gap for the Green's function normalised as (2 pi)^-1 log(1/|x - y|).
LAMBDA = math.sqrt(math.pi / 8.0)

__version__ = "0.1.0"

__all__ = ["LAMBDA", "__version__"]
