"""Weighted-particle samplers for interpolations between diffusion models.

Guided reverse-time SDEs with Feynman-Kac reweighting (geometric average,
Fisher-Rao / Hellinger mixture, linear mixture), a birth-death realization of
the reaction term, a 1-D grid oracle and geodesic utilities.
"""

__version__ = "0.1.0"
VERSION_STRING = "v" + __version__
