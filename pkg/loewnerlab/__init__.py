"""
loewnerlab - numerical laboratory for Loewner chains and SLE potentials.

Zipper traces, Loewner energies and potentials, Brownian loop masses,
SLE sampling and the deformation identities that tie them together.
"""

__version__ = "0.1.0"
