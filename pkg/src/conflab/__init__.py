"""conflab: a desk-scale numerical laboratory for conformally invariant
planar models (self-avoiding walks, critical bond percolation, planar
Brownian hulls, reflected diffusions, and Loewner evolutions)."""

__version__ = "0.1.0"
