"""Random dyadic grids, compactly supported wavelets, and empirical dyadic
shift representations of singular integral operators on the line."""

__version__ = "0.1.0"
