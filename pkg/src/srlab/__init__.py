"""Mixed finite-element laboratory for the 2D Stokes resolvent problem."""

__version__ = "0.1.0"
