"""Conformal maps of quadrilaterals and ring domains by the conjugate function method."""

__version__ = "0.1.0"
