"""Toolkit for the FA-2f kinetically constrained model and 2-neighbour bootstrap percolation."""

__version__ = "0.1.0"
