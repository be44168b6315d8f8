"""Pseudospectral solvers and checks for the nonrelativistic limit of a nonlinear Dirac equation."""

__version__ = "0.1.0"
