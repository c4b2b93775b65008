"""Simulation and bound evaluation for gradient descent on adversarial SCO problems."""

__version__ = "0.1.0"
