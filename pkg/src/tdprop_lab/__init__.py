"""Jacobi-preconditioned TD learning: spectral theory, optimizers, and a desk-scale agent."""

__version__ = "0.1.0"
