"""Simulation of a superconducting-qubit quantum GAN: circuits, gradients, training, tomography."""

__version__ = "0.1.0"
