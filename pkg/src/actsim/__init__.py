"""Simulation of globally driven, ZZ-coupled qubit architectures with actuators."""

__version__ = "0.1.0"
