"""Simulation of multiparty quantum clock synchronization with singlet states."""

__version__ = "0.1.0"
