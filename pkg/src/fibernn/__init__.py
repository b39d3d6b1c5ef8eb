"""Simulation toolkit for a time-stretch fiber-optic neural network.

The package trains a small fully-connected classifier on synthetic
modulation-format statistics, folds the trained weights into a single
non-negative pulse schedule, and replays that schedule through a physics
model of the optical computing loop (dispersion, segment modulation,
amplification, compression, detection) to check that optical readouts
reproduce the electronic model's decisions.
"""

__version__ = "0.1.0"
