"""Tactile force estimation at desk scale.

Physics-based ground-truth force inference from planar pushing, voxelized
encoding of spatially arranged electrode signals, a from-scratch
convolutional force regressor with alignment-weighted losses, reference
baselines, and evaluation metrics, all validated on synthetic data.
"""

__version__ = "0.1.0"
