"""Unpaired photo-to-icon translation at desk scale.

CycleGAN- and shared-latent-style translation models built on an internal
reverse-mode autodiff core, plus the dataset-preparation procedures,
coarse-to-fine training, and a CLI for converting and reconstructing
images.
"""

from .tensor import Tape, Tensor, backward

__version__ = "0.1.0"

__all__ = ["Tensor", "Tape", "backward", "__version__"]
