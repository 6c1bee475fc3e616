"""Training objectives: least-squares adversarial loss, L1 cycle and
identity terms, and the VAE term for the shared-latent model."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ops
from .networks import LatentCode
from .tensor import Tensor

__all__ = [
    "LossWeights",
    "adversarial_loss",
    "cycle_loss",
    "identity_loss",
    "unit_vae_loss",
]


@dataclass
class LossWeights:
    """Scalar weights of the composite objective.

    ``lambda_idt == 0`` must skip the identity forward passes entirely;
    the trainer checks the value before building those graph branches.
    """

    lambda_cyc: float = 10.0
    lambda_idt: float = 0.5
    lambda_kl: float = 0.1
    lambda_rec: float = 10.0

    def __post_init__(self):
        for name, value in vars(self).items():
            if value < 0:
                raise ValueError(f"{name} must be >= 0, got {value}")


def adversarial_loss(patch_map: Tensor, target_real: bool) -> Tensor:
    """Least-squares GAN loss: mean (D − t)² with t = 1 for real, 0 for fake.

    The generator side scores its fakes with ``target_real=True``, pushing
    patch values toward 1.
    """
    target = 1.0 if target_real else 0.0
    ref = Tensor(np.full(patch_map.shape, target, dtype=patch_map.dtype))
    return ops.mse_loss(patch_map, ref)


def cycle_loss(original: Tensor, reconstructed: Tensor) -> Tensor:
    """Mean absolute difference between an image and its round trip."""
    return ops.l1_loss(original, reconstructed)


def identity_loss(y: Tensor, g_of_y: Tensor) -> Tensor:
    """Mean absolute difference of an image against its same-domain mapping.

    The caller weights this by ``lambda_idt`` and skips the forward pass
    altogether when the weight is zero.
    """
    return ops.l1_loss(y, g_of_y)


def unit_vae_loss(x: Tensor, z: LatentCode, x_rec: Tensor,
                  weights: LossWeights) -> Tensor:
    """lambda_kl · 0.5 · mean(z_mean²) + lambda_rec · L1(x, x_rec).

    With a unit-variance posterior the KL against the standard normal
    reduces to the half-squared-mean term.
    """
    kl = ops.reduce_mean(z.mean * z.mean) * (0.5 * weights.lambda_kl)
    rec = ops.l1_loss(x, x_rec) * weights.lambda_rec
    return kl + rec
