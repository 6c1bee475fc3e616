"""Adam with bias correction, the flat-then-linear-decay learning-rate
schedule, and the generated-image history pool."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor

__all__ = ["AdamState", "adam_step", "lr_schedule", "ImagePool", "pool_query"]


class MissingGradientError(KeyError):
    """A parameter has no gradient in the supplied map."""


class AdamState:
    """First/second moment buffers plus the step counter for one net."""

    def __init__(self, params: dict[str, Tensor], lr: float = 2e-4,
                 beta1: float = 0.5, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step = 0
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}


def adam_step(params: dict[str, Tensor], grads, state: AdamState) -> None:
    """Standard bias-corrected Adam update, applied in place.

    ``grads`` maps parameter names to gradient arrays or tensors and must
    cover every parameter.
    """
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for name, p in params.items():
        if name not in grads:
            raise MissingGradientError(f"no gradient for parameter {name!r}")
        g = grads[name]
        g = g.data if isinstance(g, Tensor) else np.asarray(g)
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        update = (m / c1) / (np.sqrt(v / c2) + state.eps)
        p.data -= np.asarray(state.lr, dtype=p.data.dtype) * update.astype(p.data.dtype)


def lr_schedule(step: int, total_steps: int, base_lr: float) -> float:
    """Constant for the first half, then linear decay to 0 at total_steps."""
    if step < 0 or step > total_steps:
        raise ValueError(f"step {step} outside [0, {total_steps}]")
    half = total_steps / 2.0
    if step <= half:
        return base_lr
    return base_lr * (total_steps - step) / (total_steps - half)


class ImagePool:
    """Fixed-capacity history of generated images.

    Under capacity, fresh images are stored and returned unchanged. At
    capacity each fresh image is, with probability 0.5, swapped against a
    random stored one: the stored image is returned and the fresh one takes
    its slot.
    """

    def __init__(self, capacity: int = 50, seed: int = 0):
        self.capacity = capacity
        self.buffer: list[np.ndarray] = []
        self.rng = np.random.default_rng(seed)

    def query(self, fresh: np.ndarray) -> np.ndarray:
        out = []
        for img in fresh:
            if len(self.buffer) < self.capacity:
                self.buffer.append(img.copy())
                out.append(img)
            elif self.rng.random() < 0.5:
                idx = int(self.rng.integers(0, self.capacity))
                out.append(self.buffer[idx])
                self.buffer[idx] = img.copy()
            else:
                out.append(img)
        return np.stack(out)


def pool_query(pool: ImagePool, fresh) -> np.ndarray:
    arr = fresh.data if isinstance(fresh, Tensor) else np.asarray(fresh)
    return pool.query(arr)
