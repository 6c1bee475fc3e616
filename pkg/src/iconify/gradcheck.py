"""Finite-difference verification of tape gradients.

Checks run in float64: central differences with a 1e-5 step are unreliable
in single precision. Relative error is measured per coordinate as
|analytic − numeric| / max(|analytic|, |numeric|, 1e-8) and the max is
returned.
"""

from __future__ import annotations

from typing import Callable, Mapping

import numpy as np

from .tensor import ShapeError, Tape, Tensor, backward

__all__ = ["grad_check", "grad_check_params", "relative_error"]


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return float(np.max(np.abs(analytic - numeric) / denom))


def grad_check(f: Callable[[Tensor], Tensor], point, step: float = 1e-5) -> float:
    """Max relative error of the tape gradient of ``f`` at ``point``.

    ``f`` maps one tensor to a scalar tensor and must be evaluable without a
    tape (finite-difference probes run unrecorded).
    """
    if step <= 0:
        raise ValueError(f"step must be positive, got {step}")
    base = np.asarray(point.data if isinstance(point, Tensor) else point,
                      dtype=np.float64)

    x = Tensor(base.copy())
    tape = Tape()
    tape.watch(x)
    out = f(x)
    if out.data.ndim != 0:
        raise ShapeError(f"grad_check program must return a scalar, got {out.shape}")
    backward(tape, out)
    analytic = tape.gradient(x).data

    flat = base.reshape(-1)
    numeric = np.empty_like(flat)
    for i in range(flat.size):
        probe = flat.copy()
        probe[i] = flat[i] + step
        f_plus = f(Tensor(probe.reshape(base.shape))).item()
        probe[i] = flat[i] - step
        f_minus = f(Tensor(probe.reshape(base.shape))).item()
        numeric[i] = (f_plus - f_minus) / (2.0 * step)
    return relative_error(analytic, numeric.reshape(base.shape))


def grad_check_params(build_loss: Callable[[Tape | None], Tensor],
                      params: Mapping[str, Tensor],
                      step: float = 1e-5) -> dict[str, float]:
    """Finite-difference check of a loss against every named parameter.

    ``build_loss(tape)`` evaluates the objective with the parameters'
    current buffer contents, watching them on ``tape`` when given one.
    Parameters must be float64. Buffers are perturbed in place between
    (unrecorded) evaluations and restored afterwards.
    """
    tape = Tape()
    out = build_loss(tape)
    backward(tape, out)
    grads = {name: tape.gradient(p).data for name, p in params.items()}

    errors: dict[str, float] = {}
    for name, p in params.items():
        buf = p.data.reshape(-1)
        numeric = np.empty_like(buf)
        for i in range(buf.size):
            keep = buf[i]
            buf[i] = keep + step
            f_plus = build_loss(None).item()
            buf[i] = keep - step
            f_minus = build_loss(None).item()
            buf[i] = keep
            numeric[i] = (f_plus - f_minus) / (2.0 * step)
        errors[name] = relative_error(grads[name].reshape(-1), numeric)
    return errors
