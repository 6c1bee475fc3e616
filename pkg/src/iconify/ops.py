"""Differentiable array ops: convolution, normalization, activations,
padding, reductions, and area resizing.

Convolutions are lowered to window extraction + ``tensordot`` so the heavy
lifting runs as one GEMM. ``conv_transpose2d`` shares its core with conv2d's
input gradient, which is what makes the two exact adjoints of each other.
All layouts are N×C×H×W; kernels are K×C×kh×kw for conv2d and the *same*
layout (first axis = input channels) for its transpose.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor import NonFiniteError, ShapeError, Tensor, record

__all__ = [
    "conv2d",
    "conv_transpose2d",
    "conv2d_output_size",
    "conv_transpose2d_output_size",
    "instance_norm",
    "relu",
    "leaky_relu",
    "tanh",
    "sigmoid",
    "activation",
    "pad_reflect",
    "add_channel_bias",
    "reduce_mean",
    "reduce_sum",
    "l1_loss",
    "mse_loss",
    "reduce_and_losses",
    "resize_area",
]


def _require_rank4(x: Tensor, name: str):
    if x.data.ndim != 4:
        raise ShapeError(f"{name} expects a rank-4 N×C×H×W tensor, got shape {x.shape}")


# -- convolution cores (plain arrays) ---------------------------------------


def _windows(xp: np.ndarray, kh: int, kw: int, stride: int) -> np.ndarray:
    """Strided view N×C×H'×W'×kh×kw over a padded input."""
    w = sliding_window_view(xp, (kh, kw), axis=(2, 3))
    return w[:, :, ::stride, ::stride]


def _corr_forward(xp: np.ndarray, kernels: np.ndarray, stride: int) -> np.ndarray:
    win = _windows(xp, kernels.shape[2], kernels.shape[3], stride)
    out = np.tensordot(win, kernels, axes=([1, 4, 5], [1, 2, 3]))
    return np.ascontiguousarray(out.transpose(0, 3, 1, 2))


def _corr_kernel_grad(xp: np.ndarray, g: np.ndarray, kh: int, kw: int, stride: int) -> np.ndarray:
    """d(conv)/d(kernels): correlate output grad against input windows."""
    win = _windows(xp, kh, kw, stride)
    return np.tensordot(g, win, axes=([0, 2, 3], [0, 2, 3]))


def _full_corr(y: np.ndarray, kernels: np.ndarray, stride: int) -> np.ndarray:
    """Stride-dilate ``y``, pad by kernel-1, correlate with flipped kernels.

    This is the adjoint of the stride-``stride`` correlation with the same
    kernels; output spatial size is (H−1)·stride + kh (before any cropping).
    """
    n, k, h, w = y.shape
    kk, c, kh, kw = kernels.shape
    if k != kk:
        raise ShapeError(
            f"channel mismatch: input has {k} channels, kernels expect {kk}"
        )
    if stride > 1:
        dil = np.zeros((n, k, (h - 1) * stride + 1, (w - 1) * stride + 1), dtype=y.dtype)
        dil[:, :, ::stride, ::stride] = y
    else:
        dil = y
    dil = np.pad(dil, ((0, 0), (0, 0), (kh - 1, kh - 1), (kw - 1, kw - 1)))
    flipped = kernels[:, :, ::-1, ::-1].transpose(1, 0, 2, 3)  # C×K×kh×kw
    return _corr_forward(dil, flipped, 1)


# -- conv2d ------------------------------------------------------------------


def conv2d_output_size(size: int, kernel: int, stride: int, padding: int) -> int:
    return (size + 2 * padding - kernel) // stride + 1


def conv2d(x: Tensor, kernels: Tensor, stride: int = 1, padding: int = 0,
           pad_mode: str = "zero") -> Tensor:
    """2-d cross-correlation of an N×C×H×W input with K×C×kh×kw kernels.

    ``pad_mode`` is "zero" or "reflect"; reflect padding records as its own
    tape node (pad_reflect) followed by an unpadded convolution.
    """
    _require_rank4(x, "conv2d")
    _require_rank4(kernels, "conv2d kernels")
    if stride < 1:
        raise ShapeError(f"conv2d stride must be positive, got {stride}")
    if pad_mode == "reflect":
        if padding:
            x = pad_reflect(x, padding)
        return conv2d(x, kernels, stride=stride, padding=0)
    if pad_mode != "zero":
        raise ValueError(f"unknown pad_mode {pad_mode!r}")

    n, c, h, w = x.shape
    k, ck, kh, kw = kernels.shape
    if c != ck:
        raise ShapeError(
            f"conv2d channel mismatch: input C={c}, kernels expect C={ck}"
        )
    if h + 2 * padding < kh or w + 2 * padding < kw:
        raise ShapeError(
            f"conv2d: padded input {h + 2 * padding}×{w + 2 * padding} is "
            f"smaller than the {kh}×{kw} kernel"
        )

    xp = x.data
    if padding:
        xp = np.pad(xp, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    out = _corr_forward(xp, kernels.data, stride)

    kern_arr = kernels.data

    def grad_x(g):
        gx = _full_corr(g, kern_arr, stride)
        hp, wp = xp.shape[2], xp.shape[3]
        short_h, short_w = hp - gx.shape[2], wp - gx.shape[3]
        if short_h or short_w:
            # rows/cols never covered by a window get zero gradient
            gx = np.pad(gx, ((0, 0), (0, 0), (0, short_h), (0, short_w)))
        if padding:
            gx = gx[:, :, padding:padding + h, padding:padding + w]
        return np.ascontiguousarray(gx)

    def grad_k(g):
        return _corr_kernel_grad(xp, g, kh, kw, stride)

    return record(out, [(x, grad_x), (kernels, grad_k)])


# -- conv_transpose2d --------------------------------------------------------


def conv_transpose2d_output_size(size: int, kernel: int, stride: int, padding: int) -> int:
    return (size - 1) * stride - 2 * padding + kernel


def conv_transpose2d(x: Tensor, kernels: Tensor, stride: int = 1,
                     padding: int = 0) -> Tensor:
    """Exact adjoint of ``conv2d`` with the same kernels/stride/padding.

    Kernels keep the conv2d layout K×C×kh×kw: the input here has K channels
    and the output has C. Output spatial size is (H−1)·stride − 2p + kh.
    """
    _require_rank4(x, "conv_transpose2d")
    _require_rank4(kernels, "conv_transpose2d kernels")
    if stride < 1:
        raise ShapeError(f"conv_transpose2d stride must be positive, got {stride}")
    n, k, h, w = x.shape
    kk, c, kh, kw = kernels.shape
    if k != kk:
        raise ShapeError(
            f"conv_transpose2d channel mismatch: input C={k}, kernels expect C={kk}"
        )
    out_h = conv_transpose2d_output_size(h, kh, stride, padding)
    out_w = conv_transpose2d_output_size(w, kw, stride, padding)
    if out_h < 1 or out_w < 1:
        raise ShapeError(
            f"conv_transpose2d: output size {out_h}×{out_w} is empty"
        )

    full = _full_corr(x.data, kernels.data, stride)
    if padding:
        full = full[:, :, padding:padding + out_h, padding:padding + out_w]
    out = np.ascontiguousarray(full)

    kern_arr = kernels.data
    x_arr = x.data

    def grad_x(g):
        gp = g
        if padding:
            gp = np.pad(gp, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
        return _corr_forward(gp, kern_arr, stride)

    def grad_k(g):
        gp = g
        if padding:
            gp = np.pad(gp, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
        return _corr_kernel_grad(gp, x_arr, kh, kw, stride)

    return record(out, [(x, grad_x), (kernels, grad_k)])


# -- instance normalization --------------------------------------------------


def instance_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Per-(sample, channel) normalization: gain·(x−μ)/√(σ²+eps) + bias."""
    _require_rank4(x, "instance_norm")
    c = x.shape[1]
    if gain.shape != (c,) or bias.shape != (c,):
        raise ShapeError(
            f"instance_norm: gain/bias must have shape ({c},), got "
            f"{gain.shape} and {bias.shape}"
        )
    xd = x.data
    mu = xd.mean(axis=(2, 3), keepdims=True)
    var = xd.var(axis=(2, 3), keepdims=True)
    inv = 1.0 / np.sqrt(var + np.asarray(eps, dtype=xd.dtype))
    xn = (xd - mu) * inv
    g4 = gain.data[None, :, None, None]
    out = g4 * xn + bias.data[None, :, None, None]

    def grad_x(g):
        gm = g.mean(axis=(2, 3), keepdims=True)
        gxm = (g * xn).mean(axis=(2, 3), keepdims=True)
        return g4 * inv * (g - gm - xn * gxm)

    def grad_gain(g):
        return (g * xn).sum(axis=(0, 2, 3))

    def grad_bias(g):
        return g.sum(axis=(0, 2, 3))

    return record(out, [(x, grad_x), (gain, grad_gain), (bias, grad_bias)])


# -- activations -------------------------------------------------------------


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return record(np.where(mask, x.data, 0), [(x, lambda g: g * mask)])


def leaky_relu(x: Tensor, slope: float = 0.2) -> Tensor:
    xd = x.data
    out = np.where(xd > 0, xd, xd * np.asarray(slope, dtype=xd.dtype))
    # subgradient 0 exactly at the kink
    factor = np.where(xd > 0, 1.0, np.where(xd < 0, slope, 0.0)).astype(xd.dtype)
    return record(out, [(x, lambda g: g * factor)])


def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.data)
    return record(y, [(x, lambda g: g * (1.0 - y * y))])


def sigmoid(x: Tensor) -> Tensor:
    y = 1.0 / (1.0 + np.exp(-x.data))
    return record(y, [(x, lambda g: g * y * (1.0 - y))])


def activation(x: Tensor, kind: str, slope: float = 0.2) -> Tensor:
    """Dispatch on kind ∈ {relu, leaky_relu, tanh, sigmoid}."""
    if kind == "relu":
        return relu(x)
    if kind == "leaky_relu":
        return leaky_relu(x, slope)
    if kind == "tanh":
        return tanh(x)
    if kind == "sigmoid":
        return sigmoid(x)
    raise ValueError(f"unknown activation kind {kind!r}")


# -- reflect padding ---------------------------------------------------------


def pad_reflect(x: Tensor, width: int) -> Tensor:
    """Mirror-pad both spatial dims without repeating the edge pixel."""
    _require_rank4(x, "pad_reflect")
    if width < 0:
        raise ShapeError(f"pad_reflect width must be >= 0, got {width}")
    if width == 0:
        return x
    n, c, h, w = x.shape
    if width >= h or width >= w:
        raise ShapeError(
            f"pad_reflect width {width} too large for spatial dims {h}×{w}"
        )
    out = np.pad(x.data, ((0, 0), (0, 0), (width, width), (width, width)),
                 mode="reflect")

    def grad_x(g):
        # fold each mirrored strip back onto its interior source rows/cols
        core = g[:, :, width:width + h, :].copy()
        core[:, :, 1:width + 1, :] += g[:, :, width - 1::-1, :]
        core[:, :, h - width - 1:h - 1, :] += g[:, :, :width + h - 1:-1, :]
        inner = core[:, :, :, width:width + w].copy()
        inner[:, :, :, 1:width + 1] += core[:, :, :, width - 1::-1]
        inner[:, :, :, w - width - 1:w - 1] += core[:, :, :, :width + w - 1:-1]
        return inner

    return record(out, [(x, grad_x)])


# -- channel bias ------------------------------------------------------------


def add_channel_bias(x: Tensor, bias: Tensor) -> Tensor:
    _require_rank4(x, "add_channel_bias")
    c = x.shape[1]
    if bias.shape != (c,):
        raise ShapeError(
            f"add_channel_bias: bias must have shape ({c},), got {bias.shape}"
        )
    out = x.data + bias.data[None, :, None, None]
    return record(out, [(x, lambda g: g),
                        (bias, lambda g: g.sum(axis=(0, 2, 3)))])


# -- reductions and distance losses ------------------------------------------


def reduce_mean(x: Tensor) -> Tensor:
    n = x.size
    dt = x.dtype

    def grad(g):
        return np.full(x.shape, g / n, dtype=dt)

    return record(np.asarray(x.data.mean(), dtype=dt), [(x, grad)])


def reduce_sum(x: Tensor) -> Tensor:
    dt = x.dtype

    def grad(g):
        return np.full(x.shape, g, dtype=dt)

    return record(np.asarray(x.data.sum(), dtype=dt), [(x, grad)])


def l1_loss(a: Tensor, b: Tensor) -> Tensor:
    """Mean absolute difference; subgradient 0 where a == b."""
    if a.shape != b.shape:
        raise ShapeError(f"l1_loss: shapes {a.shape} and {b.shape} differ")
    diff = a.data - b.data
    n = diff.size
    out = np.asarray(np.abs(diff).mean(), dtype=diff.dtype)
    sign = np.sign(diff)

    return record(out, [(a, lambda g: sign * (g / n)),
                        (b, lambda g: sign * (-g / n))])


def mse_loss(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"mse_loss: shapes {a.shape} and {b.shape} differ")
    diff = a.data - b.data
    n = diff.size
    out = np.asarray((diff * diff).mean(), dtype=diff.dtype)

    return record(out, [(a, lambda g: diff * (2.0 * g / n)),
                        (b, lambda g: diff * (-2.0 * g / n))])


def reduce_and_losses(a: Tensor, b: Tensor | None = None, kind: str = "mean") -> Tensor:
    """Dispatch on kind ∈ {mean, sum, l1, mse}; l1/mse need both operands."""
    if kind == "mean":
        return reduce_mean(a)
    if kind == "sum":
        return reduce_sum(a)
    if b is None:
        raise ValueError(f"reduction kind {kind!r} needs a second operand")
    if kind == "l1":
        return l1_loss(a, b)
    if kind == "mse":
        return mse_loss(a, b)
    raise ValueError(f"unknown reduction kind {kind!r}")


# -- area resize -------------------------------------------------------------


def resize_area(x: Tensor, target) -> Tensor:
    """Block-mean downsample / nearest-neighbor upsample to ``target`` H'×W'.

    Ratios must be integral in each dimension (the only case stage resizing
    ever needs); same-size is the identity.
    """
    _require_rank4(x, "resize_area")
    th, tw = int(target[0]), int(target[1])
    if th < 1 or tw < 1:
        raise ShapeError(f"resize_area target must be >= 1×1, got {th}×{tw}")
    n, c, h, w = x.shape
    if (th, tw) == (h, w):
        return x
    if th <= h and tw <= w:
        if h % th or w % tw:
            raise ShapeError(
                f"resize_area: {h}×{w} -> {th}×{tw} is not an integer factor"
            )
        fh, fw = h // th, w // tw
        out = x.data.reshape(n, c, th, fh, tw, fw).mean(axis=(3, 5))

        def grad_down(g):
            g = g / np.asarray(fh * fw, dtype=g.dtype)
            return np.repeat(np.repeat(g, fh, axis=2), fw, axis=3)

        return record(out, [(x, grad_down)])
    if th >= h and tw >= w:
        if th % h or tw % w:
            raise ShapeError(
                f"resize_area: {h}×{w} -> {th}×{tw} is not an integer factor"
            )
        fh, fw = th // h, tw // w
        out = np.repeat(np.repeat(x.data, fh, axis=2), fw, axis=3)

        def grad_up(g):
            return g.reshape(n, c, h, fh, w, fw).sum(axis=(3, 5))

        return record(out, [(x, grad_up)])
    raise ShapeError(
        f"resize_area: mixed up/down resize {h}×{w} -> {th}×{tw} unsupported"
    )
