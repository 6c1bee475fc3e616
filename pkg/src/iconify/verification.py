"""User-facing numerical verification: naive-loop convolution oracles,
adjointness probes, and finite-difference gradient checks over every
differentiable op plus composed paths.

The naive oracles are direct six-nested-loop summations kept deliberately
independent of the strided/GEMM implementation they vouch for.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import ops
from .gradcheck import grad_check, grad_check_params, relative_error
from .losses import LossWeights
from .networks import build_discriminator, build_generator, generator_forward
from .tensor import Tape, Tensor, backward

__all__ = [
    "CheckResult",
    "naive_conv2d",
    "naive_conv_transpose2d",
    "oracle_checks",
    "gradient_checks",
    "objective_param_check",
    "run_all",
    "format_table",
]


@dataclass
class CheckResult:
    name: str
    value: float
    threshold: float

    @property
    def passed(self) -> bool:
        return self.value < self.threshold


def naive_conv2d(x: np.ndarray, kernels: np.ndarray, stride: int,
                 padding: int) -> np.ndarray:
    """Direct summation in float64; the independent oracle for conv2d."""
    x = np.asarray(x, dtype=np.float64)
    kernels = np.asarray(kernels, dtype=np.float64)
    n, c, h, w = x.shape
    k, _, kh, kw = kernels.shape
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    oh = (h + 2 * padding - kh) // stride + 1
    ow = (w + 2 * padding - kw) // stride + 1
    out = np.zeros((n, k, oh, ow))
    for ni in range(n):
        for ki in range(k):
            for i in range(oh):
                for j in range(ow):
                    acc = 0.0
                    for ci in range(c):
                        for u in range(kh):
                            for v in range(kw):
                                acc += (xp[ni, ci, i * stride + u, j * stride + v]
                                        * kernels[ki, ci, u, v])
                    out[ni, ki, i, j] = acc
    return out


def naive_conv_transpose2d(y: np.ndarray, kernels: np.ndarray, stride: int,
                           padding: int) -> np.ndarray:
    """Direct scatter in float64; the independent oracle for the adjoint."""
    y = np.asarray(y, dtype=np.float64)
    kernels = np.asarray(kernels, dtype=np.float64)
    n, k, h, w = y.shape
    _, c, kh, kw = kernels.shape
    oh = (h - 1) * stride + kh
    ow = (w - 1) * stride + kw
    full = np.zeros((n, c, oh, ow))
    for ni in range(n):
        for ki in range(k):
            for i in range(h):
                for j in range(w):
                    val = y[ni, ki, i, j]
                    for ci in range(c):
                        for u in range(kh):
                            for v in range(kw):
                                full[ni, ci, i * stride + u, j * stride + v] += (
                                    val * kernels[ki, ci, u, v])
    out_h = oh - 2 * padding
    out_w = ow - 2 * padding
    return full[:, :, padding:padding + out_h, padding:padding + out_w]


def _conv_combos(rng, count, max_size):
    combos = []
    while len(combos) < count:
        k = int(rng.integers(1, 5))
        stride = int(rng.integers(1, 4))
        pad = int(rng.integers(0, 3))
        n = int(rng.integers(1, 3))
        c = int(rng.integers(1, 4))
        ko = int(rng.integers(1, 5))
        h = int(rng.integers(k, max_size + 1))
        w = int(rng.integers(k, max_size + 1))
        if h + 2 * pad < k or w + 2 * pad < k:
            continue
        combos.append((n, c, ko, h, w, k, stride, pad))
    return combos


def oracle_checks(fast: bool = False, seed: int = 0) -> list[CheckResult]:
    """conv2d / conv_transpose2d against the naive oracles, plus the
    inner-product adjointness identity, over randomized combinations."""
    rng = np.random.default_rng(seed)
    count = 8 if fast else 24
    max_size = 16 if fast else 32
    conv_err = 0.0
    convt_err = 0.0
    adj_err = 0.0
    for n, c, ko, h, w, k, stride, pad in _conv_combos(rng, count, max_size):
        x = rng.standard_normal((n, c, h, w))
        kern = rng.standard_normal((ko, c, k, k))
        mine = ops.conv2d(Tensor(x), Tensor(kern), stride, pad).data
        ref = naive_conv2d(x, kern, stride, pad)
        conv_err = max(conv_err, float(np.max(np.abs(mine - ref))))

        y = rng.standard_normal(mine.shape)
        if (y.shape[2] - 1) * stride + k - 2 * pad >= 1:
            tmine = ops.conv_transpose2d(Tensor(y), Tensor(kern), stride, pad).data
            tref = naive_conv_transpose2d(y, kern, stride, pad)
            convt_err = max(convt_err, float(np.max(np.abs(tmine - tref))))
            # adjoint identity on the canonical shape pair
            x2 = rng.standard_normal(tmine.shape)
            fwd = ops.conv2d(Tensor(x2), Tensor(kern), stride, pad).data
            lhs = float((fwd * y).sum())
            rhs = float((x2 * tmine).sum())
            adj_err = max(adj_err,
                          abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-8))
    return [
        CheckResult("conv2d_vs_naive_oracle", conv_err, 1e-6),
        CheckResult("conv_transpose2d_vs_naive_oracle", convt_err, 1e-6),
        CheckResult("adjoint_inner_product", adj_err, 1e-6),
    ]


def _linear_probe(rng, shape):
    return Tensor(rng.standard_normal(shape))


def gradient_checks(fast: bool = False, seed: int = 1) -> list[CheckResult]:
    """Finite-difference checks per op (smooth paths held to 1e-6) plus the
    composed conv→norm→tanh→l1 path and a full generator forward."""
    rng = np.random.default_rng(seed)
    results = []

    kern = Tensor(rng.standard_normal((3, 2, 3, 3)))
    x0 = Tensor(rng.standard_normal((1, 2, 6, 6)))
    proj = _linear_probe(rng, (1, 3, 3, 3))
    results.append(CheckResult("conv2d_input_grad", grad_check(
        lambda t: ops.reduce_sum(ops.conv2d(t, kern, 2, 1) * proj), x0), 1e-6))
    results.append(CheckResult("conv2d_kernel_grad", grad_check(
        lambda t: ops.reduce_sum(ops.conv2d(x0, t, 2, 1) * proj), kern), 1e-6))

    y0 = Tensor(rng.standard_normal((1, 3, 3, 3)))
    projt = _linear_probe(rng, (1, 2, 5, 5))
    results.append(CheckResult("conv_transpose2d_input_grad", grad_check(
        lambda t: ops.reduce_sum(ops.conv_transpose2d(t, kern, 2, 1) * projt), y0),
        1e-6))
    results.append(CheckResult("conv_transpose2d_kernel_grad", grad_check(
        lambda t: ops.reduce_sum(ops.conv_transpose2d(y0, t, 2, 1) * projt), kern),
        1e-6))

    gain = Tensor(rng.standard_normal(2))
    bias = Tensor(rng.standard_normal(2))
    xin = Tensor(rng.standard_normal((2, 2, 4, 4)))
    pin = _linear_probe(rng, (2, 2, 4, 4))
    results.append(CheckResult("instance_norm_input_grad", grad_check(
        lambda t: ops.reduce_sum(ops.instance_norm(t, gain, bias) * pin), xin),
        1e-6))
    results.append(CheckResult("instance_norm_gain_grad", grad_check(
        lambda t: ops.reduce_sum(ops.instance_norm(xin, t, bias) * pin), gain),
        1e-6))
    results.append(CheckResult("instance_norm_bias_grad", grad_check(
        lambda t: ops.reduce_sum(ops.instance_norm(xin, gain, t) * pin), bias),
        1e-6))

    # sample activations away from the kinks
    pt = Tensor(rng.standard_normal((3, 4))
                + np.sign(rng.standard_normal((3, 4))) * 0.5)
    pact = _linear_probe(rng, (3, 4))
    for kind in ("relu", "leaky_relu", "tanh", "sigmoid"):
        results.append(CheckResult(f"activation_{kind}_grad", grad_check(
            lambda t, k=kind: ops.reduce_sum(ops.activation(t, k) * pact), pt),
            1e-6))

    sq = Tensor(rng.standard_normal((1, 2, 4, 4)))
    ppad = _linear_probe(rng, (1, 2, 8, 8))
    results.append(CheckResult("pad_reflect_grad", grad_check(
        lambda t: ops.reduce_sum(ops.pad_reflect(t, 2) * ppad), sq), 1e-6))

    cb = Tensor(rng.standard_normal(2))
    results.append(CheckResult("add_channel_bias_grad", grad_check(
        lambda t: ops.reduce_sum(ops.add_channel_bias(xin, t) * pin), cb), 1e-6))

    tgt = Tensor(rng.standard_normal((2, 3)))
    lpt = Tensor(rng.standard_normal((2, 3)))
    results.append(CheckResult("l1_loss_grad", grad_check(
        lambda t: ops.l1_loss(t, tgt), lpt), 1e-6))
    results.append(CheckResult("mse_loss_grad", grad_check(
        lambda t: ops.mse_loss(t, tgt), lpt), 1e-6))
    results.append(CheckResult("reduce_mean_grad", grad_check(
        lambda t: ops.reduce_mean(t * t), lpt), 1e-6))

    rz = Tensor(rng.standard_normal((1, 2, 4, 4)))
    prdn = _linear_probe(rng, (1, 2, 2, 2))
    prup = _linear_probe(rng, (1, 2, 8, 8))
    results.append(CheckResult("resize_area_down_grad", grad_check(
        lambda t: ops.reduce_sum(ops.resize_area(t, (2, 2)) * prdn), rz), 1e-6))
    results.append(CheckResult("resize_area_up_grad", grad_check(
        lambda t: ops.reduce_sum(ops.resize_area(t, (8, 8)) * prup), rz), 1e-6))

    # composed path with a relu kink budget: 1e-4
    ck = Tensor(rng.standard_normal((2, 3, 3, 3)))
    cg = Tensor(np.ones(2, dtype=np.float64))
    cb2 = Tensor(np.zeros(2, dtype=np.float64))
    ct = Tensor(rng.standard_normal((1, 2, 4, 4)))
    results.append(CheckResult("composed_conv_norm_tanh_l1", grad_check(
        lambda t: ops.l1_loss(
            ops.tanh(ops.instance_norm(ops.conv2d(t, ck, 1, 1), cg, cb2)), ct),
        Tensor(rng.standard_normal((1, 3, 4, 4)))), 1e-4))

    gen = build_generator(16, n_res_blocks=1, seed=3, width=2, dtype=np.float64)
    gsize = 8 if fast else 16
    gt = Tensor(rng.standard_normal((1, 3, gsize, gsize)) * 0.5)
    point = Tensor(rng.standard_normal((1, 3, gsize, gsize)) * 0.5)
    results.append(CheckResult("generator_forward_l1", grad_check(
        lambda t: ops.l1_loss(generator_forward(gen, t), gt), point), 1e-4))
    return results


def objective_param_check(seed: int = 5) -> CheckResult:
    """Finite differences through the full generator-side objective against
    every generator parameter, on tiny float64 nets."""
    from .training import cyclegan_generator_objective, CycleGanModel
    from .optim import ImagePool

    rng = np.random.default_rng(seed)
    model = CycleGanModel(
        g_xy=build_generator(24, n_res_blocks=0, seed=10, width=2, dtype=np.float64),
        g_yx=build_generator(24, n_res_blocks=0, seed=11, width=2, dtype=np.float64),
        d_x=build_discriminator(seed=12, width=2, dtype=np.float64),
        d_y=build_discriminator(seed=13, width=2, dtype=np.float64),
        pool_x=ImagePool(4, 0), pool_y=ImagePool(4, 0),
    )
    x = Tensor(rng.standard_normal((1, 3, 24, 24)) * 0.5)
    y = Tensor(rng.standard_normal((1, 3, 24, 24)) * 0.5)
    weights = LossWeights(lambda_cyc=10.0, lambda_idt=0.5)

    params = {}
    for prefix, net in (("g_xy", model.g_xy), ("g_yx", model.g_yx)):
        for k, v in net.named_params().items():
            params[f"{prefix}.{k}"] = v

    def build_loss(tape):
        if tape is None:
            tape = Tape()  # probes run on a throwaway tape
            loss, _, _, _ = cyclegan_generator_objective(model, x, y, weights, tape)
            return loss
        loss, _, _, _ = cyclegan_generator_objective(model, x, y, weights, tape)
        return loss

    errors = grad_check_params(build_loss, params)
    worst = max(errors.values())
    return CheckResult("cyclegan_objective_param_grads", worst, 1e-4)


def run_all(fast: bool = False) -> list[CheckResult]:
    results = oracle_checks(fast=fast)
    results += gradient_checks(fast=fast)
    if not fast:
        results.append(objective_param_check())
    return results


def format_table(results: list[CheckResult]) -> str:
    lines = [f"{'check':<40} {'max error':>12} {'threshold':>10} result"]
    for r in results:
        status = "pass" if r.passed else "FAIL"
        lines.append(f"{r.name:<40} {r.value:>12.3e} {r.threshold:>10.0e} {status}")
    return "\n".join(lines)
