"""Generator, patch discriminator, and the shared-latent encoder/decoder
pair built from them.

All nets are fully convolutional: one parameter set works at any input size
divisible by 4, which is what lets the coarse-to-fine schedule reuse weights
across resolutions. Weights start from N(0, 0.02), biases at zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ops
from .tensor import DEFAULT_DTYPE, ShapeError, Tape, Tensor, randn, zeros

__all__ = [
    "GeneratorNet",
    "PatchDiscriminator",
    "UnitModel",
    "LatentCode",
    "build_generator",
    "build_discriminator",
    "build_unit",
    "generator_forward",
    "discriminator_forward",
    "unit_encode",
    "unit_decode",
    "patch_map_size",
]

WEIGHT_STD = 0.02


class Conv:
    """Conv (or transpose-conv) layer; reflect padding optional.

    Layers feeding an instance norm are built without a bias: the norm
    subtracts the per-slice mean, so such a bias would be a dead parameter.
    """

    def __init__(self, rng, in_ch, out_ch, kernel, stride=1, padding=0,
                 pad_mode="zero", transpose=False, bias=True,
                 dtype=DEFAULT_DTYPE):
        shape = (in_ch, out_ch, kernel, kernel) if transpose else \
                (out_ch, in_ch, kernel, kernel)
        self.w = randn(rng, shape, std=WEIGHT_STD, dtype=dtype)
        self.b = zeros((out_ch,), dtype=dtype) if bias else None
        self.stride = stride
        self.padding = padding
        self.pad_mode = pad_mode
        self.transpose = transpose

    def __call__(self, x: Tensor) -> Tensor:
        if self.transpose:
            y = ops.conv_transpose2d(x, self.w, self.stride, self.padding)
        else:
            y = ops.conv2d(x, self.w, self.stride, self.padding, self.pad_mode)
        if self.b is not None:
            y = ops.add_channel_bias(y, self.b)
        return y

    def params(self, prefix):
        out = {f"{prefix}.w": self.w}
        if self.b is not None:
            out[f"{prefix}.b"] = self.b
        return out


class InstanceNorm:
    def __init__(self, ch, dtype=DEFAULT_DTYPE):
        self.gain = Tensor(np.ones(ch, dtype=dtype))
        self.bias = zeros((ch,), dtype=dtype)

    def __call__(self, x: Tensor) -> Tensor:
        return ops.instance_norm(x, self.gain, self.bias)

    def params(self, prefix):
        return {f"{prefix}.gain": self.gain, f"{prefix}.bias": self.bias}


class ResBlock:
    """Two reflect-padded 3×3 convs with instance norm, plus the skip."""

    def __init__(self, rng, ch, dtype=DEFAULT_DTYPE):
        self.conv1 = Conv(rng, ch, ch, 3, padding=1, pad_mode="reflect", bias=False,
                          dtype=dtype)
        self.norm1 = InstanceNorm(ch, dtype)
        self.conv2 = Conv(rng, ch, ch, 3, padding=1, pad_mode="reflect", bias=False,
                          dtype=dtype)
        self.norm2 = InstanceNorm(ch, dtype)

    def __call__(self, x: Tensor) -> Tensor:
        h = ops.relu(self.norm1(self.conv1(x)))
        h = self.norm2(self.conv2(h))
        return x + h

    def params(self, prefix):
        out = {}
        out.update(self.conv1.params(f"{prefix}.conv1"))
        out.update(self.norm1.params(f"{prefix}.norm1"))
        out.update(self.conv2.params(f"{prefix}.conv2"))
        out.update(self.norm2.params(f"{prefix}.norm2"))
        return out


def _params_of(pairs):
    out = {}
    for prefix, layer in pairs:
        out.update(layer.params(prefix))
    return out


class GeneratorNet:
    """Reflect-pad conv stem, two stride-2 downs, residual trunk, two
    stride-2 transpose-convs, reflect-pad conv head with tanh."""

    def __init__(self, n_res_blocks=6, width=64, seed=0, dtype=DEFAULT_DTYPE):
        rng = np.random.default_rng(seed)
        w = width
        self.n_res_blocks = n_res_blocks
        self.width = width
        self.stem = Conv(rng, 3, w, 7, padding=3, pad_mode="reflect", bias=False,
                         dtype=dtype)
        self.stem_norm = InstanceNorm(w, dtype)
        self.down1 = Conv(rng, w, 2 * w, 3, stride=2, padding=1, bias=False,
                          dtype=dtype)
        self.down1_norm = InstanceNorm(2 * w, dtype)
        self.down2 = Conv(rng, 2 * w, 4 * w, 3, stride=2, padding=1, bias=False,
                          dtype=dtype)
        self.down2_norm = InstanceNorm(4 * w, dtype)
        self.res = [ResBlock(rng, 4 * w, dtype) for _ in range(n_res_blocks)]
        self.up1 = Conv(rng, 4 * w, 2 * w, 4, stride=2, padding=1,
                        transpose=True, bias=False, dtype=dtype)
        self.up1_norm = InstanceNorm(2 * w, dtype)
        self.up2 = Conv(rng, 2 * w, w, 4, stride=2, padding=1,
                        transpose=True, bias=False, dtype=dtype)
        self.up2_norm = InstanceNorm(w, dtype)
        self.head = Conv(rng, w, 3, 7, padding=3, pad_mode="reflect", dtype=dtype)

    def __call__(self, x: Tensor) -> Tensor:
        h = ops.relu(self.stem_norm(self.stem(x)))
        h = ops.relu(self.down1_norm(self.down1(h)))
        h = ops.relu(self.down2_norm(self.down2(h)))
        for block in self.res:
            h = block(h)
        h = ops.relu(self.up1_norm(self.up1(h)))
        h = ops.relu(self.up2_norm(self.up2(h)))
        return ops.tanh(self.head(h))

    def named_params(self):
        pairs = [("stem", self.stem), ("stem_norm", self.stem_norm),
                 ("down1", self.down1), ("down1_norm", self.down1_norm),
                 ("down2", self.down2), ("down2_norm", self.down2_norm)]
        pairs += [(f"res{i}", b) for i, b in enumerate(self.res)]
        pairs += [("up1", self.up1), ("up1_norm", self.up1_norm),
                  ("up2", self.up2), ("up2_norm", self.up2_norm),
                  ("head", self.head)]
        return _params_of(pairs)

    def param_count(self):
        return sum(t.size for t in self.named_params().values())


# discriminator layer table: kernel 4, pad 1 throughout
_DISC_STRIDES = (2, 2, 2, 1, 1)


def patch_map_size(size: int) -> int:
    """Closed-form patch-map extent for one spatial dimension."""
    for stride in _DISC_STRIDES:
        size = (size + 2 - 4) // stride + 1
        if size < 1:
            raise ShapeError(
                "discriminator input too small: the layer stack reduces it "
                "to an empty patch map"
            )
    return size


class PatchDiscriminator:
    """Stack of 4×4 convs with leaky-relu 0.2 emitting an N×1×h×w patch map;
    instance norm everywhere except the first conv and the head."""

    def __init__(self, width=64, seed=0, dtype=DEFAULT_DTYPE):
        rng = np.random.default_rng(seed)
        w = width
        self.width = width
        chans = [(3, w), (w, 2 * w), (2 * w, 4 * w), (4 * w, 8 * w), (8 * w, 1)]
        normed = (False, True, True, True, False)  # first conv and head skip norm
        self.convs = [
            Conv(rng, ci, co, 4, stride=s, padding=1, bias=not has_norm,
                 dtype=dtype)
            for (ci, co), s, has_norm in zip(chans, _DISC_STRIDES, normed)
        ]
        self.norms = [InstanceNorm(co, dtype) for (_, co) in chans[1:-1]]

    def __call__(self, x: Tensor) -> Tensor:
        h = ops.leaky_relu(self.convs[0](x), 0.2)
        for conv, norm in zip(self.convs[1:-1], self.norms):
            h = ops.leaky_relu(norm(conv(h)), 0.2)
        return self.convs[-1](h)

    def named_params(self):
        pairs = [(f"conv{i}", c) for i, c in enumerate(self.convs)]
        pairs += [(f"norm{i}", n) for i, n in enumerate(self.norms, start=1)]
        return _params_of(pairs)

    def param_count(self):
        return sum(t.size for t in self.named_params().values())


def build_generator(resolution: int, n_res_blocks: int = 6, seed: int = 0,
                    width: int = 64, dtype=DEFAULT_DTYPE) -> GeneratorNet:
    """Deterministic generator construction for a given working resolution."""
    if resolution < 4 or resolution % 4:
        raise ShapeError(
            f"generator resolution must be a positive multiple of 4, got {resolution}"
        )
    return GeneratorNet(n_res_blocks=n_res_blocks, width=width, seed=seed, dtype=dtype)


def build_discriminator(seed: int = 0, width: int = 64,
                        dtype=DEFAULT_DTYPE) -> PatchDiscriminator:
    return PatchDiscriminator(width=width, seed=seed, dtype=dtype)


def generator_forward(net: GeneratorNet, x: Tensor) -> Tensor:
    if x.data.ndim != 4 or x.shape[1] != 3:
        raise ShapeError(f"generator expects N×3×H×W input, got {x.shape}")
    if x.shape[2] % 4 or x.shape[3] % 4:
        raise ShapeError(
            f"generator input dims must be multiples of 4, got "
            f"{x.shape[2]}×{x.shape[3]}"
        )
    return net(x)


def discriminator_forward(net: PatchDiscriminator, img: Tensor) -> Tensor:
    if img.data.ndim != 4:
        raise ShapeError(f"discriminator expects rank-4 input, got {img.shape}")
    if img.shape[2] < 16 or img.shape[3] < 16:
        raise ShapeError(
            f"discriminator input too small: {img.shape[2]}×{img.shape[3]} < 16×16"
        )
    patch_map_size(img.shape[2])
    patch_map_size(img.shape[3])
    return net(img)


# -- shared-latent model -----------------------------------------------------


@dataclass
class LatentCode:
    """Encoder output: deterministic mean plus a unit-variance sample."""

    mean: Tensor
    sample: Tensor


class UnitEncoder:
    """Generator front half: stem, two downs, private residual blocks, and a
    final residual block whose parameters are shared across domains."""

    def __init__(self, rng, width, n_private, shared: ResBlock, dtype=DEFAULT_DTYPE):
        w = width
        self.stem = Conv(rng, 3, w, 7, padding=3, pad_mode="reflect", bias=False,
                         dtype=dtype)
        self.stem_norm = InstanceNorm(w, dtype)
        self.down1 = Conv(rng, w, 2 * w, 3, stride=2, padding=1, bias=False,
                          dtype=dtype)
        self.down1_norm = InstanceNorm(2 * w, dtype)
        self.down2 = Conv(rng, 2 * w, 4 * w, 3, stride=2, padding=1, bias=False,
                          dtype=dtype)
        self.down2_norm = InstanceNorm(4 * w, dtype)
        self.res = [ResBlock(rng, 4 * w, dtype) for _ in range(n_private)]
        self.shared = shared

    def __call__(self, x: Tensor) -> Tensor:
        h = ops.relu(self.stem_norm(self.stem(x)))
        h = ops.relu(self.down1_norm(self.down1(h)))
        h = ops.relu(self.down2_norm(self.down2(h)))
        for block in self.res:
            h = block(h)
        return self.shared(h)

    def named_params(self):
        pairs = [("stem", self.stem), ("stem_norm", self.stem_norm),
                 ("down1", self.down1), ("down1_norm", self.down1_norm),
                 ("down2", self.down2), ("down2_norm", self.down2_norm)]
        pairs += [(f"res{i}", b) for i, b in enumerate(self.res)]
        return _params_of(pairs)


class UnitDecoder:
    """Generator back half: shared residual block, private blocks, two
    transpose-convs, tanh head."""

    def __init__(self, rng, width, n_private, shared: ResBlock, dtype=DEFAULT_DTYPE):
        w = width
        self.shared = shared
        self.res = [ResBlock(rng, 4 * w, dtype) for _ in range(n_private)]
        self.up1 = Conv(rng, 4 * w, 2 * w, 4, stride=2, padding=1,
                        transpose=True, bias=False, dtype=dtype)
        self.up1_norm = InstanceNorm(2 * w, dtype)
        self.up2 = Conv(rng, 2 * w, w, 4, stride=2, padding=1,
                        transpose=True, bias=False, dtype=dtype)
        self.up2_norm = InstanceNorm(w, dtype)
        self.head = Conv(rng, w, 3, 7, padding=3, pad_mode="reflect", dtype=dtype)

    def __call__(self, z: Tensor) -> Tensor:
        h = self.shared(z)
        for block in self.res:
            h = block(h)
        h = ops.relu(self.up1_norm(self.up1(h)))
        h = ops.relu(self.up2_norm(self.up2(h)))
        return ops.tanh(self.head(h))

    def named_params(self):
        pairs = [(f"res{i}", b) for i, b in enumerate(self.res)]
        pairs += [("up1", self.up1), ("up1_norm", self.up1_norm),
                  ("up2", self.up2), ("up2_norm", self.up2_norm),
                  ("head", self.head)]
        return _params_of(pairs)


class UnitModel:
    """Two encoder/decoder pairs bridged by physically shared residual
    blocks on both sides of the latent, plus a patch discriminator per
    domain."""

    def __init__(self, n_res_blocks=6, width=64, seed=0, dtype=DEFAULT_DTYPE):
        if n_res_blocks < 2 or n_res_blocks % 2:
            raise ShapeError(
                f"unit model needs an even residual count >= 2, got {n_res_blocks}"
            )
        rng = np.random.default_rng(seed)
        self.n_res_blocks = n_res_blocks
        self.width = width
        n_private = n_res_blocks // 2 - 1
        self.enc_shared = ResBlock(rng, 4 * width, dtype)
        self.dec_shared = ResBlock(rng, 4 * width, dtype)
        self.enc_x = UnitEncoder(rng, width, n_private, self.enc_shared, dtype)
        self.enc_y = UnitEncoder(rng, width, n_private, self.enc_shared, dtype)
        self.dec_x = UnitDecoder(rng, width, n_private, self.dec_shared, dtype)
        self.dec_y = UnitDecoder(rng, width, n_private, self.dec_shared, dtype)
        seeds = rng.integers(0, 2 ** 31, size=2)
        self.d_x = PatchDiscriminator(width=width, seed=int(seeds[0]), dtype=dtype)
        self.d_y = PatchDiscriminator(width=width, seed=int(seeds[1]), dtype=dtype)

    def encoder(self, domain):
        return {"X": self.enc_x, "Y": self.enc_y}[domain]

    def decoder(self, domain):
        return {"X": self.dec_x, "Y": self.dec_y}[domain]

    def generator_params(self):
        """Every encoder/decoder parameter; shared blocks appear once."""
        out = {}
        for name, enc in (("enc_x", self.enc_x), ("enc_y", self.enc_y)):
            for k, v in enc.named_params().items():
                out[f"{name}.{k}"] = v
        for k, v in self.enc_shared.params("enc_shared").items():
            out[k] = v
        for name, dec in (("dec_x", self.dec_x), ("dec_y", self.dec_y)):
            for k, v in dec.named_params().items():
                out[f"{name}.{k}"] = v
        for k, v in self.dec_shared.params("dec_shared").items():
            out[k] = v
        return out

    def named_params(self):
        out = self.generator_params()
        for name, d in (("d_x", self.d_x), ("d_y", self.d_y)):
            for k, v in d.named_params().items():
                out[f"{name}.{k}"] = v
        return out


def build_unit(resolution: int, n_res_blocks: int = 6, seed: int = 0,
               width: int = 64, dtype=DEFAULT_DTYPE) -> UnitModel:
    if resolution < 4 or resolution % 4:
        raise ShapeError(
            f"unit resolution must be a positive multiple of 4, got {resolution}"
        )
    return UnitModel(n_res_blocks=n_res_blocks, width=width, seed=seed, dtype=dtype)


def unit_encode(model: UnitModel, img: Tensor, domain: str,
                noise_seed: int) -> LatentCode:
    """Encode to the shared latent; the sample adds unit-variance noise drawn
    deterministically from ``noise_seed``."""
    if domain not in ("X", "Y"):
        raise ValueError(f"domain must be 'X' or 'Y', got {domain!r}")
    mean = model.encoder(domain)(img)
    noise = np.random.default_rng(noise_seed).standard_normal(
        mean.shape, dtype=mean.dtype)
    return LatentCode(mean=mean, sample=mean + Tensor(noise))


def unit_decode(model: UnitModel, z, domain: str) -> Tensor:
    """Decode a latent into ``domain``; a LatentCode decodes its sample,
    a bare tensor (e.g. the mean, for inference) decodes as-is."""
    if domain not in ("X", "Y"):
        raise ValueError(f"domain must be 'X' or 'Y', got {domain!r}")
    latent = z.sample if isinstance(z, LatentCode) else z
    return model.decoder(domain)(latent)
