"""Training orchestration: per-step optimization for both model kinds, the
coarse-to-fine schedule, checkpointing, and the conversion/reconstruction
inference paths.

Determinism contract: given (seed, config, fixtures) every loss value is a
pure function of the step index in single-threaded mode. Each step records
onto a fresh tape; generators update first, then each discriminator against
pooled fakes.
"""

from __future__ import annotations

import struct
import warnings
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import checkpoint as ckpt
from .data import DomainDataset, sample_unpaired_batch, stage_resize
from .losses import LossWeights, adversarial_loss, cycle_loss, identity_loss
from .networks import (GeneratorNet, PatchDiscriminator, UnitModel,
                       build_discriminator, build_generator, build_unit,
                       discriminator_forward, generator_forward,
                       unit_decode, unit_encode)
from .optim import AdamState, ImagePool, adam_step, lr_schedule, pool_query
from .tensor import NonFiniteError, Tape, Tensor, backward
from .ops import l1_loss, reduce_mean

__all__ = [
    "TrainingDiverged",
    "StageSchedule",
    "CycleGanModel",
    "UnitTrainModel",
    "build_cyclegan_model",
    "build_unit_train_model",
    "cyclegan_train_step",
    "unit_train_step",
    "Trainer",
    "run_coarse_to_fine",
    "convert",
    "reconstruct",
    "checkpoint_save",
    "checkpoint_load",
    "format_log_line",
    "parse_log_line",
]


class TrainingDiverged(RuntimeError):
    """A loss term went non-finite; the step is aborted."""


@contextmanager
def _term(name: str):
    try:
        yield
    except NonFiniteError as exc:
        raise TrainingDiverged(
            f"non-finite value while computing {name!r}: {exc}"
        ) from exc


# -- stage schedule -----------------------------------------------------------

_STAGE_FRACTIONS = (0.40, 0.25, 0.20, 0.15)


@dataclass
class StageSchedule:
    """Ordered (resolution, iterations) pairs, coarse to fine."""

    stages: tuple

    def __post_init__(self):
        self.stages = tuple((int(r), int(n)) for r, n in self.stages)
        if not self.stages:
            raise ValueError("schedule needs at least one stage")
        res = [r for r, _ in self.stages]
        if any(b <= a for a, b in zip(res, res[1:])):
            raise ValueError(f"stage resolutions must strictly increase: {res}")
        if any(n <= 0 for _, n in self.stages):
            raise ValueError("every stage needs a positive iteration count")

    @property
    def total_iterations(self) -> int:
        return sum(n for _, n in self.stages)

    @classmethod
    def from_total(cls, resolutions, total_iters: int) -> "StageSchedule":
        """Split a total budget across stages, weighting the cheap coarse
        stages (40/25/20/15 for the default four)."""
        resolutions = tuple(resolutions)
        k = len(resolutions)
        if k == 1:
            return cls(((resolutions[0], total_iters),))
        fractions = _STAGE_FRACTIONS[:k]
        fractions = tuple(f / sum(fractions) for f in fractions)
        counts, acc = [], 0
        for i, f in enumerate(fractions):
            if i == k - 1:
                counts.append(total_iters - acc)
            else:
                counts.append(max(1, round(total_iters * f)))
                acc += counts[-1]
        if counts[-1] <= 0:
            raise ValueError(
                f"total_iters={total_iters} too small for {k} stages"
            )
        return cls(tuple(zip(resolutions, counts)))


# -- model bundles ------------------------------------------------------------


class CycleGanModel:
    """Both generators, both patch discriminators, their image pools, and
    one Adam state per network."""

    kind = "cyclegan"

    def __init__(self, g_xy: GeneratorNet, g_yx: GeneratorNet,
                 d_x: PatchDiscriminator, d_y: PatchDiscriminator,
                 pool_x: ImagePool, pool_y: ImagePool,
                 lr=2e-4, beta1=0.5, beta2=0.999):
        self.g_xy = g_xy
        self.g_yx = g_yx
        self.d_x = d_x
        self.d_y = d_y
        self.pool_x = pool_x
        self.pool_y = pool_y
        self.opt = {
            "g_xy": AdamState(g_xy.named_params(), lr, beta1, beta2),
            "g_yx": AdamState(g_yx.named_params(), lr, beta1, beta2),
            "d_x": AdamState(d_x.named_params(), lr, beta1, beta2),
            "d_y": AdamState(d_y.named_params(), lr, beta1, beta2),
        }

    @property
    def width(self):
        return self.g_xy.width

    @property
    def n_res_blocks(self):
        return self.g_xy.n_res_blocks

    def named_params(self):
        out = {}
        for prefix, net in (("g_xy", self.g_xy), ("g_yx", self.g_yx),
                            ("d_x", self.d_x), ("d_y", self.d_y)):
            for k, v in net.named_params().items():
                out[f"{prefix}.{k}"] = v
        return out

    def set_lr(self, lr: float):
        for state in self.opt.values():
            state.lr = lr


class UnitTrainModel:
    """A shared-latent net plus the training-side state (pools, optimizer
    states, and the latent-noise rng)."""

    kind = "unit"

    def __init__(self, net: UnitModel, pool_x: ImagePool, pool_y: ImagePool,
                 noise_rng: np.random.Generator,
                 lr=2e-4, beta1=0.5, beta2=0.999):
        self.net = net
        self.pool_x = pool_x
        self.pool_y = pool_y
        self.noise_rng = noise_rng
        self.opt = {
            "gen": AdamState(net.generator_params(), lr, beta1, beta2),
            "d_x": AdamState(net.d_x.named_params(), lr, beta1, beta2),
            "d_y": AdamState(net.d_y.named_params(), lr, beta1, beta2),
        }

    @property
    def width(self):
        return self.net.width

    @property
    def n_res_blocks(self):
        return self.net.n_res_blocks

    def named_params(self):
        return self.net.named_params()

    def set_lr(self, lr: float):
        for state in self.opt.values():
            state.lr = lr


def build_cyclegan_model(seed: int = 0, width: int = 64, n_res_blocks: int = 6,
                         resolution: int = 256, pool_capacity: int = 50,
                         lr: float = 2e-4, dtype=np.float32) -> CycleGanModel:
    ss = np.random.SeedSequence(seed).spawn(6)
    return CycleGanModel(
        g_xy=build_generator(resolution, n_res_blocks, ss[0], width, dtype),
        g_yx=build_generator(resolution, n_res_blocks, ss[1], width, dtype),
        d_x=build_discriminator(ss[2], width, dtype),
        d_y=build_discriminator(ss[3], width, dtype),
        pool_x=ImagePool(pool_capacity, ss[4]),
        pool_y=ImagePool(pool_capacity, ss[5]),
        lr=lr,
    )


def build_unit_train_model(seed: int = 0, width: int = 64, n_res_blocks: int = 6,
                           resolution: int = 128, pool_capacity: int = 50,
                           lr: float = 2e-4, dtype=np.float32) -> UnitTrainModel:
    ss = np.random.SeedSequence(seed).spawn(4)
    return UnitTrainModel(
        net=build_unit(resolution, n_res_blocks, ss[0], width, dtype),
        pool_x=ImagePool(pool_capacity, ss[1]),
        pool_y=ImagePool(pool_capacity, ss[2]),
        noise_rng=np.random.default_rng(ss[3]),
        lr=lr,
    )


# -- per-step optimization -----------------------------------------------------


def _collect_grads(tape: Tape, params: dict) -> dict:
    grads = {}
    for name, p in params.items():
        g = tape.gradient(p)
        if g is not None:
            grads[name] = g.data
    return grads


def _discriminator_update(disc, state: AdamState, real: Tensor,
                          fake_pooled: np.ndarray, term_name: str) -> float:
    tape = Tape()
    for p in disc.named_params().values():
        tape.watch(p)
    with _term(term_name):
        loss = (adversarial_loss(discriminator_forward(disc, real), True)
                + adversarial_loss(discriminator_forward(disc, Tensor(fake_pooled)),
                                   False)) * 0.5
    backward(tape, loss)
    adam_step(disc.named_params(), _collect_grads(tape, disc.named_params()), state)
    return loss.item()


def cyclegan_generator_objective(model: CycleGanModel, x: Tensor, y: Tensor,
                                 weights: LossWeights, tape: Tape):
    """Build the generator-side objective on ``tape``.

    Returns (total loss, per-term floats, fake_y array, fake_x array).
    The identity branch is not recorded at all when lambda_idt == 0.
    """
    for p in model.g_xy.named_params().values():
        tape.watch(p)
    for p in model.g_yx.named_params().values():
        tape.watch(p)

    with _term("translation"):
        fake_y = generator_forward(model.g_xy, x)
        fake_x = generator_forward(model.g_yx, y)
    with _term("adversarial"):
        adv_xy = adversarial_loss(discriminator_forward(model.d_y, fake_y), True)
        adv_yx = adversarial_loss(discriminator_forward(model.d_x, fake_x), True)
    with _term("cycle"):
        cyc_x = cycle_loss(x, generator_forward(model.g_yx, fake_y))
        cyc_y = cycle_loss(y, generator_forward(model.g_xy, fake_x))
    loss = adv_xy + adv_yx + (cyc_x + cyc_y) * weights.lambda_cyc
    idt_x = idt_y = 0.0
    if weights.lambda_idt > 0:
        with _term("identity"):
            idt_y_t = identity_loss(y, generator_forward(model.g_xy, y))
            idt_x_t = identity_loss(x, generator_forward(model.g_yx, x))
        loss = loss + (idt_y_t + idt_x_t) * weights.lambda_idt
        idt_x, idt_y = idt_x_t.item(), idt_y_t.item()

    terms = {
        "adv_xy": adv_xy.item(), "adv_yx": adv_yx.item(),
        "cyc_x": cyc_x.item(), "cyc_y": cyc_y.item(),
        "idt_x": idt_x, "idt_y": idt_y,
        "g_total": loss.item(),
    }
    return loss, terms, fake_y.data, fake_x.data


def cyclegan_train_step(model: CycleGanModel, x: Tensor, y: Tensor,
                        weights: LossWeights) -> dict:
    """One generator update followed by both discriminator updates; returns
    the per-term loss report."""
    tape = Tape()
    loss, terms, fake_y, fake_x = cyclegan_generator_objective(
        model, x, y, weights, tape)
    backward(tape, loss)
    adam_step(model.g_xy.named_params(),
              _collect_grads(tape, model.g_xy.named_params()), model.opt["g_xy"])
    adam_step(model.g_yx.named_params(),
              _collect_grads(tape, model.g_yx.named_params()), model.opt["g_yx"])

    terms["d_y"] = _discriminator_update(
        model.d_y, model.opt["d_y"], y, pool_query(model.pool_y, fake_y), "d_y")
    terms["d_x"] = _discriminator_update(
        model.d_x, model.opt["d_x"], x, pool_query(model.pool_x, fake_x), "d_x")
    return terms


def unit_generator_objective(model: UnitTrainModel, x: Tensor, y: Tensor,
                             weights: LossWeights, tape: Tape,
                             noise_seeds) -> tuple:
    """Encoder/decoder objective: in-domain VAE terms, cross-domain
    adversarial terms, and cycle terms back through the shared latent."""
    net = model.net
    for p in net.generator_params().values():
        tape.watch(p)

    with _term("encode"):
        z_x = unit_encode(net, x, "X", noise_seeds[0])
        z_y = unit_encode(net, y, "Y", noise_seeds[1])
    with _term("vae_reconstruction"):
        x_rec = unit_decode(net, z_x, "X")
        y_rec = unit_decode(net, z_y, "Y")
        rec_x = l1_loss(x, x_rec)
        rec_y = l1_loss(y, y_rec)
        kl_x = reduce_mean(z_x.mean * z_x.mean) * 0.5
        kl_y = reduce_mean(z_y.mean * z_y.mean) * 0.5
    with _term("translation"):
        fake_y = unit_decode(net, z_x, "Y")
        fake_x = unit_decode(net, z_y, "X")
    with _term("adversarial"):
        adv_xy = adversarial_loss(discriminator_forward(net.d_y, fake_y), True)
        adv_yx = adversarial_loss(discriminator_forward(net.d_x, fake_x), True)
    with _term("cycle"):
        z_fy = unit_encode(net, fake_y, "Y", noise_seeds[2])
        z_fx = unit_encode(net, fake_x, "X", noise_seeds[3])
        cyc_x = cycle_loss(x, unit_decode(net, z_fy, "X"))
        cyc_y = cycle_loss(y, unit_decode(net, z_fx, "Y"))
        kl_cyc_x = reduce_mean(z_fy.mean * z_fy.mean) * 0.5
        kl_cyc_y = reduce_mean(z_fx.mean * z_fx.mean) * 0.5

    loss = (adv_xy + adv_yx
            + (rec_x + rec_y) * weights.lambda_rec
            + (kl_x + kl_y + kl_cyc_x + kl_cyc_y) * weights.lambda_kl
            + (cyc_x + cyc_y) * weights.lambda_cyc)
    terms = {
        "adv_xy": adv_xy.item(), "adv_yx": adv_yx.item(),
        "rec_x": rec_x.item(), "rec_y": rec_y.item(),
        "kl_x": kl_x.item(), "kl_y": kl_y.item(),
        "cyc_x": cyc_x.item(), "cyc_y": cyc_y.item(),
        "g_total": loss.item(),
    }
    return loss, terms, fake_y.data, fake_x.data


def unit_train_step(model: UnitTrainModel, x: Tensor, y: Tensor,
                    weights: LossWeights) -> dict:
    noise_seeds = [int(s) for s in model.noise_rng.integers(0, 2 ** 63, size=4)]
    tape = Tape()
    gen_params = model.net.generator_params()
    loss, terms, fake_y, fake_x = unit_generator_objective(
        model, x, y, weights, tape, noise_seeds)
    backward(tape, loss)
    adam_step(gen_params, _collect_grads(tape, gen_params), model.opt["gen"])

    terms["d_y"] = _discriminator_update(
        model.net.d_y, model.opt["d_y"], y,
        pool_query(model.pool_y, fake_y), "d_y")
    terms["d_x"] = _discriminator_update(
        model.net.d_x, model.opt["d_x"], x,
        pool_query(model.pool_x, fake_x), "d_x")
    return terms


def format_log_line(step: int, resolution: int, terms: dict) -> str:
    body = ",".join(f"{k}={float(v)!r}" for k, v in terms.items())
    return f"{step} {resolution} {body}"


def parse_log_line(line: str):
    head, res, body = line.split(" ", 2)
    terms = {}
    for part in body.split(","):
        k, v = part.split("=")
        terms[k] = float(v)
    return int(head), int(res), terms


# -- trainer -------------------------------------------------------------------


class Trainer:
    """Drives one model bundle over a stage schedule.

    Owns the batch-sampling rng and the loss-log lines; pools are reseeded
    at each stage entry because their buffered images change resolution
    across stage boundaries.
    """

    def __init__(self, model, schedule: StageSchedule, x_set: DomainDataset,
                 y_set: DomainDataset, weights: LossWeights, seed: int = 0,
                 batch_size: int = 1, base_lr: float = 2e-4):
        self.model = model
        self.schedule = schedule
        self.x_native = x_set
        self.y_native = y_set
        self.weights = weights
        self.seed = seed
        self.batch_size = batch_size
        self.base_lr = base_lr
        self.rng = np.random.default_rng([seed, 101])
        self.stage_index = 0
        self.iter_in_stage = 0
        self.global_step = 0
        self.log_lines: list[str] = []

    @property
    def current_resolution(self) -> int:
        idx = min(self.stage_index, len(self.schedule.stages) - 1)
        return self.schedule.stages[idx][0]

    def _reset_pools(self, stage_index: int):
        cap = self.model.pool_x.capacity
        self.model.pool_x = ImagePool(cap, np.random.SeedSequence(
            [self.seed, 500 + stage_index, 0]))
        self.model.pool_y = ImagePool(cap, np.random.SeedSequence(
            [self.seed, 500 + stage_index, 1]))

    def _step(self, x: Tensor, y: Tensor) -> dict:
        if self.model.kind == "cyclegan":
            return cyclegan_train_step(self.model, x, y, self.weights)
        return unit_train_step(self.model, x, y, self.weights)

    def run(self, checkpoint_dir=None, log_fh=None, max_steps=None) -> list:
        """Train through the schedule (or ``max_steps`` more steps).

        Emits one loss-log line per step and a checkpoint per completed
        stage; a failed stage leaves earlier stage checkpoints intact.
        """
        checkpoints = []
        total = self.schedule.total_iterations
        steps_done = 0
        for si in range(self.stage_index, len(self.schedule.stages)):
            res, iters = self.schedule.stages[si]
            self.stage_index = si
            if self.iter_in_stage == 0:
                self._reset_pools(si)
            xs = stage_resize(self.x_native, res)
            ys = stage_resize(self.y_native, res)
            for it in range(self.iter_in_stage, iters):
                if max_steps is not None and steps_done >= max_steps:
                    return checkpoints
                self.model.set_lr(lr_schedule(self.global_step, total, self.base_lr))
                x, y = sample_unpaired_batch(xs, ys, self.batch_size, self.rng)
                terms = self._step(x, y)
                line = format_log_line(self.global_step, res, terms)
                self.log_lines.append(line)
                if log_fh is not None:
                    log_fh.write(line + "\n")
                    log_fh.flush()
                self.global_step += 1
                self.iter_in_stage = it + 1
                steps_done += 1
            self.stage_index = si + 1
            self.iter_in_stage = 0
            if checkpoint_dir is not None:
                path = Path(checkpoint_dir) / f"stage_{res:03d}.ckpt"
                self.save_checkpoint(path)
                checkpoints.append(path)
        return checkpoints

    def save_checkpoint(self, path):
        checkpoint_save(self.model, path, trainer=self)

    # restore position recorded by checkpoint_load
    def _restore_position(self, meta, rngs):
        self.stage_index = meta["stage_index"]
        self.iter_in_stage = meta["iter_in_stage"]
        self.global_step = meta["global_step"]
        self.rng = _rng_from_bytes(rngs["sampler"])


# -- inference -----------------------------------------------------------------

_DIRECTIONS = ("photo2icon", "icon2photo")


def _check_direction(direction: str):
    if direction not in _DIRECTIONS:
        raise ValueError(f"direction must be one of {_DIRECTIONS}, got {direction!r}")


def _warn_resolution(model, img: Tensor):
    trained = getattr(model, "last_resolution", 0)
    if trained and img.shape[2] != trained:
        warnings.warn(
            f"input is {img.shape[2]}×{img.shape[3]} but the model last "
            f"trained at {trained}×{trained}", stacklevel=3)


def convert(model, img: Tensor, direction: str = "photo2icon") -> Tensor:
    """Apply the requested translation once; deterministic (the
    shared-latent path decodes the latent mean, no sampling)."""
    _check_direction(direction)
    _warn_resolution(model, img)
    if model.kind == "cyclegan":
        net = model.g_xy if direction == "photo2icon" else model.g_yx
        return generator_forward(net, img)
    src, dst = ("X", "Y") if direction == "photo2icon" else ("Y", "X")
    mean = model.net.encoder(src)(img)
    return unit_decode(model.net, mean, dst)


def reconstruct(model, img: Tensor, direction: str = "photo2icon"):
    """Returns (translated, reconstructed): the image pushed through the
    requested direction and then back."""
    _check_direction(direction)
    translated = convert(model, img, direction)
    back = "icon2photo" if direction == "photo2icon" else "photo2icon"
    reconstructed = convert(model, translated.detach(), back)
    return translated, reconstructed


# -- checkpoint (de)serialization ------------------------------------------------


def _rng_to_bytes(gen: np.random.Generator) -> bytes:
    st = gen.bit_generator.state
    if st["bit_generator"] != "PCG64":
        raise ValueError(f"unsupported bit generator {st['bit_generator']}")
    return (st["state"]["state"].to_bytes(16, "little")
            + st["state"]["inc"].to_bytes(16, "little")
            + struct.pack("<II", st["has_uint32"], st["uinteger"]))


def _rng_from_bytes(blob: bytes) -> np.random.Generator:
    gen = np.random.Generator(np.random.PCG64())
    has32, uint = struct.unpack("<II", blob[32:40])
    gen.bit_generator.state = {
        "bit_generator": "PCG64",
        "state": {"state": int.from_bytes(blob[:16], "little"),
                  "inc": int.from_bytes(blob[16:32], "little")},
        "has_uint32": has32,
        "uinteger": uint,
    }
    return gen


def _pool_records(prefix: str, pool: ImagePool) -> dict:
    if pool.buffer:
        return {f"{prefix}.buffer": np.stack(pool.buffer)}
    return {f"{prefix}.buffer": np.zeros((0,), dtype=np.float32)}


def _opt_records(name: str, state: AdamState) -> dict:
    out = {f"opt.{name}.t": np.asarray(float(state.step), dtype=np.float32)}
    for k, arr in state.m.items():
        out[f"opt.{name}.m.{k}"] = arr
    for k, arr in state.v.items():
        out[f"opt.{name}.v.{k}"] = arr
    return out


def checkpoint_save(model, path, trainer: Trainer | None = None) -> None:
    """Lossless snapshot of parameters, optimizer state, pools, rng states,
    and the stage position (when saved through a trainer)."""
    params = model.named_params()
    for name, p in params.items():
        if p.data.dtype != np.float32:
            raise ValueError(
                f"checkpoints store float32; parameter {name!r} is {p.data.dtype}"
            )
    records = {f"param.{k}": p.data for k, p in params.items()}
    for opt_name, state in model.opt.items():
        records.update(_opt_records(opt_name, state))
    records.update(_pool_records("pool_x", model.pool_x))
    records.update(_pool_records("pool_y", model.pool_y))

    rngs = {"pool_x": _rng_to_bytes(model.pool_x.rng),
            "pool_y": _rng_to_bytes(model.pool_y.rng)}
    if model.kind == "unit":
        rngs["noise"] = _rng_to_bytes(model.noise_rng)

    meta = {
        "kind": model.kind,
        "width": model.width,
        "n_res_blocks": model.n_res_blocks,
        "pool_capacity": model.pool_x.capacity,
        "last_resolution": getattr(model, "last_resolution", 0),
        "stage_index": 0,
        "iter_in_stage": 0,
        "global_step": 0,
    }
    if trainer is not None:
        rngs["sampler"] = _rng_to_bytes(trainer.rng)
        meta.update(stage_index=trainer.stage_index,
                    iter_in_stage=trainer.iter_in_stage,
                    global_step=trainer.global_step,
                    last_resolution=trainer.current_resolution)
    ckpt.write_checkpoint(path, meta, rngs, records)


def _restore_pool(pool: ImagePool, records, rngs, prefix: str):
    buf = records[f"{prefix}.buffer"]
    pool.buffer = [] if buf.ndim == 1 else [img.copy() for img in buf]
    pool.rng = _rng_from_bytes(rngs[prefix])


def _restore_opt(state: AdamState, records, name: str):
    state.step = int(records[f"opt.{name}.t"])
    for k in state.m:
        state.m[k] = records[f"opt.{name}.m.{k}"].copy()
    for k in state.v:
        state.v[k] = records[f"opt.{name}.v.{k}"].copy()


def checkpoint_load(path, lr: float = 2e-4):
    """Rebuild a model bundle from a checkpoint. Returns (model, meta)."""
    meta, rngs, records = ckpt.read_checkpoint(path)
    kind = meta["kind"]
    if kind == "cyclegan":
        model = build_cyclegan_model(
            seed=0, width=meta["width"], n_res_blocks=meta["n_res_blocks"],
            pool_capacity=meta["pool_capacity"], lr=lr)
    elif kind == "unit":
        model = build_unit_train_model(
            seed=0, width=meta["width"], n_res_blocks=meta["n_res_blocks"],
            pool_capacity=meta["pool_capacity"], lr=lr)
        model.noise_rng = _rng_from_bytes(rngs["noise"])
    else:
        raise ckpt.CheckpointError(f"unknown model kind {kind!r}")

    params = model.named_params()
    for name, p in params.items():
        stored = records[f"param.{name}"]
        if stored.shape != p.data.shape:
            raise ckpt.CheckpointError(
                f"parameter {name!r} has shape {stored.shape}, expected {p.shape}"
            )
        p.data[...] = stored
    for opt_name, state in model.opt.items():
        _restore_opt(state, records, opt_name)
    _restore_pool(model.pool_x, records, rngs, "pool_x")
    _restore_pool(model.pool_y, records, rngs, "pool_y")
    model.last_resolution = meta["last_resolution"]
    return model, meta


def resume_trainer(path, schedule: StageSchedule, x_set: DomainDataset,
                   y_set: DomainDataset, weights: LossWeights, seed: int = 0,
                   batch_size: int = 1, base_lr: float = 2e-4) -> Trainer:
    """Trainer positioned exactly where the checkpointed run stood."""
    model, meta = checkpoint_load(path, lr=base_lr)
    trainer = Trainer(model, schedule, x_set, y_set, weights, seed=seed,
                      batch_size=batch_size, base_lr=base_lr)
    _, rngs, _ = ckpt.read_checkpoint(path)
    if "sampler" not in rngs:
        raise ckpt.CheckpointError(
            "checkpoint was not saved by a trainer; cannot resume"
        )
    trainer._restore_position(meta, rngs)
    return trainer


def run_coarse_to_fine(model, schedule: StageSchedule, x_set: DomainDataset,
                       y_set: DomainDataset, weights: LossWeights,
                       checkpoint_dir=None, log_fh=None, seed: int = 0,
                       batch_size: int = 1, base_lr: float = 2e-4):
    """Train ``model`` through the schedule; parameters carry over unchanged
    across stage boundaries (only the data resolution changes). Returns
    (trainer, stage checkpoint paths)."""
    trainer = Trainer(model, schedule, x_set, y_set, weights, seed=seed,
                      batch_size=batch_size, base_lr=base_lr)
    paths = trainer.run(checkpoint_dir=checkpoint_dir, log_fh=log_fh)
    return trainer, paths
