"""Run configuration: a flat key-value file with sections, checked
strictly so experiment provenance stays trustworthy (unknown keys are
fatal, duplicates are fatal, every bad key is reported).

Presets bind the identity-loss weighting to the experiment family:
black-and-white icon targets weaken it (color constancy buys nothing
there), the color-logo variant keeps the full weight.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .losses import LossWeights
from .training import StageSchedule

__all__ = ["RunConfig", "ConfigError", "PRESETS"]


class ConfigError(ValueError):
    pass


# preset -> (lambda_idt, default stage resolutions)
PRESETS = {
    "bw-icons": (0.5, (32, 64, 128, 256)),
    "color-logos": (5.0, (32, 64, 128, 256)),
    "person-only": (0.5, (256,)),
}

UNIT_DEFAULT_RESOLUTIONS = (128,)


@dataclass
class RunConfig:
    kind: str = "cyclegan"
    preset: str = "bw-icons"
    seed: int = 0
    resolutions: tuple = (32, 64, 128, 256)
    total_iters: int = 200
    stage_iters: tuple | None = None
    batch_size: int = 1
    base_lr: float = 2e-4
    width: int = 64
    n_res_blocks: int = 6
    pool_capacity: int = 50
    lambda_cyc: float = 10.0
    lambda_idt: float = 0.5
    lambda_kl: float = 0.1
    lambda_rec: float = 10.0
    x_dir: str = ""
    y_dir: str = ""
    x_allowlist: str = ""
    x_denylist: str = ""
    y_allowlist: str = ""
    y_denylist: str = ""
    out_dir: str = "runs/out"

    def __post_init__(self):
        if self.kind not in ("cyclegan", "unit"):
            raise ConfigError(f"kind must be cyclegan or unit, got {self.kind!r}")
        if self.preset not in PRESETS:
            raise ConfigError(
                f"preset must be one of {sorted(PRESETS)}, got {self.preset!r}"
            )
        if self.stage_iters is not None and len(self.stage_iters) != len(self.resolutions):
            raise ConfigError(
                f"stage_iters has {len(self.stage_iters)} entries for "
                f"{len(self.resolutions)} resolutions"
            )

    def weights(self) -> LossWeights:
        return LossWeights(lambda_cyc=self.lambda_cyc,
                           lambda_idt=self.lambda_idt,
                           lambda_kl=self.lambda_kl,
                           lambda_rec=self.lambda_rec)

    def schedule(self) -> StageSchedule:
        if self.stage_iters is not None:
            return StageSchedule(tuple(zip(self.resolutions, self.stage_iters)))
        return StageSchedule.from_total(self.resolutions, self.total_iters)


_SCHEMA = {
    "run": {"kind": str, "preset": str, "seed": int},
    "schedule": {"resolutions": "int_list", "total_iters": int,
                 "stage_iters": "int_list"},
    "train": {"batch_size": int, "base_lr": float, "width": int,
              "n_res_blocks": int, "pool_capacity": int},
    "weights": {"lambda_cyc": float, "lambda_idt": float,
                "lambda_kl": float, "lambda_rec": float},
    "data": {"x_dir": str, "y_dir": str, "x_allowlist": str,
             "x_denylist": str, "y_allowlist": str, "y_denylist": str},
    "output": {"dir": str},
}

_KEY_TO_FIELD = {("output", "dir"): "out_dir"}


def _parse_value(raw: str, kind):
    if kind is str:
        return raw
    if kind is int:
        return int(raw)
    if kind is float:
        return float(raw)
    if kind == "int_list":
        return tuple(int(v.strip()) for v in raw.split(",") if v.strip())
    raise AssertionError(kind)


def parse_config_text(text: str) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(
            f"duplicate key {exc.option!r} in section [{exc.section}]"
        ) from exc
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"duplicate section [{exc.section}]") from exc
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc

    problems = []
    values = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            problems.append(f"unknown section [{section}]")
            continue
        for key, raw in parser.items(section):
            kind = _SCHEMA[section].get(key)
            if kind is None:
                problems.append(f"unknown key {key!r} in section [{section}]")
                continue
            try:
                values[(section, key)] = _parse_value(raw, kind)
            except ValueError:
                problems.append(
                    f"bad value for [{section}] {key} = {raw!r}"
                )
    if problems:
        raise ConfigError("; ".join(problems))

    kwargs = {}
    for (section, key), val in values.items():
        kwargs[_KEY_TO_FIELD.get((section, key), key)] = val

    # resolution defaults depend on kind/preset when left unspecified
    if "resolutions" not in kwargs:
        kind = kwargs.get("kind", "cyclegan")
        preset = kwargs.get("preset", "bw-icons")
        if preset not in PRESETS:
            raise ConfigError(f"preset must be one of {sorted(PRESETS)}")
        kwargs["resolutions"] = (UNIT_DEFAULT_RESOLUTIONS if kind == "unit"
                                 else PRESETS[preset][1])
    if "lambda_idt" not in kwargs:
        preset = kwargs.get("preset", "bw-icons")
        if preset not in PRESETS:
            raise ConfigError(f"preset must be one of {sorted(PRESETS)}")
        kwargs["lambda_idt"] = PRESETS[preset][0]
    try:
        return RunConfig(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text)


def _fmt(value) -> str:
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    return repr(value) if isinstance(value, float) else str(value)


def config_text(cfg: RunConfig) -> str:
    """Canonical serialization; parse(config_text(cfg)) == cfg."""
    out = io.StringIO()
    out.write("[run]\n")
    out.write(f"kind = {cfg.kind}\npreset = {cfg.preset}\nseed = {cfg.seed}\n")
    out.write("\n[schedule]\n")
    out.write(f"resolutions = {_fmt(cfg.resolutions)}\n")
    out.write(f"total_iters = {cfg.total_iters}\n")
    if cfg.stage_iters is not None:
        out.write(f"stage_iters = {_fmt(cfg.stage_iters)}\n")
    out.write("\n[train]\n")
    out.write(f"batch_size = {cfg.batch_size}\nbase_lr = {cfg.base_lr!r}\n")
    out.write(f"width = {cfg.width}\nn_res_blocks = {cfg.n_res_blocks}\n")
    out.write(f"pool_capacity = {cfg.pool_capacity}\n")
    out.write("\n[weights]\n")
    out.write(f"lambda_cyc = {cfg.lambda_cyc!r}\nlambda_idt = {cfg.lambda_idt!r}\n")
    out.write(f"lambda_kl = {cfg.lambda_kl!r}\nlambda_rec = {cfg.lambda_rec!r}\n")
    out.write("\n[data]\n")
    out.write(f"x_dir = {cfg.x_dir}\ny_dir = {cfg.y_dir}\n")
    for key in ("x_allowlist", "x_denylist", "y_allowlist", "y_denylist"):
        val = getattr(cfg, key)
        if val:
            out.write(f"{key} = {val}\n")
    out.write("\n[output]\n")
    out.write(f"dir = {cfg.out_dir}\n")
    return out.getvalue()


def save_config(cfg: RunConfig, path) -> None:
    Path(path).write_text(config_text(cfg))
