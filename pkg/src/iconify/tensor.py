"""Dense tensors and the reverse-mode differentiation tape.

A ``Tensor`` wraps a contiguous float32/float64 numpy array. Arithmetic on
tensors that are recorded on a ``Tape`` appends nodes holding the ids of the
recorded parents plus a local gradient rule, so node ids are topologically
ordered by construction and ``backward`` is a single reverse sweep.

Two conventions hold everywhere:

* every op output is validated to be finite -- NaN/Inf raises
  ``NonFiniteError`` at the op that produced it instead of propagating;
* tensors are immutable while a tape that references them is alive. The
  optimizer rewrites parameter buffers in place *between* steps, and each
  training step records onto a fresh tape.
"""

from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "Tensor",
    "Tape",
    "TapeNode",
    "backward",
    "ShapeError",
    "NonFiniteError",
    "TapeError",
    "DEFAULT_DTYPE",
    "zeros",
    "full",
    "randn",
]

DEFAULT_DTYPE = np.float32

_FLOAT_DTYPES = (np.float32, np.float64)


class ShapeError(ValueError):
    """Operand shapes are incompatible for the requested op."""


class NonFiniteError(FloatingPointError):
    """A produced value is NaN or infinite."""


class TapeError(RuntimeError):
    """Tape misuse: wrong root, mixed tapes, or unrecorded tensor."""


def _as_float_array(data, dtype=None) -> np.ndarray:
    if dtype is None:
        if isinstance(data, np.ndarray) and data.dtype in _FLOAT_DTYPES:
            dtype = data.dtype
        else:
            dtype = DEFAULT_DTYPE
    arr = np.asarray(data, dtype=dtype)
    if not arr.flags.c_contiguous:
        # ascontiguousarray would promote 0-d to 1-d; 0-d is always contiguous
        arr = np.ascontiguousarray(arr)
    return arr


class Tensor:
    """n-dimensional real array, optionally recorded on a Tape.

    ``node_id``/``tape`` are set when the tensor is watched or produced by a
    recorded op; plain tensors act as constants and receive no gradient.
    """

    __slots__ = ("data", "node_id", "tape")

    def __init__(self, data, dtype=None):
        arr = _as_float_array(data, dtype)
        if not np.all(np.isfinite(arr)):
            raise NonFiniteError(
                f"tensor of shape {arr.shape} contains NaN or Inf"
            )
        self.data = arr
        self.node_id: Optional[int] = None
        self.tape: Optional["Tape"] = None

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        """Same values, not recorded anywhere. Shares the buffer."""
        out = Tensor.__new__(Tensor)
        out.data = self.data
        out.node_id = None
        out.tape = None
        return out

    def copy(self) -> "Tensor":
        return Tensor(self.data.copy())

    def __repr__(self):
        tag = f", node={self.node_id}" if self.node_id is not None else ""
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype}{tag})"

    # -- arithmetic (same-shape tensors or python scalars only) ------------

    def __add__(self, other):
        if isinstance(other, Tensor):
            return _add_tt(self, other)
        return _add_ts(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Tensor):
            return _sub_tt(self, other)
        return _add_ts(self, -other)

    def __rsub__(self, other):
        return _scale(self, -1.0, shift=other)

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return _mul_tt(self, other)
        return _scale(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return _scale(self, -1.0)


class TapeNode:
    """(output id, recorded parent ids, local gradient rule).

    ``rule(grad_out)`` returns one gradient array per parent id, in order.
    Leaf nodes created by ``Tape.watch`` carry no parents and no rule.
    """

    __slots__ = ("out_id", "parent_ids", "rule")

    def __init__(self, out_id: int, parent_ids: tuple, rule):
        self.out_id = out_id
        self.parent_ids = parent_ids
        self.rule = rule


class Tape:
    """Append-only record of recorded ops; owned by a single training step.

    ``backward`` closes the tape: afterwards its tensors act as constants
    in any later op, which is how parameters from a finished step enter the
    next step's graph without gradient flow until re-watched.
    """

    def __init__(self):
        self.nodes: list[TapeNode] = []
        self.gradients: dict[int, Tensor] = {}
        self.closed = False

    def __len__(self):
        return len(self.nodes)

    def __bool__(self):
        return True  # an empty tape is still a tape

    def watch(self, tensor: Tensor) -> Tensor:
        """Register a leaf so downstream ops record and it gets a gradient.

        A tensor watched on an earlier (discarded) tape may be re-watched
        here; an op *output* of another tape may not.
        """
        if tensor.tape is self and tensor.node_id is not None:
            return tensor
        if tensor.tape is not None and not tensor.tape.closed:
            if tensor.tape.nodes[tensor.node_id].rule is not None:
                raise TapeError(
                    "cannot watch an op output recorded on an open tape"
                )
        tensor.node_id = len(self.nodes)
        tensor.tape = self
        self.nodes.append(TapeNode(tensor.node_id, (), None))
        return tensor

    def gradient(self, tensor: Tensor) -> Optional[Tensor]:
        """Gradient of the last backward() root w.r.t. ``tensor``, if any."""
        if tensor.tape is not self or tensor.node_id is None:
            return None
        return self.gradients.get(tensor.node_id)


def record(out_data: np.ndarray, parts: Sequence[tuple]) -> Tensor:
    """Wrap an op result, recording it if any parent is recorded.

    ``parts`` is a sequence of ``(parent_tensor, grad_fn)`` pairs where
    ``grad_fn(g)`` maps the output gradient to that parent's gradient.
    Gradient rules for constant parents are dropped and never evaluated.
    """
    out = Tensor(out_data)
    tape = None
    for parent, _ in parts:
        if parent.tape is not None and not parent.tape.closed:
            if tape is None:
                tape = parent.tape
            elif tape is not parent.tape:
                raise TapeError("op mixes tensors from two open tapes")
    if tape is None:
        return out
    tracked = [(p.node_id, fn) for p, fn in parts if p.tape is tape]
    if not tracked:
        return out
    parent_ids = tuple(pid for pid, _ in tracked)
    fns = tuple(fn for _, fn in tracked)

    def rule(g, _fns=fns):
        return tuple(fn(g) for fn in _fns)

    out.node_id = len(tape.nodes)
    out.tape = tape
    tape.nodes.append(TapeNode(out.node_id, parent_ids, rule))
    return out


def backward(tape: Tape, root: Tensor) -> dict[int, Tensor]:
    """Reverse accumulation from a scalar root.

    Populates ``tape.gradients`` for every node reachable from the root;
    unreachable nodes get no entry. Returns the gradient map.
    """
    if root.tape is not tape or root.node_id is None:
        raise TapeError("backward root is not recorded on this tape")
    if tape.closed:
        raise TapeError("tape already closed by a previous backward")
    if root.data.ndim != 0:
        raise ShapeError(
            f"backward root must be a scalar, got shape {root.shape}"
        )
    tape.closed = True
    grads: dict[int, np.ndarray] = {
        root.node_id: np.ones((), dtype=root.data.dtype)
    }
    for node in reversed(tape.nodes[: root.node_id + 1]):
        g = grads.get(node.out_id)
        if g is None or node.rule is None:
            continue
        for pid, pg in zip(node.parent_ids, node.rule(g)):
            acc = grads.get(pid)
            grads[pid] = pg if acc is None else acc + pg
    tape.gradients = {nid: Tensor(arr) for nid, arr in grads.items()}
    return tape.gradients


# -- elementwise arithmetic ------------------------------------------------


def _require_same_shape(a: Tensor, b: Tensor, op: str):
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} differ")


def _add_tt(a: Tensor, b: Tensor) -> Tensor:
    _require_same_shape(a, b, "add")
    return record(a.data + b.data, [(a, lambda g: g), (b, lambda g: g)])


def _sub_tt(a: Tensor, b: Tensor) -> Tensor:
    _require_same_shape(a, b, "sub")
    return record(a.data - b.data, [(a, lambda g: g), (b, lambda g: -g)])


def _mul_tt(a: Tensor, b: Tensor) -> Tensor:
    _require_same_shape(a, b, "mul")
    ad, bd = a.data, b.data
    return record(ad * bd, [(a, lambda g: g * bd), (b, lambda g: g * ad)])


def _add_ts(a: Tensor, c) -> Tensor:
    c = float(c)
    return record(a.data + np.asarray(c, dtype=a.dtype), [(a, lambda g: g)])


def _scale(a: Tensor, c, shift=None) -> Tensor:
    c = float(c)
    out = a.data * np.asarray(c, dtype=a.dtype)
    if shift is not None:
        out = out + np.asarray(float(shift), dtype=a.dtype)
    return record(out, [(a, lambda g: g * np.asarray(c, dtype=g.dtype))])


# -- constructors ----------------------------------------------------------


def zeros(shape, dtype=DEFAULT_DTYPE) -> Tensor:
    return Tensor(np.zeros(shape, dtype=dtype))


def full(shape, value, dtype=DEFAULT_DTYPE) -> Tensor:
    return Tensor(np.full(shape, value, dtype=dtype))


def randn(rng: np.random.Generator, shape, std=1.0, dtype=DEFAULT_DTYPE) -> Tensor:
    draw = rng.standard_normal(shape, dtype=np.dtype(dtype))
    if std != 1.0:
        draw = draw * np.asarray(std, dtype=dtype)
    return Tensor(draw)
