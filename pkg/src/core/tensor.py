"""Dense float64 tensors recorded on an explicit tape for reverse-mode differentiation."""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from src.exception import FrozenParameterError, NumericError, TensorShapeError

VJP = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]

_ACTIVE_TAPES: List["Tape"] = []


def _ensure_finite(data: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(data)):
        raise NumericError(f"non-finite values produced by {what}")


class Tensor:
    """
    A dense float64 array. Tensors created by the user are leaves; tensors produced by an op
    while a tape is active (and at least one input requires grad) are recorded on that tape.
    """

    __slots__ = ("data", "requires_grad", "grad", "is_leaf", "name")

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None):
        arr = np.array(data, dtype=np.float64)
        _ensure_finite(arr, "tensor construction")
        self.data: np.ndarray = arr
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.is_leaf = True
        self.name = name

    @classmethod
    def _from_op(cls, data: np.ndarray) -> "Tensor":
        out = cls.__new__(cls)
        out.data = data
        out.requires_grad = False
        out.grad = None
        out.is_leaf = False
        out.name = None
        return out

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        if self.data.size != 1:
            raise TensorShapeError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(()))

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{label})"

    # thin operator sugar; the ops module holds the rules
    def __add__(self, other: "Tensor") -> "Tensor":
        from src.core import ops
        return ops.add(self, other)

    def __sub__(self, other: "Tensor") -> "Tensor":
        from src.core import ops
        return ops.sub(self, other)

    def __mul__(self, other: "Tensor") -> "Tensor":
        from src.core import ops
        return ops.mul(self, other)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        from src.core import ops
        return ops.matmul(self, other)


@dataclass
class _Record:
    out: Tensor
    inputs: Tuple[Tensor, ...]
    vjp: VJP


class Tape:
    """
    Ordered record of the differentiable ops executed while the tape is active.

    Usage::

        with Tape() as tape:
            loss = f(params)
        backward(loss, tape)
    """

    def __init__(self) -> None:
        self.records: List[_Record] = []

    def __enter__(self) -> "Tape":
        _ACTIVE_TAPES.append(self)
        return self

    def __exit__(self, *exc) -> None:
        _ACTIVE_TAPES.remove(self)

    def __len__(self) -> int:
        return len(self.records)

    def record(self, out: Tensor, inputs: Tuple[Tensor, ...], vjp: VJP) -> None:
        self.records.append(_Record(out, inputs, vjp))


def current_tape() -> Optional[Tape]:
    return _ACTIVE_TAPES[-1] if _ACTIVE_TAPES else None


def make_output(data: np.ndarray, inputs: Tuple[Tensor, ...], vjp: VJP, what: str) -> Tensor:
    """Wraps an op result, records it when a tape is active and some input needs a gradient."""
    _ensure_finite(data, what)
    out = Tensor._from_op(data)
    tape = current_tape()
    if tape is not None and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        tape.record(out, inputs, vjp)
    return out


def backward(loss: Tensor, tape: Tape) -> None:
    """
    Accumulates dLoss/dLeaf into ``.grad`` of every grad-enabled leaf reachable on the tape.
    Leaf gradients add up across calls; intermediate gradients live only for this traversal.
    """
    if loss.data.size != 1:
        raise TensorShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        raise TensorShapeError("loss does not require grad; nothing was recorded for it")

    seed = np.ones_like(loss.data)
    if loss.is_leaf:
        loss.grad = seed if loss.grad is None else loss.grad + seed
        return
    if not any(rec.out is loss for rec in tape.records):
        raise TensorShapeError("loss was not produced on the given tape")

    pending: Dict[int, np.ndarray] = {id(loss): seed}
    for rec in reversed(tape.records):
        g = pending.pop(id(rec.out), None)
        if g is None:
            continue
        for t, gi in zip(rec.inputs, rec.vjp(g)):
            if gi is None or not t.requires_grad:
                continue
            if t.is_leaf:
                t.grad = gi.copy() if t.grad is None else t.grad + gi
            else:
                prev = pending.get(id(t))
                pending[id(t)] = gi if prev is None else prev + gi


@dataclass
class Module:
    """
    Dataclass parameter container. Fields holding Tensors, Modules or lists of Modules are walked
    in declaration order, which fixes the parameter naming and checkpoint order.
    """

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Tensor]]:
        for f in fields(self):
            value = getattr(self, f.name)
            name = f"{prefix}{f.name}"
            if isinstance(value, Tensor):
                yield name, value
            elif isinstance(value, Module):
                yield from value.named_parameters(prefix=f"{name}.")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(prefix=f"{name}.{i}.")

    def parameters(self) -> List[Tensor]:
        return [p for _, p in self.named_parameters()]

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: p.data for name, p in self.named_parameters()}

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        own = dict(self.named_parameters())
        if set(own) != set(state):
            missing = sorted(set(own) - set(state))
            extra = sorted(set(state) - set(own))
            raise TensorShapeError(f"checkpoint keys differ: missing={missing} unexpected={extra}")
        for name, p in own.items():
            arr = np.asarray(state[name], dtype=np.float64)
            if arr.shape != p.shape:
                raise TensorShapeError(f"{name}: checkpoint shape {arr.shape} != parameter shape {p.shape}")
            p.data = arr.copy()

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def freeze(self) -> None:
        for p in self.parameters():
            p.requires_grad = False
            p.grad = None

    def assert_no_grad(self, what: str) -> None:
        for name, p in self.named_parameters():
            if p.requires_grad or (p.grad is not None and np.any(p.grad)):
                raise FrozenParameterError(f"frozen {what} parameter {name} received a gradient")
