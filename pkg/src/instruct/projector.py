from dataclasses import dataclass

import numpy as np

from src.core import ops
from src.core.nn import Linear
from src.core.tensor import Module, Tensor
from src.exception import TensorShapeError


@dataclass
class ProjectorParams(Module):
    """Two linear maps with a GELU between: d -> d_dec -> d_dec. Shared by every graph and task."""
    fc1: Linear
    fc2: Linear

    @classmethod
    def init(cls, d: int, d_dec: int, rng: np.random.Generator) -> "ProjectorParams":
        return cls(fc1=Linear.init(rng, d, d_dec), fc2=Linear.init(rng, d_dec, d_dec))

    @property
    def d_in(self) -> int:
        return self.fc1.d_in

    @property
    def d_out(self) -> int:
        return self.fc2.d_out


def project(pp: ProjectorParams, rows: Tensor) -> Tensor:
    """Row-wise map of [..., n, d] aligner rows into the decoder embedding width."""
    if rows.shape[-1] != pp.d_in:
        raise TensorShapeError(f"projector expects width {pp.d_in}, got {rows.shape}")
    return pp.fc2(ops.gelu(pp.fc1(rows)))
