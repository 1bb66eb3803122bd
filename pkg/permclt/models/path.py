"""Step paths on the grid {k/n}."""

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from permclt.core.exceptions import GridMismatchError, RangeError

# Absorbs floating error in n*t before flooring (0.29*100 = 28.999...).
_FLOOR_EPS = 1e-9


def grid_index(n: int, times: Union[float, Sequence[float], np.ndarray]) -> np.ndarray:
    """
    Map evaluation times to storage indices floor(n t).

    Args:
        n: Grid resolution.
        times: Time or times in [0, 1].

    Returns:
        Integer index array with the same shape as ``times``.

    Raises:
        RangeError: If any time lies outside [0, 1].
    """
    t = np.asarray(times, dtype=float)
    if np.any(t < 0.0) or np.any(t > 1.0):
        raise RangeError(f"evaluation times must lie in [0,1], got {t}")
    return np.minimum(np.floor(n * t + _FLOOR_EPS).astype(int), n)


@dataclass(frozen=True)
class StepPath:
    """
    Right-continuous step function on [0,1] with jumps only at k/n.

    ``values[k]`` is the value on [k/n, (k+1)/n) for k < n, and
    ``values[n]`` is the value at t = 1.
    """

    n: int
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float, copy=True)
        if values.shape != (self.n + 1,):
            raise GridMismatchError(
                f"step path on n={self.n} needs {self.n + 1} values, got {values.shape}"
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_increments(cls, increments: Sequence[float]) -> "StepPath":
        """Build sum_i x_i J_{i/n} from the increments x_1..x_n."""
        x = np.asarray(increments, dtype=float)
        return cls(n=len(x), values=np.concatenate(([0.0], np.cumsum(x))))

    @classmethod
    def zero(cls, n: int) -> "StepPath":
        return cls(n=n, values=np.zeros(n + 1))

    @property
    def times(self) -> np.ndarray:
        """Grid points 0, 1/n, ..., 1."""
        return np.arange(self.n + 1) / self.n

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.values)

    def __call__(self, t: Union[float, Sequence[float], np.ndarray]):
        """Evaluate the path (right-continuous) at ``t``."""
        out = self.values[grid_index(self.n, t)]
        return float(out) if np.ndim(out) == 0 else out

    def __sub__(self, other: "StepPath") -> "StepPath":
        if self.n != other.n:
            raise GridMismatchError(f"cannot subtract paths on n={self.n} and n={other.n}")
        return StepPath(n=self.n, values=self.values - other.values)
