"""Test-functional catalog types."""

from dataclasses import dataclass
from typing import Optional, Union

from permclt.models.path import StepPath


@dataclass(frozen=True)
class BallFunctional:
    """
    Soft indicator of a ball around ``center``:
    w -> phi_{rho,eta}(h_{eps,p}(w - center)).

    ``center=None`` means the zero path on whatever grid ``w`` lives on.
    """

    eps: float
    p: float
    rho: float
    eta: float
    center: Optional[StepPath] = None
    center_label: str = "zero"

    @property
    def name(self) -> str:
        return (
            f"ball:eps={self.eps:g}:p={self.p:g}:rho={self.rho:g}"
            f":eta={self.eta:g}:center={self.center_label}"
        )


@dataclass(frozen=True)
class EvalFunctional:
    """Point evaluation w -> w(t)."""

    t: float

    @property
    def name(self) -> str:
        return f"eval:t={self.t:g}"


@dataclass(frozen=True)
class IntegralFunctional:
    """w -> integral of w over [0,1]."""

    @property
    def name(self) -> str:
        return "integral"


@dataclass(frozen=True)
class ProductFunctional:
    """Pointwise product of ball functionals (soft indicator of an intersection)."""

    factors: tuple[BallFunctional, ...]

    @property
    def name(self) -> str:
        return "*".join(f.name for f in self.factors)


PathFunctional = Union[BallFunctional, EvalFunctional, IntegralFunctional, ProductFunctional]
