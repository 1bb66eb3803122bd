"""Smooth test functionals on step paths: soft ball indicators, evaluations, integrals."""

import logging
from functools import singledispatch
from pathlib import Path
from typing import Union

import numpy as np

from permclt.core.exceptions import GridMismatchError, NonPositiveError, ParseError, RangeError
from permclt.models.functional import (
    BallFunctional,
    EvalFunctional,
    IntegralFunctional,
    PathFunctional,
    ProductFunctional,
)
from permclt.models.path import StepPath, grid_index
from permclt.services import matrix_service

logger = logging.getLogger(__name__)

PathLike = Union[StepPath, np.ndarray]


def _as_values(w: PathLike) -> tuple[np.ndarray, int]:
    """Path values as a 2-D (B, n+1) array and the grid size n."""
    if isinstance(w, StepPath):
        return w.values[None, :], w.n
    values = np.atleast_2d(np.asarray(w, dtype=float))
    return values, values.shape[1] - 1


def h_eps_p(y: PathLike, eps: float, p: float) -> Union[float, np.ndarray]:
    """
    Softened L^p norm h(y) = (integral of (eps^2 + y(t)^2)^{p/2} dt)^{1/p}.

    The integral is exact for a step path: each of the n constancy
    intervals [k/n, (k+1)/n) has length 1/n. The largest integrand value is
    factored out first, so large p does not overflow.

    Args:
        y: StepPath, or (B, n+1) array of path values on the k/n grid.
        eps: Softening, > 0.
        p: Exponent, >= 1.

    Returns:
        A float for a StepPath, otherwise an array of length B.

    Raises:
        NonPositiveError: If eps <= 0.
        RangeError: If p < 1.
    """
    if eps <= 0:
        raise NonPositiveError(f"eps must be positive, got {eps}")
    if p < 1:
        raise RangeError(f"p must be >= 1, got {p}")
    values, n = _as_values(y)
    q = eps * eps + values[:, :n] ** 2
    top = q.max(axis=1)
    h = np.sqrt(top) * np.mean((q / top[:, None]) ** (p / 2.0), axis=1) ** (1.0 / p)
    return float(h[0]) if isinstance(y, StepPath) else h


def phi_cutoff(x):
    """
    C^3 cutoff: 1 on (-inf, 0], 0 on [1, inf) and
    1 - (35x^4 - 84x^5 + 70x^6 - 20x^7) in between.
    """
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    x4 = x**4
    out = 1.0 - x4 * (35.0 - 84.0 * x + 70.0 * x * x - 20.0 * x**3)
    return float(out) if out.ndim == 0 else out


def phi_rho_eta(x, rho: float, eta: float):
    """
    phi((x - rho)/eta), with the plateaus x <= rho -> 1 and x >= rho + eta -> 0 exact.

    Raises:
        NonPositiveError: If eta <= 0.
    """
    if eta <= 0:
        raise NonPositiveError(f"eta must be positive, got {eta}")
    x = np.asarray(x, dtype=float)
    out = np.where(x <= rho, 1.0, np.where(x >= rho + eta, 0.0, phi_cutoff((x - rho) / eta)))
    return float(out) if out.ndim == 0 else out


def _center_values(g: BallFunctional, n: int) -> np.ndarray:
    if g.center is None:
        return StepPath.zero(n).values
    if g.center.n != n:
        raise GridMismatchError(f"center path has n={g.center.n}, path has n={n}")
    return g.center.values


def ball(g: BallFunctional, w: PathLike) -> Union[float, np.ndarray]:
    """
    g{eps,p,rho,eta,s}(w) = phi_{rho,eta}(h_{eps,p}(w - s)).

    Args:
        g: Ball functional.
        w: StepPath, or (B, n+1) array of paths.

    Returns:
        Value(s) in [0, 1].

    Raises:
        GridMismatchError: If the center lives on another grid.
    """
    values, n = _as_values(w)
    h = h_eps_p(values - _center_values(g, n)[None, :], g.eps, g.p)
    out = phi_rho_eta(h, g.rho, g.eta)
    return float(np.asarray(out)[0]) if isinstance(w, StepPath) else np.asarray(out)


def norm_scale(g: Union[BallFunctional, ProductFunctional]) -> float:
    """
    Relative smoothness scale p^2 eps^-2 eta^-3.

    For a product the largest p and the smallest eps and eta are used.
    """
    if isinstance(g, ProductFunctional):
        p = max(f.p for f in g.factors)
        eps = min(f.eps for f in g.factors)
        eta = min(f.eta for f in g.factors)
    else:
        p, eps, eta = g.p, g.eps, g.eta
    return p * p / (eps * eps * eta**3)


@singledispatch
def evaluate_batch(functional, values: np.ndarray, n: int) -> np.ndarray:
    """
    Evaluate a functional on a batch of paths.

    Args:
        functional: A catalog member.
        values: (B, n+1) path values on the k/n grid.
        n: Grid size.

    Returns:
        Array of length B.
    """
    raise TypeError(f"unsupported functional {type(functional).__name__}")


@evaluate_batch.register
def _(functional: BallFunctional, values: np.ndarray, n: int) -> np.ndarray:
    return ball(functional, np.asarray(values, dtype=float).reshape(-1, n + 1))


@evaluate_batch.register
def _(functional: EvalFunctional, values: np.ndarray, n: int) -> np.ndarray:
    return np.asarray(values, dtype=float).reshape(-1, n + 1)[:, int(grid_index(n, functional.t))]


@evaluate_batch.register
def _(functional: IntegralFunctional, values: np.ndarray, n: int) -> np.ndarray:
    return np.asarray(values, dtype=float).reshape(-1, n + 1)[:, :n].mean(axis=1)


@evaluate_batch.register
def _(functional: ProductFunctional, values: np.ndarray, n: int) -> np.ndarray:
    out = np.ones(np.asarray(values).reshape(-1, n + 1).shape[0])
    for factor in functional.factors:
        out = out * evaluate_batch(factor, values, n)
    return out


def evaluate(functional: PathFunctional, w: StepPath) -> float:
    """Evaluate a functional on a single step path."""
    return float(evaluate_batch(functional, w.values[None, :], w.n)[0])


def load_center(path: Union[str, Path]) -> StepPath:
    """
    Read a center path from CSV: one row per grid point k/n, the value in
    the last column (so both "value" and "t,value" layouts work).

    Raises:
        ParseError: If the file is unreadable or has fewer than two rows.
    """
    table = matrix_service.load_matrix(path)
    if table.shape[0] < 2:
        raise ParseError("center path needs at least two grid values", source=str(path))
    return StepPath(n=table.shape[0] - 1, values=table[:, -1])


def _parse_ball(spec: str) -> BallFunctional:
    fields: dict[str, str] = {}
    for part in spec.split(":")[1:]:
        key, sep, value = part.partition("=")
        if not sep:
            raise ParseError(f"expected key=value, got '{part}'", source=spec)
        fields[key.strip()] = value.strip()
    missing = {"eps", "p", "rho", "eta"} - fields.keys()
    if missing:
        raise ParseError(f"ball functional is missing {sorted(missing)}", source=spec)
    try:
        eps, p, rho, eta = (float(fields[k]) for k in ("eps", "p", "rho", "eta"))
    except ValueError as exc:
        raise ParseError(f"bad numeric field ({exc})", source=spec) from exc
    if eps <= 0 or eta <= 0 or p < 1:
        raise ParseError("ball functional needs eps > 0, eta > 0 and p >= 1", source=spec)

    label = fields.get("center", "zero")
    center = None if label == "zero" else load_center(label)
    return BallFunctional(eps=eps, p=p, rho=rho, eta=eta, center=center, center_label=label)


def parse_functional(spec: str) -> PathFunctional:
    """
    Parse a functional spec string.

    Forms: ``ball:eps=..:p=..:rho=..:eta=..[:center=zero|file.csv]``,
    ``eval:t=..``, ``integral`` and products ``ball:...*ball:...``.

    Raises:
        ParseError: On malformed specs.
    """
    spec = spec.strip()
    if "*" in spec:
        factors = tuple(parse_functional(part) for part in spec.split("*"))
        if not all(isinstance(f, BallFunctional) for f in factors):
            raise ParseError("only ball functionals can be multiplied", source=spec)
        return ProductFunctional(factors=factors)
    if spec == "integral":
        return IntegralFunctional()
    if spec.startswith("eval:"):
        key, _, value = spec[len("eval:"):].partition("=")
        try:
            t = float(value)
        except ValueError as exc:
            raise ParseError(f"bad evaluation time '{value}'", source=spec) from exc
        if key.strip() != "t" or not 0.0 <= t <= 1.0:
            raise ParseError("eval functional needs t in [0, 1]", source=spec)
        return EvalFunctional(t=t)
    if spec.startswith("ball:"):
        return _parse_ball(spec)
    raise ParseError(f"unknown functional '{spec}'", source=spec)
