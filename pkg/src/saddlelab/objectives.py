"""Catalog of smooth test objectives with analytic derivatives.

Every objective carries closed-form value, gradient, and Hessian callables
plus, when available, a uniform bound on its third derivatives. Catalog
entries are addressable by a compact string grammar (see
:func:`parse_function_spec`), which the CLI exposes as ``--function``.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError

Array = np.ndarray

__all__ = [
    "ObjectiveFunction",
    "CatalogEntry",
    "quadratic_form",
    "diagonal_quadratic",
    "cubic_perturbed",
    "trig_multiwell",
    "catalog_entry",
    "parse_function_spec",
    "parse_catalog_entry",
    "trig_lattice_critical_points",
    "FUNCTION_GRAMMAR",
]


@dataclass(frozen=True)
class ObjectiveFunction:
    """A smooth objective with analytic derivatives.

    ``third_derivative_bound`` is a uniform bound on all third partial
    derivatives, or ``None`` when no finite bound is known.
    """

    dimension: int
    value: Callable[[Array], float]
    gradient: Callable[[Array], Array]
    hessian: Callable[[Array], Array]
    third_derivative_bound: float | None = None


@dataclass(frozen=True)
class CatalogEntry:
    """A named objective together with critical points known in closed form.

    ``known_critical_points`` maps exact critical locations to their
    classification string ("minimum", "maximum", "saddle", "degenerate").
    """

    name: str
    function: ObjectiveFunction
    known_critical_points: tuple[tuple[Array, str], ...]


def _classification_from_eigs(eigs: Array) -> str:
    abs_eigs = np.abs(eigs)
    top = abs_eigs.max()
    if top == 0.0 or abs_eigs.min() <= 1e-8 * top:
        return "degenerate"
    if np.all(eigs > 0):
        return "minimum"
    if np.all(eigs < 0):
        return "maximum"
    return "saddle"


def _frozen(a: Array) -> Array:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def quadratic_form(A: Array) -> ObjectiveFunction:
    """f(x) = (1/2) x^T A x for a symmetric nonsingular matrix A."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ConfigError(f"quadratic form needs a square matrix, got shape {A.shape}")
    if not np.allclose(A, A.T, rtol=0.0, atol=1e-12):
        raise ConfigError("quadratic form matrix must be symmetric")
    A = _frozen((A + A.T) / 2.0)
    d = A.shape[0]

    def value(x: Array) -> float:
        return 0.5 * float(x @ (A @ x))

    def gradient(x: Array) -> Array:
        return A @ x

    def hessian(x: Array) -> Array:
        return A

    return ObjectiveFunction(d, value, gradient, hessian, third_derivative_bound=0.0)


def diagonal_quadratic(eigenvalues: Sequence[float]) -> ObjectiveFunction:
    return quadratic_form(np.diag(np.asarray(eigenvalues, dtype=float)))


def cubic_perturbed(eigenvalues: Sequence[float], beta: float) -> ObjectiveFunction:
    """f(x) = (1/2) x^T diag(lam) x + (beta/6) sum_i x_i^3.

    All third partials are 0 except d^3 f / dx_i^3 = beta, so beta is the
    exact uniform third-derivative bound.
    """
    lam = np.asarray(eigenvalues, dtype=float)
    if lam.ndim != 1 or lam.size == 0:
        raise ConfigError("cubic perturbation needs a nonempty eigenvalue list")
    beta = float(beta)
    lam = _frozen(lam)
    d = lam.size

    def value(x: Array) -> float:
        return 0.5 * float(lam @ (x * x)) + (beta / 6.0) * float(np.sum(x ** 3))

    def gradient(x: Array) -> Array:
        return lam * x + (beta / 2.0) * x * x

    def hessian(x: Array) -> Array:
        return np.diag(lam + beta * x)

    return ObjectiveFunction(d, value, gradient, hessian, third_derivative_bound=abs(beta))


def trig_multiwell(dimension: int) -> ObjectiveFunction:
    """f(x) = -sum_i cos(x_i), the periodic multi-well objective.

    Critical points form the lattice of integer multiples of pi; every
    third partial derivative is a sine, so the uniform bound is 1.
    """
    d = int(dimension)
    if d < 1:
        raise ConfigError("trig multiwell dimension must be >= 1")

    def value(x: Array) -> float:
        return -float(np.sum(np.cos(x)))

    def gradient(x: Array) -> Array:
        return np.sin(x)

    def hessian(x: Array) -> Array:
        return np.diag(np.cos(x))

    return ObjectiveFunction(d, value, gradient, hessian, third_derivative_bound=1.0)


def trig_lattice_critical_points(
    dimension: int, radius: float,
) -> list[tuple[Array, str]]:
    """All critical points of the trig multi-well inside the closed ball
    of the given radius around the origin, as (point, classification)
    pairs in the same format as CatalogEntry.known_critical_points."""
    kmax = int(np.floor(radius / np.pi))
    rng = range(-kmax, kmax + 1)
    points = []
    for combo in product(rng, repeat=dimension):
        p = np.array(combo, dtype=float) * np.pi
        if np.linalg.norm(p) <= radius:
            points.append((_frozen(p), _classification_from_eigs(np.cos(p))))
    return points


def _quadratic_critical_points(lam: Array) -> tuple[tuple[Array, str], ...]:
    origin = _frozen(np.zeros(lam.size))
    return ((origin, _classification_from_eigs(lam)),)


def _cubic_critical_points(lam: Array, beta: float) -> tuple[tuple[Array, str], ...]:
    # Coordinatewise stationarity: x_i in {0, -2*lam_i/beta}.
    points = []
    for combo in product((0, 1), repeat=lam.size):
        x = np.where(np.array(combo, dtype=bool), -2.0 * lam / beta, 0.0)
        eigs = lam + beta * x
        points.append((_frozen(x), _classification_from_eigs(eigs)))
    return tuple(points)


def _trig_critical_points(d: int) -> tuple[tuple[Array, str], ...]:
    # A representative set: every 0/pi combination in the first positive
    # orthant plus the reflected single-pi saddles.
    points = []
    for combo in product((0.0, np.pi), repeat=d):
        x = np.array(combo)
        eigs = np.cos(x)
        points.append((_frozen(x), _classification_from_eigs(eigs)))
    for i in range(d):
        x = np.zeros(d)
        x[i] = -np.pi
        points.append((_frozen(x), "saddle"))
    return tuple(points)


FUNCTION_GRAMMAR = """\
Function spec grammar (all numbers are decimal floats):
  quadratic:diag:<l1,l2,...>        (1/2) x^T diag(l) x
  quadratic:dense:<a11,a12,...>     (1/2) x^T A x, row-major symmetric A
  cubic-perturbed:<l1,...>:<beta>   (1/2) x^T diag(l) x + (beta/6) sum x_i^3
  trig-multiwell:<d>                -sum_{i<=d} cos(x_i)
Examples: quadratic:diag:1,-1   quadratic:dense:0,2,2,0
          cubic-perturbed:1,-1:0.5   trig-multiwell:2
"""


def _parse_floats(text: str, offset: int) -> list[float]:
    if not text:
        raise ConfigError(f"empty parameter list at position {offset}")
    values = []
    pos = offset
    for token in text.split(","):
        if token == "":
            raise ConfigError(f"empty number at position {pos}")
        try:
            values.append(float(token))
        except ValueError:
            raise ConfigError(f"bad number {token!r} at position {pos}") from None
        pos += len(token) + 1
    return values


def parse_catalog_entry(spec: str) -> CatalogEntry:
    """Parse a function spec string into a catalog entry.

    Raises ConfigError naming the offending token and its character
    position for anything outside the grammar.
    """
    if not isinstance(spec, str) or not spec.strip():
        raise ConfigError("empty function spec at position 0")
    spec = spec.strip()
    head, sep, rest = spec.partition(":")

    if head == "quadratic":
        kind, sep2, params = rest.partition(":")
        offset = len(head) + 1 + len(kind) + 1
        if kind == "diag":
            lam = np.array(_parse_floats(params, offset))
            fn = diagonal_quadratic(lam)
            return CatalogEntry(spec, fn, _quadratic_critical_points(lam))
        if kind == "dense":
            entries = _parse_floats(params, offset)
            d = int(round(np.sqrt(len(entries))))
            if d * d != len(entries):
                raise ConfigError(
                    f"dense quadratic needs d^2 entries, got {len(entries)} "
                    f"at position {offset}"
                )
            A = np.array(entries).reshape(d, d)
            fn = quadratic_form(A)
            eigs = np.linalg.eigvalsh(np.asarray(A))
            origin = _frozen(np.zeros(d))
            return CatalogEntry(spec, fn, ((origin, _classification_from_eigs(eigs)),))
        raise ConfigError(
            f"unknown quadratic kind {kind!r} at position {len(head) + 1}"
        )

    if head == "cubic-perturbed":
        lam_text, sep2, beta_text = rest.rpartition(":")
        if not sep2:
            raise ConfigError(
                f"cubic-perturbed needs <eigs>:<beta> at position {len(head) + 1}"
            )
        lam = np.array(_parse_floats(lam_text, len(head) + 1))
        beta_pos = len(head) + 1 + len(lam_text) + 1
        beta = _parse_floats(beta_text, beta_pos)
        if len(beta) != 1:
            raise ConfigError(f"beta must be a single number at position {beta_pos}")
        fn = cubic_perturbed(lam, beta[0])
        return CatalogEntry(spec, fn, _cubic_critical_points(lam, beta[0]))

    if head == "trig-multiwell":
        offset = len(head) + 1
        if not rest:
            raise ConfigError(f"missing dimension at position {offset}")
        try:
            d = int(rest)
        except ValueError:
            raise ConfigError(f"bad dimension {rest!r} at position {offset}") from None
        if d < 1:
            raise ConfigError(f"dimension must be >= 1 at position {offset}")
        return CatalogEntry(spec, trig_multiwell(d), _trig_critical_points(d))

    raise ConfigError(f"unknown function family {head!r} at position 0")


def parse_function_spec(spec: str) -> ObjectiveFunction:
    """Parse a function spec string and return just the objective."""
    return parse_catalog_entry(spec).function


def catalog_entry(name: str) -> CatalogEntry:
    """Alias of :func:`parse_catalog_entry`; catalog names are specs."""
    return parse_catalog_entry(name)
