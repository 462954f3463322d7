"""Discrete-time linear control systems g_{k+1} = f(g_k, u_k) on a Lie group.

A system is given by an automorphism ``f0`` and the translation part
``b(u) = f_u(e)``; every controlled map is ``f_u(g) = b(u) f0(g)``.
Control words are ``(n, m)`` float arrays of control values.
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from .errors import ValidationError
from .groups import GroupPoint, LieGroup

logger = logging.getLogger(__name__)

ControlWord = np.ndarray


class ControlOutOfRange(ValidationError):
    """Raised when a control value lies outside the control box."""

    pass


class WordTooShort(ValidationError):
    """Raised when a trajectory is requested beyond the length of its control word."""

    pass


@dataclass(frozen=True)
class ControlRange:
    """A box of controls in R^m discretized on a uniform grid with 0 snapped in.

    The alphabet is the product of the per-axis grids lower + k * delta (upper
    included when it lies on the grid); on each axis the grid point nearest to
    0 is replaced by 0. Letters are ordered lexicographically by coordinates.
    """

    lower: tuple
    upper: tuple
    delta: float

    def __post_init__(self) -> None:
        lower = tuple(float(v) for v in np.atleast_1d(self.lower))
        upper = tuple(float(v) for v in np.atleast_1d(self.upper))
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        if len(lower) != len(upper) or not lower:
            raise ValidationError(f"Control bounds must have the same positive length, got {lower} and {upper}")
        if not np.isfinite(self.delta) or self.delta <= 0:
            raise ValidationError(f"Control step delta must be positive, got {self.delta}")
        for lo, up in zip(lower, upper):
            if not lo <= 0.0 <= up:
                raise ValidationError(f"Control box [{lo}, {up}] must contain 0")

    @property
    def dimension(self) -> int:
        return len(self.lower)

    def axis_grid(self, axis: int) -> np.ndarray:
        lo, up = self.lower[axis], self.upper[axis]
        count = int(np.floor((up - lo) / self.delta + 1e-9)) + 1
        grid = lo + self.delta * np.arange(count)
        if up - grid[-1] > 1e-9 * max(1.0, abs(up)):
            grid = np.append(grid, up)
        else:
            grid[-1] = up
        grid[np.argmin(np.abs(grid))] = 0.0
        return np.unique(grid)

    @cached_property
    def alphabet(self) -> np.ndarray:
        """Finite alphabet as a ``(L, m)`` array in lexicographic order."""
        axes = [self.axis_grid(i) for i in range(self.dimension)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    @property
    def size(self) -> int:
        return int(np.prod([len(self.axis_grid(i)) for i in range(self.dimension)]))

    def contains(self, u, tol: float = 1e-12) -> np.ndarray:
        u = np.asarray(u, dtype=float).reshape(-1, self.dimension)
        lo, up = np.asarray(self.lower), np.asarray(self.upper)
        return np.all((u >= lo - tol) & (u <= up + tol), axis=-1)

    def letter_index(self, u) -> int:
        """Index of a control value in the alphabet."""
        u = np.asarray(u, dtype=float).reshape(self.dimension)
        hits = np.flatnonzero(np.all(np.abs(self.alphabet - u) <= 1e-12, axis=-1))
        if hits.size == 0:
            raise ControlOutOfRange(f"Control {u.tolist()} is not a letter of the alphabet")
        return int(hits[0])

    def zero_index(self) -> int:
        return self.letter_index(np.zeros(self.dimension))


def as_word(w, control_dim: int) -> ControlWord:
    """Normalize a control word to a ``(n, m)`` float array."""
    arr = np.asarray(w, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim == 1:
        arr = arr.reshape(-1, control_dim) if control_dim > 1 else arr.reshape(-1, 1)
    if arr.shape[-1] != control_dim:
        raise ValidationError(f"Control word has entries of size {arr.shape[-1]}, expected {control_dim}")
    return arr


def shift(w, k: int) -> ControlWord:
    """Left shift of a control word: (u_0, u_1, ...) -> (u_k, u_{k+1}, ...)."""
    if k < 0 or k > len(w):
        raise WordTooShort(f"Cannot shift a word of length {len(w)} by {k}")
    return w[k:]


@dataclass
class AutomorphismReport:
    """Worst residuals of f0(gh) = f0(g) f0(h), f0(g^-1) = f0(g)^-1 and f0(e) = e."""

    homomorphism: float
    inverse: float
    identity: float
    samples: int

    def passed(self, tol: float = 1e-12) -> bool:
        return max(self.homomorphism, self.inverse, self.identity) <= tol


@dataclass(eq=False)
class LinearSystem:
    """A discrete-time linear control system on a Lie group.

    ``f0`` and ``b`` are vectorized closed forms: ``f0`` maps ``(..., d)`` points,
    ``b`` maps ``(..., m)`` controls to ``(..., d)`` points. ``f0_power(g, k)``
    and ``f0_inverse`` are optional closed forms; ``differential`` is the
    analytic matrix of (df0)_e in exponential coordinates when known.
    """

    name: str
    group: LieGroup
    f0: Callable[[np.ndarray], np.ndarray]
    b: Callable[[np.ndarray], np.ndarray]
    control: ControlRange
    f0_inverse: Optional[Callable[[np.ndarray], np.ndarray]] = None
    f0_power_closed: Optional[Callable[[np.ndarray, int], np.ndarray]] = None
    differential: Optional[np.ndarray] = None
    description: str = ""
    formulas: Dict[str, str] = field(default_factory=dict)

    def _check_control(self, u) -> np.ndarray:
        u = as_word(u, self.control.dimension)
        if not np.all(self.control.contains(u)):
            raise ControlOutOfRange(f"Control {u.tolist()} outside [{self.control.lower}, {self.control.upper}]")
        return u

    def step(self, g, u) -> GroupPoint:
        """f_u(g) = b(u) f0(g) for a control inside the box (not necessarily on the grid)."""
        g = self.group.check_chart(g)
        u = self._check_control(u)[0]
        return self.group._product(self.b(u), self.f0(g))

    def f0_power(self, g, k: int) -> GroupPoint:
        """f0^k(g), from the closed form when the system declares one."""
        if k < 0:
            raise ValidationError(f"f0_power expects k >= 0, got {k}")
        g = self.group.check_chart(g)
        if self.f0_power_closed is not None:
            return self.f0_power_closed(g, k)
        out = np.array(g, dtype=float)
        for _ in range(k):
            out = self.f0(out)
        return out

    def inverse_step(self, g, u) -> GroupPoint:
        """(f_u)^-1(g) = f0^-1(b(u)^-1 g)."""
        if self.f0_inverse is None:
            raise ValidationError(f"System {self.name} does not provide f0^-1")
        g = self.group.check_chart(g)
        u = self._check_control(u)[0]
        return self.f0_inverse(self.group._product(self.group._inverse(self.b(u)), g))

    def _prepare(self, k: int, g, w) -> tuple:
        w = self._check_control(w) if len(np.atleast_1d(w)) else np.zeros((0, self.control.dimension))
        if k < 0 or k > len(w):
            raise WordTooShort(f"Trajectory of length {k} requested from a word of length {len(w)}")
        return self.group.check_chart(g), w

    def trajectory_direct(self, k: int, g, w) -> List[GroupPoint]:
        """[g, f_{u_0}(g), ..., f_{u_{k-1}} o ... o f_{u_0}(g)] by direct iteration."""
        g, w = self._prepare(k, g, w)
        points = [np.array(g, dtype=float)]
        for j in range(k):
            points.append(self.group._product(self.b(w[j]), self.f0(points[-1])))
        return points

    def trajectory_translated(self, k: int, g, w) -> List[GroupPoint]:
        """Trajectory through the solution formula phi(j, g, w) = phi(j, e, w) f0^j(g)."""
        g, w = self._prepare(k, g, w)
        base = self.trajectory_direct(k, self.group.identity(), w)
        return [self.group._product(base[j], self.f0_power(g, j)) for j in range(k + 1)]

    def endpoint(self, k: int, g, w) -> GroupPoint:
        return self.trajectory_direct(k, g, w)[-1]

    def zero_word(self, n: int) -> ControlWord:
        return np.zeros((n, self.control.dimension))

    def automorphism_report(self, rng: np.random.Generator, n: int = 1000, scale: float = 0.5) -> AutomorphismReport:
        G = self.group
        g = G.random_points(rng, n, scale)
        h = G.random_points(rng, n, scale)
        hom = G.chart_distance(self.f0(G._product(g, h)), G._product(self.f0(g), self.f0(h)))
        inv = G.chart_distance(self.f0(G._inverse(g)), G._inverse(self.f0(g)))
        ident = G.chart_distance(self.f0(G.identity()), G.identity())
        report = AutomorphismReport(
            homomorphism=float(hom.max()),
            inverse=float(inv.max()),
            identity=float(np.max(ident)),
            samples=n,
        )
        logger.debug(f"Automorphism residuals for {self.name}: {report}")
        return report

    def solution_formula_residual(self, rng: np.random.Generator, n: int = 100, horizon: int = 8, scale: float = 0.5) -> float:
        """Worst relative gap between direct iteration and phi(k, e, w) f0^k(g) on random words."""
        G = self.group
        alphabet = self.control.alphabet
        worst = 0.0
        for _ in range(n):
            w = alphabet[rng.integers(0, len(alphabet), size=horizon)]
            g = G.random_points(rng, 1, scale)[0]
            for a, b in zip(self.trajectory_direct(horizon, g, w), self.trajectory_translated(horizon, g, w)):
                gap = float(G.chart_distance(a, b)) / max(1.0, float(np.linalg.norm(a)))
                worst = max(worst, gap)
        return worst

    def words_from_letters(self, letters: Sequence[int]) -> ControlWord:
        """Control values of a word given as alphabet indices."""
        return self.control.alphabet[np.asarray(letters, dtype=int)]
