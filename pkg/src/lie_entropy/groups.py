"""Concrete Lie groups with global charts, exponential coordinates and left-invariant distances.

Points and Lie algebra vectors are numpy arrays whose last axis has length
``dimension``; every operation broadcasts over leading axes.
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from .errors import LieEntropyError, ValidationError

logger = logging.getLogger(__name__)

GroupPoint = np.ndarray
AlgebraVector = np.ndarray


class ChartViolation(ValidationError):
    """Raised when a point violates the chart constraints of its group."""

    pass


class OutsideChart(LieEntropyError):
    """Raised when a group element has no canonical logarithm."""

    pass


def wrap_unit(x: np.ndarray) -> np.ndarray:
    """Reduce coordinates modulo 1 into the fundamental domain [0, 1)."""
    r = np.mod(x, 1.0)
    return np.where(r >= 1.0, 0.0, r)


def wrap_centered(x: np.ndarray) -> np.ndarray:
    """Reduce coordinates modulo 1 into [-1/2, 1/2]."""
    return x - np.round(x)


@dataclass
class AxiomReport:
    """Worst residuals of the group axioms on random samples."""

    associativity: float
    identity: float
    inverse: float
    left_invariance: float
    exp_log: float
    samples: int

    def passed(self, axioms_tol: float = 1e-12, invariance_tol: float = 1e-9, exp_log_tol: float = 1e-10) -> bool:
        return (
            max(self.associativity, self.identity, self.inverse) <= axioms_tol
            and self.left_invariance <= invariance_tol
            and self.exp_log <= exp_log_tol
        )


class LieGroup(ABC):
    """A connected Lie group realised in a global chart.

    Subclasses provide the product, inverse, exponential coordinates and a
    left-invariant distance. The Lie algebra basis is the one in which
    ``exp`` and ``log`` are written; ``structure_constants[i, j, k]`` is the
    k-th coordinate of ``[e_i, e_j]``.
    """

    name: str = NotImplemented
    dimension: int = NotImplemented
    simply_connected: bool = True
    abelian: bool = False
    # dist(a, b) >= max_i |a_i - b_i| in the chart (circularly on the torus)
    distance_dominates_chart: bool = False

    @property
    @abstractmethod
    def structure_constants(self) -> np.ndarray:
        """Rank-3 array of structure constants of the Lie algebra."""

    @abstractmethod
    def identity(self) -> GroupPoint:
        """Chart coordinates of the identity element."""

    @abstractmethod
    def _product(self, a: np.ndarray, b: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def _inverse(self, a: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def _exp(self, X: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def _log(self, g: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def _distance(self, a: np.ndarray, b: np.ndarray) -> np.ndarray: ...

    def _chart_ok(self, a: np.ndarray) -> np.ndarray:
        """Boolean mask of points satisfying the group specific chart constraint."""
        return np.ones(a.shape[:-1], dtype=bool)

    def as_array(self, a) -> np.ndarray:
        arr = np.asarray(a, dtype=float)
        if arr.ndim == 0 or arr.shape[-1] != self.dimension:
            raise ValidationError(f"Expected trailing dimension {self.dimension} for {self.name}, got shape {arr.shape}")
        return arr

    def check_chart(self, a) -> np.ndarray:
        """Validate chart constraints and return the points as a float array."""
        arr = self.as_array(a)
        if not np.all(np.isfinite(arr)):
            raise ChartViolation(f"Non-finite coordinates for {self.name}")
        if not np.all(self._chart_ok(arr)):
            raise ChartViolation(f"Point outside the chart of {self.name}")
        return arr

    def check_algebra(self, X) -> np.ndarray:
        """Validate an algebra vector (finite, correct length)."""
        arr = self.as_array(X)
        if not np.all(np.isfinite(arr)):
            raise ValidationError(f"Non-finite algebra vector for {self.name}")
        return arr

    def product(self, a, b) -> GroupPoint:
        return self._product(self.check_chart(a), self.check_chart(b))

    def inverse(self, a) -> GroupPoint:
        return self._inverse(self.check_chart(a))

    def exp(self, X) -> GroupPoint:
        return self._exp(self.check_algebra(X))

    def log(self, g) -> AlgebraVector:
        return self._log(self.check_chart(g))

    def distance(self, a, b) -> np.ndarray:
        """Left-invariant distance between (broadcast) points."""
        return self._distance(self.check_chart(a), self.check_chart(b))

    def alternative_distance(self, a, b) -> np.ndarray:
        """Chart norm of log(a^-1 b); left-invariant, used only as a comparison metric."""
        a = self.check_chart(a)
        b = self.check_chart(b)
        return np.linalg.norm(self._log(self._product(self._inverse(a), b)), axis=-1)

    def chart_difference(self, a, b) -> np.ndarray:
        """Coordinate difference a - b in the chart."""
        return self.as_array(a) - self.as_array(b)

    def chart_distance(self, a, b) -> np.ndarray:
        return np.linalg.norm(self.chart_difference(a, b), axis=-1)

    def bracket(self, X, Y) -> AlgebraVector:
        X = self.check_algebra(X)
        Y = self.check_algebra(Y)
        return np.einsum("...i,...j,ijk->...k", X, Y, self.structure_constants)

    def ad(self, X) -> np.ndarray:
        """Matrix of ad(X) acting on coordinate vectors."""
        X = self.check_algebra(X)
        return np.einsum("i,ijk->kj", X, self.structure_constants)

    def neighborhood_bounds(self, lower, upper, radius: float):
        """A chart box containing every point within ``radius`` of the chart box [lower, upper]."""
        return np.asarray(lower, dtype=float) - radius, np.asarray(upper, dtype=float) + radius

    def random_points(self, rng: np.random.Generator, n: int, scale: float = 1.0) -> GroupPoint:
        return self._exp(scale * rng.standard_normal((n, self.dimension)))

    def random_algebra(self, rng: np.random.Generator, n: int, scale: float = 1.0) -> AlgebraVector:
        return scale * rng.standard_normal((n, self.dimension))

    def check_axioms(self, rng: np.random.Generator, n: int = 10_000, scale: float = 0.5) -> AxiomReport:
        """Measure group-axiom, left-invariance and exp/log residuals on random samples."""
        a, b, c = (self.random_points(rng, n, scale) for _ in range(3))
        e = np.broadcast_to(self.identity(), a.shape)
        assoc = self.chart_distance(self._product(self._product(a, b), c), self._product(a, self._product(b, c)))
        ident = np.maximum(self.chart_distance(self._product(e, a), a), self.chart_distance(self._product(a, e), a))
        inv = self.chart_distance(self._product(a, self._inverse(a)), e)
        left = np.abs(self._distance(self._product(a, b), self._product(a, c)) - self._distance(b, c))
        X = self.random_algebra(rng, n, 0.25 * scale)
        exp_log = np.linalg.norm(self._log(self._exp(X)) - X, axis=-1)
        report = AxiomReport(
            associativity=float(assoc.max()),
            identity=float(ident.max()),
            inverse=float(inv.max()),
            left_invariance=float(left.max()),
            exp_log=float(exp_log.max()),
            samples=n,
        )
        logger.debug(f"Axiom residuals for {self.name}: {report}")
        return report

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.name!r})"

    def __eq__(self, other: object) -> bool:
        return isinstance(other, LieGroup) and other.name == self.name

    def __hash__(self) -> int:
        return hash(self.name)


class EuclideanGroup(LieGroup):
    """The additive group R^d."""

    abelian = True
    distance_dominates_chart = True

    def __init__(self, dimension: int):
        if int(dimension) < 1:
            raise ValidationError(f"Euclidean dimension must be positive, got {dimension}")
        self.dimension = int(dimension)
        self.name = f"euclidean:{self.dimension}"

    @property
    def structure_constants(self) -> np.ndarray:
        return np.zeros((self.dimension,) * 3)

    def identity(self) -> GroupPoint:
        return np.zeros(self.dimension)

    def _product(self, a, b):
        return a + b

    def _inverse(self, a):
        return -a

    def _exp(self, X):
        return np.array(X, dtype=float)

    def _log(self, g):
        return np.array(g, dtype=float)

    def _distance(self, a, b):
        return np.linalg.norm(a - b, axis=-1)


class TorusGroup(LieGroup):
    """The torus R^2 / Z^2 in the fundamental domain [0, 1)^2, wrapped on write."""

    name = "torus2"
    dimension = 2
    abelian = True
    simply_connected = False
    distance_dominates_chart = True

    @property
    def structure_constants(self) -> np.ndarray:
        return np.zeros((2, 2, 2))

    def identity(self) -> GroupPoint:
        return np.zeros(2)

    def _chart_ok(self, a):
        return np.all((a >= 0.0) & (a < 1.0), axis=-1)

    def wrap(self, x) -> GroupPoint:
        return wrap_unit(np.asarray(x, dtype=float))

    def _product(self, a, b):
        return wrap_unit(a + b)

    def _inverse(self, a):
        return wrap_unit(-a)

    def _exp(self, X):
        return wrap_unit(X)

    def _log(self, g):
        if np.any(g == 0.5):
            raise OutsideChart("Torus points with a coordinate equal to 1/2 have no canonical logarithm")
        return np.where(g < 0.5, g, g - 1.0)

    def chart_difference(self, a, b):
        return wrap_centered(self.as_array(a) - self.as_array(b))

    def _distance(self, a, b):
        return np.linalg.norm(wrap_centered(a - b), axis=-1)

    def neighborhood_bounds(self, lower, upper, radius: float):
        lo = np.asarray(lower, dtype=float) - radius
        hi = np.asarray(upper, dtype=float) + radius
        wraps = (lo < 0.0) | (hi >= 1.0)
        return np.where(wraps, 0.0, lo), np.where(wraps, 1.0, hi)

    def random_points(self, rng, n, scale=1.0):
        return wrap_unit(rng.random((n, 2)))

    def random_algebra(self, rng, n, scale=1.0):
        # keep samples strictly inside the canonical chart |X_i| < 1/2
        return np.clip(scale * rng.standard_normal((n, 2)), -0.45, 0.45)


class AffPlusGroup(LieGroup):
    """Aff(2, R)_0 = {(x, y): x > 0} with (x1, y1)(x2, y2) = (x1 x2, x1 y2 + y1).

    Algebra basis: e1 = diag(1, 0), e2 = the translation generator, so that
    [e1, e2] = e2. The distance is the hyperbolic distance of the left-invariant
    metric (dx^2 + dy^2) / x^2, which is the Euclidean product at the identity
    translated to every point.
    """

    name = "aff_plus"
    dimension = 2

    @property
    def structure_constants(self) -> np.ndarray:
        c = np.zeros((2, 2, 2))
        c[0, 1, 1] = 1.0
        c[1, 0, 1] = -1.0
        return c

    def identity(self) -> GroupPoint:
        return np.array([1.0, 0.0])

    def _chart_ok(self, a):
        return a[..., 0] > 0.0

    def _product(self, a, b):
        x1, y1 = a[..., 0], a[..., 1]
        x2, y2 = b[..., 0], b[..., 1]
        return np.stack(np.broadcast_arrays(x1 * x2, x1 * y2 + y1), axis=-1)

    def _inverse(self, a):
        x, y = a[..., 0], a[..., 1]
        return np.stack([1.0 / x, -y / x], axis=-1)

    @staticmethod
    def _phi(a: np.ndarray) -> np.ndarray:
        """(e^a - 1) / a, equal to 1 at a = 0."""
        small = np.abs(a) < 1e-12
        safe = np.where(small, 1.0, a)
        return np.where(small, 1.0 + a / 2.0, np.expm1(safe) / safe)

    def _exp(self, X):
        a, b = X[..., 0], X[..., 1]
        return np.stack([np.exp(a), b * self._phi(a)], axis=-1)

    def _log(self, g):
        a = np.log(g[..., 0])
        return np.stack([a, g[..., 1] / self._phi(a)], axis=-1)

    def neighborhood_bounds(self, lower, upper, radius: float):
        # a hyperbolic ball of radius r about (x, y) spans [x e^-r, x e^r] x [y - x sinh r, y + x sinh r]
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        spread = upper[0] * np.sinh(radius)
        return (
            np.array([lower[0] * np.exp(-radius), lower[1] - spread]),
            np.array([upper[0] * np.exp(radius), upper[1] + spread]),
        )

    def _distance(self, a, b):
        dx = a[..., 0] - b[..., 0]
        dy = a[..., 1] - b[..., 1]
        s2 = (dx * dx + dy * dy) / (4.0 * a[..., 0] * b[..., 0])
        return 2.0 * np.arcsinh(np.sqrt(s2))


class HeisenbergGroup(LieGroup):
    """The Heisenberg group on R^3 with (x1 + y1 + x2 y3, x2 + y2, x3 + y3).

    Exponential coordinates satisfy exp(a) = (a1 + a2 a3 / 2, a2, a3) and
    [e2, e3] = e1. The distance is the Cygan-Koranyi gauge distance
    N(a^-1 b) with N(z, p, q) = ((p^2 + q^2)^2 + 16 z^2)^(1/4) in exponential
    coordinates.
    """

    name = "heisenberg3"
    dimension = 3

    @property
    def structure_constants(self) -> np.ndarray:
        c = np.zeros((3, 3, 3))
        c[1, 2, 0] = 1.0
        c[2, 1, 0] = -1.0
        return c

    def identity(self) -> GroupPoint:
        return np.zeros(3)

    def _product(self, a, b):
        return np.stack(
            np.broadcast_arrays(
                a[..., 0] + b[..., 0] + a[..., 1] * b[..., 2],
                a[..., 1] + b[..., 1],
                a[..., 2] + b[..., 2],
            ),
            axis=-1,
        )

    def _inverse(self, a):
        return np.stack([-a[..., 0] + a[..., 1] * a[..., 2], -a[..., 1], -a[..., 2]], axis=-1)

    def _exp(self, X):
        return np.stack([X[..., 0] + 0.5 * X[..., 1] * X[..., 2], X[..., 1], X[..., 2]], axis=-1)

    def _log(self, g):
        return np.stack([g[..., 0] - 0.5 * g[..., 1] * g[..., 2], g[..., 1], g[..., 2]], axis=-1)

    @staticmethod
    def gauge(Z: np.ndarray) -> np.ndarray:
        horizontal = Z[..., 1] ** 2 + Z[..., 2] ** 2
        return (horizontal**2 + 16.0 * Z[..., 0] ** 2) ** 0.25

    def neighborhood_bounds(self, lower, upper, radius: float):
        # N(z, p, q) < r gives |p|, |q| < r and |z| < r^2 / 4
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        reach = 0.5 * radius**2 + max(abs(lower[1]), abs(upper[1])) * radius
        pad = np.array([reach, radius, radius])
        return lower - pad, upper + pad

    def _distance(self, a, b):
        return self.gauge(self._log(self._product(self._inverse(a), b)))


def group_from_name(name: str) -> LieGroup:
    """Build a group from its scenario name.

    Accepted names are ``euclidean:d``, ``aff_plus``, ``heisenberg3`` and ``torus2``.
    """
    key = str(name).strip().lower()
    if key.startswith("euclidean"):
        _, _, dim = key.partition(":")
        try:
            return EuclideanGroup(int(dim or 1))
        except ValueError:
            raise ValidationError(f"Invalid Euclidean group name: {name}")
    factories = {"aff_plus": AffPlusGroup, "heisenberg3": HeisenbergGroup, "torus2": TorusGroup}
    if key not in factories:
        raise ValidationError(f"Unknown group: {name}")
    return factories[key]()


