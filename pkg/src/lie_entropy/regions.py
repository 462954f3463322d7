"""Compact regions K and Q in a group chart, their sample grids and epsilon-neighborhoods."""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, Dict, Mapping, Tuple

import numpy as np

from .errors import ValidationError
from .groups import LieGroup, TorusGroup

logger = logging.getLogger(__name__)


class Region(ABC):
    """A compact subset of a group described in its global chart."""

    @abstractmethod
    def contains(self, group: LieGroup, g: np.ndarray) -> np.ndarray:
        """Boolean mask of points inside the region."""

    @abstractmethod
    def neighborhood_contains(self, group: LieGroup, g: np.ndarray, epsilon: float) -> np.ndarray:
        """Boolean mask of points in the open epsilon-neighborhood N_eps of the region."""

    @abstractmethod
    def chart_bounds(self, group: LieGroup, radius: float = 0.0) -> Tuple[np.ndarray, np.ndarray]:
        """A chart box containing N_radius of the region."""

    @property
    @abstractmethod
    def center(self) -> np.ndarray: ...

    @abstractmethod
    def to_dict(self) -> Dict[str, Any]: ...


@dataclass(frozen=True)
class BoxRegion(Region):
    """Axis-aligned chart box [lower, upper]; degenerate axes are allowed."""

    lower: tuple
    upper: tuple

    def __post_init__(self) -> None:
        lower = tuple(float(v) for v in np.atleast_1d(self.lower))
        upper = tuple(float(v) for v in np.atleast_1d(self.upper))
        if len(lower) != len(upper):
            raise ValidationError(f"Box bounds differ in length: {lower} vs {upper}")
        if any(lo > up for lo, up in zip(lower, upper)):
            raise ValidationError(f"Box lower bound {lower} exceeds upper bound {upper}")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def lo(self) -> np.ndarray:
        return np.asarray(self.lower)

    @property
    def hi(self) -> np.ndarray:
        return np.asarray(self.upper)

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    @property
    def degenerate(self) -> bool:
        return bool(np.any(self.hi <= self.lo))

    def grid(self, rho: float) -> np.ndarray:
        """Grid of the box at resolution rho, endpoints included, in lexicographic order."""
        if not rho > 0:
            raise ValidationError(f"Grid resolution must be positive, got {rho}")
        axes = []
        for lo, up in zip(self.lower, self.upper):
            if up == lo:
                axes.append(np.array([lo]))
            else:
                count = int(np.ceil((up - lo) / rho - 1e-9)) + 1
                axes.append(np.linspace(lo, up, count))
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def contains(self, group, g):
        g = np.asarray(g, dtype=float)
        return np.all((g >= self.lo - 1e-12) & (g <= self.hi + 1e-12), axis=-1)

    def neighborhood_contains(self, group, g, epsilon):
        g = np.asarray(g, dtype=float)
        if epsilon <= 0:
            return self.contains(group, g)
        if isinstance(group, TorusGroup):
            # circular distance to each interval, over the three nearest translates
            gaps = np.min(
                [np.maximum(np.maximum(self.lo - (g + s), 0.0), (g + s) - self.hi) for s in (-1.0, 0.0, 1.0)],
                axis=0,
            )
            return np.linalg.norm(gaps, axis=-1) < epsilon
        if group.abelian:
            gaps = np.maximum(np.maximum(self.lo - g, 0.0), g - self.hi)
            return np.linalg.norm(gaps, axis=-1) < epsilon
        # distance to the chart-clamped point bounds the distance to the box from above
        clamped = np.clip(g, self.lo, self.hi)
        inside = self.contains(group, g)
        outside = ~inside
        result = inside.copy()
        if np.any(outside):
            result[outside] = group._distance(g[outside], clamped[outside]) < epsilon
        return result

    def chart_bounds(self, group, radius=0.0):
        if radius <= 0:
            return self.lo.copy(), self.hi.copy()
        return group.neighborhood_bounds(self.lo, self.hi, radius)

    def chart_volume(self) -> float:
        return float(np.prod(self.hi - self.lo))

    def to_dict(self):
        return {"lower": list(self.lower), "upper": list(self.upper)}


@dataclass(frozen=True)
class BallRegion(Region):
    """Closed metric ball {g : dist(center, g) <= radius}."""

    center_point: tuple
    radius: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "center_point", tuple(float(v) for v in np.atleast_1d(self.center_point)))
        if not self.radius > 0:
            raise ValidationError(f"Ball radius must be positive, got {self.radius}")

    @property
    def center(self) -> np.ndarray:
        return np.asarray(self.center_point)

    def contains(self, group, g):
        return group._distance(np.broadcast_to(self.center, np.shape(g)), np.asarray(g, dtype=float)) <= self.radius

    def neighborhood_contains(self, group, g, epsilon):
        if epsilon <= 0:
            return self.contains(group, g)
        return group._distance(np.broadcast_to(self.center, np.shape(g)), np.asarray(g, dtype=float)) < self.radius + epsilon

    def chart_bounds(self, group, radius=0.0):
        return group.neighborhood_bounds(self.center, self.center, self.radius + radius)

    def to_dict(self):
        return {"center": list(self.center_point), "radius": self.radius}


def region_from_mapping(data: Mapping[str, Any], prefix: str) -> Region:
    """Build a region from ``<prefix>_lower``/``<prefix>_upper`` or ``<prefix>_center``/``<prefix>_radius`` keys."""
    if f"{prefix}_lower" in data or f"{prefix}_upper" in data:
        if f"{prefix}_lower" not in data or f"{prefix}_upper" not in data:
            raise ValidationError(f"{prefix} box needs both {prefix}_lower and {prefix}_upper")
        return BoxRegion(tuple(np.atleast_1d(data[f"{prefix}_lower"])), tuple(np.atleast_1d(data[f"{prefix}_upper"])))
    if f"{prefix}_center" in data:
        return BallRegion(tuple(np.atleast_1d(data[f"{prefix}_center"])), float(data.get(f"{prefix}_radius", 0.0)))
    raise ValidationError(f"No region given for {prefix}")
