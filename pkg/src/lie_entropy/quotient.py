"""Induced systems on the quotient by the stable subgroup and the measure lower bound on r_inv.

Two concrete charts are supported. When the stable subalgebra is trivial the
quotient is the group itself (identity chart). On Euclidean groups the quotient
is the linear projection onto the center-unstable coordinates along the stable
subspace.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .config import MeasureConfig, ToleranceConfig
from .errors import LieEntropyError
from .groups import AffPlusGroup, EuclideanGroup, LieGroup
from .regions import Region
from .setcover import BudgetExceeded
from .spectral import ClosednessMetadata, SubalgebraSplit, log_in_base
from .system import LinearSystem

logger = logging.getLogger(__name__)


class StableSubgroupNotClosed(LieEntropyError):
    """Raised when the stable subgroup is not closed, so the quotient is not a manifold."""

    pass


class QuotientChartUnavailable(LieEntropyError):
    """Raised when no concrete quotient chart is implemented for the group and splitting."""

    pass


class InvarianceViolated(LieEntropyError):
    """Raised when a subspace or a measure fails its invariance check."""

    pass


class ZeroMeasureK(LieEntropyError):
    """Raised when the projected K has zero invariant measure."""

    pass


@dataclass
class QuotientChart:
    """Coordinates on G / G^- together with a canonical lift back to G."""

    group: LieGroup
    split: SubalgebraSplit
    kind: str
    basis_minus: np.ndarray
    basis_complement: np.ndarray
    _coordinates: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def dimension(self) -> int:
        return int(self.basis_complement.shape[1])

    @property
    def origin(self) -> np.ndarray:
        return self.project(self.group.identity())

    def project(self, g) -> np.ndarray:
        g = np.asarray(g, dtype=float)
        if self.kind == "identity":
            return g.copy()
        s = self.basis_minus.shape[1]
        return (g @ self._coordinates.T)[..., s:]

    def lift(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        if self.kind == "identity":
            return q.copy()
        return q @ self.basis_complement.T

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind, "dimension": self.dimension, "stable_dimension": int(self.basis_minus.shape[1])}


def quotient_chart(group: LieGroup, split: SubalgebraSplit, closedness: Optional[ClosednessMetadata] = None) -> QuotientChart:
    """Build the quotient chart, refusing non-closed stable subgroups."""
    if closedness is not None and not closedness.closed:
        raise StableSubgroupNotClosed(f"Stable subgroup of {group.name} is not closed: {closedness.reason}")
    d = group.dimension
    s = split.dimensions["minus"]
    if s == 0:
        return QuotientChart(group, split, "identity", np.zeros((d, 0)), np.eye(d))
    if not isinstance(group, EuclideanGroup):
        raise QuotientChartUnavailable(f"No quotient chart for {group.name} with a {s}-dimensional stable subalgebra")
    basis = np.hstack([split.basis_minus, split.complement])
    return QuotientChart(group, split, "linear", split.basis_minus, split.complement, np.linalg.inv(basis))


def induced_step(chart: QuotientChart, system: LinearSystem, q, u) -> np.ndarray:
    """One step of the induced system through the canonical lift."""
    return chart.project(system.step(chart.lift(q), u))


def induced_trajectory(chart: QuotientChart, system: LinearSystem, k: int, q, w) -> List[np.ndarray]:
    """Quotient trajectory [q, f_u0(q), ...] of the induced system."""
    g = chart.lift(q)
    _, w = system._prepare(k, g, w)
    points = [np.asarray(q, dtype=float)]
    for j in range(k):
        points.append(induced_step(chart, system, points[-1], w[j]))
    return points


def quotient_differential(chart: QuotientChart, D: np.ndarray, k: int = 1, tol: float = 1e-9) -> np.ndarray:
    """Matrix of D^k restricted to the center-unstable complement, in the complement basis."""
    D = np.asarray(D, dtype=float)
    B = chart.basis_complement
    M = np.linalg.pinv(B) @ D @ B
    residual = float(np.max(np.abs(D @ B - B @ M))) if B.size else 0.0
    if residual > tol * max(1.0, np.linalg.norm(D, 2)):
        raise InvarianceViolated(f"Complement subspace is not D-invariant (residual {residual:.3e})")
    return np.linalg.matrix_power(M, k)


@dataclass
class InvariantMeasure:
    """A G-invariant measure on the quotient chart, given by a density against Lebesgue."""

    name: str
    density: Callable[[np.ndarray], np.ndarray]

    def left_invariance_residual(self, chart: QuotientChart, rng: np.random.Generator, samples: int = 200, step: float = 1e-6) -> float:
        """Worst relative gap between density(q) and |det dL_g(q)| density(g q) at random (g, q)."""
        G = chart.group
        c = chart.dimension
        g = G.random_points(rng, samples, 0.5)
        q = chart.project(G.random_points(rng, samples, 0.5))
        worst = 0.0
        for gi, qi in zip(g, q):

            def translate(p):
                return chart.project(G._product(gi, chart.lift(p)))

            J = np.zeros((c, c))
            for i in range(c):
                e = np.zeros(c)
                e[i] = step
                J[:, i] = (translate(qi + e) - translate(qi - e)) / (2.0 * step)
            lhs = abs(np.linalg.det(J)) * float(self.density(translate(qi)[None])[0])
            rhs = float(self.density(qi[None])[0])
            worst = max(worst, abs(lhs - rhs) / max(rhs, 1e-300))
        return worst

    def check(self, chart: QuotientChart, rng: np.random.Generator, tol: float = 1e-6) -> float:
        residual = self.left_invariance_residual(chart, rng)
        if residual > tol:
            raise InvarianceViolated(f"Measure {self.name} is not left-invariant (relative residual {residual:.3e})")
        return residual


def invariant_measure(chart: QuotientChart) -> InvariantMeasure:
    """Lebesgue in the chart, except the left Haar density 1/x^2 on the affine group."""
    if chart.kind == "identity" and isinstance(chart.group, AffPlusGroup):
        return InvariantMeasure("left_haar_aff", lambda q: 1.0 / np.asarray(q)[..., 0] ** 2)
    return InvariantMeasure("lebesgue", lambda q: np.ones(np.asarray(q).shape[:-1]))


@dataclass
class VolumeEstimate:
    value: float
    monte_carlo: float
    cells: int
    resolution: float

    @property
    def discrepancy(self) -> float:
        scale = max(abs(self.value), abs(self.monte_carlo), 1e-300)
        return abs(self.value - self.monte_carlo) / scale

    def to_dict(self) -> Dict[str, Any]:
        return {"value": self.value, "monte_carlo": self.monte_carlo, "discrepancy": self.discrepancy, "cells": self.cells, "resolution": self.resolution}


def _cell_axes(lo: np.ndarray, hi: np.ndarray, resolution: float) -> List[np.ndarray]:
    axes = []
    for a, b in zip(lo, hi):
        count = int(np.ceil((b - a) / resolution - 1e-9))
        width = (b - a) / count
        axes.append(a + width * (np.arange(count) + 0.5))
    return axes


def _grid_chunks(axes: List[np.ndarray], chunk: int = 1_000_000):
    """Yield blocks of grid points in row-major order."""
    shape = tuple(len(a) for a in axes)
    total = int(np.prod(shape))
    for start in range(0, total, chunk):
        flat = np.arange(start, min(start + chunk, total))
        idx = np.unravel_index(flat, shape)
        yield np.stack([a[i] for a, i in zip(axes, idx)], axis=-1)


def image_volume(
    chart: QuotientChart,
    measure: InvariantMeasure,
    region: Region,
    epsilon: float,
    resolution: float,
    mc_samples: int = 100_000,
    seed: int = 0,
    max_cells: int = 20_000_000,
) -> VolumeEstimate:
    """Invariant measure of pi(N_eps(region)) by cell counting, with a seeded Monte-Carlo cross-check."""
    G = chart.group
    lo, hi = region.chart_bounds(G, epsilon)
    rng = np.random.default_rng(seed)

    if chart.kind == "identity":
        if np.any(hi - lo <= 0):
            return VolumeEstimate(0.0, 0.0, 0, resolution)
        axes = _cell_axes(lo, hi, resolution)
        cells = int(np.prod([len(a) for a in axes]))
        if cells > max_cells:
            raise BudgetExceeded(f"Volume grid needs {cells} cells (cap {max_cells})")
        cell_volume = float(np.prod([(b - a) / len(ax) for a, b, ax in zip(lo, hi, axes)]))
        total = 0.0
        for centers in _grid_chunks(axes):
            inside = region.neighborhood_contains(G, centers, epsilon)
            total += float(np.sum(measure.density(centers[inside])))
        value = total * cell_volume

        samples = lo + (hi - lo) * rng.random((mc_samples, len(lo)))
        inside = region.neighborhood_contains(G, samples, epsilon)
        box = float(np.prod(hi - lo))
        mc = box * float(np.sum(measure.density(samples[inside]))) / mc_samples
        return VolumeEstimate(value, mc, cells, resolution)

    # linear chart: project a dense sample of the region and count occupied quotient cells
    span = np.where(hi > lo, hi - lo, 0.0)
    sample_axes = []
    for a, width in zip(lo, span):
        count = int(np.ceil(width / (0.5 * resolution) - 1e-9)) + 1 if width > 0 else 1
        sample_axes.append(np.linspace(a, a + width, count))
    if np.prod([len(a) for a in sample_axes]) > max_cells:
        raise BudgetExceeded(f"Volume sample needs {int(np.prod([len(a) for a in sample_axes]))} points (cap {max_cells})")
    projected = []
    for points in _grid_chunks(sample_axes):
        keep = region.neighborhood_contains(G, points, epsilon)
        projected.append(chart.project(points[keep]))
    image = np.concatenate(projected) if projected else np.zeros((0, chart.dimension))
    if len(image) == 0:
        return VolumeEstimate(0.0, 0.0, 0, resolution)
    qlo, qhi = image.min(axis=0), image.max(axis=0)
    if np.any(qhi - qlo <= 0):
        return VolumeEstimate(0.0, 0.0, 0, resolution)
    cells = np.unique(np.floor((image - qlo) / resolution).astype(np.int64), axis=0)
    value = float(len(cells)) * resolution**chart.dimension

    tree = cKDTree(image)
    samples = qlo + (qhi - qlo) * rng.random((mc_samples, chart.dimension))
    dist, _ = tree.query(samples, k=1, distance_upper_bound=resolution)
    mc = float(np.prod(qhi - qlo)) * float(np.mean(np.isfinite(dist)))
    return VolumeEstimate(value, mc, int(len(cells)), resolution)


def measure_lower_bound(mu_K: float, mu_Q: float, determinant: float, n: int) -> float:
    """mu(pi K) / mu(N_eps(pi Q)) * |det(D restricted to the center-unstable part)|^n."""
    if not mu_K > 0:
        raise ZeroMeasureK(f"pi(K) has zero measure ({mu_K})")
    return mu_K / mu_Q * abs(determinant) ** n


@dataclass
class LowerBoundTable:
    """Lower bounds on r_inv for each horizon and the log-slope they grow with."""

    horizons: List[int]
    values: List[float]
    determinant: float
    slope: float
    log_base: str
    mu_K: VolumeEstimate
    mu_Q: VolumeEstimate
    measure: str
    notes: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "horizons": list(self.horizons),
            "values": list(self.values),
            "determinant": self.determinant,
            "slope": self.slope,
            "log_base": self.log_base,
            "measure": self.measure,
            "mu_K": self.mu_K.to_dict(),
            "mu_Q": self.mu_Q.to_dict(),
            "notes": list(self.notes),
        }


def lower_bound_table(
    chart: QuotientChart,
    measure: InvariantMeasure,
    D: np.ndarray,
    K_region: Region,
    Q_region: Region,
    epsilon: float,
    horizons: Sequence[int],
    log_base: str = "2",
    settings: Optional[MeasureConfig] = None,
    tolerances: Optional[ToleranceConfig] = None,
) -> LowerBoundTable:
    """Measure lower bounds over the horizons, using pi(N_eps(Q)) for the inflated target."""
    settings = settings or MeasureConfig()
    tolerances = tolerances or ToleranceConfig()
    resolution = max(epsilon, 1e-12) * settings.resolution_factor
    mu_K = image_volume(chart, measure, K_region, 0.0, resolution, settings.mc_samples, settings.seed)
    if not mu_K.value > 0:
        raise ZeroMeasureK(f"pi(K) has zero measure at resolution {resolution}")
    mu_Q = image_volume(chart, measure, Q_region, epsilon, resolution, settings.mc_samples, settings.seed)
    determinant = float(abs(np.linalg.det(quotient_differential(chart, D, 1, tolerances.subspace_invariance))))
    horizons = sorted(int(n) for n in horizons)
    values = [measure_lower_bound(mu_K.value, mu_Q.value, determinant, n) for n in horizons]
    if len(horizons) >= 2:
        slope = float((log_in_base(values[-1], log_base) - log_in_base(values[0], log_base)) / (horizons[-1] - horizons[0]))
    else:
        slope = float(log_in_base(determinant, log_base))
    table = LowerBoundTable(horizons, values, determinant, slope, str(log_base), mu_K, mu_Q, measure.name)
    for label, estimate in (("mu(pi K)", mu_K), ("mu(pi N_eps Q)", mu_Q)):
        if estimate.discrepancy > 0.05:
            table.notes.append(f"{label}: cell count {estimate.value:.6g} and Monte-Carlo {estimate.monte_carlo:.6g} differ by {estimate.discrepancy:.1%}")
            logger.warning(f"Volume cross-check for {label} differs by {estimate.discrepancy:.1%}")
    logger.info(f"Lower bound slope {slope:.4f} (base {log_base}), mu(pi K) = {mu_K.value:.6g}, mu(pi N_eps Q) = {mu_Q.value:.6g}")
    return table
