"""Invariance entropy and topological entropy estimators.

r_inv(n) is estimated by set cover over the word prefixes produced by
:class:`~lie_entropy.coverage.CoverageTree`; growth rates are least-squares
slopes of log r_inv against n. Bowen's separated sets give an independent
estimate of the topological entropy of f0.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats
from scipy.spatial import cKDTree

from .config import BudgetConfig, EntropyConfig
from .coverage import AdmissiblePair, CoverageTree
from .errors import LieEntropyError, ValidationError
from .groups import LieGroup, TorusGroup
from .setcover import InfeasibleCover, exact_cover, full_mask, heuristic_cover
from .spectral import SpectralSummary, log_in_base
from .system import LinearSystem

logger = logging.getLogger(__name__)

MODES = ("greedy", "exact")


class InsufficientData(LieEntropyError):
    """Raised when a growth fit has fewer horizons than required."""

    pass


@dataclass
class SpanningResult:
    """A spanning set of words for horizon n and its size r_inv."""

    n: int
    epsilon: float
    r_inv: int
    cover: List[Tuple[np.ndarray, np.ndarray]]
    method: str
    candidates: int = 0
    nodes: int = 0

    def words(self, system: LinearSystem) -> List[np.ndarray]:
        """Control values of the chosen words."""
        return [system.words_from_letters(letters) for letters, _ in self.cover]

    def to_record(self, log_base: str = "2") -> Dict[str, Any]:
        return {
            "n": self.n,
            "epsilon": self.epsilon,
            "method": self.method,
            "r_inv": self.r_inv,
            "log_r_inv": float(log_in_base(self.r_inv, log_base)),
        }


@dataclass
class GrowthFit:
    """Least-squares slope of log(count) against n, with a t-interval and the max of log(count)/n."""

    slope: float
    intercept: float
    ci_low: float
    ci_high: float
    limsup: float
    horizons: List[int]
    log_base: str
    confidence: float

    @property
    def half_width(self) -> float:
        return 0.5 * (self.ci_high - self.ci_low)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "limsup": self.limsup,
            "horizons": list(self.horizons),
            "log_base": self.log_base,
            "confidence": self.confidence,
        }


def fit_growth(
    horizons: Sequence[int],
    counts: Sequence[float],
    log_base: str = "2",
    fit_window: Optional[Tuple[int, int]] = None,
    confidence: float = 0.95,
    min_points: int = 4,
) -> GrowthFit:
    """Fit log(count) = slope * n + intercept over the horizons inside ``fit_window``."""
    n = np.asarray(horizons, dtype=float)
    y = log_in_base(np.asarray(counts, dtype=float), log_base)
    if fit_window is not None:
        lo, hi = fit_window
        inside = (n >= lo) & (n <= hi)
        n, y = n[inside], y[inside]
    if len(n) < max(min_points, 3):
        raise InsufficientData(f"Growth fit needs at least {max(min_points, 3)} horizons, got {len(n)}")

    design = np.column_stack([n, np.ones_like(n)])
    (slope, intercept), *_ = np.linalg.lstsq(design, y, rcond=None)
    residuals = y - (slope * n + intercept)
    dof = len(n) - 2
    sxx = float(np.sum((n - n.mean()) ** 2))
    stderr = float(np.sqrt(np.sum(residuals**2) / dof / sxx)) if sxx > 0 else 0.0
    half = float(stats.t.ppf(0.5 * (1.0 + confidence), dof)) * stderr
    positive = n > 0
    limsup = float(np.max(y[positive] / n[positive])) if np.any(positive) else 0.0
    return GrowthFit(
        slope=float(slope),
        intercept=float(intercept),
        ci_low=float(slope) - half,
        ci_high=float(slope) + half,
        limsup=limsup,
        horizons=[int(v) for v in n],
        log_base=str(log_base),
        confidence=confidence,
    )


def _cover_level(tree: CoverageTree, n: int, mode: str, budget: BudgetConfig) -> SpanningResult:
    level = tree.levels[n]
    universe = full_mask(tree.pair.size)
    covered = tree.covered(n)
    if not covered.all():
        raise InfeasibleCover(f"{int((~covered).sum())} grid points leave N_eps(Q) under every word of length {n}")
    masks = tree.candidate_masks(n)
    if mode == "greedy":
        solution = heuristic_cover(masks, universe)
    elif mode == "exact":
        solution = exact_cover(masks, universe, budget.exact_universe_cap, budget.exact_node_cap)
    else:
        raise ValidationError(f"Unknown cover mode: {mode}. Use one of {', '.join(MODES)}")
    cover = [(tree.word(n, node), level.served(node).copy()) for node in solution.chosen]
    return SpanningResult(
        n=n,
        epsilon=tree.pair.epsilon,
        r_inv=solution.size,
        cover=cover,
        method=solution.method,
        candidates=level.nodes,
        nodes=solution.nodes,
    )


def _check_certificate(pair: AdmissiblePair, n: int) -> None:
    if pair.certificate is not None and pair.certificate.horizon < n:
        raise ValidationError(f"Admissibility was certified up to horizon {pair.certificate.horizon}, r_inv requested at {n}")


def r_inv_estimate(
    system: LinearSystem,
    pair: AdmissiblePair,
    n: int,
    mode: str = "greedy",
    budget: Optional[BudgetConfig] = None,
    tree: Optional[CoverageTree] = None,
) -> SpanningResult:
    """Smallest (greedy) or minimum (exact) number of words spanning the K grid for n steps in N_eps(Q)."""
    budget = budget or BudgetConfig()
    _check_certificate(pair, n)
    tree = tree or CoverageTree(system, pair)
    tree.expand(n, budget.max_evaluations)
    result = _cover_level(tree, n, mode, budget)
    logger.debug(f"r_inv({n}) = {result.r_inv} [{mode}] from {result.candidates} candidate words at epsilon {pair.epsilon}")
    return result


def spanning_sweep(
    system: LinearSystem,
    pair: AdmissiblePair,
    horizons: Sequence[int],
    mode: str = "greedy",
    budget: Optional[BudgetConfig] = None,
) -> List[SpanningResult]:
    """r_inv for several horizons from a single coverage expansion."""
    budget = budget or BudgetConfig()
    horizons = sorted(int(n) for n in horizons)
    if not horizons:
        return []
    _check_certificate(pair, horizons[-1])
    tree = CoverageTree(system, pair).expand(horizons[-1], budget.max_evaluations)
    return [_cover_level(tree, n, mode, budget) for n in horizons]


def h_inv_estimate(
    results: Sequence[SpanningResult],
    fit_window: Optional[Tuple[int, int]] = None,
    log_base: str = "2",
    confidence: float = 0.95,
    min_points: int = 4,
) -> GrowthFit:
    """Growth rate of r_inv: least-squares slope of log r_inv against n, plus max (1/n) log r_inv."""
    return fit_growth([r.n for r in results], [r.r_inv for r in results], log_base, fit_window, confidence, min_points)


@dataclass
class EntropyCell:
    """All horizons of one epsilon."""

    epsilon: float
    results: List[SpanningResult]
    fit: Optional[GrowthFit]
    exact: List[SpanningResult] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)

    def r_inv(self, n: int) -> Optional[int]:
        for result in self.results:
            if result.n == n:
                return result.r_inv
        return None


def entropy_cell(
    system: LinearSystem,
    pair: AdmissiblePair,
    horizons: Sequence[int],
    mode: str = "greedy",
    budget: Optional[BudgetConfig] = None,
    settings: Optional[EntropyConfig] = None,
    log_base: Optional[str] = None,
    fit_window: Optional[Tuple[int, int]] = None,
) -> EntropyCell:
    """Greedy (or exact) r_inv over all horizons for one epsilon and its growth fit.

    ``mode="both"`` adds exact covers at every horizon where branch and bound fits the budget.
    """
    budget = budget or BudgetConfig()
    settings = settings or EntropyConfig()
    base = str(log_base or settings.log_base)
    horizons = sorted(int(n) for n in horizons)
    if mode not in ("greedy", "exact", "both"):
        raise ValidationError(f"Unknown mode: {mode}")
    _check_certificate(pair, horizons[-1] if horizons else 0)
    tree = CoverageTree(system, pair).expand(horizons[-1] if horizons else 0, budget.max_evaluations)
    primary = "exact" if mode == "exact" else "greedy"
    results = [_cover_level(tree, n, primary, budget) for n in horizons]
    cell = EntropyCell(epsilon=pair.epsilon, results=results, fit=None)

    if mode == "both":
        for n in horizons:
            try:
                cell.exact.append(_cover_level(tree, n, "exact", budget))
            except LieEntropyError as e:
                cell.notes.append(f"exact cover skipped at n={n}: {e}")
                logger.info(f"Exact cover skipped at n={n}, epsilon={pair.epsilon}: {e}")
                break

    try:
        cell.fit = h_inv_estimate(results, fit_window, base, settings.confidence, settings.min_fit_points)
    except InsufficientData as e:
        cell.notes.append(str(e))
    logger.info(
        f"epsilon={pair.epsilon}: r_inv {[r.r_inv for r in results]} over n={horizons[0] if horizons else '-'}..{horizons[-1] if horizons else '-'}"
        + (f", slope {cell.fit.slope:.4f}" if cell.fit else "")
    )
    return cell


@dataclass
class OuterEntropyTable:
    """Per-epsilon fits; the outer-entropy surrogate is the supremum of the slopes."""

    cells: List[EntropyCell]
    log_base: str
    notes: List[str] = field(default_factory=list)

    @property
    def estimate(self) -> Optional[float]:
        slopes = [c.fit.slope for c in self.cells if c.fit is not None]
        return max(slopes) if slopes else None

    @property
    def finest(self) -> Optional[EntropyCell]:
        return self.cells[-1] if self.cells else None

    def rows(self) -> List[Dict[str, Any]]:
        records = []
        for cell in self.cells:
            for result in cell.results + cell.exact:
                records.append(result.to_record(self.log_base))
        return records


def check_decreasing(eps_list: Sequence[float]) -> List[float]:
    eps = [float(e) for e in eps_list]
    if not eps:
        raise ValidationError("eps_list must not be empty")
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise ValidationError(f"eps_list must be strictly decreasing, got {eps}")
    return eps


def assemble_sweep(cells: Sequence[EntropyCell], log_base: str) -> OuterEntropyTable:
    """Order cells by decreasing epsilon and flag slopes that drop as epsilon shrinks."""
    ordered = sorted(cells, key=lambda c: -c.epsilon)
    table = OuterEntropyTable(cells=list(ordered), log_base=log_base)
    fitted = [c for c in ordered if c.fit is not None]
    for coarse, fine in zip(fitted, fitted[1:]):
        if fine.fit.slope < coarse.fit.slope - max(coarse.fit.half_width, fine.fit.half_width, 1e-9):
            note = f"slope decreased from {coarse.fit.slope:.4f} at epsilon={coarse.epsilon} to {fine.fit.slope:.4f} at epsilon={fine.epsilon}"
            table.notes.append(note)
            logger.warning(f"Outer entropy sweep: {note}")
    return table


def outer_entropy_sweep(
    system: LinearSystem,
    pair: AdmissiblePair,
    eps_list: Sequence[float],
    horizons: Sequence[int],
    mode: str = "greedy",
    budget: Optional[BudgetConfig] = None,
    settings: Optional[EntropyConfig] = None,
    log_base: Optional[str] = None,
    fit_window: Optional[Tuple[int, int]] = None,
) -> OuterEntropyTable:
    """h_inv(K, N_eps(Q)) for every epsilon in a strictly decreasing list."""
    settings = settings or EntropyConfig()
    base = str(log_base or settings.log_base)
    cells = [
        entropy_cell(system, pair.with_epsilon(eps), horizons, mode, budget, settings, base, fit_window)
        for eps in check_decreasing(eps_list)
    ]
    return assemble_sweep(cells, base)


@dataclass
class SeparatedResult:
    """A maximal (n, eps)-separated subset of the K grid under f0."""

    n: int
    epsilon: float
    indices: np.ndarray
    points: np.ndarray
    spanning_verified: Optional[bool] = None
    separation_verified: Optional[bool] = None

    @property
    def s_n(self) -> int:
        return int(len(self.indices))

    def to_record(self, log_base: str = "2") -> Dict[str, Any]:
        return {
            "n": self.n,
            "epsilon": self.epsilon,
            "s_n": self.s_n,
            "log_s_n": float(log_in_base(self.s_n, log_base)),
            "spanning_verified": self.spanning_verified,
            "separation_verified": self.separation_verified,
        }


def _orbit(system: LinearSystem, points: np.ndarray, n: int) -> np.ndarray:
    """(N, n, d) array of f0^j(points) for j = 0..n-1."""
    orbit = [np.asarray(points, dtype=float)]
    for _ in range(1, n):
        orbit.append(system.f0(orbit[-1]))
    return np.stack(orbit, axis=1)


def _bowen_distance(group: LieGroup, orbit_a: np.ndarray, orbit_b: np.ndarray) -> np.ndarray:
    """d_n = max over j < n of dist(f0^j a, f0^j b) for broadcast orbit arrays."""
    return np.max(group._distance(orbit_a, orbit_b), axis=-1)


def _tree(group: LieGroup, stacked: np.ndarray) -> cKDTree:
    if isinstance(group, TorusGroup):
        return cKDTree(stacked, boxsize=1.0)
    return cKDTree(stacked)


def separated_set(system: LinearSystem, K_grid: np.ndarray, n: int, epsilon: float, chunk: int = 100_000) -> SeparatedResult:
    """Greedy maximal (n, eps)-separated subset of the grid, scanning in grid order.

    Points are separated when d_n(x, y) > eps. Candidate conflicts come from a
    sup-norm KD-tree on the stacked orbit coordinates when the group distance
    dominates chart differences, otherwise from chunked brute force.
    """
    if n < 1:
        raise ValidationError(f"Separated sets need n >= 1, got {n}")
    if not epsilon > 0:
        raise ValidationError(f"epsilon must be positive, got {epsilon}")
    G = system.group
    orbit = _orbit(system, K_grid, n)
    N = len(orbit)
    blocked = np.zeros(N, dtype=bool)
    accepted: List[int] = []

    if G.distance_dominates_chart:
        tree = _tree(G, orbit.reshape(N, -1))
        for i in range(N):
            if blocked[i]:
                continue
            accepted.append(i)
            near = np.asarray(tree.query_ball_point(orbit[i].ravel(), r=epsilon, p=np.inf), dtype=int)
            near = near[~blocked[near]]
            if near.size:
                close = _bowen_distance(G, orbit[near], orbit[i][None]) <= epsilon
                blocked[near[close]] = True
            blocked[i] = True
    else:
        for i in range(N):
            if blocked[i]:
                continue
            accepted.append(i)
            for lo in range(i, N, chunk):
                hi = min(lo + chunk, N)
                candidates = lo + np.flatnonzero(~blocked[lo:hi])
                if candidates.size:
                    close = _bowen_distance(G, orbit[candidates], orbit[i][None]) <= epsilon
                    blocked[candidates[close]] = True
            blocked[i] = True

    indices = np.asarray(accepted, dtype=int)
    result = SeparatedResult(n=n, epsilon=epsilon, indices=indices, points=np.asarray(K_grid)[indices])
    logger.debug(f"s_{n}({epsilon}) = {result.s_n} from {N} grid points")
    return result


def spanning_from_separated(system: LinearSystem, K_grid: np.ndarray, result: SeparatedResult, chunk: int = 20_000) -> bool:
    """Check that every grid point lies within d_n <= eps of some separated point, and that the set is separated."""
    G = system.group
    orbit = _orbit(system, K_grid, result.n)
    chosen = orbit[result.indices]
    eps = result.epsilon
    spanning = True
    separated = True

    if G.distance_dominates_chart:
        tree = _tree(G, chosen.reshape(len(chosen), -1))
        for lo in range(0, len(orbit), chunk):
            block = orbit[lo : lo + chunk]
            for row, near in zip(block, tree.query_ball_point(block.reshape(len(block), -1), r=eps, p=np.inf)):
                if not near or not np.any(_bowen_distance(G, chosen[np.asarray(near, dtype=int)], row[None]) <= eps):
                    spanning = False
                    break
            if not spanning:
                break
        for i, j in tree.query_pairs(r=eps, p=np.inf):
            if _bowen_distance(G, chosen[i], chosen[j]) <= eps:
                separated = False
                break
    else:
        for row in orbit:
            if not np.any(_bowen_distance(G, chosen, row[None]) <= eps):
                spanning = False
                break
        for i in range(len(chosen)):
            if i + 1 < len(chosen) and np.any(_bowen_distance(G, chosen[i + 1 :], chosen[i][None]) <= eps):
                separated = False
                break

    result.spanning_verified = spanning
    result.separation_verified = separated
    if not (spanning and separated):
        logger.warning(f"Separated set at n={result.n} failed verification (spanning={spanning}, separated={separated})")
    return spanning and separated


@dataclass
class TopologicalEntropyTable:
    results: List[SeparatedResult]
    fit: Optional[GrowthFit]
    bowen: float
    log_base: str
    notes: List[str] = field(default_factory=list)

    def rows(self) -> List[Dict[str, Any]]:
        return [r.to_record(self.log_base) for r in self.results]


def topological_entropy_table(
    system: LinearSystem,
    K_grid: np.ndarray,
    horizons: Sequence[int],
    epsilon: float,
    bowen: float,
    log_base: str = "2",
    settings: Optional[EntropyConfig] = None,
) -> TopologicalEntropyTable:
    """Separated-set counts s_n over the horizons, each verified, and the fitted growth of log s_n."""
    settings = settings or EntropyConfig()
    results = []
    for n in sorted(int(v) for v in horizons):
        result = separated_set(system, K_grid, n, epsilon)
        spanning_from_separated(system, K_grid, result)
        results.append(result)
    table = TopologicalEntropyTable(results=results, fit=None, bowen=bowen, log_base=log_base)
    try:
        table.fit = fit_growth([r.n for r in results], [r.s_n for r in results], log_base, None, settings.confidence, settings.min_fit_points)
    except InsufficientData as e:
        table.notes.append(str(e))
    if table.fit is not None:
        logger.info(f"Separated-set slope {table.fit.slope:.4f} against Bowen bound {bowen:.4f} (base {log_base})")
    return table


@dataclass
class TheoremVerdict:
    """Comparison of the entropy estimate with the spectral upper bound and the measure lower bound."""

    estimate: Optional[float]
    upper_bound: float
    upper_tolerance: float
    upper_status: str
    lower_bound: Optional[float]
    lower_tolerance: float
    lower_status: str
    log_base: str
    reasons: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.upper_status == "PASS" and self.lower_status != "FAIL"

    @property
    def verdict(self) -> str:
        return "PASS" if self.passed else "FAIL"

    @property
    def upper_margin(self) -> Optional[float]:
        return None if self.estimate is None else self.upper_bound + self.upper_tolerance - self.estimate

    @property
    def lower_margin(self) -> Optional[float]:
        if self.estimate is None or self.lower_bound is None:
            return None
        return self.estimate - (self.lower_bound - self.lower_tolerance)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "verdict": self.verdict,
            "estimate": self.estimate,
            "log_base": self.log_base,
            "upper": {"bound": self.upper_bound, "tolerance": self.upper_tolerance, "status": self.upper_status, "margin": self.upper_margin},
            "lower": {"bound": self.lower_bound, "tolerance": self.lower_tolerance, "status": self.lower_status, "margin": self.lower_margin},
            "reasons": list(self.reasons),
        }


def lower_bound_violations(horizons: Sequence[int], values: Sequence[float], results: Sequence[SpanningResult], rel_tol: float = 1e-9) -> List[Tuple[int, float, int]]:
    """(n, bound, r_inv) for every horizon where r_inv falls below the measure lower bound."""
    bound = {int(n): float(v) for n, v in zip(horizons, values)}
    return [(r.n, bound[r.n], r.r_inv) for r in results if r.n in bound and r.r_inv < bound[r.n] * (1.0 - rel_tol)]


def lower_bound_resolved(cell: EntropyCell, determinant: float, grid_size: int, saturation_fraction: float = 0.5) -> bool:
    """Whether the grid is fine enough for r_inv to follow |det|^n growth over the fitted horizons.

    Both the observed r_inv at the largest horizon and the growth capacity
    r_inv(n_lo) |det|^(n_hi - n_lo) must stay below ``saturation_fraction`` of the grid size.
    """
    if not cell.results:
        return False
    ceiling = saturation_fraction * grid_size
    first, last = cell.results[0], cell.results[-1]
    capacity = first.r_inv * abs(determinant) ** (last.n - first.n)
    return last.r_inv <= ceiling and capacity <= ceiling


def theorem_check(
    summary: SpectralSummary,
    sweep: OuterEntropyTable,
    lower_slope: Optional[float] = None,
    lower_reason: Optional[str] = None,
    grid_size: int = 0,
    settings: Optional[EntropyConfig] = None,
) -> TheoremVerdict:
    """Check lower <= estimate <= upper for the outer invariance entropy estimate.

    The upper comparison is always enforced. The lower one is enforced only when a
    lower-bound slope is available and the finest-epsilon run is resolved;
    otherwise it is reported as UNRESOLVED (or UNAVAILABLE without a quotient).
    """
    settings = settings or EntropyConfig()
    base = sweep.log_base
    upper = summary.bowen_natural if base == "e" else summary.bowen_base2
    estimate = sweep.estimate
    reasons: List[str] = []

    if estimate is None:
        upper_status = "FAIL"
        reasons.append("no growth fit available for any epsilon")
    else:
        upper_status = "PASS" if estimate <= upper + settings.upper_tolerance else "FAIL"

    if lower_slope is None:
        lower_status = "UNAVAILABLE"
        reasons.append(lower_reason or "no quotient lower bound")
    elif estimate is None:
        lower_status = "UNRESOLVED"
    else:
        cell = sweep.finest
        if cell is None or not lower_bound_resolved(cell, summary.center_unstable_determinant, grid_size, settings.saturation_fraction):
            lower_status = "UNRESOLVED"
            reasons.append("grid too coarse for r_inv to follow the lower-bound growth over the fitted horizons")
            logger.warning("Lower bound comparison unresolved at this grid resolution")
        else:
            lower_status = "PASS" if estimate >= lower_slope - settings.lower_tolerance else "FAIL"

    verdict = TheoremVerdict(
        estimate=estimate,
        upper_bound=upper,
        upper_tolerance=settings.upper_tolerance,
        upper_status=upper_status,
        lower_bound=lower_slope,
        lower_tolerance=settings.lower_tolerance,
        lower_status=lower_status,
        log_base=base,
        reasons=reasons,
    )
    logger.info(f"Theorem check: estimate {estimate}, upper {upper:.4f} [{upper_status}], lower {lower_slope} [{lower_status}]")
    return verdict
