"""Spectral data of the uncontrolled automorphism.

Computes D = (df0)_e in exponential coordinates, its spectrum, the splitting of
the Lie algebra into unstable, central and stable parts, growth constants, the
Bowen entropy bound, and the algebraic side conditions (bracket closure,
tr ad = 0, closedness of the stable subgroup).
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import scipy.linalg
from scipy.spatial import cKDTree

from .config import Configuration, ToleranceConfig
from .errors import LieEntropyError, ValidationError
from .groups import LieGroup, TorusGroup, wrap_unit
from .system import LinearSystem

logger = logging.getLogger(__name__)


class SingularDifferential(LieEntropyError):
    """Raised when (df0)_e is not invertible."""

    pass


class ConvergenceFailure(LieEntropyError):
    """Raised when an eigen or Schur decomposition fails or is inaccurate."""

    pass


class AmbiguousClassification(LieEntropyError):
    """Raised when an eigenvalue modulus is too close to 1 to be classified."""

    pass


class FitFailure(LieEntropyError):
    """Raised when no contraction rate below 1 fits the stable and unstable growth."""

    pass


class WitnessNotFound(LieEntropyError):
    """Raised when a line flow does not reach every target within the time horizon."""

    def __init__(self, message: str, missing: Optional[np.ndarray] = None, witness: Optional["DensityWitness"] = None):
        super().__init__(message)
        self.missing = missing if missing is not None else np.zeros((0, 2))
        self.witness = witness

    def to_dict(self) -> Dict[str, Any]:
        data = super().to_dict()
        data["missing"] = self.missing.tolist()
        return data


def log_in_base(x, base: str = "2"):
    """Logarithm in base 2 or e."""
    if str(base) == "2":
        return np.log2(x)
    if str(base) == "e":
        return np.log(x)
    raise ValidationError(f"Unsupported log base: {base}")


@dataclass
class Differential:
    """The matrix of (df0)_e in the chart basis of the Lie algebra."""

    matrix: np.ndarray
    source: str
    fd_residual: Optional[float] = None

    @property
    def determinant(self) -> float:
        return float(np.linalg.det(self.matrix))


@dataclass
class Spectrum:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residual: float

    def distinct(self, tol: float = 1e-6) -> List[Tuple[complex, int]]:
        """Distinct eigenvalues with algebraic multiplicities."""
        groups: List[List[complex]] = []
        for lam in self.eigenvalues:
            for group in groups:
                if abs(group[0] - lam) <= tol * max(1.0, abs(lam)):
                    group.append(lam)
                    break
            else:
                groups.append([lam])
        return [(complex(np.mean(g)), len(g)) for g in groups]

    @property
    def moduli(self) -> np.ndarray:
        return np.abs(self.eigenvalues)


@dataclass
class SubalgebraSplit:
    """Orthonormal real bases of the unstable, central and stable subalgebras of D."""

    matrix: np.ndarray
    basis_plus: np.ndarray
    basis_zero: np.ndarray
    basis_minus: np.ndarray
    eta: float
    invariance_residual: float = 0.0

    @property
    def dimensions(self) -> Dict[str, int]:
        return {
            "plus": int(self.basis_plus.shape[1]),
            "zero": int(self.basis_zero.shape[1]),
            "minus": int(self.basis_minus.shape[1]),
        }

    @property
    def complement(self) -> np.ndarray:
        """Basis of the center-unstable part, the complement of the stable subalgebra."""
        return np.hstack([self.basis_plus, self.basis_zero])


@dataclass
class GrowthBounds:
    """Constants with |D^n X| >= c sigma^-n |X| on the unstable part and |D^n Y| <= sigma^n |Y| / c on the stable part."""

    c: Optional[float]
    sigma: Optional[float]
    horizon: int
    center_rate: Optional[float] = None
    empty: bool = False

    def holds(self, D: np.ndarray, split: SubalgebraSplit, tol: float = 1e-9) -> bool:
        if self.empty:
            return True
        for n in range(1, self.horizon + 1):
            Dn = np.linalg.matrix_power(D, n)
            for X in split.basis_plus.T:
                if np.linalg.norm(Dn @ X) < self.c * self.sigma**-n * np.linalg.norm(X) * (1.0 - tol):
                    return False
            for Y in split.basis_minus.T:
                if np.linalg.norm(Dn @ Y) > self.sigma**n * np.linalg.norm(Y) / self.c * (1.0 + tol):
                    return False
        return True


@dataclass
class BracketReport:
    worst_residual: float
    subalgebra_residual: float
    pairs_checked: int
    tolerance: float

    @property
    def passed(self) -> bool:
        return max(self.worst_residual, self.subalgebra_residual) <= self.tolerance


@dataclass
class TraceAdReport:
    worst_trace: float
    worst_nilpotency: float
    vectors_checked: int
    tolerance: float

    @property
    def passed(self) -> bool:
        return max(self.worst_trace, self.worst_nilpotency) <= self.tolerance


@dataclass
class ClosednessMetadata:
    closed: bool
    reason: str


@dataclass
class DensityWitness:
    """Times at which the flow t -> t v mod Z^2 comes within epsilon of each target."""

    direction: np.ndarray
    epsilon: float
    t_max: float
    targets: np.ndarray
    times: np.ndarray
    distances: np.ndarray

    @property
    def complete(self) -> bool:
        return bool(np.all(np.isfinite(self.times)))


def finite_difference_differential(system: LinearSystem, power: int = 1, step: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of log o f0^power o exp at 0."""
    G = system.group
    d = G.dimension
    J = np.zeros((d, d))
    for i in range(d):
        X = np.zeros(d)
        X[i] = step
        plus = G._log(system.f0_power(G._exp(X), power))
        minus = G._log(system.f0_power(G._exp(-X), power))
        J[:, i] = (plus - minus) / (2.0 * step)
    return J


def differential_at_identity(system: LinearSystem, tolerances: Optional[ToleranceConfig] = None) -> Differential:
    """(df0)_e, analytic when the system declares it, cross-checked against finite differences."""
    tol = tolerances or ToleranceConfig()
    fd = finite_difference_differential(system, 1, tol.fd_step)
    if system.differential is not None:
        D = np.asarray(system.differential, dtype=float)
        residual = float(np.max(np.abs(D - fd)))
        if residual > tol.fd_match:
            raise ValidationError(f"Analytic differential of {system.name} disagrees with finite differences (max residual {residual:.3e})")
        result = Differential(matrix=D, source="analytic", fd_residual=residual)
    else:
        result = Differential(matrix=fd, source="finite_difference")
    if abs(result.determinant) <= tol.singular_det:
        raise SingularDifferential(f"(df0)_e of {system.name} is singular (det = {result.determinant:.3e})")
    logger.debug(f"Differential of {system.name} ({result.source}): {result.matrix.tolist()}")
    return result


def exp_conjugation_residual(system: LinearSystem, D: np.ndarray, X: np.ndarray, n: int) -> float:
    """Worst chart distance between f0^n(exp X) and exp(D^n X) over the rows of X."""
    G = system.group
    X = np.atleast_2d(np.asarray(X, dtype=float))
    lhs = system.f0_power(G._exp(X), n)
    rhs = G._exp(X @ np.linalg.matrix_power(D, n).T)
    return float(np.max(G.chart_distance(lhs, rhs)))


def eigen(D: np.ndarray, tol: float = 1e-9) -> Spectrum:
    """Eigenvalues and eigenvectors of D, ordered by decreasing modulus."""
    D = np.asarray(D, dtype=float)
    try:
        values, vectors = scipy.linalg.eig(D)
    except (np.linalg.LinAlgError, ValueError) as e:
        raise ConvergenceFailure(f"Eigen decomposition failed: {e}")
    order = np.lexsort((values.imag, values.real, -np.abs(values)))
    values, vectors = values[order], vectors[:, order]
    vectors = vectors / np.linalg.norm(vectors, axis=0)
    residual = float(np.max(np.linalg.norm(D @ vectors - vectors * values, axis=0))) if len(values) else 0.0
    if residual > tol * max(1.0, np.linalg.norm(D, 2)):
        raise ConvergenceFailure(f"Eigenpair residual {residual:.3e} exceeds {tol:.1e}")
    # exact conjugate pairs for real input
    values = np.where(np.abs(values.imag) <= 1e-15 * max(1.0, np.max(np.abs(values))), values.real + 0j, values)
    return Spectrum(eigenvalues=values, eigenvectors=vectors, residual=residual)


def classify_modulus(modulus: float, eta: float = 1e-9, band: float = 1e-6) -> str:
    """Classify |alpha| as "plus", "zero" or "minus"."""
    gap = modulus - 1.0
    if abs(gap) <= eta:
        return "zero"
    if abs(gap) <= band:
        raise AmbiguousClassification(f"Eigenvalue modulus {modulus!r} lies within {band:.1e} of 1 but outside eta = {eta:.1e}")
    return "plus" if gap > 0 else "minus"


def split_subalgebras(D: np.ndarray, eta: float = 1e-9, band: float = 1e-6, invariance_tol: float = 1e-9) -> SubalgebraSplit:
    """Split R^d into the D-invariant unstable, central and stable subspaces via ordered real Schur forms."""
    D = np.asarray(D, dtype=float)
    d = D.shape[0]
    spectrum = eigen(D)
    for modulus in spectrum.moduli:
        classify_modulus(float(modulus), eta, band)

    selectors = {
        "plus": lambda re, im: np.hypot(re, im) > 1.0 + eta,
        "zero": lambda re, im: abs(np.hypot(re, im) - 1.0) <= eta,
        "minus": lambda re, im: np.hypot(re, im) < 1.0 - eta,
    }
    bases = {}
    for name, selector in selectors.items():
        try:
            _, Z, sdim = scipy.linalg.schur(D, output="real", sort=selector)
        except (np.linalg.LinAlgError, ValueError) as e:
            raise ConvergenceFailure(f"Ordered Schur decomposition failed for the {name} subspace: {e}")
        bases[name] = Z[:, :sdim]

    total = sum(b.shape[1] for b in bases.values())
    stacked = np.hstack(list(bases.values()))
    if total != d or np.linalg.matrix_rank(stacked) != d:
        raise ConvergenceFailure(f"Subspace dimensions {[b.shape[1] for b in bases.values()]} do not form a direct sum of R^{d}")

    residual = 0.0
    for B in bases.values():
        if B.shape[1]:
            image = D @ B
            residual = max(residual, float(np.max(np.linalg.norm(image - B @ (B.T @ image), axis=0))))
    if residual > invariance_tol * max(1.0, np.linalg.norm(D, 2)):
        raise ConvergenceFailure(f"Computed subspaces are not D-invariant (residual {residual:.3e})")

    split = SubalgebraSplit(D, bases["plus"], bases["zero"], bases["minus"], eta, residual)
    logger.debug(f"Subalgebra dimensions: {split.dimensions}")
    return split


def bowen_entropy(spectrum: Spectrum, log_base: str = "2", eta: float = 1e-9) -> float:
    """Sum of log|lambda| over eigenvalues with |lambda| > 1, with multiplicity."""
    moduli = spectrum.moduli[spectrum.moduli > 1.0 + eta]
    return float(np.sum(log_in_base(moduli, log_base))) if moduli.size else 0.0


def generalized_eigenspaces(D: np.ndarray, tol: float = 1e-6) -> List[Tuple[complex, np.ndarray]]:
    """Complex generalized eigenspaces ker (D - alpha)^d, one per distinct eigenvalue."""
    D = np.asarray(D, dtype=float)
    d = D.shape[0]
    spaces = []
    for alpha, _ in eigen(D).distinct(tol):
        M = np.linalg.matrix_power(D.astype(complex) - alpha * np.eye(d), d)
        spaces.append((alpha, scipy.linalg.null_space(M, rcond=1e-8)))
    return spaces


def _bracket(structure_constants: np.ndarray, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    return np.einsum("i,j,ijk->k", X, Y, structure_constants)


def _residual_outside(v: np.ndarray, basis: np.ndarray) -> float:
    if basis.shape[1] == 0:
        return float(np.linalg.norm(v))
    return float(np.linalg.norm(v - basis @ (basis.conj().T @ v)))


def bracket_closure_check(group: LieGroup, split: SubalgebraSplit, tol: float = 1e-9) -> BracketReport:
    """Check [g_alpha, g_beta] in g_{alpha beta} and closure of the three subalgebras."""
    C = group.structure_constants
    spaces = generalized_eigenspaces(split.matrix)
    worst = 0.0
    pairs = 0
    for alpha, Va in spaces:
        for beta, Vb in spaces:
            target = alpha * beta
            match = [V for gamma, V in spaces if abs(gamma - target) <= 1e-6 * max(1.0, abs(target))]
            W = match[0] if match else np.zeros((C.shape[0], 0))
            for v in Va.T:
                for w in Vb.T:
                    worst = max(worst, _residual_outside(_bracket(C, v, w), W))
                    pairs += 1

    sub = 0.0
    for B in (split.basis_plus, split.basis_zero, split.basis_minus):
        for i in range(B.shape[1]):
            for j in range(B.shape[1]):
                sub = max(sub, _residual_outside(_bracket(C, B[:, i], B[:, j]), B))

    report = BracketReport(worst_residual=worst, subalgebra_residual=sub, pairs_checked=pairs, tolerance=tol)
    logger.debug(f"Bracket closure on {group.name}: {report}")
    return report


def trace_ad_check(group: LieGroup, split: SubalgebraSplit, tol: float = 1e-9) -> TraceAdReport:
    """tr ad(X) = 0 and ad(X)^d = 0 for basis vectors of the stable and unstable subalgebras."""
    d = group.dimension
    worst_trace = 0.0
    worst_nil = 0.0
    count = 0
    for B in (split.basis_minus, split.basis_plus):
        for X in B.T:
            ad = group.ad(X)
            worst_trace = max(worst_trace, abs(float(np.trace(ad))))
            worst_nil = max(worst_nil, float(np.linalg.norm(np.linalg.matrix_power(ad, d))))
            count += 1
    return TraceAdReport(worst_trace=worst_trace, worst_nilpotency=worst_nil, vectors_checked=count, tolerance=tol)


def growth_constants(D: np.ndarray, split: SubalgebraSplit, N: int = 30) -> GrowthBounds:
    """Fit (c, sigma) over n = 1..N from restricted operator norms and minimum singular values."""
    D = np.asarray(D, dtype=float)
    center_rate = None
    rates = []
    stable_norms = []
    unstable_mins = []
    center_norms = []
    for n in range(1, N + 1):
        Dn = np.linalg.matrix_power(D, n)
        if split.basis_minus.shape[1]:
            s = float(np.linalg.norm(Dn @ split.basis_minus, 2))
            stable_norms.append((n, s))
            rates.append(s ** (1.0 / n))
        if split.basis_plus.shape[1]:
            m = float(np.linalg.svd(Dn @ split.basis_plus, compute_uv=False).min())
            unstable_mins.append((n, m))
            rates.append(m ** (-1.0 / n))
        if split.basis_zero.shape[1]:
            center_norms.append(float(np.linalg.norm(Dn @ split.basis_zero, 2)) ** (1.0 / n))
    if center_norms:
        center_rate = max(center_norms)

    if not rates:
        return GrowthBounds(c=None, sigma=None, horizon=N, center_rate=center_rate, empty=True)

    sigma = max(rates)
    if not sigma < 1.0:
        raise FitFailure(f"No contraction rate below 1 fits the stable/unstable growth (best sigma = {sigma:.6f})")
    constraints = [sigma**n / s for n, s in stable_norms] + [m * sigma**n for n, m in unstable_mins]
    c = max(1.0, min(constraints))
    return GrowthBounds(c=c, sigma=sigma, horizon=N, center_rate=center_rate)


def closedness(group: LieGroup, split: SubalgebraSplit) -> ClosednessMetadata:
    """Whether the stable subgroup exp(g^-) is closed, from the sufficient conditions available."""
    if split.dimensions["minus"] == 0:
        return ClosednessMetadata(True, "stable subalgebra is trivial")
    if group.simply_connected:
        return ClosednessMetadata(True, "group is simply connected")
    if isinstance(group, TorusGroup) and split.dimensions["minus"] == 1:
        v = split.basis_minus[:, 0]
        if abs(v[1]) <= 1e-12 or abs(v[0]) <= 1e-12:
            return ClosednessMetadata(True, "stable line is a coordinate circle")
        ratio = v[0] / v[1]
        approx = Fraction(ratio).limit_denominator(1000)
        if abs(float(approx) - ratio) <= 1e-12:
            return ClosednessMetadata(True, f"stable line has rational slope {approx}")
        return ClosednessMetadata(False, "stable line has irrational slope and is dense in the torus")
    return ClosednessMetadata(False, "closedness not established for a non-simply-connected group")


def density_witness_torus(direction, epsilon: float, t_max: float, targets=None, chunk: int = 200_000) -> DensityWitness:
    """Search times t <= t_max at which t * direction mod Z^2 comes within epsilon of every target.

    Targets default to the centers of an m x m grid with m = ceil(1 / epsilon).
    Raises WitnessNotFound listing the targets never reached.
    """
    v = np.asarray(direction, dtype=float).reshape(2)
    speed = float(np.linalg.norm(v))
    if speed == 0.0:
        raise ValidationError("Flow direction must be nonzero")
    if targets is None:
        m = int(np.ceil(1.0 / epsilon - 1e-9)) if epsilon < 1.0 else 1
        centers = (np.arange(m) + 0.5) / m
        targets = np.stack(np.meshgrid(centers, centers, indexing="ij"), axis=-1).reshape(-1, 2)
    targets = wrap_unit(np.atleast_2d(np.asarray(targets, dtype=float)))
    times = np.full(len(targets), np.inf)
    distances = np.full(len(targets), np.inf)

    if epsilon >= 1.0:
        # the torus has diameter sqrt(2)/2
        times[:] = 0.0
        distances = np.linalg.norm(targets - np.round(targets), axis=-1)
        return DensityWitness(v, epsilon, t_max, targets, times, distances)

    dt = epsilon / (2.0 * speed)
    total = int(np.floor(t_max / dt)) + 1
    for start in range(0, total, chunk):
        missing = np.flatnonzero(~np.isfinite(times))
        if missing.size == 0:
            break
        t = dt * np.arange(start, min(start + chunk, total))
        tree = cKDTree(wrap_unit(np.outer(t, v)), boxsize=1.0)
        dist, idx = tree.query(targets[missing], k=1, distance_upper_bound=epsilon)
        hit = np.isfinite(dist)
        times[missing[hit]] = t[idx[hit]]
        distances[missing[hit]] = dist[hit]

    witness = DensityWitness(v, epsilon, t_max, targets, times, distances)
    if not witness.complete:
        missing_targets = targets[~np.isfinite(times)]
        raise WitnessNotFound(
            f"{len(missing_targets)} of {len(targets)} targets not reached within epsilon = {epsilon} by t = {t_max}",
            missing=missing_targets,
            witness=witness,
        )
    logger.info(f"Density witness found for {len(targets)} targets, latest time {times.max():.3f}")
    return witness


@dataclass
class SpectralSummary:
    """Everything the spectral stage reports for one system."""

    differential: Differential
    spectrum: Spectrum
    split: SubalgebraSplit
    log_base: str
    bowen: float
    bowen_natural: float
    bowen_base2: float
    growth: Optional[GrowthBounds]
    closedness: ClosednessMetadata
    bracket: BracketReport
    trace_ad: TraceAdReport
    notes: List[str] = field(default_factory=list)

    @property
    def center_unstable_determinant(self) -> float:
        """|det D restricted to the center-unstable subspace| = product of |lambda| over |lambda| >= 1."""
        moduli = self.spectrum.moduli
        return float(np.prod(moduli[moduli >= 1.0 - self.split.eta]))

    def to_dict(self) -> Dict[str, Any]:
        growth = None
        if self.growth is not None:
            growth = {
                "c": self.growth.c,
                "sigma": self.growth.sigma,
                "horizon": self.growth.horizon,
                "center_rate": self.growth.center_rate,
                "empty": self.growth.empty,
            }
        return {
            "differential": self.differential.matrix.tolist(),
            "differential_source": self.differential.source,
            "eigenvalues": [[float(np.real(v)), float(np.imag(v))] for v in self.spectrum.eigenvalues],
            "dimensions": self.split.dimensions,
            "bowen": {"log_base": self.log_base, "value": self.bowen, "natural": self.bowen_natural, "base2": self.bowen_base2},
            "growth": growth,
            "closedness": {"closed": self.closedness.closed, "reason": self.closedness.reason},
            "bracket_closure": {"passed": self.bracket.passed, "worst_residual": self.bracket.worst_residual},
            "trace_ad": {"passed": self.trace_ad.passed, "worst_trace": self.trace_ad.worst_trace},
            "notes": list(self.notes),
        }


def spectral_summary(system: LinearSystem, config: Optional[Configuration] = None, log_base: Optional[str] = None) -> SpectralSummary:
    """Run the whole spectral stage for a system."""
    config = config or Configuration()
    tol = config.tolerances
    base = str(log_base or config.entropy.log_base)

    differential = differential_at_identity(system, tol)
    D = differential.matrix
    spectrum = eigen(D, tol.eigen_residual)
    split = split_subalgebras(D, tol.unit_modulus, tol.ambiguity_band, tol.subspace_invariance)
    notes: List[str] = []

    growth: Optional[GrowthBounds]
    try:
        growth = growth_constants(D, split, config.entropy.growth_horizon)
    except FitFailure as e:
        growth = None
        notes.append(str(e))
        logger.warning(f"Growth fit failed for {system.name}: {e}")

    natural = bowen_entropy(spectrum, "e", tol.unit_modulus)
    base2 = bowen_entropy(spectrum, "2", tol.unit_modulus)
    if natural > 0:
        notes.append(f"Bowen bound is {natural:.6f} in natural log and {base2:.6f} in base 2; compare estimates in the same base")

    summary = SpectralSummary(
        differential=differential,
        spectrum=spectrum,
        split=split,
        log_base=base,
        bowen=natural if base == "e" else base2,
        bowen_natural=natural,
        bowen_base2=base2,
        growth=growth,
        closedness=closedness(system.group, split),
        bracket=bracket_closure_check(system.group, split, tol.bracket),
        trace_ad=trace_ad_check(system.group, split, tol.trace_ad),
        notes=notes,
    )
    logger.info(f"Spectral stage for {system.name}: dimensions {split.dimensions}, Bowen bound {summary.bowen:.6f} (base {base})")
    return summary
