"""Admissible pairs, admissibility certificates and the word-prefix coverage expansion.

The expansion walks control words level by level. A node holds the endpoint
phi(k, e, w) of its word and the grid points whose trajectories stayed in
N_eps(Q) for steps 1..k, together with their current states. Nodes are kept in
lexicographic word order; two nodes with equal endpoints (to the merge
resolution) and equal served sets have the same future, so only the first is
kept.

With ``serving="cell"`` a grid point g is served only when every corner of its
cell g·H, H = [-rho/2, rho/2]^d, stays in N_eps(Q). Since
phi(k, g h, w) = phi(k, g, w) f0^k(h), the corner states are the point state
times f0^k of the corner offsets.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import numpy as np

from .errors import LieEntropyError, ValidationError
from .groups import LieGroup
from .regions import BoxRegion, Region
from .setcover import BudgetExceeded, InfeasibleCover
from .system import LinearSystem

logger = logging.getLogger(__name__)

_ZOBRIST_SEED = 0x5EED
_BLOCK_PAIRS = 2_000_000
SERVING_MODES = ("point", "cell")


class NotAdmissibleAtResolution(LieEntropyError):
    """Raised when some grid points have no word over the discretized alphabet keeping them in Q.

    This is a statement about the finite alphabet, the grid and the rho-cell
    memo of the search, not a proof that the continuum pair is inadmissible.
    """

    def __init__(self, message: str, failing: Optional[np.ndarray] = None, points: Optional[np.ndarray] = None):
        super().__init__(message)
        self.failing = np.zeros(0, dtype=int) if failing is None else np.asarray(failing, dtype=int)
        self.points = np.zeros((0, 0)) if points is None else np.asarray(points)

    def to_dict(self) -> Dict:
        data = super().to_dict()
        data["failing"] = self.failing.tolist()
        data["points"] = self.points.tolist()
        return data


@dataclass
class AdmissibilityCertificate:
    """One word of length ``horizon`` per grid point, as alphabet indices, keeping it in Q."""

    horizon: int
    words: np.ndarray
    fallback_points: int = 0
    memo_cells: int = 0

    def to_dict(self) -> Dict:
        return {
            "horizon": self.horizon,
            "points": int(len(self.words)),
            "fallback_points": self.fallback_points,
            "memo_cells": self.memo_cells,
        }


@dataclass
class AdmissiblePair:
    """A sampled compact set K, a target region Q and the inflation radius epsilon."""

    group: LieGroup
    K_region: BoxRegion
    rho: float
    Q_region: Region
    epsilon: float
    K_grid: np.ndarray = field(repr=False)
    certificate: Optional[AdmissibilityCertificate] = None
    serving: str = "point"

    @classmethod
    def from_regions(
        cls, group: LieGroup, K_region: Region, rho: float, Q_region: Region, epsilon: float, serving: str = "point"
    ) -> "AdmissiblePair":
        if not isinstance(K_region, BoxRegion):
            raise ValidationError("K must be given as a box")
        if epsilon < 0:
            raise ValidationError(f"epsilon must be nonnegative, got {epsilon}")
        if serving not in SERVING_MODES:
            raise ValidationError(f"Unknown serving mode: {serving}. Use one of {', '.join(SERVING_MODES)}")
        grid = group.check_chart(K_region.grid(rho))
        outside = ~Q_region.contains(group, grid)
        if np.any(outside):
            raise ValidationError(f"{int(outside.sum())} points of the K grid lie outside Q, e.g. {grid[outside][0].tolist()}")
        return cls(group, K_region, float(rho), Q_region, float(epsilon), grid, serving=serving)

    def with_epsilon(self, epsilon: float) -> "AdmissiblePair":
        if epsilon < 0:
            raise ValidationError(f"epsilon must be nonnegative, got {epsilon}")
        return replace(self, epsilon=float(epsilon), certificate=None)

    def contains(self, g) -> np.ndarray:
        """Membership in N_eps(Q)."""
        return self.Q_region.neighborhood_contains(self.group, np.asarray(g, dtype=float), self.epsilon)

    def in_target(self, g) -> np.ndarray:
        """Membership in Q itself."""
        return self.Q_region.contains(self.group, np.asarray(g, dtype=float))

    def cell_offsets(self) -> np.ndarray:
        """Chart corners of the cell e + [-rho/2, rho/2]^d, flat along degenerate K axes."""
        half = np.where(self.K_region.hi > self.K_region.lo, 0.5 * self.rho, 0.0)
        corners = np.stack(np.meshgrid(*[(-h, h) if h > 0 else (0.0,) for h in half], indexing="ij"), axis=-1).reshape(-1, len(half))
        return self.group.identity()[None, :] + corners

    @property
    def size(self) -> int:
        return int(len(self.K_grid))

    def to_dict(self) -> Dict:
        return {
            "K": self.K_region.to_dict(),
            "rho": self.rho,
            "Q": self.Q_region.to_dict(),
            "epsilon": self.epsilon,
            "grid_points": self.size,
            "serving": self.serving,
        }


def _letter_images(system: LinearSystem) -> np.ndarray:
    return system.b(system.control.alphabet)


def certify_admissible(
    system: LinearSystem,
    pair: AdmissiblePair,
    horizon: int,
    max_evaluations: int = 10_000_000,
    cell_size: Optional[float] = None,
) -> AdmissibilityCertificate:
    """Find, for every grid point, a word of length ``horizon`` keeping its iterates in Q.

    A vectorized greedy rollout steers every point toward the center of Q; points
    where it gets stuck are retried by depth-first search. Failures are memoized
    per (cell of side ``cell_size``, remaining steps); the cell size defaults to
    the grid resolution rho.
    """
    if horizon < 0:
        raise ValidationError(f"horizon must be nonnegative, got {horizon}")
    cell_size = pair.rho if cell_size is None else float(cell_size)
    if not cell_size > 0:
        raise ValidationError(f"cell_size must be positive, got {cell_size}")
    G = system.group
    images = _letter_images(system)
    L = len(images)
    center = pair.Q_region.center
    N = pair.size
    words = np.zeros((N, horizon), dtype=int)
    states = np.array(pair.K_grid, dtype=float)
    stuck = np.zeros(N, dtype=bool)
    evaluations = 0

    for j in range(horizon):
        active = np.flatnonzero(~stuck)
        if active.size == 0:
            break
        evaluations += active.size * L
        candidates = G._product(images[None, :, :], system.f0(states[active])[:, None, :])
        inside = pair.in_target(candidates)
        score = np.where(inside, G._distance(candidates, np.broadcast_to(center, candidates.shape)), np.inf)
        best = np.argmin(score, axis=1)
        ok = np.isfinite(score[np.arange(active.size), best])
        words[active[ok], j] = best[ok]
        states[active[ok]] = candidates[ok, best[ok]]
        stuck[active[~ok]] = True

    fallback = np.flatnonzero(stuck)
    failing = []
    memo: Dict[Tuple, bool] = {}
    if fallback.size:
        logger.debug(f"Greedy rollout stuck on {fallback.size} of {N} points, falling back to depth-first search")
        budget = [max(0, max_evaluations - evaluations)]
        for i in fallback:
            word = _search_word(system, pair, images, pair.K_grid[i], horizon, memo, budget, cell_size)
            if word is None:
                failing.append(i)
            else:
                words[i] = word

    if failing:
        failing_arr = np.asarray(failing, dtype=int)
        raise NotAdmissibleAtResolution(
            f"{len(failing)} of {N} grid points have no word of length {horizon} over the {L}-letter alphabet "
            f"keeping them in Q",
            failing=failing_arr,
            points=pair.K_grid[failing_arr],
        )
    certificate = AdmissibilityCertificate(horizon=horizon, words=words, fallback_points=int(fallback.size), memo_cells=len(memo))
    logger.info(f"Admissibility certified for {N} grid points at horizon {horizon} ({fallback.size} needed search)")
    return certificate


def _search_word(system, pair, images, start, horizon, memo, budget, cell_size) -> Optional[np.ndarray]:
    G = system.group
    center = pair.Q_region.center
    word = np.zeros(horizon, dtype=int)

    def visit(state: np.ndarray, depth: int) -> bool:
        if depth == horizon:
            return True
        key = (tuple(np.floor(state / cell_size).astype(np.int64).tolist()), horizon - depth)
        if memo.get(key) is False:
            return False
        budget[0] -= len(images)
        if budget[0] < 0:
            raise BudgetExceeded("Admissibility search exceeded its evaluation budget")
        candidates = G._product(images, system.f0(state)[None, :])
        inside = np.flatnonzero(pair.in_target(candidates))
        order = inside[np.argsort(G._distance(candidates[inside], np.broadcast_to(center, candidates[inside].shape)), kind="stable")]
        for letter in order:
            word[depth] = letter
            if visit(candidates[letter], depth + 1):
                return True
        memo[key] = False
        return False

    return word.copy() if visit(np.asarray(start, dtype=float), 0) else None


def replay_certificate(system: LinearSystem, pair: AdmissiblePair, certificate: AdmissibilityCertificate) -> bool:
    """Re-run every certificate word by direct iteration and check membership in Q."""
    for point, letters in zip(pair.K_grid, certificate.words):
        trajectory = system.trajectory_direct(certificate.horizon, point, system.words_from_letters(letters))
        if len(trajectory) > 1 and not np.all(pair.in_target(np.asarray(trajectory[1:]))):
            return False
    return True


@dataclass
class CoverageLevel:
    """Nodes after k steps; alive sets and states are stored CSR style by node."""

    parents: np.ndarray
    letters: np.ndarray
    bases: np.ndarray
    indptr: np.ndarray
    indices: np.ndarray
    states: np.ndarray

    @property
    def nodes(self) -> int:
        return int(len(self.bases))

    def served(self, node: int) -> np.ndarray:
        return self.indices[self.indptr[node] : self.indptr[node + 1]]


def _segment_positions(starts: np.ndarray, sizes: np.ndarray) -> np.ndarray:
    """Flattened positions of the segments [starts[i], starts[i] + sizes[i])."""
    total = int(sizes.sum())
    if total == 0:
        return np.zeros(0, dtype=np.int64)
    offsets = np.arange(total) - np.repeat(np.cumsum(sizes) - sizes, sizes)
    return np.repeat(starts, sizes) + offsets


class CoverageTree:
    """Level-synchronous expansion of word prefixes for one admissible pair.

    ``levels[k]`` holds the surviving nodes after k steps; the candidate sets for
    horizon n are the served sets of the nodes in ``levels[n]``.
    """

    def __init__(self, system: LinearSystem, pair: AdmissiblePair, merge_resolution: float = 1e-9):
        self.system = system
        self.pair = pair
        self.merge_resolution = merge_resolution
        self.images = _letter_images(system)
        self.evaluations = 0
        N = pair.size
        self._zobrist = np.random.default_rng(_ZOBRIST_SEED).integers(0, np.iinfo(np.uint64).max, size=N, dtype=np.uint64)
        G = system.group
        self.levels: List[CoverageLevel] = [
            CoverageLevel(
                parents=np.zeros(1, dtype=np.int64),
                letters=np.zeros(1, dtype=np.int64),
                bases=G.identity()[None, :],
                indptr=np.array([0, N], dtype=np.int64),
                indices=np.arange(N, dtype=np.int64),
                states=np.array(pair.K_grid, dtype=float),
            )
        ]
        self.corners: Optional[List[np.ndarray]] = [pair.cell_offsets()] if pair.serving == "cell" else None

    @property
    def depth(self) -> int:
        return len(self.levels) - 1

    def expand(self, n_max: int, max_evaluations: int = 10_000_000) -> "CoverageTree":
        """Grow the tree to depth ``n_max``; raises BudgetExceeded before any level that would break the cap."""
        while self.depth < n_max:
            level = self.levels[-1]
            sizes = np.diff(level.indptr)
            pairs = int(sizes.sum()) * len(self.images)
            if self.evaluations + pairs > max_evaluations:
                raise BudgetExceeded(
                    f"Level {self.depth + 1} needs {pairs} trajectory checks on top of {self.evaluations}, over the cap of {max_evaluations}"
                )
            self.evaluations += pairs
            if self.corners is not None:
                self.corners.append(self.system.f0(self.corners[-1]))
            self.levels.append(self._next_level(level))
            new = self.levels[-1]
            logger.debug(f"Level {self.depth}: {new.nodes} nodes, {len(new.indices)} served points, {self.evaluations} checks so far")
            if new.nodes == 0:
                raise InfeasibleCover(f"No word of length {self.depth} keeps any grid point in N_eps(Q)")
        return self

    def _next_level(self, level: CoverageLevel) -> CoverageLevel:
        G = self.system.group
        L = len(self.images)
        sizes = np.diff(level.indptr)
        mapped = self.system.f0(level.states)
        mapped_bases = self.system.f0(level.bases)

        # split parents into blocks of bounded pair count
        cumulative = np.cumsum(sizes * L)
        cuts = np.searchsorted(cumulative, np.arange(_BLOCK_PAIRS, int(cumulative[-1]) + _BLOCK_PAIRS, _BLOCK_PAIRS), side="right")
        bounds = np.unique(np.concatenate([[0], np.minimum(cuts, level.nodes), [level.nodes]]))

        parts = []
        for lo, hi in zip(bounds[:-1], bounds[1:]):
            if hi <= lo:
                continue
            block = np.arange(lo, hi)
            child_parent = np.repeat(block, L)
            child_letter = np.tile(np.arange(L), len(block))
            child_sizes = sizes[child_parent]
            pair_child = np.repeat(np.arange(len(child_parent)), child_sizes)
            src = _segment_positions(level.indptr[child_parent], child_sizes)
            states = G._product(self.images[child_letter[pair_child]], mapped[src])
            ok = self.pair.contains(states)
            if self.corners is not None and ok.any():
                hits = np.flatnonzero(ok)
                corner_states = G._product(states[hits, None, :], self.corners[-1][None, :, :])
                ok[hits] = np.all(self.pair.contains(corner_states), axis=1)
            counts = np.bincount(pair_child[ok], minlength=len(child_parent))
            keep = counts > 0
            parts.append(
                (
                    child_parent[keep],
                    child_letter[keep],
                    G._product(self.images[child_letter[keep]], mapped_bases[child_parent[keep]]),
                    counts[keep],
                    level.indices[src[ok]],
                    states[ok],
                )
            )

        if not parts:
            d = G.dimension
            return CoverageLevel(np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros((0, d)), np.zeros(1, np.int64), np.zeros(0, np.int64), np.zeros((0, d)))
        parents, letters, bases, counts, indices, states = (np.concatenate(column) for column in zip(*parts))
        starts = np.cumsum(counts) - counts
        if len(counts) == 0:
            return CoverageLevel(parents, letters, bases, np.zeros(1, np.int64), indices, states)

        keep = self._first_of_duplicates(bases, counts, indices, starts)
        positions = _segment_positions(starts[keep], counts[keep])
        return CoverageLevel(
            parents=parents[keep],
            letters=letters[keep],
            bases=bases[keep],
            indptr=np.concatenate([[0], np.cumsum(counts[keep])]).astype(np.int64),
            indices=indices[positions],
            states=states[positions],
        )

    def _first_of_duplicates(self, bases, counts, indices, starts) -> np.ndarray:
        quantized = (np.rint(bases / self.merge_resolution) + 0.0).view(np.int64)
        hashes = np.bitwise_xor.reduceat(self._zobrist[indices], starts).view(np.int64)
        keys = np.column_stack([quantized, counts.astype(np.int64), hashes])
        _, first = np.unique(keys, axis=0, return_index=True)
        return np.sort(first)

    def word(self, n: int, node: int) -> np.ndarray:
        """Alphabet indices of the word represented by a node of level n."""
        letters = np.zeros(n, dtype=np.int64)
        for k in range(n, 0, -1):
            letters[k - 1] = self.levels[k].letters[node]
            node = int(self.levels[k].parents[node])
        return letters

    def candidate_masks(self, n: int, chunk: int = 4096) -> List[int]:
        """Served sets of level n as bitmasks over the grid, in node order."""
        level = self.levels[n]
        N = self.pair.size
        masks: List[int] = []
        node_of = np.repeat(np.arange(level.nodes), np.diff(level.indptr))
        for lo in range(0, level.nodes, chunk):
            hi = min(lo + chunk, level.nodes)
            rows = np.zeros((hi - lo, N), dtype=bool)
            span = slice(level.indptr[lo], level.indptr[hi])
            rows[node_of[span] - lo, level.indices[span]] = True
            packed = np.packbits(rows, axis=1, bitorder="little")
            masks.extend(int.from_bytes(row.tobytes(), "little") for row in packed)
        return masks

    def covered(self, n: int) -> np.ndarray:
        mask = np.zeros(self.pair.size, dtype=bool)
        mask[self.levels[n].indices] = True
        return mask
