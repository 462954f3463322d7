"""Set cover over candidate control words, as Python-int bitmasks.

Candidates are identified by their rank (position in lexicographic word order);
ties are always broken toward the smaller rank.
"""

import heapq
import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .errors import BudgetError, LieEntropyError

logger = logging.getLogger(__name__)


class BudgetExceeded(BudgetError):
    """Raised when a computation would exceed its evaluation, universe or node cap."""

    pass


class InfeasibleCover(LieEntropyError):
    """Raised when the candidates together do not cover every grid point."""

    pass


def mask_from_bool(covered: np.ndarray) -> int:
    """Bitmask with bit i set when covered[i] is true."""
    covered = np.asarray(covered, dtype=bool)
    if covered.size == 0:
        return 0
    return int.from_bytes(np.packbits(covered, bitorder="little").tobytes(), "little")


def mask_from_indices(indices: Sequence[int]) -> int:
    mask = 0
    for i in indices:
        mask |= 1 << int(i)
    return mask


def mask_to_indices(mask: int) -> List[int]:
    indices = []
    while mask:
        low = mask & -mask
        indices.append(low.bit_length() - 1)
        mask ^= low
    return indices


def full_mask(size: int) -> int:
    return (1 << size) - 1


@dataclass
class CoverSolution:
    chosen: List[int]
    method: str
    nodes: int = 0

    @property
    def size(self) -> int:
        return len(self.chosen)


def _check_feasible(masks: Sequence[int], universe: int) -> None:
    union = 0
    for m in masks:
        union |= m
    missing = universe & ~union
    if missing:
        raise InfeasibleCover(f"{missing.bit_count()} grid points are served by no candidate word")


def _mask_rows(masks: Sequence[int], size: int) -> np.ndarray:
    """Masks unpacked into a ``(len(masks), size)`` boolean matrix."""
    nbytes = max(1, (size + 7) // 8)
    if not masks:
        return np.zeros((0, size), dtype=bool)
    packed = np.frombuffer(b"".join(m.to_bytes(nbytes, "little") for m in masks), dtype=np.uint8).reshape(len(masks), nbytes)
    return np.unpackbits(packed, axis=1, bitorder="little")[:, :size].astype(bool)


def _element_index(masks: Sequence[int], universe: int, chunk: int = 2048) -> Tuple[np.ndarray, np.ndarray]:
    """CSR map from element to the ranks containing it, ranks ascending."""
    size = universe.bit_length()
    ranks, elements = [], []
    for lo in range(0, len(masks), chunk):
        rows = _mask_rows([m & universe for m in masks[lo : lo + chunk]], size)
        r, e = np.nonzero(rows)
        ranks.append(r + lo)
        elements.append(e)
    ranks_arr = np.concatenate(ranks) if ranks else np.zeros(0, dtype=np.int64)
    elements_arr = np.concatenate(elements) if elements else np.zeros(0, dtype=np.int64)
    order = np.lexsort((ranks_arr, elements_arr))
    indptr = np.concatenate([[0], np.cumsum(np.bincount(elements_arr, minlength=size))])
    return indptr, ranks_arr[order]


def prune_redundant(masks: Sequence[int], chosen: Sequence[int], universe: int) -> List[int]:
    """Drop chosen candidates whose points are all covered by the other chosen ones.

    Smaller candidates are tried first, larger ranks first among equal sizes.
    """
    chosen = sorted(set(int(r) for r in chosen))
    if len(chosen) < 2:
        return chosen
    rows = _mask_rows([masks[r] & universe for r in chosen], universe.bit_length())
    multiplicity = rows.sum(axis=0)
    keep = np.ones(len(chosen), dtype=bool)
    for i in sorted(range(len(chosen)), key=lambda i: (int(rows[i].sum()), -chosen[i])):
        if np.all(multiplicity[rows[i]] >= 2):
            keep[i] = False
            multiplicity[rows[i]] -= 1
    return [r for r, k in zip(chosen, keep) if k]


def greedy_cover(masks: Sequence[int], universe: int) -> CoverSolution:
    """Lazy greedy: repeatedly take the candidate covering most uncovered points, smallest rank on ties.

    Choices made redundant by later ones are dropped afterwards.
    """
    _check_feasible(masks, universe)
    heap = [(-(m & universe).bit_count(), rank) for rank, m in enumerate(masks) if m & universe]
    heapq.heapify(heap)
    uncovered = universe
    chosen: List[int] = []
    while uncovered:
        neg_count, rank = heapq.heappop(heap)
        gain = (masks[rank] & uncovered).bit_count()
        if gain == 0:
            continue
        if gain == -neg_count:
            chosen.append(rank)
            uncovered &= ~masks[rank]
        else:
            heapq.heappush(heap, (-gain, rank))
    return CoverSolution(chosen=prune_redundant(masks, chosen, universe), method="greedy")


def sweep_cover(masks: Sequence[int], universe: int) -> CoverSolution:
    """Greedy anchored at the lowest uncovered point.

    Among the candidates containing that point, take the one covering most
    uncovered points, smallest rank on ties. When every candidate is a run of
    consecutive points this is a minimum cover.
    """
    _check_feasible(masks, universe)
    indptr, by_element = _element_index(masks, universe)
    uncovered = universe
    chosen: List[int] = []
    while uncovered:
        element = (uncovered & -uncovered).bit_length() - 1
        options = by_element[indptr[element] : indptr[element + 1]]
        best = max(options.tolist(), key=lambda r: ((masks[r] & uncovered).bit_count(), -r))
        chosen.append(best)
        uncovered &= ~masks[best]
    return CoverSolution(chosen=prune_redundant(masks, chosen, universe), method="greedy")


def heuristic_cover(masks: Sequence[int], universe: int) -> CoverSolution:
    """The smaller of the lazy greedy and the sweep cover; lazy greedy on ties."""
    lazy = greedy_cover(masks, universe)
    sweep = sweep_cover(masks, universe)
    if sweep.size < lazy.size:
        logger.debug(f"Sweep cover of size {sweep.size} beats lazy greedy ({lazy.size})")
        return sweep
    return lazy


def dominance_filter(masks: Sequence[int], universe: int, cap: int) -> List[int]:
    """Ranks of candidates not dominated by another candidate.

    A candidate is dropped when another covers a superset of its points; among
    equal coverages the smallest rank survives. Raises BudgetExceeded when the
    distinct coverages exceed ``cap`` times ten, or the survivors exceed ``cap``.
    """
    first: Dict[int, int] = {}
    for rank, m in enumerate(masks):
        m &= universe
        if m and m not in first:
            first[m] = rank
    if len(first) > 10 * cap:
        raise BudgetExceeded(f"{len(first)} distinct candidate coverages before dominance filtering (cap {cap})")

    ordered = sorted(first.items(), key=lambda item: (-item[0].bit_count(), item[1]))
    kept: List[int] = []
    by_element: Dict[int, List[int]] = {}
    for m, rank in ordered:
        elements = mask_to_indices(m)
        # only kept masks containing the rarest element of m can dominate it
        rarest = min(elements, key=lambda e: len(by_element.get(e, ())))
        if any(m & kept_mask == m for kept_mask in (masks[r] for r in by_element.get(rarest, ()))):
            continue
        kept.append(rank)
        for e in elements:
            by_element.setdefault(e, []).append(rank)
    if len(kept) > cap:
        raise BudgetExceeded(f"{len(kept)} candidates remain after dominance filtering (cap {cap})")
    return sorted(kept)


def _packing_bound(uncovered: int, element_sets: Dict[int, List[int]]) -> int:
    """Number of uncovered points, taken in index order, no two of which share a candidate."""
    blocked: set = set()
    count = 0
    for e in mask_to_indices(uncovered):
        sets = element_sets[e]
        if blocked.isdisjoint(sets):
            count += 1
            blocked.update(sets)
    return count


def exact_cover(masks: Sequence[int], universe: int, universe_cap: int = 20_000, node_cap: int = 2_000_000) -> CoverSolution:
    """Minimum cover by branch and bound on the minimum-frequency uncovered element."""
    _check_feasible(masks, universe)
    ranks = dominance_filter(masks, universe, universe_cap)
    local = [masks[r] & universe for r in ranks]

    element_sets: Dict[int, List[int]] = {}
    for i, m in enumerate(local):
        for e in mask_to_indices(m):
            element_sets.setdefault(e, []).append(i)

    incumbent = heuristic_cover(local, universe).chosen
    best = list(incumbent)
    nodes = 0

    def search(uncovered: int, chosen: List[int]) -> None:
        nonlocal best, nodes
        nodes += 1
        if nodes > node_cap:
            raise BudgetExceeded(f"Branch and bound exceeded {node_cap} nodes")
        if not uncovered:
            if len(chosen) < len(best):
                best = list(chosen)
            return
        remaining = uncovered.bit_count()
        max_gain = max((m & uncovered).bit_count() for m in local)
        bound = max(math.ceil(remaining / max_gain), _packing_bound(uncovered, element_sets))
        # only strictly smaller covers are of interest
        if len(chosen) + bound >= len(best):
            return
        element = min(mask_to_indices(uncovered), key=lambda e: (len(element_sets[e]), e))
        options = sorted(element_sets[element], key=lambda i: (-(local[i] & uncovered).bit_count(), i))
        for i in options:
            chosen.append(i)
            search(uncovered & ~local[i], chosen)
            chosen.pop()

    search(universe, [])
    chosen_ranks = sorted(ranks[i] for i in best)
    logger.debug(f"Exact cover of size {len(chosen_ranks)} after {nodes} nodes (greedy gave {len(incumbent)})")
    return CoverSolution(chosen=chosen_ranks, method="exact", nodes=nodes)
