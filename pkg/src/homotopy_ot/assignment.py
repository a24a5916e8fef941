"""Permutation plans, transport cost and the plan refiners.

Convention: ``plan.map[i] = j`` matches source column ``i`` of ``x`` with
target column ``j`` of ``y``. The plan matrix ``T`` has ``T[j, i] = 1`` so
that column ``i`` of ``y @ T`` is ``y[:, map[i]]``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from ._checks import DimensionError, as_cloud_pair, as_square

logger = logging.getLogger(__name__)

STRATEGIES = ("local", "exact")
PASS_CAP_FACTOR = 50


@dataclass(frozen=True, eq=False)
class Permutation:
    """A bijection on ``{0, ..., n-1}`` stored as an index array."""

    map: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.map)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("permutation must be a non-empty 1-D index array")
        if not np.issubdtype(arr.dtype, np.integer):
            if not np.all(np.equal(np.mod(arr, 1), 0)):
                raise ValueError("permutation entries must be integers")
        arr = arr.astype(np.intp)
        if not np.array_equal(np.sort(arr), np.arange(arr.size)):
            raise ValueError("index array is not a bijection on 0..n-1")
        arr.setflags(write=False)
        object.__setattr__(self, "map", arr)

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(np.arange(n))

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> "Permutation":
        return cls(rng.permutation(n))

    def __len__(self) -> int:
        return self.map.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, Permutation):
            return NotImplemented
        return np.array_equal(self.map, other.map)

    __hash__ = None

    def __repr__(self) -> str:
        return f"Permutation({self.map.tolist()})"

    def matrix(self) -> np.ndarray:
        """The 0/1 plan matrix ``T`` with ``T[map[i], i] = 1``."""
        n = len(self)
        t = np.zeros((n, n))
        t[self.map, np.arange(n)] = 1.0
        return t

    def inverse(self) -> "Permutation":
        inv = np.empty_like(self.map)
        inv[self.map] = np.arange(len(self))
        return Permutation(inv)

    def tolist(self) -> list[int]:
        return self.map.tolist()


def _check_order(t: Permutation, n: int) -> None:
    if len(t) != n:
        raise DimensionError(f"permutation of order {len(t)} does not match n={n}")


def apply_permutation(y, g: Permutation) -> np.ndarray:
    """Columns of ``y`` reordered as ``y @ G``."""
    y = np.asarray(y, dtype=float)
    _check_order(g, y.shape[1])
    return y[:, g.map]


def cost(x, y, t: Permutation) -> float:
    """Transport cost ``||x - y T||_F``."""
    x, y = as_cloud_pair(x, y)
    _check_order(t, x.shape[1])
    return float(np.linalg.norm(x - y[:, t.map]))


def cost_matrix(x, y) -> np.ndarray:
    """Squared distances ``C[i, j] = ||x[:, i] - y[:, j]||^2``."""
    x, y = as_cloud_pair(x, y)
    return cdist(x.T, y.T, metric="sqeuclidean")


def trace_objective(t: Permutation, m) -> float:
    """``tr(T^T m) = sum_i m[map[i], i]``."""
    m = as_square(m)
    _check_order(t, m.shape[0])
    return float(m[t.map, np.arange(len(t))].sum())


def compose(g: Permutation, t: Permutation) -> Permutation:
    """Plan of the matrix product ``G T``."""
    if len(g) != len(t):
        raise DimensionError(f"cannot compose permutations of order {len(g)} and {len(t)}")
    return Permutation(g.map[t.map])


def greedysort(x, y) -> Permutation:
    """Match each source column, in order, to its nearest unused target.

    Distances are squared Euclidean; ties go to the lowest target index.
    """
    x, y = as_cloud_pair(x, y)
    n = x.shape[1]
    taken = np.zeros(n, dtype=bool)
    plan = np.empty(n, dtype=np.intp)
    for i in range(n):
        dist = np.sum((y - x[:, i:i + 1]) ** 2, axis=0)
        dist[taken] = np.inf
        j = int(np.argmin(dist))
        plan[i] = j
        taken[j] = True
    return Permutation(plan)


def exact_assign(c) -> Permutation:
    """Global minimizer of ``sum_i C[i, map[i]]`` (Jonker-Volgenant)."""
    c = as_square(c, "cost matrix").astype(float, copy=False)
    rows, cols = linear_sum_assignment(c)
    plan = np.empty(c.shape[0], dtype=np.intp)
    plan[rows] = cols
    return Permutation(plan)


def _swap_descent(c: np.ndarray, start: np.ndarray, max_passes: int):
    """Pairwise-exchange descent on an assignment.

    A pass visits every source ``i`` in order, finds the partner ``j`` whose
    target exchange lowers the total most (lowest ``j`` on ties) and applies
    it when the gain beats the roundoff floor. Passes repeat until one
    makes no exchange or ``max_passes`` is reached.
    """
    n = start.size
    plan = start.copy()
    rows = np.arange(n)
    current = c[rows, plan]
    floor = 1e-12 * max(float(np.max(c)), np.finfo(float).tiny)
    passes = 0
    converged = False
    while passes < max_passes:
        passes += 1
        swapped = False
        for i in range(n):
            a = plan[i]
            gain = c[i, plan] + c[:, a] - current[i] - current
            j = int(np.argmin(gain))
            if gain[j] < -floor:
                b = plan[j]
                plan[i], plan[j] = b, a
                current[i], current[j] = c[i, b], c[j, a]
                swapped = True
        if not swapped:
            converged = True
            break
    return plan, passes, converged


def _find_cycle(parent: np.ndarray):
    """Some cycle of the graph ``j -> parent[j]`` (-1 ends a walk), or None."""
    n = parent.size
    # pointer doubling: a walk still alive after >= n hops is on a cycle
    hop = np.append(np.where(parent >= 0, parent, n), n)
    for _ in range(n.bit_length()):
        hop = hop[hop]
    ends = hop[:n]
    alive = ends[ends < n]
    if alive.size == 0:
        return None
    start = int(alive[0])
    cycle = [start]
    node = int(parent[start])
    while node != start:
        cycle.append(node)
        node = int(parent[node])
    return cycle


def _cancel_cycles(c: np.ndarray, plan: np.ndarray, max_cycles: int):
    """Apply improving cyclic exchanges until none is left.

    Source ``i`` may take the target held by source ``j`` at marginal cost
    ``c[i, plan[j]] - c[i, plan[i]]``. A negative cycle of such moves lowers
    the total, and a plan admitting none is optimal. Cycles are found with
    Bellman-Ford rounds from a zero potential; each round costs O(n^2) and a
    cycle in the predecessor graph is negative.
    """
    n = plan.size
    rows = np.arange(n)
    floor = 1e-12 * max(float(np.max(c)), np.finfo(float).tiny)
    cancelled = 0
    while cancelled < max_cycles:
        current = c[rows, plan]
        moves = c[:, plan] - current[:, None]
        dist = np.zeros(n)
        parent = np.full(n, -1, dtype=np.intp)
        cycle = None
        for _ in range(n):
            reach = dist[:, None] + moves
            best = np.argmin(reach, axis=0)
            cand = reach[best, rows]
            better = cand < dist - floor
            if not better.any():
                break
            dist[better] = cand[better]
            parent[better] = best[better]
            cycle = _find_cycle(parent)
            if cycle is not None:
                break
        if cycle is None:
            return plan, cancelled, True
        # edge parent[j] -> j hands target plan[j] to source parent[j]
        takers = parent[cycle]
        gain = float(np.sum(c[takers, plan[cycle]]) - np.sum(current[takers]))
        if gain >= -floor:
            return plan, cancelled, True
        plan[takers] = plan[cycle]
        cancelled += 1
    return plan, cancelled, False


def local_improve(x, y, t_init: Permutation, max_passes: int | None = None,
                  cycles: bool = True) -> Permutation:
    """Improve ``t_init`` by local exchanges; never increases cost.

    Pairwise exchange descent runs first. With ``cycles`` (the default) the
    result is then repaired by cancelling improving cyclic exchanges, which
    ends at a global optimum; ``cycles=False`` stops at a 2-exchange local
    optimum.
    """
    plan, _ = _local_improve(cost_matrix(x, y), t_init, max_passes, cycles)
    return plan


def _local_improve(c: np.ndarray, t_init: Permutation, max_passes: int | None,
                   cycles: bool = True):
    n = c.shape[0]
    _check_order(t_init, n)
    cap = PASS_CAP_FACTOR * n if max_passes is None else int(max_passes)
    plan, passes, converged = _swap_descent(c, np.array(t_init.map), cap)
    info = {"passes": passes, "converged": converged, "cycles": 0}
    if not converged:
        logger.warning("pairwise exchange stopped at the pass cap (%d) before converging", cap)
    elif cycles:
        plan, count, converged = _cancel_cycles(c, plan, cap)
        info.update(cycles=count, converged=converged)
        if not converged:
            logger.warning("cycle cancelling stopped at its cap (%d) before converging", cap)
    return Permutation(plan), info


def refine(x, y, t_init: Permutation, strategy: str = "local",
           max_passes: int | None = None) -> Permutation:
    """Refinement operator: local exchange descent or an exact solve."""
    plan, _ = refine_with_info(x, y, t_init, strategy, max_passes)
    return plan


def refine_with_info(x, y, t_init: Permutation, strategy: str = "local",
                     max_passes: int | None = None) -> tuple[Permutation, dict]:
    x, y = as_cloud_pair(x, y)
    _check_order(t_init, x.shape[1])
    c = cost_matrix(x, y)
    if strategy == "local":
        plan, info = _local_improve(c, t_init, max_passes)
    elif strategy == "exact":
        plan, info = exact_assign(c), {}
    else:
        raise ValueError(f"unknown refinement strategy {strategy!r}; expected one of {STRATEGIES}")
    # an equally good solve may round differently; the warm start wins ties
    if cost(x, y, plan) > cost(x, y, t_init):
        plan = t_init
    return plan, info
