"""Exact separation of the non-overlapping families through minimum cuts.

A point violates the row of subset ``S`` exactly when ``Gamma(S) > 0`` with

    Gamma(S) = sum_{i<j in S} q_ij + sum_{i in S} c_i,   q >= 0.

Maximising ``Gamma`` is a minimum cut problem on a graph with two extra
terminals ``0`` and ``n + 1`` (task ``j`` is vertex ``j + 1``).  Works with
``Fraction`` weights (exact) as well as floats (LP points).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Sequence

from .instance import ContractError, Instance
from .polytope import Cut, VarSpace, s_row, triangle_rows_for

CUT_EPS = 1e-6
# LP round-off may leave q slightly negative; beyond this it is a real error
_Q_CLAMP = 1e-6


@dataclass(frozen=True)
class GammaParams:
    c: tuple
    q: dict  # (i, j) with i < j -> weight >= 0

    @property
    def n(self) -> int:
        return len(self.c)


def _space_for(family: str, n: int, space: VarSpace | None) -> VarSpace:
    if space is not None:
        return space
    return VarSpace.build("F3" if family.endswith("P") else "F1", n)


def gamma_params(family: str, inst: Instance, point: Sequence, space: VarSpace | None = None) -> GammaParams:
    """Parameters of the set function whose positive values are violations."""
    if family not in ("S1", "S2", "S1P", "S2P"):
        raise ContractError(f"no Gamma parametrisation for family {family!r}")
    space = _space_for(family, inst.n, space)
    p, n = inst.p, inst.n
    early = family.startswith("S1")
    name = ("ep" if family.endswith("P") else "e") if early else ("tp" if family.endswith("P") else "t")
    delta = [point[space("delta", j)] for j in range(n)]
    c = []
    for j in range(n):
        v = point[space(name, j)]
        c.append(-2 * p[j] * v if early else 2 * ((1 - delta[j]) * p[j] * p[j] - p[j] * v))
    q = {}
    for i, j in combinations(range(n), 2):
        x = point[space("x", i, j)]
        w = p[i] * p[j] * ((delta[i] + delta[j] - x) if early else (2 - delta[i] - delta[j] - x))
        if w < 0:
            if isinstance(w, Fraction) or w < -_Q_CLAMP * p[i] * p[j]:
                raise ContractError(f"point violates the pair rows of ({i}, {j}): q = {float(w):.3g}")
            w = 0.0
        q[(i, j)] = w
    return GammaParams(tuple(c), q)


def gamma_value(params: GammaParams, S: Iterable[int]):
    S = sorted(set(S))
    return sum((params.q[(i, j)] for i, j in combinations(S, 2)), 0) + sum((params.c[i] for i in S), 0)


@dataclass
class SepGraph:
    """Dense symmetric weights on vertices ``0..n+1``."""

    w: list[list]
    k: list
    Q: object
    Csum: object
    K: object

    @property
    def size(self) -> int:
        return len(self.w)

    def cut_value(self, side: Iterable[int]):
        side = set(side)
        return sum(
            (self.w[u][v] for u in side for v in range(self.size) if v not in side),
            0,
        )

    def gamma_from_cut(self, cut):
        """Gamma of the task set on the source side of a cut of value ``cut``."""
        return -cut / 2 + (self.Q + self.Csum) / 2 + self.K / 4

    def edge_list(self) -> str:
        lines = [f"# vertices 0..{self.size - 1}; 0 and {self.size - 1} are terminals"]
        for u, v in combinations(range(self.size), 2):
            if self.w[u][v]:
                lines.append(f"{u} {v} {self.w[u][v]}")
        return "\n".join(lines) + "\n"


def build_sep_graph(params: GammaParams) -> SepGraph:
    n = params.n
    zero = 0 * (params.c[0] if n else 0)
    if any(v < 0 for v in params.q.values()):
        raise ContractError("separation graph needs q >= 0")
    k = [2 * params.c[j] for j in range(n)]
    for (i, j), v in params.q.items():
        k[i] += v
        k[j] += v
    size = n + 2
    w = [[zero] * size for _ in range(size)]
    for j in range(n):
        pos, neg = max(k[j], zero), max(-k[j], zero)
        w[0][j + 1] = w[j + 1][0] = pos
        w[j + 1][n + 1] = w[n + 1][j + 1] = neg
    for (i, j), v in params.q.items():
        w[i + 1][j + 1] = w[j + 1][i + 1] = v
    Q = sum(params.q.values(), zero)
    Csum = sum(params.c, zero)
    K = sum((abs(v) for v in k), zero)
    return SepGraph(w, k, Q, Csum, K)


def _is_exact(w: Sequence[Sequence]) -> bool:
    return all(not isinstance(v, float) for row in w for v in row)


def min_cut(w: Sequence[Sequence], s: int, t: int):
    """Minimum ``s``-``t`` cut by shortest augmenting paths.

    Returns ``(value, side)`` with ``side`` the set of vertices reachable from
    ``s`` in the final residual graph.
    """
    size = len(w)
    if s == t:
        raise ContractError("min_cut needs distinct terminals")
    exact = _is_exact(w)
    scale = max((abs(v) for row in w for v in row), default=0) or 1
    tol = 0 if exact else 1e-12 * scale
    residual = [list(row) for row in w]
    value = 0
    while True:
        prev = [-1] * size
        prev[s] = s
        queue = deque([s])
        while queue and prev[t] < 0:
            u = queue.popleft()
            for v in range(size):
                if prev[v] < 0 and residual[u][v] > tol:
                    prev[v] = u
                    queue.append(v)
        if prev[t] < 0:
            break
        push, v = None, t
        while v != s:
            u = prev[v]
            push = residual[u][v] if push is None else min(push, residual[u][v])
            v = u
        v = t
        while v != s:
            u = prev[v]
            residual[u][v] -= push
            residual[v][u] += push
            v = u
        value += push
    side = frozenset(v for v in range(size) if prev[v] >= 0)
    # report the capacity of the cut itself rather than the accumulated flow
    cut = sum((w[u][v] for u in side for v in range(size) if v not in side), 0)
    return cut, side


@dataclass(frozen=True)
class GomoryHuTree:
    """Cut tree rooted at vertex 0: ``parent[0] == 0``."""

    parent: tuple[int, ...]
    capacity: tuple  # capacity of edge (v, parent[v]); unused for the root

    def path(self, u: int, v: int) -> list[tuple[int, int]]:
        """Tree edges ``(child, parent)`` on the path between ``u`` and ``v``."""

        def to_root(x):
            chain = [x]
            while x != 0:
                x = self.parent[x]
                chain.append(x)
            return chain

        up_u, up_v = to_root(u), to_root(v)
        common = set(up_u) & set(up_v)
        edges = []
        for chain in (up_u, up_v):
            for x in chain:
                if x in common:
                    break
                edges.append((x, self.parent[x]))
        return edges

    def min_cut_value(self, u: int, v: int):
        return min(self.capacity[x] for x, _ in self.path(u, v))

    def component(self, child: int) -> frozenset[int]:
        """Vertices on the ``child`` side when edge ``(child, parent)`` is removed."""
        out = set()
        for x in range(len(self.parent)):
            y = x
            while y != 0 and y != child:
                y = self.parent[y]
            if y == child:
                out.add(x)
        return frozenset(out)


def gomory_hu(w: Sequence[Sequence]) -> GomoryHuTree:
    """Gusfield's construction: ``|V| - 1`` max-flow calls, no contraction."""
    size = len(w)
    parent = [0] * size
    cap = [0] * size
    for s in range(1, size):
        t = parent[s]
        value, side = min_cut(w, s, t)
        cap[s] = value
        for i in range(size):
            if i != s and i in side and parent[i] == t:
                parent[i] = s
        if parent[t] in side:
            parent[s] = parent[t]
            parent[t] = s
            cap[s] = cap[t]
            cap[t] = value
    return GomoryHuTree(tuple(parent), tuple(cap))


def _candidate_sets(graph: SepGraph, tree: GomoryHuTree) -> list[tuple[object, frozenset[int]]]:
    """Task sets induced by the minimum edges on the terminal path."""
    n1 = graph.size - 1
    path = tree.path(0, n1)
    values = [tree.capacity[x] for x, _ in path]
    best = min(values)
    exact = _is_exact(graph.w)
    tol = 0 if exact else 1e-9 * max(1.0, abs(float(best)))
    out = []
    for (child, _), v in zip(path, values):
        if v - best <= tol:
            comp = tree.component(child)
            source_side = comp if 0 in comp else frozenset(range(graph.size)) - comp
            tasks = frozenset(u - 1 for u in source_side if 0 < u < n1)
            out.append((v, tasks))
    return out


def max_gamma(family: str, inst: Instance, point: Sequence, space: VarSpace | None = None):
    """``(max_S Gamma(S), argmax S)`` over all subsets, through the cut tree.

    The empty set (Gamma = 0) is included, so the value is never negative.
    """
    params = gamma_params(family, inst, point, space)
    graph = build_sep_graph(params)
    tree = gomory_hu(graph.w)
    best_val, best_set = 0 * graph.Q, frozenset()
    for _, tasks in _candidate_sets(graph, tree):
        val = gamma_value(params, tasks)
        if val > best_val:
            best_val, best_set = val, tasks
    return best_val, best_set


def separate(
    family: str,
    inst: Instance,
    point: Sequence,
    max_cuts: int = 10,
    space: VarSpace | None = None,
    eps: float = CUT_EPS,
) -> list[Cut]:
    """Violated rows of ``family`` at ``point``, one per minimum path edge."""
    space = _space_for(family, inst.n, space)
    params = gamma_params(family, inst, point, space)
    graph = build_sep_graph(params)
    tree = gomory_hu(graph.w)
    cuts: list[Cut] = []
    seen = set()
    for _, tasks in _candidate_sets(graph, tree):
        if not tasks or tasks in seen:
            continue
        seen.add(tasks)
        if gamma_value(params, tasks) > eps:
            cuts.append(s_row(family, inst, tasks, space))
            if len(cuts) >= max_cuts:
                break
    return cuts


def separate_triangle(point: Sequence, space: VarSpace, eps: float = CUT_EPS, max_cuts: int | None = None) -> list[Cut]:
    """Violated metric rows on the pair variables."""
    out = []
    for i, j, k in combinations(range(space.n), 3):
        xij, xik, xjk = (point[space("x", *pair)] for pair in ((i, j), (i, k), (j, k)))
        if max(xij + xik + xjk - 2, xij - xik - xjk, xik - xij - xjk, xjk - xij - xik) <= eps:
            continue
        for row in triangle_rows_for(space, i, j, k):
            if row.slack(point) < -eps:
                out.append(row)
                if max_cuts is not None and len(out) >= max_cuts:
                    return out
    return out
