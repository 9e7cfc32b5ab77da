"""Exact solvers: brute force, partition enumeration and branch-and-cut."""

from __future__ import annotations

import heapq
import itertools
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Sequence

import numpy as np

from .dominance import (
    Decoded,
    best_for_partition,
    decode_dblock,
    decode_left_block,
    make_orders,
    mask_to_delta,
    scan_partitions,
)
from .instance import ContractError, Instance, InstanceClass, classify, reduce_unrestrictive
from .lp import (
    CutPool,
    LpStatus,
    SimplexEngine,
    build_formulation,
    cutting_plane_solve,
    default_separators,
)
from .schedule import decode_f3, evaluate, is_feasible, schedule_to_dict, theta_inv, EtEncoding, F3Encoding

BRUTE_MAX_N = 8
ENUM_MAX_N = 24
INT_TOL = 1e-6


class SolverInvariantError(RuntimeError):
    """A result broke a guarantee of the formulations (a bug, not bad input)."""


@dataclass
class BcConfig:
    with_triangle: bool = False
    max_cuts: int = 10
    round_cap: int = 50
    time_limit: float = 600.0
    node_limit: int = 10**6


@dataclass
class SolveReport:
    value: int | None
    C: tuple[Fraction, ...]
    method: str
    optimal: bool = True
    lower_bound: float | None = None
    nodes: int = 0
    cuts: dict[str, int] = field(default_factory=dict)
    lp_iterations: int = 0
    seconds: float = 0.0
    bound_trace: list[float] = field(default_factory=list)

    def gap(self) -> float | None:
        if self.value is None or self.lower_bound is None or self.value == 0:
            return None
        return max(0.0, 100.0 * (self.value - self.lower_bound) / self.value)

    def to_dict(self, inst: Instance | None = None) -> dict[str, Any]:
        out: dict[str, Any] = {
            "method": self.method,
            "value": self.value,
            "optimal": self.optimal,
            "lower_bound": self.lower_bound,
            "gap": self.gap(),
            "nodes": self.nodes,
            "cuts": dict(sorted(self.cuts.items())),
            "lp_iterations": self.lp_iterations,
            "seconds": round(self.seconds, 6),
            "bound_trace": [round(v, 6) for v in self.bound_trace],
        }
        if inst is not None:
            out["schedule"] = schedule_to_dict(inst, self.C)
        return out

    CSV_FIELDS = ("method", "value", "optimal", "lower_bound", "gap", "nodes", "lp_iterations", "seconds")

    def csv_row(self) -> dict[str, Any]:
        d = self.to_dict()
        return {k: d[k] for k in self.CSV_FIELDS}


def _finalize(inst: Instance, C: Sequence, method: str, value: int | None = None, **kw) -> SolveReport:
    C = tuple(Fraction(c) for c in C)
    check = is_feasible(inst.p, C)
    if not check:
        raise SolverInvariantError(f"{method}: schedule is not feasible ({check.kind} at {check.tasks})")
    exact = evaluate(inst, C)
    if exact.denominator != 1 or (value is not None and exact != value):
        raise SolverInvariantError(f"{method}: reported value {value} but the schedule costs {exact}")
    return SolveReport(int(exact), C, method, **kw)


# -- oracles ------------------------------------------------------------------


def brute_force_schedules(inst: Instance) -> SolveReport:
    """Every task order, each anchored at time 0 or with one task on time."""
    n = inst.n
    if n > BRUTE_MAX_N:
        raise ContractError(f"brute force is limited to n <= {BRUTE_MAX_N}")
    start = time.perf_counter()
    perms = np.array(list(itertools.permutations(range(n))), dtype=np.int64)
    p = np.array(inst.p, dtype=np.int64)
    alpha = np.array(inst.alpha, dtype=np.int64)
    beta = np.array(inst.beta, dtype=np.int64)
    rel = np.cumsum(p[perms], axis=1)  # completion times of a block started at 0
    shifts = np.concatenate([np.zeros((len(perms), 1), dtype=np.int64), inst.d - rel], axis=1)
    valid = shifts >= 0
    shifts = np.where(valid, shifts, 0)
    C = rel[:, None, :] + shifts[:, :, None]
    a_perm, b_perm = alpha[perms][:, None, :], beta[perms][:, None, :]
    cost = (a_perm * np.maximum(inst.d - C, 0) + b_perm * np.maximum(C - inst.d, 0)).sum(axis=2)
    cost = np.where(valid, cost, np.iinfo(np.int64).max)
    flat = int(np.argmin(cost))
    k, anchor = divmod(flat, cost.shape[1])
    times = [0] * n
    for pos, j in enumerate(perms[k]):
        times[j] = int(C[k, anchor, pos])
    return _finalize(inst, times, "brute", int(cost[k, anchor]), seconds=time.perf_counter() - start)


def enumerate_exact(inst: Instance) -> SolveReport:
    """Minimum over all early/tardy partitions of the best dominant block."""
    if inst.n > ENUM_MAX_N:
        raise ContractError(f"partition enumeration is limited to n <= {ENUM_MAX_N}")
    start = time.perf_counter()
    general = classify(inst) is InstanceClass.GENERAL
    scan = scan_partitions(inst, with_straddlers=general)
    delta = mask_to_delta(scan.mask, inst.n)
    if scan.straddler is None:
        dec = decode_dblock(inst, delta)
    else:
        dec = decode_left_block(inst, delta, scan.straddler)
    if dec.cost != scan.cost:
        raise SolverInvariantError(f"vectorised scan gave {scan.cost}, decoder gave {dec.cost}")
    return _finalize(inst, dec.C, "enum", scan.cost, nodes=1 << inst.n, seconds=time.perf_counter() - start)


# -- leaf closures --------------------------------------------------------------


def close_partition(inst: Instance, early: Sequence[int], orders=None) -> Decoded | None:
    """Best schedule an integer point with early side ``early`` can encode.

    Beyond the d-or-left-blocks with that early side, an integer point may
    also encode a d-block whose on-time task sits outside ``early`` (its
    partition variable is free in the first formulation, and the shifted
    encoding anchored at the first task completing at or after ``d`` puts
    it on the tardy side).
    """
    early = set(early)
    delta = [1 if j in early else 0 for j in range(inst.n)]
    pe = sum(inst.p[j] for j in early)
    if pe > inst.d:
        return None
    orders = orders or make_orders(inst)
    best = best_for_partition(inst, delta, orders)
    for j in range(inst.n):
        if not delta[j] and pe + inst.p[j] <= inst.d:
            grown = list(delta)
            grown[j] = 1
            cand = decode_dblock(inst, grown, orders)
            if cand.cost < best.cost:
                best = cand
    return best


def _round_partition(inst: Instance, values: Sequence[float], general: bool, orders) -> list[int]:
    early = [j for j in range(inst.n) if values[j] >= 0.5]
    if general:
        # drop the least urgent early task (smallest alpha/p) until p(E) <= d
        while sum(inst.p[j] for j in early) > inst.d:
            worst = max(early, key=orders.rho.index)
            early.remove(worst)
    return early


# -- branch and cut -------------------------------------------------------------


@dataclass(order=True)
class _Node:
    bound: float
    neg_depth: int
    seq: int
    fixed0: frozenset = field(compare=False)
    fixed1: frozenset = field(compare=False)
    snapshot: Any = field(compare=False, default=None)


def _search(name: str, inst: Instance, config: BcConfig, leaf: Callable[[list[int]], Decoded | None], method: str):
    start = time.perf_counter()
    form = build_formulation(name, inst)
    engine = SimplexEngine(form.problem)
    pool = CutPool()
    for row in form.problem.rows:
        pool.add(row)
    seps = default_separators(form, config.with_triangle, config.max_cuts)
    dcols = [form.space("delta", j) for j in range(inst.n)]
    general = name == "F3"
    orders = make_orders(inst)
    cuts: dict[str, int] = {}
    trace: list[float] = []
    best: Decoded | None = None

    def offer(dec: Decoded | None) -> None:
        nonlocal best
        if dec is not None and (best is None or dec.cost < best.cost):
            best = dec

    def pruned(bound: float) -> bool:
        return best is not None and math.ceil(bound - INT_TOL) >= best.cost

    seq = itertools.count()
    heap = [_Node(-math.inf, 0, next(seq), frozenset(), frozenset())]
    nodes = 0
    limit_hit = False
    while heap:
        # best-first: the smallest open bound is the global lower bound
        glb = min(heap[0].bound, best.cost if best is not None else math.inf)
        if math.isfinite(glb) and (not trace or glb > trace[-1]):
            trace.append(glb)
        if nodes >= config.node_limit or time.perf_counter() - start > config.time_limit:
            limit_hit = True
            break
        node = heapq.heappop(heap)
        if pruned(node.bound):
            continue
        if general and sum(inst.p[j] for j in node.fixed1) > inst.d:
            continue
        if len(node.fixed0) + len(node.fixed1) == inst.n:
            # a single partition is left: the closure is the node optimum
            nodes += 1
            offer(leaf(sorted(node.fixed1)))
            continue
        if node.snapshot is not None:
            engine.restore(node.snapshot)
        for j, col in enumerate(dcols):
            if j in node.fixed0:
                engine.set_bounds(col, 0.0, 0.0)
            elif j in node.fixed1:
                engine.set_bounds(col, 1.0, 1.0)
            else:
                engine.set_bounds(col, 0.0, 1.0)
        res = cutting_plane_solve(engine, seps, config.round_cap, pool)
        nodes += 1
        for fam, k in res.counts().items():
            cuts[fam] = cuts.get(fam, 0) + k
        if res.solution.status is LpStatus.INFEASIBLE:
            continue
        if res.solution.status is not LpStatus.OPTIMAL:
            raise SolverInvariantError(f"node LP ended with status {res.solution.status.value}")
        lb = max(node.bound, res.solution.objective)
        values = [float(res.solution.x[c]) for c in dcols]
        frac = [min(v, 1 - v) for v in values]
        free = [j for j in range(inst.n) if j not in node.fixed0 and j not in node.fixed1]
        if max(frac) <= INT_TOL:
            offer(leaf([j for j in range(inst.n) if values[j] > 0.5]))
            if pruned(lb):
                continue
            # integral partition but the bound does not certify it (the point
            # is not an integer vertex in the other variables): keep splitting
            j = free[0]
        else:
            offer(leaf(_round_partition(inst, values, general, orders)))
            if pruned(lb):
                continue
            top = max(frac)
            j = next(k for k in range(inst.n) if frac[k] >= top - 1e-9)
        snap = engine.snapshot()
        depth = -node.neg_depth + 1
        heapq.heappush(heap, _Node(lb, -depth, next(seq), node.fixed0 | {j}, node.fixed1, snap))
        heapq.heappush(heap, _Node(lb, -depth, next(seq), node.fixed0, node.fixed1 | {j}, snap))
    if best is None:
        raise SolverInvariantError(f"{method}: search ended without any schedule")
    if limit_hit:
        open_bounds = [nd.bound for nd in heap if not pruned(nd.bound)]
        lower = min([best.cost] + open_bounds)
        optimal = lower >= best.cost - INT_TOL
    else:
        lower, optimal = float(best.cost), True
    if not trace or trace[-1] < lower:
        trace.append(float(lower))
    return _finalize(
        inst,
        best.C,
        method,
        best.cost,
        optimal=optimal,
        lower_bound=float(lower),
        nodes=nodes,
        cuts=cuts,
        lp_iterations=engine.iterations,
        seconds=time.perf_counter() - start,
        bound_trace=trace,
    )


def branch_and_cut(formulation: str, inst: Instance, config: BcConfig | None = None) -> SolveReport:
    """Branch on the partition variables with cutting-plane node bounds."""
    config = config or BcConfig()
    if formulation == "F3":
        orders = make_orders(inst)
        return _search("F3", inst, config, lambda early: close_partition(inst, early, orders), "f3")
    if formulation != "F1":
        raise ContractError(f"branch_and_cut supports F1 and F3, not {formulation!r}")
    if classify(inst) is not InstanceClass.UNRESTRICTIVE:
        raise ContractError("F1 needs an unrestrictive due date (d >= p(J))")
    red = reduce_unrestrictive(inst)
    if red.core is None:
        return _finalize(inst, red.recompose(inst, None), "f1")
    core = red.core
    orders = make_orders(core)

    def leaf(early):
        return close_partition(core, early, orders)

    rep = _search("F1", core, config, leaf, "f1")
    C = red.recompose(inst, rep.C)
    out = _finalize(inst, C, "f1", rep.value)
    out.optimal, out.lower_bound, out.nodes = rep.optimal, rep.lower_bound, rep.nodes
    out.cuts, out.lp_iterations, out.seconds, out.bound_trace = rep.cuts, rep.lp_iterations, rep.seconds, rep.bound_trace
    return out


def solve_f2(inst: Instance, with_triangle: bool = False, config: BcConfig | None = None) -> SolveReport:
    """Branch-and-bound on the pair-variable formulation."""
    if classify(inst) is not InstanceClass.UNRESTRICTIVE:
        raise ContractError("F2 needs an unrestrictive due date (d >= p(J))")
    config = config or BcConfig()
    if with_triangle != config.with_triangle:
        config = BcConfig(with_triangle, config.max_cuts, config.round_cap, config.time_limit, config.node_limit)
    orders = make_orders(inst)

    def leaf(early):
        return decode_dblock(inst, [1 if j in early else 0 for j in range(inst.n)], orders)

    return _search("F2", inst, config, leaf, "f2")


# -- extraction -------------------------------------------------------------------


def _snap(v) -> Fraction:
    if isinstance(v, Fraction):
        return v
    r = round(float(v))
    if abs(float(v) - r) <= INT_TOL:
        return Fraction(r)
    return Fraction(float(v)).limit_denominator(10**6)


def _integral(values: Sequence, what: str) -> list[int]:
    out = []
    for v in values:
        s = _snap(v)
        if s not in (0, 1):
            raise ContractError(f"{what} must be integral to extract a schedule, got {float(v):.6g}")
        out.append(int(s))
    return out


def extract_schedule(formulation: str, inst: Instance, point: Sequence, space=None) -> tuple[Fraction, ...]:
    """Schedule encoded by an integer point of a formulation.

    Early tasks with a zero earliness penalty carry no information about
    their position; when they collide they are packed from time 0 in
    ascending index order, which leaves the cost unchanged.
    """
    from .polytope import VarSpace

    space = space or VarSpace.build(formulation, inst.n)
    delta = _integral([point[space("delta", j)] for j in range(inst.n)], "delta")
    if formulation == "F2":
        return tuple(Fraction(c) for c in decode_dblock(inst, delta).C)
    if formulation == "F1":
        e = tuple(_snap(point[space("e", j)]) for j in range(inst.n))
        t = tuple(_snap(point[space("t", j)]) for j in range(inst.n))
        C = list(theta_inv(inst.d, EtEncoding(e, t)))
    elif formulation == "F3":
        _integral([point[space("gamma", j)] for j in range(inst.n)], "gamma")
        ep = tuple(_snap(point[space("ep", j)]) for j in range(inst.n))
        tp = tuple(_snap(point[space("tp", j)]) for j in range(inst.n))
        a = _snap(point[space("a")])
        b = tuple(a * dj for dj in delta)
        C = list(decode_f3(inst.d, F3Encoding(ep, tp, a, b)))
    else:
        raise ContractError(f"unknown formulation {formulation!r}")
    if not is_feasible(inst.p, C):
        zero = [j for j in range(inst.n) if delta[j] and inst.alpha[j] == 0]
        clock = Fraction(0)
        for j in zero:
            clock += inst.p[j]
            C[j] = clock
        check = is_feasible(inst.p, C)
        if not check:
            raise SolverInvariantError(f"decoded point is not a schedule ({check.kind} at {check.tasks})")
    return tuple(C)


# -- dispatch -----------------------------------------------------------------------

METHODS = ("enum", "brute", "f1", "f2", "f3")


def solve(inst: Instance, method: str, config: BcConfig | None = None) -> SolveReport:
    if method == "enum":
        return enumerate_exact(inst)
    if method == "brute":
        return brute_force_schedules(inst)
    if method == "f1":
        return branch_and_cut("F1", inst, config)
    if method == "f3":
        return branch_and_cut("F3", inst, config)
    if method == "f2":
        config = config or BcConfig()
        return solve_f2(inst, config.with_triangle, config)
    raise ContractError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")
