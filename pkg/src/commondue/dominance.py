"""Priority orders and closed-form decoding of early/tardy partitions.

A partition is a 0/1 vector ``delta`` with ``delta[j] == 1`` when task ``j``
is on the early side.  Once the partition is fixed, sorting early tasks by
increasing ``alpha/p`` towards the due date and tardy tasks by decreasing
``beta/p`` after it is optimal among d-blocks; in the general case the best
left-block additionally needs every admissible straddling task to be tried.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Sequence

import numpy as np

from .instance import ContractError, Instance


class InfeasiblePartitionError(ContractError):
    """The early side does not fit before the due date."""


@dataclass(frozen=True)
class PriorityOrders:
    rho: tuple[int, ...]  # decreasing alpha/p, ties by index
    sigma: tuple[int, ...]  # decreasing beta/p, ties by index


def make_orders(inst: Instance) -> PriorityOrders:
    idx = range(inst.n)
    rho = sorted(idx, key=lambda j: (-Fraction(inst.alpha[j], inst.p[j]), j))
    sigma = sorted(idx, key=lambda j: (-Fraction(inst.beta[j], inst.p[j]), j))
    return PriorityOrders(tuple(rho), tuple(sigma))


class Decoded(NamedTuple):
    C: tuple[int, ...]
    cost: int
    straddler: int | None = None


def _early_tasks(delta: Sequence[int]) -> list[int]:
    return [j for j, v in enumerate(delta) if v]


def _check(inst: Instance, delta: Sequence[int]) -> int:
    if len(delta) != inst.n or any(v not in (0, 1) for v in delta):
        raise ContractError("delta must be a 0/1 vector of length n")
    pe = sum(inst.p[j] for j in _early_tasks(delta))
    if pe > inst.d:
        raise InfeasiblePartitionError(f"early workload {pe} exceeds the due date {inst.d}")
    return pe


def _layout(inst: Instance, delta, end_early: int, first_tardy: list[int], orders: PriorityOrders):
    """Early tasks right-tight at ``end_early``; tardy ones from ``end_early``."""
    C = [0] * inst.n
    end = end_early
    for j in orders.rho:
        if delta[j]:
            C[j] = end
            end -= inst.p[j]
    start = end_early
    seen = set(first_tardy)
    for j in first_tardy + [j for j in orders.sigma if not delta[j] and j not in seen]:
        start += inst.p[j]
        C[j] = start
    return tuple(C)


def _cost(inst: Instance, C: Sequence[int]) -> int:
    d = inst.d
    return sum(a * (d - c) if c < d else b * (c - d) for a, b, c in zip(inst.alpha, inst.beta, C))


def decode_dblock(inst: Instance, delta: Sequence[int], orders: PriorityOrders | None = None) -> Decoded:
    """Best schedule with early set ``delta`` and a task completing exactly at ``d``."""
    _check(inst, delta)
    orders = orders or make_orders(inst)
    C = _layout(inst, delta, inst.d, [], orders)
    return Decoded(C, _cost(inst, C))


def decode_left_block(
    inst: Instance, delta: Sequence[int], straddler: int, orders: PriorityOrders | None = None
) -> Decoded:
    """Best block starting at 0 in which ``straddler`` crosses the due date."""
    pe = _check(inst, delta)
    a = inst.d - pe
    if delta[straddler]:
        raise ContractError(f"straddler {straddler} is on the early side")
    if not a < inst.p[straddler]:
        raise ContractError(f"task {straddler} (p={inst.p[straddler]}) cannot straddle with a={a}")
    orders = orders or make_orders(inst)
    C = _layout(inst, delta, pe, [straddler], orders)
    return Decoded(C, _cost(inst, C), straddler)


def best_for_partition(inst: Instance, delta: Sequence[int], orders: PriorityOrders | None = None) -> Decoded:
    """Cheapest d-or-left-block with early set ``delta``."""
    pe = _check(inst, delta)
    orders = orders or make_orders(inst)
    best = decode_dblock(inst, delta, orders)
    a = inst.d - pe
    for s in range(inst.n):
        if not delta[s] and inst.p[s] > a:
            cand = decode_left_block(inst, delta, s, orders)
            if cand.cost < best.cost:
                best = cand
    return best


def mask_to_delta(mask: int, n: int) -> tuple[int, ...]:
    return tuple((mask >> j) & 1 for j in range(n))


class PartitionScan(NamedTuple):
    cost: int
    mask: int
    straddler: int | None


_CHUNK = 1 << 17


def scan_partitions(inst: Instance, with_straddlers: bool = True) -> PartitionScan:
    """Minimum decoded cost over every partition with ``p(E) <= d``.

    Vectorised over all 2^n partitions with exact int64 arithmetic.  With
    ``with_straddlers`` false only d-blocks are decoded.  Ties go to the
    smallest mask, then to the d-block, then to the smallest straddler.
    """
    n = inst.n
    orders = make_orders(inst)
    p = np.array(inst.p, dtype=np.int64)
    alpha = np.array(inst.alpha, dtype=np.int64)
    beta = np.array(inst.beta, dtype=np.int64)
    d = inst.d
    best: PartitionScan | None = None
    for lo in range(0, 1 << n, _CHUNK):
        masks = np.arange(lo, min(lo + _CHUNK, 1 << n), dtype=np.int64)
        bits = [(masks >> j) & 1 for j in range(n)]
        pe = sum(p[j] * bits[j] for j in range(n))
        ae = sum(alpha[j] * bits[j] for j in range(n))
        early = np.zeros_like(masks)
        pref = np.zeros_like(masks)
        for j in orders.rho:
            early += alpha[j] * bits[j] * pref
            pref += p[j] * bits[j]
        tardy = np.zeros_like(masks)
        pref = np.zeros_like(masks)
        bt = np.zeros_like(masks)
        for j in orders.sigma:
            tb = 1 - bits[j]
            pref += p[j] * tb
            tardy += beta[j] * tb * pref
            bt += beta[j] * tb
        feasible = pe <= d
        cost = np.where(feasible, early + tardy, np.iinfo(np.int64).max)
        strad = np.full_like(masks, -1)
        if with_straddlers:
            a = d - pe
            shifted_early = early + a * ae
            prefix = np.zeros_like(masks)
            b_upto = np.zeros_like(masks)
            per_task = {}
            for s in orders.sigma:
                tb = 1 - bits[s]
                prefix += p[s] * tb
                b_upto += beta[s] * tb
                lag = p[s] - a
                rest_tardy = tardy - beta[s] * prefix - p[s] * (bt - b_upto)
                cand = shifted_early + beta[s] * lag + rest_tardy + lag * (bt - beta[s])
                ok = feasible & (tb == 1) & (lag > 0)
                per_task[s] = np.where(ok, cand, np.iinfo(np.int64).max)
            for s in range(n):
                cand = per_task[s]
                better = cand < cost
                cost = np.where(better, cand, cost)
                strad = np.where(better, s, strad)
        k = int(np.argmin(cost))
        c = int(cost[k])
        if c == np.iinfo(np.int64).max:
            continue
        if best is None or c < best.cost:
            s = int(strad[k])
            best = PartitionScan(c, int(masks[k]), None if s < 0 else s)
    if best is None:
        raise InfeasiblePartitionError("no partition fits before the due date")
    return best
