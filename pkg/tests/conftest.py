"""Shared instances and independent oracles."""

from __future__ import annotations

import itertools
import os
import random
from fractions import Fraction
from pathlib import Path

import pytest

from commondue.instance import Instance

# counterexample instances (tasks numbered from 0 here)
I_A = Instance((1, 1, 1, 1, 1, 1, 3, 4), (20,) * 8, (4, 4, 4, 4, 4, 4, 5, 8), 2)
I_B = Instance((1, 1, 1, 4, 3), (10,) * 5, (2, 2, 2, 5, 3), 2)
I_C = Instance((5, 3, 2), (0, 2, 2), (1, 2, 2), 6)

H_GRID = ("0.2", "0.4", "0.6", "0.8", "1")


def benchmark_path() -> Path | None:
    """Location of the n=10 benchmark file, if one was provided."""
    env = os.environ.get("COMMONDUE_SCH10")
    candidates = [Path(env)] if env else []
    candidates.append(Path(__file__).parent / "data" / "sch10.txt")
    return next((c for c in candidates if c.is_file()), None)


def cost(inst: Instance, C) -> Fraction:
    return sum(
        (a * (inst.d - c) if c < inst.d else b * (c - inst.d) for a, b, c in zip(inst.alpha, inst.beta, C)),
        Fraction(0),
    )


def block_oracle(inst: Instance) -> int:
    """Minimum over every order and every integer start of an idle-free block.

    The cost of a fixed order is convex piecewise linear in the start time
    with integer breakpoints, so integer starts in ``[0, d]`` suffice.
    """
    best = None
    for perm in itertools.permutations(range(inst.n)):
        for s in range(inst.d + 1):
            t, total = s, 0
            for j in perm:
                t += inst.p[j]
                total += inst.alpha[j] * (inst.d - t) if t < inst.d else inst.beta[j] * (t - inst.d)
            if best is None or total < best:
                best = total
    return best


def random_feasible_schedule(rng: random.Random, inst: Instance, max_gap: int = 3) -> list[int]:
    """Random order with random idle gaps."""
    order = list(range(inst.n))
    rng.shuffle(order)
    t = rng.randint(0, inst.d + 2)
    C = [0] * inst.n
    for j in order:
        t += rng.randint(0, max_gap) if rng.random() < 0.4 else 0
        t += inst.p[j]
        C[j] = t
    return C


@pytest.fixture
def rng():
    return random.Random(20240611)


def q0_oracle(y, p) -> bool:
    """Every subset inequality sum p_j y_j >= g_p(S), checked one by one."""
    n = len(p)
    for k in range(1, n + 1):
        for S in itertools.combinations(range(n), k):
            ps = sum(p[j] for j in S)
            lhs = sum(p[j] * Fraction(y[j]) for j in S)
            if lhs < Fraction(ps * ps + sum(p[j] ** 2 for j in S), 2):
                return False
    return True


def f1_encodable(inst: Instance, C) -> bool:
    """Hypotheses under which a schedule has an integer point in the first polyhedron."""
    P, d = inst.total_p, inst.d
    no_straddler = all(not (c - pj < d < c) for c, pj in zip(C, inst.p))
    window = all(d - P <= c - pj and c <= d + P for c, pj in zip(C, inst.p))
    return no_straddler and window


def f3_anchor(inst: Instance, C):
    """``tilde`` flag for the shifted encoding of ``C``, or None when not encodable."""
    P, d, p = inst.total_p, inst.d, inst.p
    if any(c < pj for c, pj in zip(C, p)) or any(d - P > c - pj for c, pj in zip(C, p)):
        return None
    for j, c in enumerate(C):
        if c - p[j] < d < c:
            return False if all(x <= c - p[j] + P for x in C) else None
    for j, c in enumerate(C):
        if c == d:
            return True if all(x <= c - p[j] + P for x in C) else None
    return None


def random_block_schedule(rng: random.Random, inst: Instance) -> list[int]:
    """Random order, a random start in ``[0, d]``, occasional idle slots."""
    order = list(range(inst.n))
    rng.shuffle(order)
    t = rng.randint(0, inst.d)
    C = [0] * inst.n
    for j in order:
        if rng.random() < 0.15:
            t += 1
        t += inst.p[j]
        C[j] = t
    return C


def random_relaxed_point(rng: random.Random, inst: Instance, space, scale: float = 1.0) -> list[float]:
    """Random point of the base-row box of the first or third formulation."""
    P = inst.total_p
    e_name, t_name = ("ep", "tp") if space.formulation == "F3" else ("e", "t")
    pt = [0.0] * space.size
    delta = [rng.choice([0.0, 1.0, rng.random()]) for _ in range(inst.n)]
    for j in range(inst.n):
        pt[space("delta", j)] = delta[j]
        pt[space(e_name, j)] = rng.random() * scale * (P - inst.p[j]) * delta[j]
        pt[space(t_name, j)] = rng.random() * scale * P * (1 - delta[j])
    for i, j in itertools.combinations(range(inst.n), 2):
        lo = abs(delta[i] - delta[j])
        hi = min(delta[i] + delta[j], 2 - delta[i] - delta[j])
        pt[space("x", i, j)] = lo + rng.random() * (hi - lo)
    return pt


# -- acceptance summary ----------------------------------------------------------

ACCEPTANCE: dict[int, str] = {}


def record(criterion: int, ok: bool, detail: str) -> None:
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE[criterion] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])
