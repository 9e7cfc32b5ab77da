"""Linear rows of the three formulations and the non-overlapping machinery.

Variables live in a :class:`VarSpace`; rows are :class:`Cut` objects with
exact rational coefficients.  The exponential families (S1, S2 and their
primed twins) are produced one subset at a time by :func:`s_row`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Mapping, Sequence

from .dominance import make_orders
from .instance import ContractError, Instance

INF = math.inf

FAMILIES = (
    "E0 E1 T0 T1 X1 X2 X3 X4 S1 S2 S1P S2P A0 A1 A2 A3 AP0 AP1 AP2 AP3 G1 G2 G3 TRIANGLE"
).split()
S_FAMILIES = ("S1", "S2", "S1P", "S2P")


def gp(p: Sequence[int], S: Iterable[int]) -> Fraction:
    """Right-hand side of the non-overlapping inequality of subset ``S``."""
    S = list(S)
    total = sum(p[i] for i in S)
    return Fraction(total * total + sum(p[i] * p[i] for i in S), 2)


def pair_index(n: int) -> dict[tuple[int, int], int]:
    return {pair: k for k, pair in enumerate(combinations(range(n), 2))}


@dataclass
class VarSpace:
    """Column layout of one formulation (``F1``, ``F2`` or ``F3``)."""

    formulation: str
    n: int
    index: dict[tuple, int] = field(default_factory=dict)
    names: list[str] = field(default_factory=list)
    lower: list[Fraction] = field(default_factory=list)
    upper: list[float | Fraction] = field(default_factory=list)

    def add(self, key: tuple, lower=Fraction(0), upper=INF) -> int:
        self.index[key] = len(self.names)
        self.names.append(key[0] + "".join(f"_{k + 1}" for k in key[1:]))
        self.lower.append(Fraction(lower))
        self.upper.append(upper)
        return self.index[key]

    def __call__(self, name: str, *idx: int) -> int:
        if name == "x":
            i, j = idx
            idx = (min(i, j), max(i, j))
        return self.index[(name, *idx)]

    def has(self, name: str) -> bool:
        return any(key[0] == name for key in self.index)

    @property
    def size(self) -> int:
        return len(self.names)

    @classmethod
    def build(cls, formulation: str, n: int) -> VarSpace:
        space = cls(formulation, n)
        per_task = {"F1": ("e", "t", "delta"), "F2": ("delta",), "F3": ("ep", "tp", "delta")}
        if formulation not in per_task:
            raise ContractError(f"unknown formulation {formulation!r}")
        for name in per_task[formulation]:
            for j in range(n):
                space.add((name, j), upper=Fraction(1) if name == "delta" else INF)
        for i, j in combinations(range(n), 2):
            space.add(("x", i, j), upper=Fraction(1))
        if formulation == "F3":
            space.add(("a",))
            for j in range(n):
                space.add(("b", j))
            for j in range(n):
                space.add(("gamma", j), upper=Fraction(1))
        return space


@dataclass(frozen=True)
class Cut:
    """Sparse linear row ``sum(coef * var) sense rhs``."""

    coefs: tuple[tuple[int, Fraction], ...]
    sense: str
    rhs: Fraction
    family: str
    subset: tuple[int, ...] = ()

    @classmethod
    def make(cls, coefs: Mapping[int, Fraction | int], sense: str, rhs, family: str, subset=()) -> Cut:
        if sense not in ("<=", ">=", "="):
            raise ContractError(f"bad sense {sense!r}")
        if family not in FAMILIES:
            raise ContractError(f"unknown family {family!r}")
        if family in S_FAMILIES and not subset:
            raise ContractError("S-family rows need a nonempty subset")
        items = tuple(sorted((c, Fraction(v)) for c, v in coefs.items() if v != 0))
        return cls(items, sense, Fraction(rhs), family, tuple(subset))

    def lhs(self, point: Sequence) -> Fraction | float:
        return sum(v * point[c] for c, v in self.coefs)

    def slack(self, point: Sequence) -> Fraction | float:
        """Nonnegative iff the row holds at ``point``."""
        diff = self.lhs(point) - self.rhs
        if self.sense == ">=":
            return diff
        if self.sense == "<=":
            return -diff
        return -abs(diff)

    def key(self) -> tuple:
        """Scale-free identity used to detect duplicate rows."""
        coefs, rhs = [v for _, v in self.coefs], self.rhs
        lcm = 1
        for v in coefs + [rhs]:
            lcm = lcm * v.denominator // math.gcd(lcm, v.denominator)
        ints = [int(v * lcm) for v in coefs + [rhs]]
        g = 0
        for v in ints:
            g = math.gcd(g, v)
        g = g or 1
        sense = self.sense
        return (tuple(c for c, _ in self.coefs), tuple(v // g for v in ints), sense)

    def to_dense(self, size: int) -> list[Fraction]:
        row = [Fraction(0)] * size
        for c, v in self.coefs:
            row[c] = v
        return row


def _cut(coefs, sense, rhs, family, subset=()) -> Cut:
    return Cut.make(coefs, sense, rhs, family, subset)


def _x_rows(space: VarSpace) -> list[Cut]:
    rows = []
    for i, j in combinations(range(space.n), 2):
        x, di, dj = space("x", i, j), space("delta", i), space("delta", j)
        rows.append(_cut({x: 1, di: -1, dj: 1}, ">=", 0, "X1", (i, j)))
        rows.append(_cut({x: 1, di: 1, dj: -1}, ">=", 0, "X2", (i, j)))
        rows.append(_cut({x: 1, di: -1, dj: -1}, "<=", 0, "X3", (i, j)))
        rows.append(_cut({x: 1, di: 1, dj: 1}, "<=", 2, "X4", (i, j)))
    return rows


def _et_rows(inst: Instance, space: VarSpace, e: str, t: str) -> list[Cut]:
    P = inst.total_p
    rows = []
    for j in range(inst.n):
        ej, tj, dj = space(e, j), space(t, j), space("delta", j)
        rows.append(_cut({ej: 1}, ">=", 0, "E0", (j,)))
        rows.append(_cut({ej: 1, dj: -(P - inst.p[j])}, "<=", 0, "E1", (j,)))
        rows.append(_cut({tj: 1}, ">=", 0, "T0", (j,)))
        rows.append(_cut({tj: 1, dj: P}, "<=", P, "T1", (j,)))
    return rows


def base_rows_f1(inst: Instance, space: VarSpace | None = None) -> list[Cut]:
    space = space or VarSpace.build("F1", inst.n)
    return _et_rows(inst, space, "e", "t") + _x_rows(space)


def base_rows_f2(inst: Instance, space: VarSpace | None = None) -> list[Cut]:
    space = space or VarSpace.build("F2", inst.n)
    return _x_rows(space)


def base_rows_f3(inst: Instance, space: VarSpace | None = None) -> list[Cut]:
    space = space or VarSpace.build("F3", inst.n)
    n, d, P, p = inst.n, inst.d, inst.total_p, inst.p
    rows = _et_rows(inst, space, "ep", "tp") + _x_rows(space)
    a = space("a")
    rows.append(_cut({a: 1}, ">=", 0, "A0"))
    for j in range(n):
        rows.append(_cut({space("ep", j): 1, space("delta", j): p[j], a: 1}, "<=", d, "A1", (j,)))
    for j in range(n):
        rows.append(_cut({a: 1, space("gamma", j): d}, "<=", p[j] + d, "A2", (j,)))
    rows.append(_cut({**{space("delta", j): p[j] for j in range(n)}, a: 1}, "<=", d, "A3"))
    for j in range(n):
        b, dj = space("b", j), space("delta", j)
        rows.append(_cut({b: 1}, ">=", 0, "AP0", (j,)))
        rows.append(_cut({b: 1, a: -1}, "<=", 0, "AP1", (j,)))
        rows.append(_cut({b: 1, dj: -d}, "<=", 0, "AP2", (j,)))
        # b_j >= a - (1 - delta_j) d, the lower half of b = a * delta
        rows.append(_cut({b: 1, a: -1, dj: -d}, ">=", -d, "AP3", (j,)))
    rows.append(_cut({space("gamma", j): 1 for j in range(n)}, "=", 1, "G1"))
    for j in range(n):
        rows.append(_cut({space("delta", j): 1, space("gamma", j): 1}, "<=", 1, "G2", (j,)))
    for j in range(n):
        rows.append(_cut({space("tp", j): 1, space("gamma", j): P - p[j]}, "<=", P, "G3", (j,)))
    return rows


def base_rows(formulation: str, inst: Instance, space: VarSpace) -> list[Cut]:
    builders = {"F1": base_rows_f1, "F2": base_rows_f2, "F3": base_rows_f3}
    return builders[formulation](inst, space)


def s_row(family: str, inst: Instance, S: Iterable[int], space: VarSpace | None = None) -> Cut:
    """Non-overlapping row of ``family`` for subset ``S``.

    ``S1``: sum p_i e_i >= sum_{i<j in S} p_i p_j (d_i + d_j - x_ij) / 2.
    ``S2``: sum p_i t_i >= sum_{i<j in S} p_i p_j (2 - d_i - d_j - x_ij) / 2
    + sum p_i^2 (1 - d_i).  The primed families use ``ep``/``tp``.
    """
    S = tuple(sorted(set(S)))
    if not S:
        raise ContractError("S-family rows need a nonempty subset")
    if family not in S_FAMILIES:
        raise ContractError(f"{family} is not a non-overlapping family")
    primed = family.endswith("P")
    space = space or VarSpace.build("F3" if primed else "F1", inst.n)
    p = inst.p
    ps = sum(p[i] for i in S)
    coefs: dict[int, Fraction] = {}
    early = family.startswith("S1")
    var = ("ep" if primed else "e") if early else ("tp" if primed else "t")
    for i in S:
        coefs[space(var, i)] = Fraction(p[i])
        half_pairs = Fraction(p[i] * (ps - p[i]), 2)
        coefs[space("delta", i)] = -half_pairs if early else half_pairs + p[i] * p[i]
    for i, j in combinations(S, 2):
        coefs[space("x", i, j)] = Fraction(p[i] * p[j], 2)
    rhs = Fraction(0) if early else gp(p, S)
    return Cut.make(coefs, ">=", rhs, family, S)


def all_s_rows(family: str, inst: Instance, space: VarSpace | None = None) -> list[Cut]:
    """Every row of an S-family (2^n - 1 of them); for tests on small n."""
    return [
        s_row(family, inst, S, space)
        for k in range(1, inst.n + 1)
        for S in combinations(range(inst.n), k)
    ]


def triangle_rows_for(space: VarSpace, i: int, j: int, k: int) -> list[Cut]:
    xij, xik, xjk = space("x", i, j), space("x", i, k), space("x", j, k)
    S = tuple(sorted((i, j, k)))
    return [
        _cut({xij: 1, xik: 1, xjk: 1}, "<=", 2, "TRIANGLE", S),
        _cut({xij: 1, xik: -1, xjk: -1}, "<=", 0, "TRIANGLE", S),
        _cut({xik: 1, xij: -1, xjk: -1}, "<=", 0, "TRIANGLE", S),
        _cut({xjk: 1, xij: -1, xik: -1}, "<=", 0, "TRIANGLE", S),
    ]


def triangle_rows(space: VarSpace) -> list[Cut]:
    """Metric inequalities on the pair variables, four per triple."""
    return [row for i, j, k in combinations(range(space.n), 3) for row in triangle_rows_for(space, i, j, k)]


@dataclass(frozen=True)
class LinearObjective:
    coefs: dict[int, Fraction]
    constant: Fraction = Fraction(0)

    def value(self, point: Sequence) -> Fraction | float:
        return self.constant + sum(v * point[c] for c, v in self.coefs.items())

    def dense(self, size: int) -> list[Fraction]:
        out = [Fraction(0)] * size
        for c, v in self.coefs.items():
            out[c] = v
        return out


def objective(formulation: str, inst: Instance, space: VarSpace) -> LinearObjective:
    n, alpha, beta, p = inst.n, inst.alpha, inst.beta, inst.p
    coefs: dict[int, Fraction] = {}

    def add(col: int, v) -> None:
        coefs[col] = coefs.get(col, Fraction(0)) + Fraction(v)

    if formulation == "F1":
        for j in range(n):
            add(space("e", j), alpha[j])
            add(space("t", j), beta[j])
        return LinearObjective(coefs)
    if formulation == "F3":
        for j in range(n):
            add(space("ep", j), alpha[j])
            add(space("tp", j), beta[j])
            add(space("b", j), alpha[j] + beta[j])
        add(space("a"), -sum(beta))
        return LinearObjective(coefs)
    if formulation != "F2":
        raise ContractError(f"unknown formulation {formulation!r}")
    # closed-form earliness/tardiness of the priority-ordered d-block,
    # with delta_i delta_j = (d_i + d_j - x_ij) / 2 and its complement
    orders = make_orders(inst)
    constant = Fraction(0)
    for pos, j in enumerate(orders.rho):
        for k in orders.rho[:pos]:
            w = Fraction(alpha[j] * p[k], 2)
            add(space("delta", j), w)
            add(space("delta", k), w)
            add(space("x", j, k), -w)
    for pos, j in enumerate(orders.sigma):
        for k in orders.sigma[:pos]:
            w = Fraction(beta[j] * p[k], 2)
            constant += 2 * w
            add(space("delta", j), -w)
            add(space("delta", k), -w)
            add(space("x", j, k), -w)
        constant += beta[j] * p[j]
        add(space("delta", j), -beta[j] * p[j])
    return LinearObjective({c: v for c, v in coefs.items() if v != 0}, constant)


def check_point(rows: Iterable[Cut], point: Sequence, tol=0) -> list[tuple[Cut, Fraction | float]]:
    """Rows violated at ``point`` by more than ``tol``, with their slack."""
    point = list(point)
    out = []
    for row in rows:
        if row.coefs and row.coefs[-1][0] >= len(point):
            raise ContractError(f"point has {len(point)} entries, row uses column {row.coefs[-1][0]}")
        s = row.slack(point)
        if s < -tol:
            out.append((row, s))
    return out


def encode_f1(inst: Instance, C: Sequence, space: VarSpace | None = None) -> list[Fraction]:
    """Integer point of the first formulation for completion times ``C``."""
    from .schedule import theta

    space = space or VarSpace.build("F1", inst.n)
    enc = theta(inst.d, C)
    point = [Fraction(0)] * space.size
    delta = [1 if Fraction(c) <= inst.d else 0 for c in C]
    for j in range(inst.n):
        point[space("e", j)] = enc.e[j]
        point[space("t", j)] = enc.t[j]
        point[space("delta", j)] = Fraction(delta[j])
    for i, j in combinations(range(inst.n), 2):
        point[space("x", i, j)] = Fraction(int(delta[i] != delta[j]))
    return point


def encode_f3(inst: Instance, C: Sequence, tilde: bool = False, space: VarSpace | None = None) -> list[Fraction]:
    """Integer point of the general formulation (shifted encoding of ``C``)."""
    from .schedule import theta_prime, theta_prime_tilde

    space = space or VarSpace.build("F3", inst.n)
    C = [Fraction(c) for c in C]
    enc = (theta_prime_tilde if tilde else theta_prime)(inst.d, inst.p, C)
    ref = inst.d - enc.a
    delta = [1 if c <= ref else 0 for c in C]
    first = min((j for j in range(inst.n) if not delta[j]), key=lambda j: (C[j] - inst.p[j], j))
    point = [Fraction(0)] * space.size
    for j in range(inst.n):
        point[space("ep", j)] = enc.ep[j]
        point[space("tp", j)] = enc.tp[j]
        point[space("delta", j)] = Fraction(delta[j])
        point[space("b", j)] = enc.b[j]
        point[space("gamma", j)] = Fraction(int(j == first))
    point[space("a")] = enc.a
    for i, j in combinations(range(inst.n), 2):
        point[space("x", i, j)] = Fraction(int(delta[i] != delta[j]))
    return point


# -- non-overlapping inequalities on a plain vector ---------------------------


def _subset_excess(y: Sequence, p: Sequence[int]) -> list:
    """``p*y(S) - g_p(S)`` for every subset mask ``S`` (bitmask DP)."""
    n = len(p)
    size = 1 << n
    py = [Fraction(0)] * size
    ps = [0] * size
    sq = [0] * size
    for mask in range(1, size):
        low = (mask & -mask).bit_length() - 1
        prev = mask & (mask - 1)
        py[mask] = py[prev] + p[low] * Fraction(y[low])
        ps[mask] = ps[prev] + p[low]
        sq[mask] = sq[prev] + p[low] * p[low]
    return [py[m] - Fraction(ps[m] * ps[m] + sq[m], 2) for m in range(size)]


def satisfies_q0(y: Sequence, p: Sequence[int]) -> bool:
    return min(_subset_excess(y, p)) >= 0


_SCAN_LIMIT = 14


def _prepare(y, p):
    if len(p) > _SCAN_LIMIT:
        raise ContractError(f"exhaustive subset scan limited to n <= {_SCAN_LIMIT}")
    y = [Fraction(v) for v in y]
    excess = _subset_excess(y, p)
    if min(excess) < 0:
        raise ContractError("y violates a non-overlapping inequality")
    return y, excess


def perturb_pair(y: Sequence, i: int, j: int, p: Sequence[int]):
    """Move two overlapping coordinates in opposite directions inside P^Q.

    Requires ``y_i <= y_j < y_i + p_j``.  Returns ``(y_plus_minus,
    y_minus_plus, eps)`` where both vectors still satisfy every
    non-overlapping inequality and ``eps > 0``.
    """
    y, excess = _prepare(y, p)
    if i == j or not y[i] <= y[j] < y[i] + p[j]:
        raise ContractError("perturb_pair needs y_i <= y_j < y_i + p_j")
    bi, bj = 1 << i, 1 << j
    m1 = min(excess[m] for m in range(len(excess)) if m & bj and not m & bi)
    m2 = min(excess[m] for m in range(len(excess)) if m & bi and not m & bj)
    eps = min(m1, m2)
    plus_minus, minus_plus = list(y), list(y)
    plus_minus[i] += eps / p[i]
    plus_minus[j] -= eps / p[j]
    minus_plus[i] -= eps / p[i]
    minus_plus[j] += eps / p[j]
    return plus_minus, minus_plus, eps


def descend_single(y: Sequence, i: int, j: int, p: Sequence[int]):
    """Decrease ``y_j`` inside P^Q when ``y_j >= p(J)`` overlaps with ``y_i``."""
    y, excess = _prepare(y, p)
    if i == j or not y[j] < y[i] + p[j] or y[j] < sum(p):
        raise ContractError("descend_single needs y_j < y_i + p_j and y_j >= p(J)")
    bj = 1 << j
    eps = min(excess[m] for m in range(len(excess)) if m & bj)
    lowered = list(y)
    lowered[j] -= eps / p[j]
    return lowered, eps


def to_lp_text(rows: Iterable[Cut], space: VarSpace, obj: LinearObjective | None = None) -> str:
    """Rows in CPLEX LP syntax, for external cross-checks."""

    def term(v: Fraction, name: str) -> str:
        sign = "-" if v < 0 else "+"
        return f"{sign} {float(abs(v)):.12g} {name}"

    lines = ["Minimize", " obj: " + (" ".join(term(v, space.names[c]) for c, v in sorted(obj.coefs.items())) if obj else "0")]
    lines.append("Subject To")
    for k, row in enumerate(rows):
        body = " ".join(term(v, space.names[c]) for c, v in row.coefs)
        lines.append(f" r{k}_{row.family}: {body} {row.sense} {float(row.rhs):.12g}")
    lines.append("Bounds")
    for c, name in enumerate(space.names):
        hi = space.upper[c]
        hi_txt = "+inf" if hi == INF else f"{float(hi):.12g}"
        lines.append(f" {float(space.lower[c]):.12g} <= {name} <= {hi_txt}")
    lines.append("End")
    return "\n".join(lines) + "\n"
