"""Dense simplex engine and cutting-plane loop for the relaxations.

Every row is turned into ``a x + s = b`` with a slack ``s`` bounded below by
zero (``>=`` rows are negated, ``=`` rows get a fixed slack).  Columns are
boxed, so putting each nonbasic column at the bound favoured by its cost
gives a dual feasible starting basis and the bounded-variable dual simplex
reaches an optimal vertex without a feasibility phase.  The same property
makes warm starts cheap: adding rows or tightening bounds keeps the basis
dual feasible.
"""

from __future__ import annotations

import enum
import itertools
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .instance import ContractError, Instance, classify, InstanceClass
from .polytope import Cut, LinearObjective, VarSpace, base_rows, objective

FEAS_TOL = 1e-7
CUT_TOL = 1e-6
GAP_DIGITS = 1  # gaps are reported to 0.1 percentage point
_PIVOT_TOL = 1e-9
_DUAL_TOL = 1e-9
_BIG = 1e7  # stand-in for an infinite upper bound
_BLAND_AFTER = 500  # degenerate pivots before switching to Bland's rule
_REFACTOR_EVERY = 100


class LpStatus(enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    ITERATION_LIMIT = "IterationLimit"


@dataclass
class LpProblem:
    """``min c x + constant`` subject to ``rows`` and column bounds."""

    lower: np.ndarray
    upper: np.ndarray
    rows: list[Cut]
    c: np.ndarray
    constant: float = 0.0

    def __post_init__(self) -> None:
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        self.c = np.asarray(self.c, dtype=float)
        if not (len(self.lower) == len(self.upper) == len(self.c)):
            raise ContractError("bounds and objective must have one entry per column")
        if not np.all(np.isfinite(self.lower)):
            raise ContractError("every column needs a finite lower bound")
        for row in self.rows:
            if row.coefs and row.coefs[-1][0] >= len(self.c):
                raise ContractError("row refers to a column outside the problem")

    @property
    def ncols(self) -> int:
        return len(self.c)

    def to_text(self, names: Sequence[str] | None = None) -> str:
        names = list(names or [f"v{j}" for j in range(self.ncols)])
        space = VarSpace("LP", 0, {}, names, list(self.lower), list(self.upper))
        obj = LinearObjective({j: v for j, v in enumerate(self.c) if v})
        from .polytope import to_lp_text

        return to_lp_text(self.rows, space, obj)


@dataclass
class LpSolution:
    status: LpStatus
    x: np.ndarray
    objective: float
    basis: tuple[int, ...]
    vertex: bool
    iterations: int


class SimplexEngine:
    """Stateful solver keeping its tableau between calls."""

    _ids = itertools.count(1)

    def __init__(self, problem: LpProblem, big: float = _BIG, check_ray: bool = True):
        self.problem = problem
        self.check_ray = check_ray
        self.big = big
        self.n = problem.ncols
        self.c_struct = problem.c.copy()
        self.constant = problem.constant
        self.lo_struct = problem.lower.copy()
        self.hi_struct = np.where(np.isinf(problem.upper), big, problem.upper)
        self.inf_upper = np.isinf(problem.upper)
        self.A = np.zeros((0, self.n))
        self.b = np.zeros(0)
        self.equality = np.zeros(0, dtype=bool)
        self.basis: list[int] = []
        self.x = problem.lower.copy()
        self.iterations = 0
        self.degenerate = 0
        self._dirty = True
        self._last_snapshot = 0
        self._cache: dict[int, tuple] = {}
        for j in range(self.n):
            if self.c_struct[j] < 0:
                self.x[j] = self.hi_struct[j]
        self.T = np.zeros((0, self.n))
        self.d = self.c_struct.copy()
        self._extra_rows: list[Cut] = []
        self.add_rows(problem.rows)
        self._extra_rows = []

    # -- layout helpers ---------------------------------------------------
    @property
    def m(self) -> int:
        return len(self.b)

    def _lo(self) -> np.ndarray:
        return np.concatenate([self.lo_struct, np.zeros(self.m)])

    def _hi(self) -> np.ndarray:
        return np.concatenate([self.hi_struct, np.where(self.equality, 0.0, self.big)])

    def _cost(self) -> np.ndarray:
        return np.concatenate([self.c_struct, np.zeros(self.m)])

    def _a_ext(self) -> np.ndarray:
        return np.hstack([self.A, np.eye(self.m)])

    # -- modification -----------------------------------------------------
    def add_rows(self, rows: Sequence[Cut]) -> None:
        if not rows:
            return
        self._extra_rows.extend(rows)
        k = len(rows)
        new_a = np.zeros((k, self.n))
        new_b = np.zeros(k)
        new_eq = np.zeros(k, dtype=bool)
        for r, row in enumerate(rows):
            for col, v in row.coefs:
                new_a[r, col] = float(v)
            new_b[r] = float(row.rhs)
            if row.sense == ">=":
                new_a[r] *= -1
                new_b[r] *= -1
            new_eq[r] = row.sense == "="
            scale = max(np.abs(new_a[r]).max(initial=0.0), 1e-12)
            new_a[r] /= scale
            new_b[r] /= scale
        m_old = self.m
        self.A = np.vstack([self.A, new_a])
        self.b = np.concatenate([self.b, new_b])
        self.equality = np.concatenate([self.equality, new_eq])
        self._extend_tableau(m_old)
        self._dirty = True

    def _extend_tableau(self, m_old: int) -> None:
        """Append tableau rows for rows ``m_old..m`` with their slacks basic."""
        k = self.m - m_old
        new_a = self.A[m_old:]
        rows_before = len(self.basis)
        # old rows get zero columns for the new slacks
        T = np.hstack([self.T, np.zeros((rows_before, k))])
        full = np.hstack([new_a, np.zeros((k, m_old)), np.eye(k)])
        if rows_before:
            full -= full[:, self.basis] @ T
        self.T = np.vstack([T, full])
        self.d = np.concatenate([self.d, np.zeros(k)])
        slack_vals = self.b[m_old:] - new_a @ self.x[: self.n]
        self.x = np.concatenate([self.x[: self.n + m_old], slack_vals])
        self.basis.extend(range(self.n + m_old, self.n + self.m))

    def set_bounds(self, col: int, lower: float, upper: float) -> None:
        """Change structural bounds, keeping the basis dual feasible."""
        if lower > upper:
            raise ContractError(f"empty bound interval for column {col}")
        self.lo_struct[col] = lower
        self.hi_struct[col] = self.big if math.isinf(upper) else upper
        self.inf_upper[col] = math.isinf(upper)
        if col in self._basic_set():
            return
        old = self.x[col]
        new = self._choose_bound(col, self.lo_struct[col], self.hi_struct[col], old)
        if new != old:
            self.x[col] = new
            self._shift_basics(col, new - old)
        self._dirty = True

    def _basic_set(self) -> set[int]:
        return set(self.basis)

    def _shift_basics(self, j: int, delta: float) -> None:
        idx = np.array(self.basis, dtype=int)
        self.x[idx] -= self.T[:, j] * delta

    # -- refactorisation and snapshots -------------------------------------
    def refactor(self) -> None:
        """Rebuild tableau, primal values and reduced costs from the basis."""
        m, ntot = self.m, self.n + self.m
        lo, hi, cost = self._lo(), self._hi(), self._cost()
        basic = np.array(self.basis, dtype=int)
        if m:
            Binv = np.linalg.inv(self._a_ext()[:, basic])
            self.T = np.hstack([Binv @ self.A, Binv])
            self.d = cost - cost[basic] @ self.T
        else:
            Binv = np.zeros((0, 0))
            self.T = np.zeros((0, ntot))
            self.d = cost.copy()
        is_basic = np.zeros(ntot, dtype=bool)
        is_basic[basic] = True
        x = np.empty(ntot)
        for j in np.flatnonzero(~is_basic):
            prev = self.x[j] if j < len(self.x) else lo[j]
            x[j] = self._choose_bound(j, lo[j], hi[j], prev)
        x[basic] = 0.0
        if m:
            # basic values from b - A x_N (slack columns are the identity)
            rhs = self.b - self.A @ x[: self.n] - x[self.n :]
            x[basic] = Binv @ rhs
        self.x = x

    def residual(self) -> float:
        """Largest violation of ``A x + s = b`` at the current values."""
        if not self.m:
            return 0.0
        return float(np.abs(self.A @ self.x[: self.n] + self.x[self.n :] - self.b).max())

    def _choose_bound(self, j: int, lo: float, hi: float, prev: float) -> float:
        if self.d[j] > _DUAL_TOL:
            return lo
        if self.d[j] < -_DUAL_TOL:
            return hi
        return hi if abs(prev - hi) < abs(prev - lo) else lo

    _CACHE = 64  # tableaux kept for warm restores

    def snapshot(self) -> tuple:
        self._last_snapshot = next(self._ids)
        self._dirty = False
        snap = (self._last_snapshot, tuple(self.basis), self.x.copy(), self.m)
        self._cache[self._last_snapshot] = (self.T.copy(), self.d.copy())
        while len(self._cache) > self._CACHE:
            self._cache.pop(next(iter(self._cache)))
        return snap

    def restore(self, snap: tuple) -> None:
        sid, basis, x, m = snap
        if sid == self._last_snapshot and not self._dirty:
            return
        self._dirty = True
        cached = self._cache.get(sid)
        if cached is not None:
            T, d = cached
            self.basis = list(basis)
            self.T, self.d, self.x = T.copy(), d.copy(), x.copy()
            # the slack columns of rows added since are absent from T
            extra = self.m - m
            if extra:
                self._extend_tableau(m)
            return
        self.basis = list(basis) + list(range(self.n + m, self.n + self.m))
        self.x = np.concatenate([x[: self.n + m], np.zeros(self.m - m)])
        self.refactor()

    # -- dual simplex -------------------------------------------------------
    def _infeasibility(self, lo, hi):
        basic = np.array(self.basis, dtype=int)
        xb = self.x[basic]
        below = lo[basic] - xb
        above = xb - hi[basic]
        return basic, below, above

    def solve(self, max_iter: int = 50000) -> LpSolution:
        if self.m == 0:
            self.refactor()
        refactored = False
        since_refactor = 0
        while True:
            lo, hi = self._lo(), self._hi()
            basic, below, above = self._infeasibility(lo, hi)
            viol = np.maximum(below, above)
            if viol.size == 0 or viol.max() <= FEAS_TOL:
                if not refactored and self.residual() > FEAS_TOL:
                    # drifted values: confirm on a fresh factorisation
                    self.refactor()
                    refactored = True
                    since_refactor = 0
                    continue
                return self._finish(LpStatus.OPTIMAL)
            refactored = False
            if self.iterations >= max_iter:
                return self._finish(LpStatus.ITERATION_LIMIT)
            bland = self.degenerate >= _BLAND_AFTER
            cand = np.flatnonzero(viol > FEAS_TOL)
            if bland:
                r = int(cand[np.argmin(basic[cand])])
            else:
                r = int(cand[np.argmax(viol[cand])])
            increase = below[r] > FEAS_TOL
            target = lo[basic[r]] if increase else hi[basic[r]]
            q = self._ratio_test(r, increase, lo, hi, bland)
            if q is None:
                return self._finish(LpStatus.INFEASIBLE)
            self._pivot(r, q, target)
            self.iterations += 1
            since_refactor += 1
            self._dirty = True
            if since_refactor >= _REFACTOR_EVERY:
                self.refactor()
                since_refactor = 0

    def _ratio_test(self, r: int, increase: bool, lo, hi, bland: bool):
        alpha = self.T[r]
        ntot = len(alpha)
        nonbasic = np.ones(ntot, dtype=bool)
        nonbasic[self.basis] = False
        free_move = hi - lo > 0
        at_upper = nonbasic & (self.x >= hi - FEAS_TOL) & free_move
        at_lower = nonbasic & ~at_upper & free_move
        sign = -1.0 if increase else 1.0
        elig = (at_lower & (sign * alpha > _PIVOT_TOL)) | (at_upper & (sign * alpha < -_PIVOT_TOL))
        cols = np.flatnonzero(elig)
        if cols.size == 0:
            return None
        ratios = np.abs(self.d[cols]) / np.abs(alpha[cols])
        best = ratios.min()
        if best <= _DUAL_TOL:
            self.degenerate += 1
        else:
            self.degenerate = 0
        ties = cols[ratios <= best + 1e-12]
        if bland:
            return int(ties.min())
        return int(ties[np.argmax(np.abs(alpha[ties]))])

    def _pivot(self, r: int, q: int, target: float) -> None:
        leaving = self.basis[r]
        alpha_q = self.T[r, q]
        dq = (self.x[leaving] - target) / alpha_q
        self.x[q] += dq
        self._shift_basics(q, dq)
        self.x[leaving] = target
        self.T[r] /= alpha_q
        col = self.T[:, q].copy()
        col[r] = 0.0
        self.T -= np.outer(col, self.T[r])
        self.d = self.d - self.d[q] * self.T[r]
        self.d[q] = 0.0
        self.basis[r] = q

    def _finish(self, status: LpStatus) -> LpSolution:
        x = self.x[: self.n].copy()
        obj = float(self.c_struct @ x + self.constant)
        if status is LpStatus.OPTIMAL and self.check_ray and self._touches_box():
            # an optimum that moves with the artificial box means a ray
            wider = SimplexEngine(self._current_problem(), big=self.big * 100, check_ray=False).solve()
            if wider.status is not LpStatus.OPTIMAL or wider.objective < obj - 1e-6 * max(1.0, abs(obj)):
                status = LpStatus.UNBOUNDED
        return LpSolution(status, x, obj, tuple(self.basis), status is LpStatus.OPTIMAL, self.iterations)

    def _touches_box(self) -> bool:
        struct = self.x[: self.n]
        if np.any(self.inf_upper & (struct > self.big / 10)):
            return True
        return bool(np.any(self.x[self.n :] > self.big / 10))

    def _current_problem(self) -> LpProblem:
        upper = np.where(self.inf_upper, np.inf, self.hi_struct)
        rows = list(self.problem.rows) + list(self._extra_rows)
        return LpProblem(self.lo_struct.copy(), upper, rows, self.c_struct.copy(), self.constant)


def simplex_solve(problem: LpProblem) -> LpSolution:
    return SimplexEngine(problem).solve()


# -- cutting planes -----------------------------------------------------------

Separator = Callable[[list], list[Cut]]


class CutPool:
    """Append-only pool of rows, deduplicated on the canonical row key."""

    def __init__(self) -> None:
        self.rows: list[Cut] = []
        self._keys: set = set()

    def add(self, cut: Cut) -> bool:
        key = cut.key()
        if key in self._keys:
            return False
        self._keys.add(key)
        self.rows.append(cut)
        return True

    def __len__(self) -> int:
        return len(self.rows)


@dataclass
class CuttingPlaneResult:
    solution: LpSolution
    cuts_added: list[Cut]
    bound_trace: list[float]
    rounds: int

    def counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for cut in self.cuts_added:
            out[cut.family] = out.get(cut.family, 0) + 1
        return out


def cutting_plane_solve(
    base: LpProblem | SimplexEngine,
    separators: Sequence[Separator] = (),
    round_cap: int = 200,
    pool: CutPool | None = None,
) -> CuttingPlaneResult:
    """Alternate LP solves and separation until no separator finds a cut."""
    engine = base if isinstance(base, SimplexEngine) else SimplexEngine(base)
    if pool is None:
        pool = CutPool()
        rows = base.rows if isinstance(base, LpProblem) else []
        for row in rows:
            pool.add(row)
    added: list[Cut] = []
    trace: list[float] = []
    rounds = 0
    while True:
        sol = engine.solve()
        if sol.status is not LpStatus.OPTIMAL:
            return CuttingPlaneResult(sol, added, trace, rounds)
        trace.append(sol.objective)
        if rounds >= round_cap:
            return CuttingPlaneResult(sol, added, trace, rounds)
        point = sol.x.tolist()
        fresh = [cut for sep in separators for cut in sep(point) if pool.add(cut)]
        if not fresh:
            return CuttingPlaneResult(sol, added, trace, rounds)
        engine.add_rows(fresh)
        added.extend(fresh)
        rounds += 1


# -- formulation problems -----------------------------------------------------


def implied_bounds(space: VarSpace, inst: Instance) -> tuple[list[float], list[float]]:
    """Column bounds with the finite upper bounds implied by the rows.

    ``e, t <= p(J)`` follow from (e1)/(t1), ``a <= d`` from (a3) and
    ``b <= a``; boxing every column is what lets the dual simplex start
    without a feasibility phase.
    """
    P, d = inst.total_p, inst.d
    caps = {"e": P, "t": P, "ep": P, "tp": P, "a": d, "b": d}
    lower = [float(v) for v in space.lower]
    upper = []
    for key, up in zip(space.index, space.upper):
        cap = caps.get(key[0])
        upper.append(float(min(up, cap)) if cap is not None else float(up))
    return lower, upper


@dataclass
class Formulation:
    name: str
    inst: Instance
    space: VarSpace
    objective: LinearObjective
    problem: LpProblem


def build_formulation(name: str, inst: Instance) -> Formulation:
    if name in ("F1", "F2") and classify(inst) is not InstanceClass.UNRESTRICTIVE:
        raise ContractError(f"{name} needs an unrestrictive due date (d >= p(J))")
    space = VarSpace.build(name, inst.n)
    obj = objective(name, inst, space)
    lower, upper = implied_bounds(space, inst)
    rows = base_rows(name, inst, space)
    problem = LpProblem(
        np.array(lower), np.array(upper), rows, np.array([float(v) for v in obj.dense(space.size)]), float(obj.constant)
    )
    return Formulation(name, inst, space, obj, problem)


def default_separators(form: Formulation, with_triangle: bool = False, max_cuts: int = 10) -> list[Separator]:
    from .separation import separate, separate_triangle

    families = {"F1": ("S1", "S2"), "F2": (), "F3": ("S1P", "S2P")}[form.name]
    seps: list[Separator] = [
        (lambda pt, fam=fam: separate(fam, form.inst, pt, max_cuts=max_cuts, space=form.space)) for fam in families
    ]
    if with_triangle:
        seps.append(lambda pt: separate_triangle(pt, form.space, CUT_TOL, max_cuts=None))
    return seps


@dataclass
class RelaxResult:
    formulation: str
    lower_bound: float
    optimum: int | None
    gap: float | None  # percent; None when the optimum is zero
    cuts: dict[str, int] = field(default_factory=dict)
    rounds: int = 0
    iterations: int = 0
    seconds: float = 0.0


def gap_percent(optimum, lower_bound: float) -> float | None:
    if optimum == 0:
        return None
    return 100.0 * (float(optimum) - lower_bound) / float(optimum)


def relax_value(
    formulation: str,
    inst: Instance,
    with_triangle: bool = False,
    optimum: int | None = None,
    max_cuts: int = 10,
    round_cap: int = 500,
) -> RelaxResult:
    """LP lower bound of a formulation and its gap to the optimum."""
    start = time.perf_counter()
    form = build_formulation(formulation, inst)
    res = cutting_plane_solve(form.problem, default_separators(form, with_triangle, max_cuts), round_cap)
    if res.solution.status is not LpStatus.OPTIMAL:
        raise ContractError(f"relaxation ended with status {res.solution.status.value}")
    if optimum is None:
        from .solver import enumerate_exact

        optimum = enumerate_exact(inst).value
    lb = res.solution.objective
    return RelaxResult(
        formulation,
        lb,
        optimum,
        gap_percent(optimum, lb),
        res.counts(),
        res.rounds,
        res.solution.iterations,
        time.perf_counter() - start,
    )
