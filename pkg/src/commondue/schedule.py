"""Completion-time schedules and their earliness/tardiness encodings."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Sequence

from .instance import ContractError, Instance

Number = int | Fraction


def _frac(values: Sequence[Number]) -> tuple[Fraction, ...]:
    return tuple(Fraction(v) for v in values)


def evaluate(inst: Instance, C: Sequence[Number]) -> Fraction:
    """Total weighted earliness and tardiness of completion times ``C``."""
    d = inst.d
    total = Fraction(0)
    for j, c in enumerate(C):
        c = Fraction(c)
        if c < d:
            total += inst.alpha[j] * (d - c)
        else:
            total += inst.beta[j] * (c - d)
    return total


@dataclass(frozen=True)
class Feasibility:
    ok: bool
    kind: str | None = None  # "positivity" or "overlap"
    tasks: tuple[int, ...] = ()

    def __bool__(self) -> bool:
        return self.ok


def is_feasible(p: Sequence[int], C: Sequence[Number]) -> Feasibility:
    """Check positivity and non-overlapping; report the first violation."""
    for j, c in enumerate(C):
        if c < p[j]:
            return Feasibility(False, "positivity", (j,))
    order = sorted(range(len(C)), key=lambda j: (C[j], j))
    for prev, nxt in zip(order, order[1:]):
        if C[nxt] - p[nxt] < C[prev]:
            return Feasibility(False, "overlap", tuple(sorted((prev, nxt))))
    return Feasibility(True)


@dataclass(frozen=True)
class EtEncoding:
    e: tuple[Fraction, ...]
    t: tuple[Fraction, ...]

    def consistent(self) -> bool:
        return all(ej >= 0 and tj >= 0 and (ej == 0 or tj == 0) for ej, tj in zip(self.e, self.t))


@dataclass(frozen=True)
class F3Encoding:
    """Earliness/tardiness measured from the shifted reference ``d - a``."""

    ep: tuple[Fraction, ...]
    tp: tuple[Fraction, ...]
    a: Fraction
    b: tuple[Fraction, ...]

    def consistent(self, d: Number) -> bool:
        if not 0 <= self.a <= d:
            return False
        for ej, tj, bj in zip(self.ep, self.tp, self.b):
            if ej < 0 or tj < 0 or (ej != 0 and tj != 0) or bj not in (0, self.a):
                return False
        return True


def theta(d: Number, C: Sequence[Number]) -> EtEncoding:
    e = tuple(max(Fraction(d) - c, Fraction(0)) for c in _frac(C))
    t = tuple(max(c - Fraction(d), Fraction(0)) for c in _frac(C))
    return EtEncoding(e, t)


def theta_inv(d: Number, enc: EtEncoding) -> tuple[Fraction, ...]:
    if not enc.consistent():
        raise ContractError("inconsistent (e, t) encoding: a task is both early and tardy")
    return tuple(Fraction(d) - e + t for e, t in zip(enc.e, enc.t))


class NoTardyTaskError(ContractError):
    """The shifted encoding needs a task completing after the due date."""


def _encode_shifted(d: Number, p: Sequence[int], C: tuple[Fraction, ...], tardy: list[int]) -> F3Encoding:
    if not tardy:
        raise NoTardyTaskError(
            "no tardy task: use theta_prime_tilde (on-time anchor) or report an all-early schedule"
        )
    d = Fraction(d)
    a = d - min(C[i] - p[i] for i in tardy)
    ref = d - a
    ep = tuple(max(ref - c, Fraction(0)) for c in C)
    tp = tuple(max(c - ref, Fraction(0)) for c in C)
    tardy_set = set(tardy)
    b = tuple(Fraction(0) if j in tardy_set else a for j in range(len(C)))
    return F3Encoding(ep, tp, a, b)


def theta_prime(d: Number, p: Sequence[int], C: Sequence[Number]) -> F3Encoding:
    """Shifted encoding anchored at the first task completing after ``d``."""
    C = _frac(C)
    return _encode_shifted(d, p, C, [j for j, c in enumerate(C) if c > d])


def theta_prime_tilde(d: Number, p: Sequence[int], C: Sequence[Number]) -> F3Encoding:
    """Shifted encoding anchored at the first task completing at or after ``d``.

    Early tasks are those with ``C_j < d``; an on-time task therefore counts
    on the tardy side and anchors the reference point (``a = p`` of that task).
    """
    C = _frac(C)
    return _encode_shifted(d, p, C, [j for j, c in enumerate(C) if c >= d])


def decode_f3(d: Number, enc: F3Encoding) -> tuple[Fraction, ...]:
    return tuple(Fraction(d) - enc.a - e + t for e, t in zip(enc.ep, enc.tp))


def tighten_to_block(inst: Instance, C: Sequence[Number]) -> tuple[Fraction, ...]:
    """Remove idle time around the due date without increasing the cost.

    Early tasks are packed right against the due date (or against the
    straddling task), later tasks are packed left against it.  When no task
    is early, the whole block is pulled back so that its first task becomes
    on-time, or starts at 0 if it is longer than ``d``.  Task order is kept.
    """
    C = _frac(C)
    if not is_feasible(inst.p, C):
        raise ContractError("tighten_to_block needs a feasible schedule")
    d, p = Fraction(inst.d), inst.p
    order = sorted(range(inst.n), key=lambda j: C[j])
    straddler = next((j for j in order if C[j] - p[j] < d < C[j]), None)
    out = list(C)
    if straddler is not None:
        pos = order.index(straddler)
        before, after = order[:pos], order[pos + 1 :]
        end = C[straddler] - p[straddler]
        start = C[straddler]
    else:
        before = [j for j in order if C[j] <= d]
        after = [j for j in order if C[j] > d]
        end = start = d
        if not before:
            start = d - min(Fraction(p[after[0]]), d)
    for j in reversed(before):
        out[j] = end
        end -= p[j]
    for j in after:
        start += p[j]
        out[j] = start
    return tuple(out)


def _num(value: Fraction) -> Any:
    return value.numerator if value.denominator == 1 else f"{value.numerator}/{value.denominator}"


def schedule_to_dict(inst: Instance, C: Sequence[Number]) -> dict[str, Any]:
    C = _frac(C)
    return {"C": [_num(c) for c in C], "value": _num(evaluate(inst, C)), "feasible": is_feasible(inst.p, C).ok}
