"""Problem instances for single-machine scheduling around a common due date.

An instance holds integer processing times ``p``, earliness penalties
``alpha``, tardiness penalties ``beta`` and a due date ``d``.  Tasks are
indexed from 0 everywhere in the library.

Benchmark files follow the OR-Library ``sch*.txt`` layout: a header with
the number of instances, then for every instance its task count followed
by one ``p alpha beta`` triple per task.
"""

from __future__ import annotations

import enum
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable, Sequence


class BenchmarkFormatError(ValueError):
    """Raised when a benchmark stream cannot be parsed."""


class ContractError(ValueError):
    """Raised when an operation is called outside its precondition."""


class InstanceClass(enum.Enum):
    UNRESTRICTIVE = "Unrestrictive"
    GENERAL = "General"


@dataclass(frozen=True)
class RawInstance:
    """Processing data of a benchmark entry, before a due date is chosen."""

    p: tuple[int, ...]
    alpha: tuple[int, ...]
    beta: tuple[int, ...]

    @property
    def n(self) -> int:
        return len(self.p)

    def truncate(self, k: int) -> RawInstance:
        """Keep only the first ``k`` tasks."""
        if not 1 <= k <= self.n:
            raise ContractError(f"cannot keep {k} tasks out of {self.n}")
        return RawInstance(self.p[:k], self.alpha[:k], self.beta[:k])


@dataclass(frozen=True)
class Instance:
    p: tuple[int, ...]
    alpha: tuple[int, ...]
    beta: tuple[int, ...]
    d: int
    meta: dict[str, Any] = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self) -> None:
        for name in ("p", "alpha", "beta"):
            values = getattr(self, name)
            if not isinstance(values, tuple):
                object.__setattr__(self, name, tuple(values))
        n = len(self.p)
        if n < 1:
            raise ContractError("an instance needs at least one task")
        if len(self.alpha) != n or len(self.beta) != n:
            raise ContractError("p, alpha and beta must have the same length")
        if any(int(v) != v for v in self.p + self.alpha + self.beta) or int(self.d) != self.d:
            raise ContractError("instance data must be integers")
        if min(self.p) < 1:
            raise ContractError("processing times must be >= 1")
        if min(self.alpha) < 0 or min(self.beta) < 0:
            raise ContractError("penalties must be nonnegative")
        if self.d < 0:
            raise ContractError("the due date must be nonnegative")

    @property
    def n(self) -> int:
        return len(self.p)

    @property
    def total_p(self) -> int:
        return sum(self.p)

    def to_dict(self) -> dict[str, Any]:
        return {
            "n": self.n,
            "p": list(self.p),
            "alpha": list(self.alpha),
            "beta": list(self.beta),
            "d": self.d,
            "meta": dict(self.meta),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Instance:
        inst = cls(
            tuple(data["p"]),
            tuple(data["alpha"]),
            tuple(data["beta"]),
            int(data["d"]),
            dict(data.get("meta") or {}),
        )
        if "n" in data and data["n"] != inst.n:
            raise ContractError("field n does not match the task data")
        return inst

    def subset(self, tasks: Sequence[int]) -> Instance:
        """Instance restricted to ``tasks`` (same due date)."""
        return Instance(
            tuple(self.p[j] for j in tasks),
            tuple(self.alpha[j] for j in tasks),
            tuple(self.beta[j] for j in tasks),
            self.d,
            dict(self.meta),
        )


def _tokens(content: bytes | str) -> list[str]:
    if isinstance(content, bytes):
        content = content.decode("ascii", errors="replace")
    return content.split()


def parse_benchmark(content: bytes | str, fixed_n: int | None = None) -> list[RawInstance]:
    """Parse an OR-Library common due date file.

    With ``fixed_n`` the per-instance task count lines are assumed absent and
    every instance has ``fixed_n`` tasks.
    """
    tokens = _tokens(content)
    pos = 0

    def take(what: str) -> int:
        nonlocal pos
        if pos >= len(tokens):
            raise BenchmarkFormatError(f"truncated stream: expected {what} at token {pos}")
        tok = tokens[pos]
        try:
            value = int(tok)
        except ValueError:
            raise BenchmarkFormatError(f"non-integer token {tok!r} at position {pos}") from None
        pos += 1
        return value

    count = take("instance count")
    if count <= 0:
        raise BenchmarkFormatError(f"instance count must be positive (token 0 is {count})")
    raws = []
    for _ in range(count):
        if fixed_n is None:
            start = pos
            n = take("task count")
            if n <= 0:
                raise BenchmarkFormatError(f"task count must be positive at token {start}")
        else:
            n = fixed_n
        p, alpha, beta = [], [], []
        for _ in range(n):
            start = pos
            pj, aj, bj = take("processing time"), take("earliness penalty"), take("tardiness penalty")
            if pj <= 0:
                raise BenchmarkFormatError(f"processing time must be positive at token {start}")
            if aj < 0 or bj < 0:
                raise BenchmarkFormatError(f"negative penalty near token {start}")
            p.append(pj)
            alpha.append(aj)
            beta.append(bj)
        raws.append(RawInstance(tuple(p), tuple(alpha), tuple(beta)))
    return raws


def serialize_benchmark(raws: Iterable[RawInstance]) -> str:
    raws = list(raws)
    lines = [str(len(raws))]
    for raw in raws:
        lines.append(str(raw.n))
        lines.extend(f"{p} {a} {b}" for p, a, b in zip(raw.p, raw.alpha, raw.beta))
    return "\n".join(lines) + "\n"


def parse_inline(text: str) -> RawInstance:
    """Parse the compact ``"n;p a b;p a b;..."`` syntax."""
    parts = [part.strip() for part in text.strip().strip(";").split(";")]
    try:
        n = int(parts[0])
        triples = [tuple(int(v) for v in part.split()) for part in parts[1:]]
    except (ValueError, IndexError):
        raise BenchmarkFormatError(f"malformed inline instance {text!r}") from None
    if n <= 0 or len(triples) != n or any(len(t) != 3 for t in triples):
        raise BenchmarkFormatError(f"inline instance {text!r} must list {n} triples 'p alpha beta'")
    if any(t[0] <= 0 or t[1] < 0 or t[2] < 0 for t in triples):
        raise BenchmarkFormatError(f"inline instance {text!r} has invalid values")
    p, alpha, beta = zip(*triples)
    return RawInstance(tuple(p), tuple(alpha), tuple(beta))


def _as_fraction(h: Fraction | float | int | str) -> Fraction:
    if isinstance(h, float):
        # go through the decimal text so that 0.6 means 3/5
        return Fraction(repr(h))
    return Fraction(h)


def make_instance(raw: RawInstance, h: Fraction | float | int | str, **meta: Any) -> Instance:
    """Instance with due date ``floor(h * sum(p))``."""
    hf = _as_fraction(h)
    if hf <= 0 or hf > 1:
        raise ContractError(f"h must lie in (0, 1], got {h}")
    d = math.floor(hf * sum(raw.p))
    info = {"h": str(hf) if hf.denominator != 1 else str(hf.numerator)}
    info.update(meta)
    return Instance(raw.p, raw.alpha, raw.beta, d, info)


def classify(inst: Instance) -> InstanceClass:
    return InstanceClass.UNRESTRICTIVE if inst.d >= inst.total_p else InstanceClass.GENERAL


@dataclass(frozen=True)
class Reduction:
    """Split of an unrestrictive instance into a core with positive penalties.

    ``core_tasks[k]`` is the original index of task ``k`` of ``core``.
    ``prepend`` holds the zero-earliness-penalty tasks placed before the
    core block, ``append`` the zero-tardiness-penalty tasks placed after it.
    """

    core: Instance | None
    core_tasks: tuple[int, ...]
    prepend: tuple[int, ...]
    append: tuple[int, ...]

    def recompose(self, inst: Instance, core_times: Sequence[Fraction] | None) -> list[Fraction]:
        """Completion times for ``inst`` from a d-block of the core."""
        C: list[Fraction] = [Fraction(0)] * inst.n
        if self.core_tasks:
            assert core_times is not None
            for k, j in enumerate(self.core_tasks):
                C[j] = Fraction(core_times[k])
            start = min(C[j] - inst.p[j] for j in self.core_tasks)
            end = max(C[j] for j in self.core_tasks)
        else:
            start = end = Fraction(inst.d)
        for j in reversed(self.prepend):
            C[j] = start
            start -= inst.p[j]
        for j in self.append:
            end += inst.p[j]
            C[j] = end
        return C


def reduce_unrestrictive(inst: Instance) -> Reduction:
    if classify(inst) is not InstanceClass.UNRESTRICTIVE:
        raise ContractError("reduce_unrestrictive needs an unrestrictive due date")
    append = tuple(j for j in range(inst.n) if inst.beta[j] == 0)
    prepend = tuple(j for j in range(inst.n) if inst.alpha[j] == 0 and inst.beta[j] > 0)
    core_tasks = tuple(j for j in range(inst.n) if inst.alpha[j] > 0 and inst.beta[j] > 0)
    core = inst.subset(core_tasks) if core_tasks else None
    return Reduction(core, core_tasks, prepend, append)


def random_instance(
    rng: random.Random,
    n: int,
    pmax: int = 9,
    wmax: int = 20,
    h: Fraction | float | str | None = None,
    wmin: int = 1,
) -> Instance:
    """Uniform random instance, used by tests and the ``--seed`` CLI paths."""
    raw = RawInstance(
        tuple(rng.randint(1, pmax) for _ in range(n)),
        tuple(rng.randint(wmin, wmax) for _ in range(n)),
        tuple(rng.randint(wmin, wmax) for _ in range(n)),
    )
    if h is None:
        h = rng.choice(["0.2", "0.4", "0.6", "0.8", "1"])
    return make_instance(raw, h)
