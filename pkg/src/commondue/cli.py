"""Command-line front end: ``python -m commondue {solve,relax,separate,bench}``.

Benchmark instances are numbered from 1 on the command line, tasks are
numbered from 1 in variable names (``e_1``, ``x_1_2``) and from 0 in the
JSON schedules, which list completion times in task order.

Exit codes: 0 success, 1 a run hit a limit before proving optimality,
2 usage or input error, 3 internal invariant failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import random
import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable, Sequence

from .instance import (
    BenchmarkFormatError,
    ContractError,
    Instance,
    RawInstance,
    make_instance,
    parse_benchmark,
    parse_inline,
)
from .lp import build_formulation, relax_value
from .polytope import VarSpace
from .separation import separate, separate_triangle
from .solver import METHODS, BcConfig, SolveReport, SolverInvariantError, solve

EXIT_OK, EXIT_LIMIT, EXIT_USAGE, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


@dataclass
class Job:
    index: int  # 1-based position in the source
    h: str
    inst: Instance


# -- inputs -------------------------------------------------------------------


def _parse_h(values: Sequence[str]) -> list[str]:
    out = []
    for chunk in values:
        for tok in chunk.split(","):
            tok = tok.strip()
            if not tok:
                continue
            try:
                h = Fraction(tok)
            except (ValueError, ZeroDivisionError):
                raise UsageError(f"bad h value {tok!r}") from None
            if not 0 < h <= 1:
                raise UsageError(f"h must lie in (0, 1], got {tok}")
            out.append(tok)
    return out


def _raw_instances(args) -> list[tuple[int, RawInstance]]:
    sources = [args.inline is not None, args.file is not None, args.random is not None]
    if sum(sources) != 1:
        raise UsageError("give exactly one of --inline, --file or --random")
    if args.inline is not None:
        return [(1, parse_inline(args.inline))]
    if args.random is not None:
        rng = random.Random(args.seed)
        out = []
        for k in range(args.count):
            p = tuple(rng.randint(1, 20) for _ in range(args.random))
            a = tuple(rng.randint(1, 10) for _ in range(args.random))
            b = tuple(rng.randint(1, 15) for _ in range(args.random))
            out.append((k + 1, RawInstance(p, a, b)))
        return out
    path = Path(args.file)
    if not path.is_file():
        raise UsageError(f"no such file: {path}")
    raws = parse_benchmark(path.read_bytes(), fixed_n=args.fixed_n)
    if args.truncate:
        raws = [raw.truncate(args.truncate) for raw in raws]
    if args.all:
        return list(enumerate(raws, start=1))
    index = args.index or 1
    if not 1 <= index <= len(raws):
        raise UsageError(f"--index must lie in 1..{len(raws)}")
    return [(index, raws[index - 1])]


def _jobs(args, default_h: Sequence[str] = ("1",)) -> list[Job]:
    hs = _parse_h(args.h) if args.h else list(default_h)
    jobs = []
    for index, raw in _raw_instances(args):
        for h in hs:
            src = args.file or ("inline" if args.inline is not None else "random")
            jobs.append(Job(index, h, make_instance(raw, h, source=src, index=index)))
    return jobs


def _config(args) -> BcConfig:
    return BcConfig(
        with_triangle=getattr(args, "triangle", False),
        max_cuts=args.max_cuts,
        round_cap=args.round_cap,
        time_limit=args.time_limit,
        node_limit=args.node_limit,
    )


# -- output helpers -------------------------------------------------------------


def _fmt(v: Any) -> str:
    if v is None:
        return "-"
    if isinstance(v, float):
        return f"{v:.4g}" if abs(v) < 1e6 else f"{v:.6g}"
    return str(v)


def _table(rows: list[dict[str, Any]], fields: Sequence[str]) -> str:
    cells = [[_fmt(r.get(f)) for f in fields] for r in rows]
    widths = [max([len(f)] + [len(c[i]) for c in cells]) for i, f in enumerate(fields)]
    lines = ["  ".join(f.rjust(w) for f, w in zip(fields, widths))]
    lines += ["  ".join(c.rjust(w) for c, w in zip(row, widths)) for row in cells]
    return "\n".join(lines) + "\n"


def _csv(rows: list[dict[str, Any]], fields: Sequence[str]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(fields), lineterminator="\n", extrasaction="ignore")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: ("" if row.get(k) is None else row.get(k)) for k in fields})
    return buf.getvalue()


def _emit(fmt: str, rows: list[dict[str, Any]], fields: Sequence[str], document: Any) -> str:
    if fmt == "json":
        return json.dumps(document, indent=2, sort_keys=True) + "\n"
    if fmt == "csv":
        return _csv(rows, fields)
    return _table(rows, fields)


def _scrub(report: dict[str, Any], deterministic: bool) -> dict[str, Any]:
    if deterministic:
        report["seconds"] = None
    return report


# -- commands -------------------------------------------------------------------

SOLVE_FIELDS = ("index", "n", "h", "d", "method", "value", "optimal", "lower_bound", "gap", "nodes", "lp_iterations", "seconds")


def cmd_solve(args) -> tuple[int, str]:
    cfg = _config(args)
    records, rows = [], []
    code = EXIT_OK
    for job in _jobs(args):
        report = solve(job.inst, args.method, cfg)
        if not report.optimal:
            code = EXIT_LIMIT
        rep = _scrub(report.to_dict(job.inst), args.deterministic)
        records.append({"index": job.index, "h": job.h, "instance": job.inst.to_dict(), "report": rep})
        rows.append({"index": job.index, "n": job.inst.n, "h": job.h, "d": job.inst.d, **{k: rep[k] for k in rep if k != "schedule"}})
    return code, _emit(args.format, rows, SOLVE_FIELDS, {"runs": records})


RELAX_FIELDS = ("index", "n", "h", "formulation", "triangle", "lower_bound", "optimum", "gap", "cuts", "rounds", "seconds")
GROUP_FIELDS = ("n", "h", "formulation", "triangle", "count", "avg_gap", "avg_seconds")


def _group_key(row):
    return (row["n"], row["h"])


def cmd_relax(args) -> tuple[int, str]:
    rows = []
    for job in _jobs(args):
        res = relax_value(args.formulation, job.inst, args.triangle, None, args.max_cuts, args.round_cap)
        rows.append(
            {
                "index": job.index,
                "n": job.inst.n,
                "h": job.h,
                "formulation": res.formulation,
                "triangle": args.triangle,
                "lower_bound": res.lower_bound,
                "optimum": res.optimum,
                "gap": None if res.gap is None else round(res.gap, 4),
                "cuts": sum(res.cuts.values()),
                "rounds": res.rounds,
                "seconds": None if args.deterministic else round(res.seconds, 6),
            }
        )
    groups: dict[tuple, list] = {}
    for row in rows:
        groups.setdefault(_group_key(row), []).append(row)
    summary = []
    for (n, h), members in groups.items():
        gaps = [r["gap"] for r in members if r["gap"] is not None]
        secs = [r["seconds"] for r in members if r["seconds"] is not None]
        summary.append(
            {
                "n": n,
                "h": h,
                "formulation": args.formulation,
                "triangle": args.triangle,
                "count": len(members),
                "avg_gap": round(sum(gaps) / len(gaps), 2) if gaps else None,
                "avg_seconds": round(sum(secs) / len(secs), 4) if secs else None,
            }
        )
    if args.format == "json":
        return EXIT_OK, _emit("json", rows, RELAX_FIELDS, {"runs": rows, "groups": summary})
    if args.format == "csv":
        return EXIT_OK, _csv(rows, RELAX_FIELDS)
    return EXIT_OK, _table(rows, RELAX_FIELDS) + "\n" + _table(summary, GROUP_FIELDS)


def _load_point(path: str, space: VarSpace) -> list[float]:
    try:
        data = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise UsageError(f"no such file: {path}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"malformed point file: {exc}") from None
    values = data.get("values", data) if isinstance(data, dict) else data
    if isinstance(values, list):
        if len(values) != space.size or not all(isinstance(v, (int, float)) for v in values):
            raise UsageError(f"point must list {space.size} numbers")
        return [float(v) for v in values]
    if not isinstance(values, dict):
        raise UsageError("point must be a JSON object of variable values or a list")
    names = {name: k for k, name in enumerate(space.names)}
    point = [0.0] * space.size
    for name, v in values.items():
        if name not in names:
            raise UsageError(f"unknown variable {name!r}; expected names like {space.names[0]}")
        if not isinstance(v, (int, float)):
            raise UsageError(f"value of {name} is not a number")
        point[names[name]] = float(v)
    return point


SEP_FIELDS = ("family", "subset", "violation", "row")


def cmd_separate(args) -> tuple[int, str]:
    jobs = _jobs(args)
    if len(jobs) != 1:
        raise UsageError("separate works on a single instance and a single h")
    inst = jobs[0].inst
    form = args.formulation
    space = build_formulation(form, inst).space if form != "F3" else VarSpace.build("F3", inst.n)
    point = _load_point(args.point, space)
    families = {"F1": ["S1", "S2"], "F3": ["S1P", "S2P"], "F2": []}[form]
    if args.family != "all":
        families = [f for f in families if f == args.family]
    cuts = []
    for fam in families:
        cuts += separate(fam, inst, point, max_cuts=args.max_cuts, space=space)
    if args.family in ("all", "TRIANGLE"):
        cuts += separate_triangle(point, space)
    rows = []
    for cut in cuts:
        body = " ".join(f"{'+' if v > 0 else '-'}{abs(v)}*{space.names[c]}" for c, v in cut.coefs)
        rows.append(
            {
                "family": cut.family,
                "subset": " ".join(str(j + 1) for j in cut.subset),
                "violation": -float(cut.slack(point)),
                "row": f"{body} {cut.sense} {cut.rhs}",
            }
        )
    if not rows and args.format == "table":
        return EXIT_OK, "no violated cuts\n"
    return EXIT_OK, _emit(args.format, rows, SEP_FIELDS, {"cuts": rows})


BENCH_FIELDS = ("n", "h", "method", "count", "#opt", "avg-T", "min-T", "max-T", "#nd", "gap")


def summarize(runs: Iterable[tuple[Job, SolveReport]], method: str) -> list[dict[str, Any]]:
    groups: dict[tuple, list] = {}
    for job, rep in runs:
        groups.setdefault((job.inst.n, job.h), []).append(rep)
    out = []
    for (n, h), reps in groups.items():
        times = [r.seconds for r in reps]
        gaps = [r.gap() or 0.0 for r in reps]
        out.append(
            {
                "n": n,
                "h": h,
                "method": method,
                "count": len(reps),
                "#opt": sum(r.optimal for r in reps),
                "avg-T": round(sum(times) / len(times), 3),
                "min-T": round(min(times), 3),
                "max-T": round(max(times), 3),
                "#nd": round(sum(r.nodes for r in reps) / len(reps), 1),
                "gap": round(sum(gaps) / len(gaps), 2),
            }
        )
    return out


def cmd_bench(args) -> tuple[int, str]:
    cfg = _config(args)
    runs = []
    code = EXIT_OK
    for job in _jobs(args, default_h=()):
        rep = solve(job.inst, args.method, cfg)
        if not rep.optimal:
            code = EXIT_LIMIT
        runs.append((job, rep))
    rows = summarize(runs, args.method)
    if args.deterministic:
        for row in rows:
            for k in ("avg-T", "min-T", "max-T"):
                row[k] = None
    return code, _emit(args.format, rows, BENCH_FIELDS, {"groups": rows})


# -- parser -----------------------------------------------------------------------


def _add_input(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("instance selection")
    g.add_argument("--inline", help='instance as "n;p a b;p a b;..."')
    g.add_argument("--file", help="OR-Library style benchmark file")
    g.add_argument("--index", type=int, help="1-based instance number in --file (default 1)")
    g.add_argument("--all", action="store_true", help="use every instance of --file")
    g.add_argument("--fixed-n", type=int, help="the file has no per-instance task count lines")
    g.add_argument("--truncate", type=int, help="keep only the first K tasks of every instance")
    g.add_argument("--random", type=int, metavar="N", help="generate random instances with N tasks")
    g.add_argument("--count", type=int, default=1, help="number of random instances")
    g.add_argument("--seed", type=int, default=0, help="seed for --random")
    g.add_argument("--h", nargs="+", help="due date factors, e.g. --h 0.2 0.4 or --h 0.2,0.4")


def _add_limits(p: argparse.ArgumentParser) -> None:
    p.add_argument("--max-cuts", type=int, default=10, help="cuts per family per round")
    p.add_argument("--round-cap", type=int, default=50, help="cutting-plane rounds per node")
    p.add_argument("--time-limit", type=float, default=600.0, help="seconds per run")
    p.add_argument("--node-limit", type=int, default=10**6)
    p.add_argument("--triangle", action="store_true", help="separate triangle inequalities")


def _add_output(p: argparse.ArgumentParser) -> None:
    p.add_argument("--format", choices=("json", "csv", "table"), default="json")
    p.add_argument("--deterministic", action="store_true", help="omit timings for byte-stable output")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="commondue", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve instances to optimality")
    _add_input(p)
    p.add_argument("--method", choices=METHODS, default="f3")
    _add_limits(p)
    _add_output(p)

    p = sub.add_parser("relax", help="LP lower bounds and gaps")
    _add_input(p)
    p.add_argument("--formulation", choices=("F1", "F2", "F3"), default="F2")
    _add_limits(p)
    _add_output(p)

    p = sub.add_parser("separate", help="list the cuts violated by a point")
    _add_input(p)
    p.add_argument("--point", required=True, help="JSON file with variable values")
    p.add_argument("--formulation", choices=("F1", "F2", "F3"), default="F1")
    p.add_argument("--family", choices=("all", "S1", "S2", "S1P", "S2P", "TRIANGLE"), default="all")
    p.add_argument("--max-cuts", type=int, default=10)
    _add_output(p)

    p = sub.add_parser("bench", help="summary table over a file and an h grid")
    _add_input(p)
    p.add_argument("--method", choices=METHODS, default="f3")
    _add_limits(p)
    _add_output(p)
    return parser


COMMANDS = {"solve": cmd_solve, "relax": cmd_relax, "separate": cmd_separate, "bench": cmd_bench}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "bench" and args.file is None and args.random is None and args.inline is None:
        parser.error("bench needs --file, --inline or --random")
    if getattr(args, "index", None) is not None and getattr(args, "all", False):
        parser.error("--index and --all are exclusive")
    try:
        code, text = COMMANDS[args.command](args)
    except (UsageError, ContractError, BenchmarkFormatError) as exc:
        print(f"commondue: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SolverInvariantError as exc:
        print(f"commondue: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    sys.stdout.write(text)
    return code


if __name__ == "__main__":
    raise SystemExit(main())
