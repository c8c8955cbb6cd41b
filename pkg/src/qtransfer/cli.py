"""Command-line front end.

Every command writes an :class:`ExperimentReport` as JSON (``--report``) and,
for tabular commands, a CSV summary (``--csv``). ``--format`` picks which of
the two is echoed on standard output.

Exit codes: 0 success, 1 domain error, 2 usage error, 3 bound violation.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import (
    BoundReport,
    THEOREM_TOL,
    audit_bounds,
    bound_diagonal,
    bound_diagonal_other,
    bound_nondiagonal,
    build_saturating_diagonal,
    build_saturating_nondiagonal,
    inequality_chain,
)
from .channel import check_isometry, kraus_completeness_residual, kraus_operators, load_channel, save_channel
from .constraints import (
    KINDS,
    DiagonalNonIdeal,
    NondiagonalNonIdeal,
    TransferConstraint,
    check_constraint,
    constraint_from_dict,
    sample_satisfying_channel,
)
from .errors import BoundViolation, TransferError
from .memory import memory_table
from .optimizer import OptimizerConfig, maximize_memory, sweep
from .qcore import complex_from_json, complex_to_json
from .scenarios import (
    counterexample_document,
    make_two_state_setup,
    sample_two_state_diagonal_channels,
    search_two_state_nondiagonal_counterexample,
    verify_real_part_claim,
    verify_two_state_diagonal_theorem,
)

log = logging.getLogger("qtransfer")

EXIT_OK, EXIT_DOMAIN, EXIT_USAGE, EXIT_BOUND = 0, 1, 2, 3


@dataclass
class ExperimentReport:
    command: list
    config: dict
    results: dict
    wall_time: float = 0.0
    version: str = __version__
    inputs: dict = field(default_factory=dict)  # path -> sha256

    def to_dict(self):
        return asdict(self)


class _Run:
    """Mutable state of one command: inputs read, CSV rows produced."""

    def __init__(self, args):
        self.args = args
        self.inputs: dict[str, str] = {}
        self.table: list[dict] | None = None

    def read(self, path) -> str:
        data = Path(path).read_bytes()
        self.inputs[str(path)] = hashlib.sha256(data).hexdigest()
        return data.decode()

    def channel(self, path, validate=True):
        self.read(path)
        return load_channel(path, validate=validate)


# -- parsing helpers -----------------------------------------------------


def _floats(text: str) -> list[float]:
    """``"0.1,0.5"`` or an inclusive range ``"0.1:0.9:0.1"``."""
    if ":" in text:
        start, stop, step = (float(s) for s in text.split(":"))
        count = int(round((stop - start) / step)) + 1
        if count < 1:
            raise argparse.ArgumentTypeError(f"empty range {text!r}")
        return [round(v, 12) for v in np.linspace(start, stop, count)]
    try:
        return [float(s) for s in text.split(",") if s.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _ints(text: str) -> list[int]:
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _pair(text: str) -> tuple[int, int]:
    vals = _ints(text)
    if len(vals) != 2:
        raise argparse.ArgumentTypeError("a pair needs two comma-separated indices")
    return vals[0], vals[1]


def _matrix(run: _Run, text: str) -> np.ndarray:
    """Inline JSON or ``@path``; real entries or ``[re, im]`` pairs."""
    if text.startswith("@"):
        text = run.read(text[1:])
    arr = np.asarray(json.loads(text), dtype=float)
    return complex_from_json(arr) if arr.ndim == 3 else arr.astype(complex)


def _constraint(run: _Run, args, required=True) -> TransferConstraint | None:
    if getattr(args, "constraint_file", None):
        return constraint_from_dict(json.loads(run.read(args.constraint_file)))
    kind = getattr(args, "constraint", None)
    if kind is None:
        if required:
            raise ValueError("a constraint is required (--constraint or --constraint-file)")
        return None
    n = args.n
    if kind in ("diag-ideal",):
        return KINDS[kind](n, args.a)
    if kind == "diag-nonideal":
        eps = args.eps or []
        idx = args.indices or list(range(1, len(eps) + 1))
        if len(idx) != len(eps):
            raise ValueError("--indices and --eps must have the same length")
        return DiagonalNonIdeal(n, tuple(zip(idx, eps)))
    if kind in ("nondiag-ideal", "real-part-ideal"):
        return KINDS[kind](n, args.a, args.b)
    if kind == "nondiag-nonideal":
        if not args.eps or len(args.eps) != 1:
            raise ValueError("nondiag-nonideal needs exactly one --eps value")
        return NondiagonalNonIdeal(n, args.a, args.b, args.eps[0])
    if args.rho is None or args.chi is None:
        raise ValueError(f"{kind} needs --rho and --chi")
    rho, chi = _matrix(run, args.rho), _matrix(run, args.chi)
    if kind == "two-state-diag":
        return KINDS[kind](n, rho, chi, args.a)
    return KINDS[kind](n, rho, chi, args.a, args.b)


def _config(args) -> OptimizerConfig:
    return OptimizerConfig(
        restarts=args.restarts,
        max_iters=args.max_iters,
        penalty_initial=args.penalty_initial,
        penalty_factor=args.penalty_factor,
        penalty_stages=args.penalty_stages,
        tol=args.tol,
        seed=args.seed,
        dc=args.dc,
        warm_start=not args.no_warm_start,
        feasibility_restarts=args.feasibility_restarts,
        projection_iters=args.projection_iters,
        workers=args.workers,
    )


def _audit(ch, tc) -> list[dict]:
    return [r.to_dict() for r in audit_bounds(ch, tc)]


def _chain(ch, tc) -> dict | None:
    if isinstance(tc, NondiagonalNonIdeal) and ch.dc == 1:
        return inequality_chain(ch, tc).to_dict()
    return None


# -- commands ------------------------------------------------------------


def cmd_check(run: _Run) -> tuple[dict, int]:
    args = run.args
    ch = run.channel(args.channel, validate=False)
    iso = check_isometry(ch)
    res = {
        "n": ch.n,
        "dc": ch.dc,
        "isometry_offdiag": iso.offdiag,
        "isometry_diag": iso.diag,
        "isometry_ok": iso.ok(args.tol),
    }
    code = EXIT_OK if res["isometry_ok"] else EXIT_DOMAIN
    if res["isometry_ok"]:
        res["kraus_completeness"] = {s: kraus_completeness_residual(kraus_operators(ch, s)) for s in ("A", "B")}
    tc = _constraint(run, args, required=False)
    if tc is not None:
        cres = check_constraint(ch, tc)
        res["constraint"] = tc.to_dict()
        res["constraint_residual"] = cres
        res["constraint_ok"] = cres <= args.tol
        if res["isometry_ok"] and res["constraint_ok"]:
            res["bounds"] = _audit(ch, tc)
            res["chain"] = _chain(ch, tc)
        elif code == EXIT_OK:
            code = EXIT_DOMAIN
    if code != EXIT_OK:
        log.error("channel %s is not admissible at tolerance %.0e", args.channel, args.tol)
    return res, code


def cmd_memory(run: _Run) -> tuple[dict, int]:
    args = run.args
    ch = run.channel(args.channel)
    table = memory_table(ch)
    run.table = table.rows()
    res = table.to_dict()
    tc = _constraint(run, args, required=False)
    if tc is not None:
        res["constraint_residual"] = check_constraint(ch, tc)
        res["bounds"] = _audit(ch, tc)
    return res, EXIT_OK


def cmd_bounds(run: _Run) -> tuple[dict, int]:
    args = run.args
    rows = []
    for eps in args.grid:
        if args.kind == "diagonal":
            eb = eps if args.eps_b is None else args.eps_b
            ch = build_saturating_diagonal(args.n, eps, eb)
            tc = DiagonalNonIdeal(args.n, ((1, eps), (2, eb)))
            items = [((1, 2), bound_diagonal(eps, eb)), ((1, 3), bound_diagonal_other(eps))]
        else:
            ch = build_saturating_nondiagonal(args.n, eps)
            tc = NondiagonalNonIdeal(args.n, 1, 2, eps)
            items = [((1, 2), bound_nondiagonal(eps))]
        table = memory_table(ch)
        _audit(ch, tc)
        for pair, bound in items:
            rep = BoundReport(tc.kind, pair, bound, table.entries[pair])
            rows.append({"eps": eps, **{k: v for k, v in rep.to_dict().items() if k != "pair"}, "a": pair[0], "c": pair[1]})
    run.table = rows
    return {"kind": args.kind, "n": args.n, "rows": rows}, EXIT_OK


def cmd_sample(run: _Run) -> tuple[dict, int]:
    args = run.args
    tc = _constraint(run, args)
    rows, saved = [], []
    for i in range(args.count):
        seed = args.seed + i
        ch = sample_satisfying_channel(tc, dc=args.dc, seed=seed, tol=args.tol)
        table = memory_table(ch)
        offdiag = [v for (a, c), v in table.entries.items() if a != c]
        rows.append(
            {
                "index": i,
                "seed": seed,
                "isometry_residual": check_isometry(ch).worst,
                "constraint_residual": check_constraint(ch, tc),
                "max_offdiag_memory": max(offdiag, default=0.0),
                "max_diag_diff": max(table.diag_diff.values(), default=0.0),
            }
        )
        _audit(ch, tc)
        if args.save_channel:
            path = Path(args.save_channel)
            if args.count > 1:
                path = path.with_name(f"{path.stem}_{i}{path.suffix}")
            save_channel(ch, path)
            saved.append(str(path))
    run.table = rows
    return {"constraint": tc.to_dict(), "dc": args.dc, "channels": rows, "saved": saved}, EXIT_OK


def cmd_optimize(run: _Run) -> tuple[dict, int]:
    args = run.args
    tc = _constraint(run, args)
    cfg = _config(args)
    result = maximize_memory(tc, args.pair, cfg)
    if args.save_channel:
        save_channel(result.channel, args.save_channel)
    run.table = [t.to_dict() for t in result.trace]
    res = {"constraint": tc.to_dict(), **result.to_dict(), "chain": _chain(result.channel, tc)}
    return res, EXIT_OK


def _template(args):
    if args.constraint == "diag-nonideal":
        idx = args.indices or [1, 2]
        return lambda e: DiagonalNonIdeal(args.n, tuple((i, e) for i in idx))
    if args.constraint == "nondiag-nonideal":
        return lambda e: NondiagonalNonIdeal(args.n, args.a, args.b, e)
    raise ValueError("sweep needs a non-ideal constraint kind (diag-nonideal or nondiag-nonideal)")


def cmd_sweep(run: _Run) -> tuple[dict, int]:
    args = run.args
    result = sweep(_template(args), args.grid, args.pair, _config(args))
    run.table = [r.to_dict() for r in result.rows]
    if not result.monotone_nonincreasing:
        log.warning("achieved memory is not non-increasing in eps")
    return {"constraint": args.constraint, "n": args.n, "pair": list(args.pair), **result.to_dict()}, EXIT_OK


def cmd_two_state(run: _Run) -> tuple[dict, int]:
    args = run.args
    from .scenarios import EXAMPLE_CHI, EXAMPLE_RHO

    rho = EXAMPLE_RHO if args.rho is None else _matrix(run, args.rho)
    chi = EXAMPLE_CHI if args.chi is None else _matrix(run, args.chi)
    setup = make_two_state_setup(rho, chi)
    res = {"setup": setup.to_dict(), "diagonal": {}}
    for dc in args.sample_dc:
        chans = sample_two_state_diagonal_channels(setup, args.samples, dc, seed=args.seed)
        report = verify_two_state_diagonal_theorem(setup, chans)
        res["diagonal"][str(dc)] = {k: v for k, v in report.to_dict().items() if k != "per_channel"}
        if not report.holds:
            bad = BoundReport("two-state-diag", (1, 2), 0.0, report.max_theta_12, THEOREM_TOL)
            raise BoundViolation([bad])
    cfg = _config(args)
    result = search_two_state_nondiagonal_counterexample(setup, cfg)
    doc = counterexample_document(setup, result, cfg)
    res["counterexample"] = {k: v for k, v in doc.items() if k not in ("channel", "setup")}
    if args.golden_out:
        Path(args.golden_out).write_text(json.dumps(doc, indent=1))
    run.table = doc["memory_rows"]
    return res, EXIT_OK


def cmd_real_part(run: _Run) -> tuple[dict, int]:
    args = run.args
    report = verify_real_part_claim(args.n, args.a, args.b, args.dc, args.samples, seed=args.seed)
    if not report.holds:
        log.warning(
            "real-part claim not reproduced: diag_diff %.3e, imaginary-part memory %.3e",
            report.diag_diff,
            report.imag_memory,
        )
    return report.to_dict(), EXIT_OK


COMMANDS = {
    "check": cmd_check,
    "memory": cmd_memory,
    "bounds": cmd_bounds,
    "sample": cmd_sample,
    "optimize": cmd_optimize,
    "sweep": cmd_sweep,
    "two-state": cmd_two_state,
    "real-part": cmd_real_part,
}


# -- parser --------------------------------------------------------------


def _add_output(p, tabular=True):
    p.add_argument("--report", help="write the JSON experiment report here")
    if tabular:
        p.add_argument("--csv", help="write the CSV summary here")
    p.add_argument("--format", choices=("json", "csv") if tabular else ("json",), default="json",
                   help="what to print on standard output")


def _add_constraint(p, n_default=2):
    p.add_argument("--constraint", choices=sorted(KINDS), help="constraint kind")
    p.add_argument("--constraint-file", help="constraint as JSON {kind, params}")
    p.add_argument("--n", type=int, default=n_default, help="source dimension")
    p.add_argument("--a", type=int, default=1)
    p.add_argument("--b", type=int, default=2)
    p.add_argument("--eps", type=_floats, help="non-ideality values, comma-separated")
    p.add_argument("--indices", type=_ints, help="transferred diagonal indices for diag-nonideal")
    p.add_argument("--rho", help="2x2 state as inline JSON or @file")
    p.add_argument("--chi", help="2x2 state as inline JSON or @file")


def _add_optimizer(p):
    d = OptimizerConfig()
    p.add_argument("--dc", type=int, default=d.dc, help="ancilla dimension")
    p.add_argument("--restarts", type=int, default=d.restarts)
    p.add_argument("--max-iters", type=int, default=d.max_iters)
    p.add_argument("--penalty-initial", type=float, default=d.penalty_initial)
    p.add_argument("--penalty-factor", type=float, default=d.penalty_factor)
    p.add_argument("--penalty-stages", type=int, default=d.penalty_stages)
    p.add_argument("--tol", type=float, default=d.tol)
    p.add_argument("--seed", type=int, default=d.seed)
    p.add_argument("--no-warm-start", action="store_true")
    p.add_argument("--feasibility-restarts", type=int, default=d.feasibility_restarts)
    p.add_argument("--projection-iters", type=int, default=d.projection_iters)
    p.add_argument("--workers", type=int, default=d.workers)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qtransfer", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="isometry, Kraus and (optionally) constraint residuals of a channel file")
    p.add_argument("channel")
    p.add_argument("--tol", type=float, default=1e-10)
    _add_constraint(p)
    _add_output(p, tabular=False)

    p = sub.add_parser("memory", help="memory table of a channel file")
    p.add_argument("channel")
    _add_constraint(p)
    _add_output(p)

    p = sub.add_parser("bounds", help="closed-form bounds against the saturating constructions")
    p.add_argument("--kind", choices=("diagonal", "nondiagonal"), default="diagonal")
    p.add_argument("--grid", type=_floats, default=_floats("0.1:0.9:0.1"))
    p.add_argument("--eps-b", type=float, help="second non-ideality for the diagonal kind (default: same)")
    p.add_argument("--n", type=int, default=3)
    _add_output(p)

    p = sub.add_parser("sample", help="random channels satisfying a constraint")
    _add_constraint(p)
    p.add_argument("--dc", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--save-channel", help="channel JSON path (indexed when --count > 1)")
    _add_output(p)

    p = sub.add_parser("optimize", help="maximize one memory norm under a constraint")
    _add_constraint(p)
    p.add_argument("--pair", type=_pair, required=True)
    p.add_argument("--save-channel")
    _add_optimizer(p)
    _add_output(p)

    p = sub.add_parser("sweep", help="optimize over an eps grid")
    _add_constraint(p)
    p.add_argument("--pair", type=_pair, default=(1, 2))
    p.add_argument("--grid", type=_floats, default=_floats("0.1:0.9:0.1"))
    _add_optimizer(p)
    _add_output(p)

    p = sub.add_parser("scenario", help="scenario experiments")
    scen = p.add_subparsers(dest="scenario", required=True)
    q = scen.add_parser("two-state", help="two non-commuting source states")
    q.add_argument("--rho", help="2x2 state as inline JSON or @file (default: built-in example)")
    q.add_argument("--chi", help="2x2 state as inline JSON or @file (default: built-in example)")
    q.add_argument("--samples", type=int, default=30)
    q.add_argument("--sample-dc", type=_ints, default=[1, 2])
    q.add_argument("--golden-out", help="write the counterexample document here")
    _add_optimizer(q)
    q.set_defaults(dc=2)
    _add_output(q)
    q = scen.add_parser("real-part", help="ideal transfer of Re lam_ab only")
    q.add_argument("--n", type=int, default=2)
    q.add_argument("--a", type=int, default=1)
    q.add_argument("--b", type=int, default=2)
    q.add_argument("--dc", type=int, default=1)
    q.add_argument("--samples", type=int, default=30)
    q.add_argument("--seed", type=int, default=0)
    _add_output(q, tabular=False)
    return parser


def _csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    fields = list(dict.fromkeys(k for r in rows for k in r))
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
    return buf.getvalue()


def _effective_config(args) -> dict:
    return {k: v for k, v in vars(args).items() if k not in ("format", "report", "csv", "verbose")}


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, (complex, np.complexfloating)):
        return complex_to_json(obj)
    if isinstance(obj, (tuple, set)):
        return list(obj)
    raise TypeError(f"not serializable: {type(obj)}")


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    name = args.scenario if args.command == "scenario" else args.command
    run = _Run(args)
    t0 = time.perf_counter()
    try:
        results, code = COMMANDS[name](run)
    except BoundViolation as exc:
        print(f"BOUND VIOLATION: {exc}", file=sys.stderr)
        for r in exc.reports:
            print(json.dumps(r.to_dict(), default=_json_default), file=sys.stderr)
        if exc.channel is not None:
            print("channel tensor c[p,k,l,m]:", file=sys.stderr)
            print(np.array2string(exc.channel.c, precision=17, threshold=sys.maxsize), file=sys.stderr)
        return EXIT_BOUND
    except (TransferError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    report = ExperimentReport(
        command=[parser.prog] + argv,
        config=_effective_config(args),
        results=results,
        wall_time=time.perf_counter() - t0,
        inputs=run.inputs,
    )
    text = json.dumps(report.to_dict(), indent=1, default=_json_default)
    if args.report:
        Path(args.report).write_text(text)
    table = _csv(run.table) if run.table is not None else None
    if table is not None and getattr(args, "csv", None):
        Path(args.csv).write_text(table)
    if args.format == "csv" and table is not None:
        sys.stdout.write(table)
    else:
        sys.stdout.write(text + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
