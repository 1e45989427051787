"""Command-line front end.

Subcommands ``exp``, ``green``, ``solve-ivp``, ``solve-bounded`` and
``verify`` read a block matrix file (see :mod:`greenblocks.blockmat`) and
write CSV or JSON tables; ``generate`` writes a random test matrix seeded by
``GREENBLOCKS_SEED``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .blockmat import (
    BlockLowerTriangular,
    assemble,
    causal_inverse,
    load_matrix,
    matrix_to_dict,
)
from .errors import GreenBlocksError, SingularBlockError, SpectrumOnAxisError
from .generate import SEED_ENV, random_block_triangular, rng_from_env
from .greensolve import (
    ForcingFunction,
    TimeGrid,
    exp_blocks,
    green_blocks,
    solve_bounded,
    solve_ivp,
    verify_residual,
)

COMMANDS = ("exp", "green", "solve-ivp", "solve-bounded", "verify")
ROUTE_CHOICES = ("convolution", "contour", "oracle", "all")
MATRIX_COLUMNS = ["t", "i", "j", "row", "col", "re", "im", "route", "est_error"]
VECTOR_COLUMNS = ["t", "component", "re", "im", "route"]
VERIFY_TIMES = (0.5, 1.0, 2.0)


@dataclass
class RunConfig:
    command: str
    input: str | None = None
    times: list[float] = field(default_factory=list)
    grid: str | None = None
    sign: str = "+"
    route: str = "all"
    tol: float = 1e-7
    nodes: int = 64
    forcing: list[complex] | None = None
    output: str | None = None
    format: str = "csv"

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ValueError(f"unknown command {self.command!r}")
        if not (1e-14 <= self.tol <= 1e-2):
            raise ValueError(f"--tol must lie in [1e-14, 1e-2], got {self.tol}")
        if any(t == 0 for t in self.times):
            raise ValueError("t=0 is not allowed: the kernels are undefined there")
        if self.nodes < 4:
            raise ValueError("--nodes must be at least 4")

    def time_points(self) -> list[float]:
        if self.grid:
            return list(TimeGrid.from_spec(self.grid).points)
        return list(self.times)

    def routes(self) -> list[str]:
        return ["convolution", "contour", "oracle"] if self.route == "all" else [self.route]


def _fmt(x: float) -> str:
    # adding 0.0 folds -0.0 into 0.0
    return f"{float(x) + 0.0:.16e}"


def _matrix_rows(sample, t):
    A = sample.matrix
    part = A.partition
    for (i, j), b in A.items():
        for r in range(part.size(i)):
            for c in range(part.size(j)):
                z = b[r, c]
                yield [
                    _fmt(t), i, j, r + 1, c + 1, _fmt(z.real), _fmt(z.imag),
                    sample.route, _fmt(sample.est_error),
                ]


def _emit(rows, columns, cfg: RunConfig) -> str:
    if cfg.format == "json":
        records = []
        for row in rows:
            rec = dict(zip(columns, row))
            rec["value"] = [float(rec.pop("re")), float(rec.pop("im"))]
            for key in ("t", "est_error"):
                if key in rec:
                    rec[key] = float(rec[key])
            records.append(rec)
        return json.dumps(records, indent=1) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    writer.writerows(rows)
    return buf.getvalue()


def _write(text: str, cfg: RunConfig) -> None:
    if cfg.output:
        with open(cfg.output, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _run_matrix(cfg: RunConfig, A: BlockLowerTriangular) -> int:
    rows = []
    for t in cfg.time_points():
        for route in cfg.routes():
            if cfg.command == "exp":
                sample = exp_blocks(A, t, cfg.sign, route=route, nodes=cfg.nodes)
            else:
                sample = green_blocks(A, t, route=route, nodes=cfg.nodes)
            rows.extend(_matrix_rows(sample, t))
    _write(_emit(rows, MATRIX_COLUMNS, cfg), cfg)
    return 0


def _forcing(cfg: RunConfig, A) -> ForcingFunction:
    n = A.partition.total
    vec = cfg.forcing if cfg.forcing is not None else [1.0] * n
    if len(vec) != n:
        raise ValueError(f"--forcing needs {n} components, got {len(vec)}")
    return ForcingFunction.constant(vec)


def _run_solve(cfg: RunConfig, A: BlockLowerTriangular) -> int:
    f = _forcing(cfg, A)
    ts = cfg.time_points()
    routes = [r for r in cfg.routes() if r != "contour"]
    rows = []
    for route in routes:
        if cfg.command == "solve-ivp":
            sol = solve_ivp(A, f, ts, route=route)
        else:
            sol = solve_bounded(A, f, ts, route=route)
        for t, x in zip(sol.t, sol.x):
            for c, z in enumerate(x):
                rows.append([_fmt(t), c + 1, _fmt(z.real), _fmt(z.imag), route])
    _write(_emit(rows, VECTOR_COLUMNS, cfg), cfg)
    return 0


def _rel(X, Y) -> float:
    den = np.linalg.norm(Y)
    return float(np.linalg.norm(X - Y) / (den if den > 0 else 1.0))


def verification_report(A: BlockLowerTriangular, tol: float = 1e-7, nodes: int = 64) -> list[dict]:
    """Route-agreement and residual checks; one dict per check."""
    checks = []

    def add(name, err, limit, note=""):
        ok = err is not None and err <= limit
        checks.append({"check": name, "max_error": err, "tolerance": limit, "passed": ok, "note": note})

    n = A.partition.total
    try:
        B = causal_inverse(A)
        Bc = causal_inverse(A, method="chains")
        add("causal_inverse", float(np.linalg.norm(assemble(B) @ assemble(A) - np.eye(n))), 1e-8)
        add("inverse_chains_vs_substitution", _rel(assemble(Bc), assemble(B)), 1e-10)
    except SingularBlockError as exc:
        checks.append({"check": "causal_inverse", "max_error": None, "tolerance": 1e-8, "passed": True, "skipped": True, "note": f"skipped: {exc}"})

    for sign, times in (("+", VERIFY_TIMES), ("-", tuple(-t for t in VERIFY_TIMES))):
        worst = 0.0
        for t in times:
            vals = {r: assemble(exp_blocks(A, t, sign, route=r, nodes=nodes).matrix) for r in ("convolution", "contour", "oracle")}
            worst = max(worst, _rel(vals["convolution"], vals["oracle"]), _rel(vals["contour"], vals["oracle"]), _rel(vals["convolution"], vals["contour"]))
        add(f"exp{sign}_route_agreement", worst, tol)

    try:
        worst = 0.0
        for t in VERIFY_TIMES + tuple(-t for t in VERIFY_TIMES):
            vals = {r: assemble(green_blocks(A, t, route=r, nodes=nodes).matrix) for r in ("convolution", "contour", "oracle")}
            worst = max(worst, _rel(vals["convolution"], vals["oracle"]), _rel(vals["contour"], vals["oracle"]), _rel(vals["convolution"], vals["contour"]))
        add("green_route_agreement", worst, tol)

        eps = 1e-3
        jump = assemble(green_blocks(A, eps).matrix) - assemble(green_blocks(A, -eps).matrix)
        add("green_jump_identity", float(np.linalg.norm(jump - np.eye(n))), 1e-2)

        f = ForcingFunction.constant(np.ones(n))
        grid = TimeGrid.around(1.0, 1e-3, 5)
        sol = solve_bounded(A, f, grid)
        add("bounded_residual", verify_residual(A, sol, f, grid), 1e-4)
        exact = -np.linalg.solve(assemble(A), np.ones(n))
        add("bounded_constant_solution", float(np.max(np.linalg.norm(sol.x - exact, axis=1))), 1e-6)
    except SpectrumOnAxisError as exc:
        for name in ("green_route_agreement", "bounded_residual"):
            checks.append({"check": name, "max_error": None, "tolerance": tol, "passed": False, "note": str(exc)})
    return checks


def format_report(checks: list[dict]) -> str:
    lines = [f"{'check':36s} {'max_error':>12s} {'tolerance':>10s}  result"]
    for c in checks:
        err = "-" if c["max_error"] is None else f"{c['max_error']:.3e}"
        status = "SKIP" if c.get("skipped") else ("PASS" if c["passed"] else "FAIL")
        line = f"{c['check']:36s} {err:>12s} {c['tolerance']:>10.1e}  {status}"
        if c["note"]:
            line += f"  ({c['note']})"
        lines.append(line)
    return "\n".join(lines) + "\n"


def _run_verify(cfg: RunConfig, A: BlockLowerTriangular) -> int:
    checks = verification_report(A, tol=cfg.tol, nodes=cfg.nodes)
    if cfg.format == "json":
        text = json.dumps(checks, indent=1) + "\n"
    else:
        text = format_report(checks)
    _write(text, cfg)
    if cfg.output:
        sys.stdout.write(format_report(checks))
    failed = [c for c in checks if not c["passed"]]
    for c in failed:
        if c["note"]:
            print(f"error: {c['check']}: {c['note']}", file=sys.stderr)
    return 0 if not failed else 1


def run(cfg: RunConfig) -> int:
    A = load_matrix(cfg.input)
    if cfg.command in ("exp", "green"):
        if not cfg.time_points():
            raise ValueError("give --t or --grid")
        return _run_matrix(cfg, A)
    if cfg.command in ("solve-ivp", "solve-bounded"):
        if not cfg.time_points():
            raise ValueError("give --t or --grid")
        return _run_solve(cfg, A)
    return _run_verify(cfg, A)


def _complex_list(text: str) -> list[complex]:
    return [complex(p.strip().replace(" ", "")) for p in text.split(",")]


def _float_list(text: str) -> list[float]:
    return [float(p) for p in text.split(",")]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="greenblocks",
        description="Fundamental solutions and Green's functions for block triangular matrices.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", required=True, help="matrix file (JSON)")
    common.add_argument("--tol", type=float, default=1e-7, help="pass/fail tolerance for checks")
    common.add_argument("--nodes", type=int, default=64, help="quadrature nodes per contour circle")
    common.add_argument("--output", help="output path (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--show-config", action="store_true", help="echo the effective configuration to stderr")

    timed = argparse.ArgumentParser(add_help=False)
    timed.add_argument("--t", type=_float_list, default=[], help="comma-separated nonzero times")
    timed.add_argument("--grid", help="start:stop:count (t=0 is dropped)")
    timed.add_argument("--route", choices=ROUTE_CHOICES, default="convolution")

    p = sub.add_parser("exp", parents=[common, timed], help="evaluate exp+_t(A) or exp-_t(A)")
    p.add_argument("--sign", choices=("+", "-"), default="+")
    sub.add_parser("green", parents=[common, timed], help="evaluate the Green's function g_t(A)")
    for name, desc in (("solve-ivp", "solution with x(0)=0"), ("solve-bounded", "bounded solution on the real line")):
        p = sub.add_parser(name, parents=[common, timed], help=f"{desc} for constant forcing")
        p.add_argument("--forcing", type=_complex_list, help="constant forcing vector, comma-separated (default all ones)")
    sub.add_parser("verify", parents=[common], help="run route-agreement and residual checks")

    g = sub.add_parser("generate", help=f"write a random test matrix (seed from ${SEED_ENV})")
    g.add_argument("--sizes", type=lambda s: [int(x) for x in s.split(",")], default=[2, 2, 2])
    g.add_argument("--axis-gap", type=float, default=0.3)
    g.add_argument("--separation", type=float, default=0.3)
    g.add_argument("--bidiagonal", action="store_true")
    g.add_argument("--output", help="output path (default: stdout)")
    return parser


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    return RunConfig(
        command=ns.command,
        input=ns.input,
        times=list(getattr(ns, "t", []) or []),
        grid=getattr(ns, "grid", None),
        sign=getattr(ns, "sign", "+"),
        route=getattr(ns, "route", "all"),
        tol=ns.tol,
        nodes=ns.nodes,
        forcing=getattr(ns, "forcing", None),
        output=ns.output,
        format=ns.format,
    )


def _generate(ns) -> int:
    A = random_block_triangular(
        rng_from_env(), ns.sizes, separation=ns.separation,
        axis_gap=ns.axis_gap or None, bidiagonal=ns.bidiagonal,
    )
    text = json.dumps(matrix_to_dict(A), indent=1) + "\n"
    if ns.output:
        with open(ns.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


# values such as "-1:1:5" or "-1,2" would otherwise be taken for options
_VALUE_FLAGS = ("--t", "--grid", "--forcing")


def _attach_values(argv):
    out, it = [], iter(argv)
    for tok in it:
        if tok in _VALUE_FLAGS:
            nxt = next(it, None)
            out.append(tok if nxt is None else f"{tok}={nxt}")
        else:
            out.append(tok)
    return out


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(_attach_values(sys.argv[1:] if argv is None else list(argv)))
    try:
        if ns.command == "generate":
            return _generate(ns)
        cfg = config_from_args(ns)
        if ns.show_config:
            print(json.dumps(asdict(cfg), default=str, indent=1), file=sys.stderr)
        return run(cfg)
    except (GreenBlocksError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
