"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Tolerances and runtime budgets are the contractual ones; nothing here is
loosened to make a criterion pass.
"""

import math
import os
import subprocess
import sys
import time

import numpy as np
import pytest
from scipy.linalg import expm

from greenblocks import (
    BlockLowerTriangular,
    ForcingFunction,
    PiecewiseExpKernel,
    SpectrumOnAxisError,
    TimeGrid,
    assemble,
    block_function,
    causal_inverse,
    causal_spectrum,
    dd_contour,
    dd_distinct,
    dd_exp_conv,
    dd_recurrence,
    green_blocks,
    laplace_check,
    save_matrix,
    solve_bounded,
    verify_residual,
)
from greenblocks.chaincalc import Chain, op_dd_contour, op_dd_convolution
from greenblocks.generate import random_block_triangular, random_invertible_triangular

E = math.e


@pytest.fixture
def report(capsys):
    def emit(name, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        assert ok, f"{name}: {detail}"

    return emit


def rel(X, Y):
    den = np.linalg.norm(Y)
    return float(np.linalg.norm(np.asarray(X) - np.asarray(Y)) / (den if den > 0 else 1.0))


def test_causal_inverse_correctness(report):
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(50):
        k = int(rng.integers(2, 5))
        sizes = [int(s) for s in rng.integers(1, 5, size=k)]
        T = random_invertible_triangular(rng, sizes, max_cond=100.0)
        n = sum(sizes)
        worst = max(worst, np.linalg.norm(assemble(causal_inverse(T)) @ assemble(T) - np.eye(n)))
    elapsed = time.perf_counter() - start
    report(
        "causal inverse on 50 instances",
        worst <= 1e-8 and elapsed < 5.0,
        f"max Frobenius error {worst:.2e} (tol 1e-8), {elapsed:.2f}s (budget 5s)",
    )


def test_block_function_matches_dense(report):
    rng = np.random.default_rng(202)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(30):
        k = int(rng.integers(2, 5))
        sizes = [int(s) for s in rng.integers(1, 4, size=k)]
        A = random_block_triangular(rng, sizes, separation=0.3)
        M = assemble(A)
        n = M.shape[0]
        cases = [
            (lambda z: np.exp(0.5 * z), expm(0.5 * M)),
            (np.exp, expm(M)),
            (lambda z: z**2, M @ M),
            (lambda z: z**3, M @ M @ M),
            (lambda z: 1.0 / (3.0 - z), np.linalg.inv(3.0 * np.eye(n) - M)),
        ]
        for f, ref in cases:
            got = assemble(block_function(A, f, route="contour_chain").matrix)
            # re-partition the dense reference to compare lower blocks only
            ref_lower = assemble(BlockLowerTriangular.from_dense(ref, A.partition, drop_zero=False))
            worst = max(worst, rel(got, ref_lower), rel(ref_lower, ref))
    elapsed = time.perf_counter() - start
    report(
        "contour chain sums vs dense f(A) on 30 instances",
        worst <= 1e-7 and elapsed < 30.0,
        f"max relative error {worst:.2e} (tol 1e-7), {elapsed:.2f}s (budget 30s)",
    )


def _point_set(rng, order, kind):
    pts = []
    for _ in range(order + 1):
        if pts and rng.uniform() < 0.25:
            pts.append(pts[int(rng.integers(len(pts)))])
            continue
        z = complex(rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5))
        if kind == "g" and abs(z.real) < 0.25:
            z = complex(math.copysign(0.25 + abs(z.real), z.real or 1.0), z.imag)
        pts.append(z)
    return pts


def test_divided_difference_methods_agree(report):
    rng = np.random.default_rng(303)
    start = time.perf_counter()
    worst_pair, worst_sym = 0.0, 0.0
    for _ in range(200):
        order = int(rng.integers(1, 5))
        kind = ["exp+", "exp-", "g"][int(rng.integers(3))]
        mag = rng.uniform(0.3, 2.0)
        t = {"exp+": mag, "exp-": -mag, "g": mag * rng.choice([-1.0, 1.0])}[kind]
        pts = _point_set(rng, order, kind)
        f = PiecewiseExpKernel(kind, t)
        methods = {
            "recurrence": lambda p: complex(dd_recurrence(f, p)),
            "contour": lambda p: complex(dd_contour(f, p)),
            "convolution": lambda p: complex(dd_exp_conv(kind, t, p)),
        }
        if len(set(pts)) == len(pts):
            methods["distinct"] = lambda p: complex(dd_distinct(f, p))
        perm = [pts[i] for i in rng.permutation(len(pts))]
        vals = {}
        for name, fn in methods.items():
            v, w = fn(pts), fn(perm)
            vals[name] = v
            worst_sym = max(worst_sym, abs(v - w) / max(1.0, abs(v)))
        vs = list(vals.values())
        scale = max(1.0, max(abs(v) for v in vs))
        for a in range(len(vs)):
            for b in range(a + 1, len(vs)):
                worst_pair = max(worst_pair, abs(vs[a] - vs[b]) / scale)
    elapsed = time.perf_counter() - start
    report(
        "divided differences on 200 point sets",
        worst_pair <= 1e-8 and worst_sym <= 1e-12 and elapsed < 10.0,
        f"pairwise {worst_pair:.2e} (tol 1e-8), symmetry {worst_sym:.2e} (tol 1e-12), "
        f"{elapsed:.2f}s (budget 10s)",
    )


LAM0 = [-1 + 0.5j, -2.0, 0.7 - 1j, 1.5 + 2j, -0.6 - 0.4j]
OFFSETS = [0.3, 1 + 1j, 0.5 - 2j, 2.0, 0.1 + 0.3j]
FRACTIONS = [-0.8, -0.4, 0.0, 0.4, 0.8]
IMAG = [0.0, 1.0, -2.5, 0.3, 4.0]


def test_laplace_identities(report):
    start = time.perf_counter()
    worst = {}
    for kind in ("exp+", "exp-", "g"):
        err = 0.0
        for lam0 in LAM0:
            for col in range(5):
                if kind == "exp+":
                    lam = lam0 + OFFSETS[col]
                elif kind == "exp-":
                    lam = lam0 - OFFSETS[col]
                else:
                    lam = complex(FRACTIONS[col] * lam0.real, IMAG[col])
                err = max(err, abs(laplace_check(kind, lam0, lam) - 1 / (lam - lam0)))
        worst[kind] = err
    elapsed = time.perf_counter() - start
    ok = max(worst.values()) <= 1e-8 and elapsed < 5.0
    detail = ", ".join(f"{k} {v:.2e}" for k, v in worst.items())
    report("Laplace transforms on 5x5 grids", ok, f"{detail} (tol 1e-8), {elapsed:.2f}s (budget 5s)")


def test_closed_form_anchors(report):
    A0 = BlockLowerTriangular.from_blocks([1, 1], {(1, 1): [[0.0]], (2, 1): [[1.0]], (2, 2): [[1.0]]})
    A1 = BlockLowerTriangular.from_blocks([1, 1], {(1, 1): [[-1.0]], (2, 1): [[1.0]], (2, 2): [[1.0]]})
    exp_err, green_err = 0.0, 0.0
    for route in ("contour_chain", "convolution", "oracle"):
        F = block_function(A0, PiecewiseExpKernel("exp+", 1.0), route=route).matrix
        exp_err = max(exp_err, abs(F.block(2, 1)[0, 0] - (E - 1)))
        G = block_function(A1, PiecewiseExpKernel("g", 1.0), route=route).matrix
        green_err = max(green_err, abs(G.block(2, 1)[0, 0] + 1 / (2 * E)))
    # scalar divided-difference routes of the same anchors
    for method in (dd_recurrence, dd_distinct, dd_contour):
        exp_err = max(exp_err, abs(complex(method(PiecewiseExpKernel("exp+", 1.0), [0, 1])) - (E - 1)))
        green_err = max(green_err, abs(complex(method(PiecewiseExpKernel("g", 1.0), [1, -1])) + 1 / (2 * E)))
    exp_err = max(exp_err, abs(complex(dd_exp_conv("exp+", 1.0, [0, 1])) - (E - 1)))
    green_err = max(green_err, abs(complex(dd_exp_conv("g", 1.0, [1, -1])) + 1 / (2 * E)))
    report(
        "closed-form anchors by every route",
        exp_err <= 1e-10 and green_err <= 1e-9,
        f"exp+ e-1 error {exp_err:.2e} (tol 1e-10), Green -1/(2e) error {green_err:.2e} (tol 1e-9)",
    )


def _three_block_instances():
    rng = np.random.default_rng(606)
    out = []
    for sizes in ([1, 1, 1], [2, 2, 2], [2, 1, 3], [3, 2, 1], [2, 2, 2], [1, 3, 2]):
        out.append(random_block_triangular(rng, sizes, axis_gap=0.3))
    return out


def test_three_block_route_agreement(report):
    start = time.perf_counter()
    worst, worst_terms = 0.0, 0.0
    for A in _three_block_instances():
        assert A.has(3, 1) and A.has(3, 2) and A.has(2, 1)
        for t in (-2.0, -1.0, -0.5, 0.5, 1.0, 2.0):
            kinds = ["exp+" if t > 0 else "exp-", "g"]
            for kind in kinds:
                k = PiecewiseExpKernel(kind, t)
                vals = [assemble(block_function(A, k, route=r).matrix) for r in ("convolution", "contour_chain", "oracle")]
                worst = max(worst, rel(vals[0], vals[2]), rel(vals[1], vals[2]), rel(vals[0], vals[1]))
                # block (3,1) splits into the chains (3,1) and (3,2,1)
                for chain in (Chain((3, 1)), Chain((3, 2, 1))):
                    a = op_dd_convolution(A, k, chain)
                    b = op_dd_contour(A, k, chain)
                    worst_terms = max(worst_terms, float(np.linalg.norm(a - b)) / max(1.0, float(np.linalg.norm(b))))
    elapsed = time.perf_counter() - start
    report(
        "three-block route agreement at t in {+-0.5, +-1, +-2}",
        worst <= 1e-7 and worst_terms <= 1e-7 and elapsed < 60.0,
        f"routes {worst:.2e}, chain terms {worst_terms:.2e} (tol 1e-7), {elapsed:.2f}s (budget 60s)",
    )


def test_bounded_solution_contract(report):
    rng = np.random.default_rng(707)
    start = time.perf_counter()
    worst_res, worst_sol = 0.0, 0.0
    h = 1e-3
    for sizes in ([1, 1], [2, 1], [2, 2, 1], [1, 2, 2]):
        A = random_block_triangular(rng, sizes, axis_gap=0.3)
        n = sum(sizes)
        v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        f = ForcingFunction.constant(v)
        grid = TimeGrid.around(0.7, h, 2)
        sol = solve_bounded(A, f, grid)
        exact = -np.linalg.solve(assemble(A), v)
        worst_res = max(worst_res, verify_residual(A, sol, f, grid))
        worst_sol = max(worst_sol, float(np.max(np.linalg.norm(sol.x - exact, axis=1))))
    axis = BlockLowerTriangular.from_blocks([1, 1], {(1, 1): [[0.5j]], (2, 1): [[1.0]], (2, 2): [[-1.0]]})
    try:
        solve_bounded(axis, ForcingFunction.constant([1.0, 1.0]), TimeGrid((1.0,)))
        rejected = False
    except SpectrumOnAxisError as exc:
        rejected = "imaginary axis" in str(exc)
    elapsed = time.perf_counter() - start
    report(
        "bounded solutions with constant forcing",
        worst_res <= 1e-4 and rejected and elapsed < 10.0,
        f"residual {worst_res:.2e} (tol 1e-4, h=1e-3), distance to -A^-1 f {worst_sol:.2e}, "
        f"axis control rejected={rejected}, {elapsed:.2f}s (budget 10s)",
    )


def test_green_decay_and_jump(report):
    rng = np.random.default_rng(808)
    start = time.perf_counter()
    worst_ratio, worst_jump = 0.0, 0.0
    for sizes in ([1, 1, 1], [2, 1, 2], [2, 2]):
        A = random_block_triangular(rng, sizes, axis_gap=0.3)
        n = sum(sizes)
        gap = causal_spectrum(A).gap_to_imaginary_axis
        for t in (2.0, 4.0):
            for sign in (1.0, -1.0):
                g1 = np.linalg.norm(assemble(green_blocks(A, sign * t).matrix), 2)
                g2 = np.linalg.norm(assemble(green_blocks(A, sign * 2 * t).matrix), 2)
                if g1 > 0:
                    worst_ratio = max(worst_ratio, (g2 / g1) / (math.exp(-(gap / 2) * t) * 1.5))
        eps = 1e-3
        jump = assemble(green_blocks(A, eps).matrix) - assemble(green_blocks(A, -eps).matrix)
        worst_jump = max(worst_jump, float(np.linalg.norm(jump - np.eye(n))))
    elapsed = time.perf_counter() - start
    report(
        "Green's function decay and unit jump",
        worst_ratio <= 1.0 and worst_jump <= 1e-2 and elapsed < 10.0,
        f"max ratio / bound {worst_ratio:.3f} (must be <= 1), jump error {worst_jump:.2e} (tol 1e-2), "
        f"{elapsed:.2f}s (budget 10s)",
    )


def test_verify_reports_are_deterministic(report, tmp_path):
    A = random_block_triangular(np.random.default_rng(909), [2, 1, 2], axis_gap=0.3)
    path = tmp_path / "m.json"
    save_matrix(A, path)
    outputs = []
    for name in ("a.txt", "b.txt"):
        target = tmp_path / name
        proc = subprocess.run(
            [sys.executable, "-m", "greenblocks", "verify", "--input", str(path), "--output", str(target)],
            capture_output=True, text=True, env=dict(os.environ),
        )
        outputs.append((proc.returncode, target.read_bytes()))
    same = outputs[0][1] == outputs[1][1]
    report(
        "repeated verify runs",
        same and outputs[0][0] == 0,
        f"byte-identical={same}, exit status {outputs[0][0]}",
    )
