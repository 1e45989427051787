"""Fundamental solutions, Green's function and solutions of x' = Ax + f.

``exp_blocks`` and ``green_blocks`` evaluate ``exp+-_t(A)`` and
``G(t) = g_t(A)`` block by block.  The default ``convolution`` route uses
dense exponentials for the diagonal blocks and nested time convolutions for
the chain terms; ``contour_chain`` and ``oracle`` are independent
cross-checks.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import expm

from .blockmat import BlockLowerTriangular, assemble, causal_spectrum
from .chaincalc import block_function, enumerate_chains
from .divdiff import PiecewiseExpKernel
from .errors import SpectrumOnAxisError, UndefinedAtZeroError
from .quadrature import (
    PANEL_BUDGET,
    PanelGrid,
    SplitKernel,
    chain_table,
    convolution_grid,
    truncation_length,
)

GAP_TOL = 1e-8
ROUTE_NAMES = {"convolution": "convolution", "contour": "contour_chain", "contour_chain": "contour_chain", "oracle": "oracle"}
_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing nonzero sample times."""

    points: tuple[float, ...]

    def __post_init__(self):
        pts = tuple(float(p) for p in np.atleast_1d(self.points))
        if not pts:
            raise ValueError("time grid is empty")
        if any(p == 0 for p in pts):
            raise UndefinedAtZeroError("time grid containing t=0")
        if any(b <= a for a, b in zip(pts, pts[1:])):
            raise ValueError("time grid must be strictly increasing")
        object.__setattr__(self, "points", pts)

    @classmethod
    def from_spec(cls, spec: str) -> "TimeGrid":
        """Parse ``start:stop:count``; an exact zero sample is dropped."""
        try:
            start, stop, count = spec.split(":")
            pts = np.linspace(float(start), float(stop), int(count))
        except ValueError:
            raise ValueError(f"grid spec {spec!r} must look like start:stop:count") from None
        return cls(tuple(p for p in pts if p != 0))

    @classmethod
    def around(cls, t: float, h: float, half_width: int) -> "TimeGrid":
        return cls(tuple(t + h * np.arange(-half_width, half_width + 1)))

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.points, dtype=dtype)

    def __len__(self):
        return len(self.points)


def _as_times(grid) -> np.ndarray:
    return np.asarray(grid.points if isinstance(grid, TimeGrid) else TimeGrid(tuple(grid)).points)


@dataclass(frozen=True)
class GreenSample:
    t: float
    matrix: BlockLowerTriangular
    kind: str
    route: str
    est_error: float


@dataclass(frozen=True)
class ForcingFunction:
    """Forcing term ``t -> f(t)`` with values in ``C^dim``.

    ``evaluator`` may accept an array of times and return shape
    ``(len(t), dim)``; scalar-only evaluators are called point by point.
    ``bound`` is a sup-norm estimate; ``decay`` an optional exponential
    rate of the tails.
    """

    evaluator: Callable
    dim: int
    bound: float | None = None
    decay: float | None = None

    @classmethod
    def constant(cls, vec) -> "ForcingFunction":
        v = np.asarray(vec, dtype=complex).ravel()
        return cls(lambda t: np.broadcast_to(v, np.shape(t) + v.shape), len(v), float(np.linalg.norm(v)))

    @classmethod
    def zero(cls, dim: int) -> "ForcingFunction":
        return cls.constant(np.zeros(dim))

    def values(self, ts) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        flat = ts.ravel()
        try:
            out = np.asarray(self.evaluator(flat), dtype=complex)
            if out.shape == (len(flat), self.dim):
                return out.reshape(ts.shape + (self.dim,))
        except (TypeError, ValueError):
            pass
        out = np.array([np.asarray(self.evaluator(s), dtype=complex).reshape(self.dim) for s in flat])
        return out.reshape(ts.shape + (self.dim,))


@dataclass(frozen=True)
class SolutionSamples:
    t: np.ndarray
    x: np.ndarray
    route: str
    bound: float | None = None
    truncation: float | None = None


def _route(route: str) -> str:
    try:
        return ROUTE_NAMES[route]
    except KeyError:
        raise ValueError(f"unknown route {route!r}; expected one of {sorted(ROUTE_NAMES)}") from None


def check_gap(A: BlockLowerTriangular, gap_tol: float = GAP_TOL) -> float:
    gap = causal_spectrum(A).gap_to_imaginary_axis
    if gap < gap_tol:
        raise SpectrumOnAxisError(gap, gap_tol)
    return gap


def _sample(A, kernel, kind, route, nodes, tol) -> GreenSample:
    route = _route(route)
    res = block_function(A, kernel, route=route, nodes=nodes, tol=tol)
    F = res.matrix
    norm = np.linalg.norm(assemble(F))
    if route == "contour_chain":
        coarse = block_function(A, kernel, route=route, nodes=max(nodes // 2, 4))
        est = float(np.linalg.norm(assemble(F) - assemble(coarse.matrix)))
    elif route == "convolution":
        est = float((tol if kernel.kind == "g" else 0.0) * max(1.0, norm) + 100 * _EPS * max(1.0, norm))
    else:
        V = np.linalg.eig(assemble(A))[1]
        est = float(_EPS * np.linalg.cond(V) * max(1.0, norm))
    return GreenSample(kernel.t, F, kind, route, est)


def exp_blocks(A: BlockLowerTriangular, t: float, sign: str = "+", route: str = "convolution", nodes: int = 64, tol: float = 1e-10) -> GreenSample:
    """``exp+_t(A)`` (``sign='+'``) or ``exp-_t(A)`` (``sign='-'``)."""
    if t == 0:
        raise UndefinedAtZeroError("exp+/exp-")
    if sign not in ("+", "-"):
        raise ValueError(f"sign must be '+' or '-', got {sign!r}")
    kind = "exp" + sign
    return _sample(A, PiecewiseExpKernel(kind, t), kind, route, nodes, tol)


def green_blocks(A: BlockLowerTriangular, t: float, route: str = "convolution", nodes: int = 64, tol: float = 1e-10, gap_tol: float = GAP_TOL) -> GreenSample:
    """Green's function ``G(t) = g_t(A)`` of the bounded-solutions problem.

    Raises
    ------
    SpectrumOnAxisError
        If some diagonal-block eigenvalue is within ``gap_tol`` of the
        imaginary axis.
    """
    if t == 0:
        raise UndefinedAtZeroError("Green's function")
    check_gap(A, gap_tol)
    return _sample(A, PiecewiseExpKernel("g", t), "green", route, nodes, tol)


# -- tabulation on panel grids --------------------------------------------


def kernel_table(A: BlockLowerTriangular, kind: str, grid: PanelGrid, route: str = "convolution") -> np.ndarray:
    """``kernel(s, A)`` at every node of ``grid``, shape ``(P, q, N, N)``."""
    part = A.partition
    N = part.total
    if route == "oracle":
        M = assemble(A)
        s = grid.nodes
        out = np.zeros(s.shape + (N, N), dtype=complex)
        if kind == "exp+":
            pos = s > 0
            out[pos] = expm(s[pos][:, None, None] * M)
        elif kind == "exp-":
            neg = s < 0
            out[neg] = -expm(s[neg][:, None, None] * M)
        else:
            k = SplitKernel.for_kind("g", M)
            out[:] = k.table(grid)
        return out
    if route != "convolution":
        raise ValueError("tabulation supports the 'convolution' and 'oracle' routes")
    kerns = {i: SplitKernel.for_kind(kind, A.diag(i)) for i in range(1, A.k + 1)}
    out = np.zeros((grid.panels, grid.order, N, N), dtype=complex)
    for i in range(1, A.k + 1):
        for j in range(1, i + 1):
            acc = out[:, :, part.slice(i), part.slice(j)]
            for chain in enumerate_chains(i, j, A):
                seq = [kerns[c] for c in chain.indices]
                H, _ = chain_table(seq, [A.block(a, b) for a, b in chain.links], grid)
                acc += H
    return out


def _rate(A: BlockLowerTriangular) -> float:
    return max(max(np.linalg.norm(A.diag(i), 2) for i in range(1, A.k + 1)), 0.25)


def solve_ivp(A: BlockLowerTriangular, f: ForcingFunction, grid, route: str = "convolution") -> SolutionSamples:
    """Solution of ``x' = Ax + f``, ``x(0) = 0`` on one side of zero.

    For a positive grid ``x(t) = int_0^t exp+_s(A) f(t - s) ds``; for a
    negative grid ``x(t) = int_t^0 exp-_s(A) f(t - s) ds``.
    """
    ts = _as_times(grid)
    if np.all(ts > 0):
        kind = "exp+"
    elif np.all(ts < 0):
        kind = "exp-"
    else:
        raise ValueError("solve_ivp needs a grid entirely on one side of t=0")
    if f.dim != A.partition.total:
        raise ValueError(f"forcing dimension {f.dim} != matrix dimension {A.partition.total}")
    pg = PanelGrid.build([0.0, *ts], PANEL_BUDGET / _rate(A))
    E = kernel_table(A, kind, pg, route)
    s, w = pg.nodes, pg.weights
    x = np.zeros((len(ts), f.dim), dtype=complex)
    for n, t in enumerate(ts):
        inside = (pg.b <= t) if t > 0 else (pg.a >= t)
        ss, ww, EE = s[inside], w[inside], E[inside]
        fv = f.values(t - ss)
        x[n] = np.einsum("pq,pqij,pqj->i", ww, EE, fv)
    return SolutionSamples(ts, x, route)


def solve_bounded(A: BlockLowerTriangular, f: ForcingFunction, grid, route: str = "convolution", tol: float = 1e-10, gap_tol: float = GAP_TOL) -> SolutionSamples:
    """Bounded solution ``x(t) = int G(s) f(t - s) ds`` of ``x' = Ax + f``.

    The convolution is truncated to ``|s| <= T`` with ``T`` chosen from the
    spectral gap; the reported ``bound`` is ``(int ||G||) * sup ||f||`` and
    ``truncation`` estimates the neglected tail.  A warning is issued when
    the tail estimate exceeds ``tol``.
    """
    ts = _as_times(grid)
    if f.dim != A.partition.total:
        raise ValueError(f"forcing dimension {f.dim} != matrix dimension {A.partition.total}")
    gap = check_gap(A, gap_tol)
    kerns = [SplitKernel.for_kind("g", A.diag(i)) for i in range(1, A.k + 1)]
    pg = convolution_grid(kerns, 0.0, tol=tol, gap=gap)
    pg = PanelGrid.build(pg.bounds, PANEL_BUDGET / _rate(A))
    G = kernel_table(A, "g", pg, route)
    s, w = pg.nodes, pg.weights
    Gnorm = np.linalg.norm(G, ord=2, axis=(-2, -1))
    fsup = f.bound
    x = np.zeros((len(ts), f.dim), dtype=complex)
    for n, t in enumerate(ts):
        fv = f.values(t - s)
        x[n] = np.einsum("pq,pqij,pqj->i", w, G, fv)
        if f.bound is None:
            fsup = max(fsup or 0.0, float(np.max(np.linalg.norm(fv, axis=-1))))
    fsup = fsup or 0.0
    integral = float(np.sum(w * Gnorm))
    # only ends that were cut off carry a tail; an end at s=0 is exact
    edge = max(
        Gnorm[0, 0] if pg.bounds[0] < 0 else 0.0,
        Gnorm[-1, -1] if pg.bounds[-1] > 0 else 0.0,
    )
    truncation = float(edge * 2.0 / gap * fsup)
    if truncation > tol * max(1.0, integral * fsup):
        warnings.warn(
            f"truncated Green convolution may be inaccurate: tail estimate {truncation:.2e}",
            RuntimeWarning,
            stacklevel=2,
        )
    return SolutionSamples(ts, x, route, bound=integral * fsup, truncation=truncation)


def verify_residual(A: BlockLowerTriangular, x, f: ForcingFunction, grid) -> float:
    """Max over interior samples of ``||(x(t+h) - x(t-h)) / 2h - A x(t) - f(t)||``."""
    ts = _as_times(grid)
    x = np.asarray(x.x if isinstance(x, SolutionSamples) else x, dtype=complex)
    if len(ts) < 3:
        raise ValueError("residual check needs at least three samples")
    M = assemble(A)
    dx = (x[2:] - x[:-2]) / (ts[2:] - ts[:-2])[:, None]
    res = dx - x[1:-1] @ M.T - f.values(ts[1:-1])
    return float(np.max(np.linalg.norm(res, axis=1)))
