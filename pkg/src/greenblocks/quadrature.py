"""Panel Gauss-Legendre quadrature and nested convolutions of exp-type kernels.

A kernel ``k(x) = e^{xB} P_f [x>0] - e^{xB} P_b [x<0]`` is split into a
forward part (supported on ``x > 0``) and a backward part (``x < 0``).  For
``exp+`` the forward projector is the identity, for ``exp-`` the backward
one is, and for the Green kernel they are the Riesz projectors of ``B``.

Convolutions ``(H * C k)(x) = int H(u) C k(x - u) du`` are evaluated on a
fixed panel grid: ``H`` is tabulated at the Gauss nodes, the integral up to
every node inside a panel uses a spectral cumulative-integration matrix, and
the panel boundary values are propagated left to right (forward part) or
right to left (backward part).  The result is tabulated on the same grid,
so nested convolutions cost one sweep per level.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre
from scipy.linalg import expm

DEFAULT_ORDER = 32
#: ``|rate| * panel_length`` budget; keeps per-panel growth below e^4.
PANEL_BUDGET = 4.0


@lru_cache(maxsize=None)
def gauss_rule(order: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Nodes, weights and cumulative-integration matrix on [-1, 1].

    ``S[j, k]`` integrates the ``k``-th Lagrange basis polynomial from -1 to
    node ``j``.
    """
    x, w = legendre.leggauss(order)
    V = legendre.legvander(x, order - 1)
    Vint = np.empty_like(V)
    for n in range(order):
        coef = np.zeros(order)
        coef[n] = 1.0
        Vint[:, n] = legendre.legval(x, legendre.legint(coef, lbnd=-1))
    S = Vint @ np.linalg.inv(V)
    for arr in (x, w, S):
        arr.setflags(write=False)
    return x, w, S


@dataclass(frozen=True)
class PanelGrid:
    """Composite Gauss grid whose panel boundaries include all breakpoints."""

    bounds: np.ndarray
    order: int = DEFAULT_ORDER

    @classmethod
    def build(cls, breakpoints, max_len: float, order: int = DEFAULT_ORDER) -> "PanelGrid":
        pts = np.unique(np.asarray(breakpoints, dtype=float))
        if len(pts) < 2:
            raise ValueError("panel grid needs at least two distinct breakpoints")
        edges = [pts[:1]]
        for lo, hi in zip(pts[:-1], pts[1:]):
            n = max(1, int(np.ceil((hi - lo) / max_len)))
            edges.append(np.linspace(lo, hi, n + 1)[1:])
        bounds = np.concatenate(edges)
        # snap interior copies of the breakpoints back to their exact values
        idx = np.searchsorted(bounds, pts)
        bounds[np.clip(idx, 0, len(bounds) - 1)] = pts
        bounds.setflags(write=False)
        return cls(bounds, order)

    @property
    def a(self) -> np.ndarray:
        return self.bounds[:-1]

    @property
    def b(self) -> np.ndarray:
        return self.bounds[1:]

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(self.bounds)

    @property
    def panels(self) -> int:
        return len(self.bounds) - 1

    @property
    def offsets(self) -> np.ndarray:
        """Node offsets from the panel start, shape ``(P, q)``."""
        xi, _, _ = gauss_rule(self.order)
        return 0.5 * self.lengths[:, None] * (xi[None, :] + 1.0)

    @property
    def nodes(self) -> np.ndarray:
        return self.a[:, None] + self.offsets

    @property
    def weights(self) -> np.ndarray:
        _, w, _ = gauss_rule(self.order)
        return 0.5 * self.lengths[:, None] * w[None, :]

    def index_of(self, t: float) -> int:
        i = int(np.searchsorted(self.bounds, t))
        if i >= len(self.bounds) or self.bounds[i] != t:
            raise KeyError(f"{t} is not a panel boundary")
        return i

    def length_groups(self):
        """Panels grouped by identical length: ``[(L, panel_indices), ...]``."""
        L = self.lengths
        uniq, inv = np.unique(L, return_inverse=True)
        return [(float(u), np.nonzero(inv == g)[0]) for g, u in enumerate(uniq)]


@dataclass(frozen=True)
class SplitKernel:
    """Half-line decomposition of an exp-type matrix kernel."""

    B: np.ndarray
    P_fwd: np.ndarray
    P_bwd: np.ndarray

    @property
    def n(self) -> int:
        return self.B.shape[0]

    @property
    def has_fwd(self) -> bool:
        return bool(np.any(self.P_fwd != 0))

    @property
    def has_bwd(self) -> bool:
        return bool(np.any(self.P_bwd != 0))

    @property
    def gen_fwd(self) -> np.ndarray:
        return self.B @ self.P_fwd

    @property
    def gen_bwd(self) -> np.ndarray:
        return self.B @ self.P_bwd

    @property
    def rate(self) -> float:
        return float(np.linalg.norm(self.B, 2))

    @classmethod
    def for_kind(cls, kind: str, B, split=None) -> "SplitKernel":
        B = np.atleast_2d(np.asarray(B, dtype=complex))
        n = B.shape[0]
        eye, zero = np.eye(n, dtype=complex), np.zeros((n, n), dtype=complex)
        if kind == "exp+":
            return cls(B, eye, zero)
        if kind == "exp-":
            return cls(B, zero, eye)
        if kind != "g":
            raise ValueError(f"unknown kernel kind {kind!r}")
        if split is None:
            if n == 1:
                re = B[0, 0].real
                if re == 0:
                    from .errors import SpectrumOnAxisError

                    raise SpectrumOnAxisError(0.0, 0.0)
                return cls(B, eye if re < 0 else zero, zero if re < 0 else eye)
            from .spectral import riesz_split

            split = riesz_split(B)
        return cls(B, split.projector_left, split.projector_right)

    def value(self, t: float) -> np.ndarray:
        """Kernel at a single nonzero time."""
        if t > 0:
            return expm(t * self.gen_fwd) @ self.P_fwd if self.has_fwd else np.zeros_like(self.B)
        return -(expm(t * self.gen_bwd) @ self.P_bwd) if self.has_bwd else np.zeros_like(self.B)

    def table(self, grid: PanelGrid) -> np.ndarray:
        """Kernel at every grid node, shape ``(P, q, n, n)``."""
        n = self.n
        out = np.zeros((grid.panels, grid.order, n, n), dtype=complex)
        a = grid.a
        fwd = a >= 0
        bwd = ~fwd
        for mask, active, gen, proj, sign in (
            (fwd, self.has_fwd, self.gen_fwd, self.P_fwd, 1.0),
            (bwd, self.has_bwd, self.gen_bwd, self.P_bwd, -1.0),
        ):
            if not active or not np.any(mask):
                continue
            starts = expm(a[mask][:, None, None] * gen) @ proj
            for L, idx in grid.length_groups():
                sel = idx[mask[idx]]
                if sel.size == 0:
                    continue
                off = grid.offsets[sel[0]]
                steps = expm(off[:, None, None] * gen)
                pos = np.searchsorted(np.nonzero(mask)[0], sel)
                out[sel] = sign * np.einsum("pij,qjk->pqik", starts[pos], steps)
        return out


def convolve_step(H: np.ndarray, C: np.ndarray, kern: SplitKernel, grid: PanelGrid):
    """Tabulate ``x -> int H(u) C k(x - u) du`` on ``grid``.

    ``H`` has shape ``(P, q, r, s)`` and ``C`` shape ``(s, n)``.  Returns node
    values ``(P, q, r, n)`` and panel-boundary values ``(P + 1, r, n)``.
    ``H`` is taken as zero outside the grid.
    """
    _, _, S = gauss_rule(grid.order)
    _, w, _ = gauss_rule(grid.order)
    P, q, r, _ = H.shape
    n = kern.n
    HC = H @ C
    nodes = np.zeros((P, q, r, n), dtype=complex)
    bounds = np.zeros((P + 1, r, n), dtype=complex)
    groups = grid.length_groups()

    if kern.has_fwd:
        gen, proj = kern.gen_fwd, kern.P_fwd
        tot = np.zeros((P, r, n), dtype=complex)
        cum = np.zeros((P, q, r, n), dtype=complex)
        full = np.zeros((P, n, n), dtype=complex)
        pos_steps = np.zeros((P, q, n, n), dtype=complex)
        for L, idx in groups:
            off = grid.offsets[idx[0]]
            neg = expm(-off[:, None, None] * gen) @ proj
            Q = np.einsum("pqrs,qsn->pqrn", HC[idx], neg)
            cum[idx] = 0.5 * L * np.einsum("jk,pkrn->pjrn", S, Q)
            tot[idx] = 0.5 * L * np.einsum("k,pkrn->prn", w, Q)
            full[idx] = expm(L * gen)
            pos_steps[idx] = expm(off[:, None, None] * gen)
        F = np.zeros((P + 1, r, n), dtype=complex)
        for p in range(P):
            F[p + 1] = (F[p] + tot[p]) @ full[p]
        nodes += np.einsum("pqrs,pqsn->pqrn", F[:-1, None] + cum, pos_steps)
        bounds += F

    if kern.has_bwd:
        gen, proj = kern.gen_bwd, kern.P_bwd
        tot = np.zeros((P, r, n), dtype=complex)
        cum = np.zeros((P, q, r, n), dtype=complex)
        back = np.zeros((P, n, n), dtype=complex)
        steps = np.zeros((P, q, n, n), dtype=complex)
        for L, idx in groups:
            off = grid.offsets[idx[0]] - L  # node minus panel end, in [-L, 0]
            grow = expm(-off[:, None, None] * gen) @ proj
            Q = np.einsum("pqrs,qsn->pqrn", HC[idx], grow)
            cum[idx] = 0.5 * L * np.einsum("jk,pkrn->pjrn", S, Q)
            tot[idx] = 0.5 * L * np.einsum("k,pkrn->prn", w, Q)
            back[idx] = expm(-L * gen)
            steps[idx] = expm(off[:, None, None] * gen)
        Bk = np.zeros((P + 1, r, n), dtype=complex)
        for p in range(P - 1, -1, -1):
            Bk[p] = (Bk[p + 1] - tot[p]) @ back[p]
        tail = tot[:, None] - cum  # integral from node to panel end
        nodes += np.einsum("pqrs,pqsn->pqrn", Bk[1:, None] - tail, steps)
        bounds += Bk

    return nodes, bounds


def truncation_length(gap: float, tol: float) -> float:
    """Tail length after which ``e^{-gap |s| / 2}`` drops below ``tol``."""
    return 2.0 * np.log(1.0 / tol) / gap


def convolution_grid(kerns, t, extra=(), tol=1e-10, order=DEFAULT_ORDER, gap=None) -> PanelGrid:
    """Panel grid for nested convolutions of ``kerns`` evaluated at ``t``.

    The left tail ``[min(0, t) - T, ...]`` is included when some kernel has
    a backward part, the right tail when some kernel has a forward part.
    ``extra`` adds further breakpoints (and extends the domain to cover
    them).
    """
    ts = [0.0, float(t), *map(float, extra)]
    lo, hi = min(ts), max(ts)
    any_fwd = any(k.has_fwd for k in kerns)
    any_bwd = any(k.has_bwd for k in kerns)
    mixed = any(k.has_fwd and k.has_bwd for k in kerns) or (any_fwd and any_bwd)
    breaks = list(ts)
    if mixed or gap is not None:
        if gap is None:
            gap = min_axis_gap(kerns)
        T = truncation_length(gap, tol)
        if any_bwd:
            breaks.append(lo - T)
        if any_fwd:
            breaks.append(hi + T)
    rate = max(max(k.rate for k in kerns), 0.25)
    return PanelGrid.build(breaks, PANEL_BUDGET / rate, order)


def min_axis_gap(kerns) -> float:
    gaps = []
    for k in kerns:
        w = np.linalg.eigvals(k.B)
        gaps.append(np.min(np.abs(w.real)))
    return float(min(gaps))


def chain_table(kerns, couplings, grid: PanelGrid):
    """Tabulate the nested convolution ``k_1 C_1 * k_2 C_2 * ... * k_m``.

    Returns node values and boundary values of the final level.  For a
    single kernel the boundary values are left undefined (kernels jump at
    zero) and ``None`` is returned in their place.
    """
    H = kerns[0].table(grid)
    bounds = None
    for C, kern in zip(couplings, kerns[1:]):
        H, bounds = convolve_step(H, np.asarray(C, dtype=complex), kern, grid)
    return H, bounds


def chain_value(kerns, couplings, t: float, tol=1e-10, order=DEFAULT_ORDER) -> np.ndarray:
    """Nested convolution of ``len(kerns)`` kernels evaluated at ``t``."""
    if len(kerns) == 1:
        return kerns[0].value(t)
    if not any(k.has_fwd or k.has_bwd for k in kerns):
        return np.zeros((kerns[0].n, kerns[-1].n), dtype=complex)
    grid = convolution_grid(kerns, t, tol=tol, order=order)
    _, bounds = chain_table(kerns, couplings, grid)
    return bounds[grid.index_of(float(t))]
