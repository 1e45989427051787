"""Scalar divided differences and the piecewise exponential kernels.

The kernels, for fixed ``t != 0``::

    exp+_t(lam) =  e^{lam t} if t > 0 else 0
    exp-_t(lam) = -e^{lam t} if t < 0 else 0
    g_t(lam)    = exp-_t(lam) if Re lam > 0, exp+_t(lam) if Re lam < 0

Divided differences of these kernels in ``lam`` equal repeated
convolutions in ``t`` of the single-point kernels; :func:`dd_exp_conv`
evaluates that convolution by quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import (
    ConfluentPointsError,
    ContourError,
    PoleError,
    RegionError,
    SpectrumOnAxisError,
    UndefinedAtZeroError,
)
from .quadrature import PanelGrid, SplitKernel, chain_value
from .spectral import ContourSet, enclose, evaluate_scalar

CONFLUENCE_TOL = 1e-9
PANEL_LEN_CAP = 4.0
KINDS = ("exp+", "exp-", "g")


def kernel_value(kind: str, t: float, lam):
    """Vectorised kernel value; ``lam`` may be an array."""
    if t == 0:
        raise UndefinedAtZeroError(kind)
    lam = np.asarray(lam, dtype=complex)
    e = np.exp(lam * t)
    zero = np.zeros_like(e)
    if kind == "exp+":
        return e if t > 0 else zero
    if kind == "exp-":
        return -e if t < 0 else zero
    if kind == "g":
        if np.any(lam.real == 0):
            raise SpectrumOnAxisError(0.0, 0.0)
        if t > 0:
            return np.where(lam.real < 0, e, zero)
        return np.where(lam.real > 0, -e, zero)
    raise ValueError(f"unknown kernel kind {kind!r}")


@dataclass(frozen=True)
class PiecewiseExpKernel:
    """``lam -> kernel(t, lam)`` for a fixed nonzero ``t``.

    Instances are scalar analytic functions with exact derivatives and can
    be passed wherever a function handle is expected.
    """

    kind: str
    t: float

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}; expected one of {KINDS}")
        if self.t == 0:
            raise UndefinedAtZeroError(self.kind)
        object.__setattr__(self, "t", float(self.t))

    @property
    def splits_axis(self) -> bool:
        return self.kind == "g"

    def __call__(self, lam):
        return kernel_value(self.kind, self.t, lam)

    def derivative(self, lam, order: int):
        """``d^order/dlam^order``; the kernels are ``c * e^{lam t}`` locally."""
        return self.t**order * kernel_value(self.kind, self.t, lam)

    def time_kernel(self, lam) -> SplitKernel:
        return SplitKernel.for_kind(self.kind, np.array([[lam]], dtype=complex))


@dataclass(frozen=True)
class InterpolationPoints:
    points: tuple[complex, ...]
    confluence_tol: float = CONFLUENCE_TOL

    def __post_init__(self):
        pts = tuple(complex(p) for p in self.points)
        if not pts:
            raise ValueError("need at least one interpolation point")
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return len(self.points)

    def coincide(self, a: complex, b: complex) -> bool:
        return abs(a - b) <= self.confluence_tol * max(1.0, abs(a))

    def canonical(self) -> tuple[np.ndarray, bool]:
        """Points with coincident ones snapped together and grouped.

        Ordering is independent of the input order, which makes every
        evaluation exactly symmetric in its arguments.
        """
        reps: list[complex] = []
        counts: list[int] = []
        for p in sorted(self.points, key=lambda z: (z.real, z.imag)):
            for r, rep in enumerate(reps):
                if self.coincide(rep, p):
                    counts[r] += 1
                    break
            else:
                reps.append(p)
                counts.append(1)
        out = np.concatenate([np.full(c, r) for r, c in zip(reps, counts)])
        return out, any(c > 1 for c in counts)

    @property
    def confluent(self) -> bool:
        return self.canonical()[1]


def as_points(pts, confluence_tol: float = CONFLUENCE_TOL) -> InterpolationPoints:
    if isinstance(pts, InterpolationPoints):
        return pts
    return InterpolationPoints(tuple(np.atleast_1d(pts)), confluence_tol)


@dataclass(frozen=True)
class DividedDiffResult:
    value: complex
    order: int
    method: str
    confluent: bool

    def __complex__(self):
        return complex(self.value)


def _contour_derivative(f, mu: complex, order: int, radius: float, nodes: int = 64) -> complex:
    """``f^{(order)}(mu)`` by the Cauchy integral on a circle around ``mu``."""
    z, w = enclose([mu], margin=radius, nodes=nodes).quadrature()
    return math.factorial(order) * complex(np.sum(w * evaluate_scalar(f, z) / (z - mu) ** (order + 1)))


def dd_recurrence(f: Callable, pts, deriv_radius: float = 0.1) -> DividedDiffResult:
    """Divided difference by the Newton recurrence.

    Where the two end points of a sub-table coincide, the quotient is
    replaced by ``f^{(m)}(mu) / m!``.  ``f.derivative(mu, m)`` is used when
    available; otherwise the derivative comes from a Cauchy integral on a
    circle of radius ``deriv_radius``.
    """
    ip = as_points(pts)
    z, confluent = ip.canonical()
    n = len(z)
    deriv = getattr(f, "derivative", None)
    if deriv is None:
        deriv = lambda mu, m: _contour_derivative(f, mu, m, deriv_radius)
    col = evaluate_scalar(f, z).astype(complex)
    for m in range(1, n):
        nxt = np.empty(n - m, dtype=complex)
        for i in range(n - m):
            if z[i + m] == z[i]:
                nxt[i] = complex(deriv(z[i], m)) / math.factorial(m)
            else:
                nxt[i] = (col[i + 1] - col[i]) / (z[i + m] - z[i])
        col = nxt
    return DividedDiffResult(complex(col[0]), n - 1, "recurrence", confluent)


def dd_distinct(f: Callable, pts) -> DividedDiffResult:
    """``sum_j f(mu_j) / prod_{k != j} (mu_j - mu_k)`` for distinct points."""
    ip = as_points(pts)
    z, confluent = ip.canonical()
    if confluent:
        raise ConfluentPointsError(
            "dd_distinct needs pairwise distinct points; use dd_recurrence or dd_contour"
        )
    fz = evaluate_scalar(f, z)
    diff = z[:, None] - z[None, :]
    np.fill_diagonal(diff, 1.0)
    value = complex(np.sum(fz / np.prod(diff, axis=1)))
    return DividedDiffResult(value, len(z) - 1, "distinct_formula", False)


def dd_contour(f: Callable, pts, contour: ContourSet | None = None, nodes: int = 64) -> DividedDiffResult:
    """``(1/2 pi i) int f(z) / Omega(z) dz`` with ``Omega(z) = prod (z - mu_k)``.

    The default contour is one small circle per cluster of points (the
    Green kernel gets axis-avoiding circles).
    """
    ip = as_points(pts)
    z, confluent = ip.canonical()
    if contour is None:
        contour = enclose(np.unique(z), nodes=nodes, avoid_axis=getattr(f, "splits_axis", False))
    contour.check_encloses(np.unique(z))
    if np.min(contour.distance(z)) < 1e-8:
        raise ContourError("an interpolation point lies too close to the contour")
    nodes_z, w = contour.quadrature()
    omega = np.prod(nodes_z[:, None] - z[None, :], axis=1)
    value = complex(np.sum(w * evaluate_scalar(f, nodes_z) / omega))
    return DividedDiffResult(value, len(z) - 1, "contour", confluent)


def dd_exp_conv(kind: str, t: float, pts, tol: float = 1e-12) -> DividedDiffResult:
    """Divided difference of a kernel as a repeated convolution in time.

    Evaluates ``k(mu_1) * k(mu_2) * ... * k(mu_n)`` at ``t`` where ``k(mu)``
    is ``s -> kernel(s, mu)``.  Infinite tails of the Green kernel are cut
    where the slowest decay ``e^{-gap |s| / 2}`` drops below ``tol``.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown kernel kind {kind!r}")
    if t == 0:
        raise UndefinedAtZeroError(kind)
    ip = as_points(pts)
    z, confluent = ip.canonical()
    if kind == "g" and np.any(z.real == 0):
        raise SpectrumOnAxisError(0.0, 0.0)
    kerns = [SplitKernel.for_kind(kind, np.array([[mu]])) for mu in z]
    ones = [np.ones((1, 1), dtype=complex)] * (len(z) - 1)
    value = complex(chain_value(kerns, ones, float(t), tol=tol)[0, 0])
    return DividedDiffResult(value, len(z) - 1, "convolution", confluent)


def dd_r_lambda(lam: complex, pts, confluence_tol: float = CONFLUENCE_TOL) -> complex:
    """Divided difference of ``nu -> 1/(lam - nu)``: ``1 / prod (lam - mu_j)``."""
    ip = as_points(pts, confluence_tol)
    z = np.asarray(ip.points)
    if np.any(np.abs(lam - z) <= confluence_tol * np.maximum(1.0, np.abs(z))):
        raise PoleError(f"lambda={lam} coincides with an interpolation point")
    return complex(1.0 / np.prod(lam - z))


def r_lambda(lam: complex) -> Callable:
    """``nu -> 1/(lam - nu)`` with exact derivatives."""

    class _Resolvent:
        def __call__(self, nu):
            return 1.0 / (lam - np.asarray(nu, dtype=complex))

        def derivative(self, nu, order):
            return math.factorial(order) / (lam - nu) ** (order + 1)

    return _Resolvent()


def _half_line_integral(fn, start: float, direction: int, rate: float, scale: float, tol: float) -> complex:
    """``int_start^{+-inf} fn(s) ds`` for ``|fn(s)| ~ e^{-rate |s - start|}``."""
    T = np.log(1.0 / tol) / rate
    edge = start + direction * T
    grid = PanelGrid.build([start, edge], max_len=min(PANEL_LEN_CAP, 2.0 / max(scale, 1e-12)))
    return complex(np.sum(grid.weights * fn(grid.nodes)))



def laplace_check(kind: str, lam0: complex, lam: complex, tol: float = 1e-14) -> complex:
    """Bilateral Laplace transform ``int e^{-lam t} kernel(t, lam0) dt``.

    Should equal ``1/(lam - lam0)`` inside the region of convergence:
    ``Re lam > Re lam0`` (exp+), ``Re lam < Re lam0`` (exp-),
    ``|Re lam| < |Re lam0|`` with ``Re lam0 != 0`` (g).

    Raises
    ------
    RegionError
        Naming the violated inequality.
    """
    lam0, lam = complex(lam0), complex(lam)
    if kind == "exp+":
        if not lam.real > lam0.real:
            raise RegionError("Re lambda > Re lambda0 is violated")
        side = 1
    elif kind == "exp-":
        if not lam.real < lam0.real:
            raise RegionError("Re lambda < Re lambda0 is violated")
        side = -1
    elif kind == "g":
        if lam0.real == 0:
            raise RegionError("Re lambda0 != 0 is violated")
        if not abs(lam.real) < abs(lam0.real):
            raise RegionError("|Re lambda| < |Re lambda0| is violated")
        side = 1 if lam0.real < 0 else -1
    else:
        raise ValueError(f"unknown kernel kind {kind!r}")
    rate = abs((lam0 - lam).real)
    scale = abs(lam0 - lam)

    def integrand(s):
        return _kernel_t(kind, s, lam0) * np.exp(-lam * s)

    return _half_line_integral(integrand, 0.0, side, rate, scale, tol)


def _kernel_t(kind: str, s: np.ndarray, lam0: complex) -> np.ndarray:
    """Kernel as a function of time (array ``s`` excludes 0)."""
    e = np.exp(lam0 * s)
    if kind == "exp+":
        return np.where(s > 0, e, 0)
    if kind == "exp-":
        return np.where(s < 0, -e, 0)
    if lam0.real < 0:
        return np.where(s > 0, e, 0)
    return np.where(s < 0, -e, 0)
