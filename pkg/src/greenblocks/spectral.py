"""Circle contours, Cauchy-integral matrix functions and Riesz projectors.

All contours are unions of counterclockwise circles sampled by the
trapezoidal rule, which converges geometrically for integrands analytic in
an annulus around each circle.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ContourError, NotDiagonalizableError, SpectrumOnAxisError

DEFAULT_NODES = 64
MIN_GAP_FLOOR = 0.05
#: Eigenvector-matrix condition number above which the eigendecomposition
#: oracle refuses to run.
EIG_COND_LIMIT = 1e8


@dataclass(frozen=True)
class Circle:
    center: complex
    radius: float
    nodes: int = DEFAULT_NODES

    def __post_init__(self):
        if not self.radius > 0:
            raise ContourError(f"circle radius must be positive, got {self.radius}")
        if self.nodes < 1:
            raise ContourError(f"circle needs at least one node, got {self.nodes}")
        object.__setattr__(self, "center", complex(self.center))
        object.__setattr__(self, "radius", float(self.radius))
        object.__setattr__(self, "nodes", int(self.nodes))

    def contains(self, z) -> np.ndarray:
        return np.abs(np.asarray(z) - self.center) < self.radius

    def distance(self, z) -> np.ndarray:
        """Distance from ``z`` to the circle itself."""
        return np.abs(np.abs(np.asarray(z) - self.center) - self.radius)

    def crosses_axis(self) -> bool:
        return abs(self.center.real) <= self.radius

    def quadrature(self) -> tuple[np.ndarray, np.ndarray]:
        theta = 2 * np.pi * np.arange(self.nodes) / self.nodes
        ring = self.radius * np.exp(1j * theta)
        # (1/2 pi i) dz = r e^{i theta} d theta / (2 pi)
        return self.center + ring, ring / self.nodes


@dataclass(frozen=True)
class ContourSet:
    """Union of counterclockwise circles."""

    circles: tuple[Circle, ...]

    def __post_init__(self):
        object.__setattr__(self, "circles", tuple(self.circles))
        if not self.circles:
            raise ContourError("contour set is empty")

    def quadrature(self) -> tuple[np.ndarray, np.ndarray]:
        """Nodes ``z`` and weights ``w`` with ``(1/2 pi i) int F dz = sum w F(z)``."""
        parts = [c.quadrature() for c in self.circles]
        return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])

    def with_nodes(self, nodes: int) -> "ContourSet":
        return ContourSet(tuple(Circle(c.center, c.radius, nodes) for c in self.circles))

    def winding(self, z) -> np.ndarray:
        """Number of circles enclosing each point."""
        z = np.asarray(z)
        return sum(c.contains(z).astype(int) for c in self.circles)

    def distance(self, z) -> np.ndarray:
        z = np.asarray(z)
        return np.min([c.distance(z) for c in self.circles], axis=0)

    def is_disjoint(self) -> bool:
        cs = self.circles
        for a in range(len(cs)):
            for b in range(a + 1, len(cs)):
                if abs(cs[a].center - cs[b].center) <= cs[a].radius + cs[b].radius:
                    return False
        return True

    def avoids_axis(self) -> bool:
        return not any(c.crosses_axis() for c in self.circles)

    def check_encloses(self, points, margin: float = 0.0) -> None:
        points = np.atleast_1d(np.asarray(points, dtype=complex))
        wind = self.winding(points)
        if np.any(wind != 1):
            bad = points[wind != 1][0]
            raise ContourError(f"point {bad} is not enclosed by exactly one circle")
        if margin > 0 and np.min(self.distance(points)) < margin:
            raise ContourError(
                f"a point lies within {np.min(self.distance(points)):.3e} of the contour "
                f"(margin {margin:.3e}); use a larger margin"
            )


def default_margin(eigs, avoid_axis: bool = False) -> float:
    """Quarter of the minimum pairwise gap, gap floored at ``MIN_GAP_FLOOR``."""
    eigs = np.atleast_1d(np.asarray(eigs, dtype=complex))
    if len(eigs) > 1:
        d = np.abs(eigs[:, None] - eigs[None, :])
        gap = np.min(d[np.triu_indices(len(eigs), 1)])
    else:
        gap = np.inf
    margin = 0.25 * max(gap, MIN_GAP_FLOOR) if np.isfinite(gap) else 0.25
    if avoid_axis:
        axis_gap = float(np.min(np.abs(eigs.real)))
        margin = min(margin, 0.5 * axis_gap)
    return margin


def _single_linkage(points: np.ndarray, threshold: float) -> list[list[int]]:
    n = len(points)
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a in range(n):
        for b in range(a + 1, n):
            if abs(points[a] - points[b]) <= threshold:
                parent[find(a)] = find(b)
    groups: dict[int, list[int]] = {}
    for a in range(n):
        groups.setdefault(find(a), []).append(a)
    return sorted(groups.values(), key=lambda g: g[0])


def _circle_for(points: np.ndarray, margin: float, nodes: int) -> Circle:
    center = complex(np.mean(points))
    reach = float(np.max(np.abs(points - center)))
    return Circle(center, reach + margin, nodes)


def enclose(
    eigs: Sequence[complex],
    margin: float | None = None,
    nodes: int = DEFAULT_NODES,
    avoid_axis: bool = False,
) -> ContourSet:
    """Disjoint circles around clusters of ``eigs``.

    Points within ``2 * margin`` of each other share a circle; each circle
    has radius ``reach + margin`` so every point is at least ``margin`` away
    from the contour.  With ``avoid_axis`` the two half-planes are clustered
    separately and no circle may cross the imaginary axis.

    Raises
    ------
    ContourError
        If ``avoid_axis`` is set and some circle would reach the axis.
    """
    eigs = np.atleast_1d(np.asarray(eigs, dtype=complex))
    if eigs.size == 0:
        raise ContourError("cannot enclose an empty set of eigenvalues")
    if margin is None:
        margin = default_margin(eigs, avoid_axis)
    if not margin > 0:
        raise ContourError(f"margin must be positive, got {margin}")
    if avoid_axis and np.any(np.abs(eigs.real) <= margin):
        raise ContourError(
            f"margin {margin:.3e} is incompatible with eigenvalue-to-axis gap "
            f"{np.min(np.abs(eigs.real)):.3e}"
        )

    sides = [eigs[eigs.real < 0], eigs[eigs.real >= 0]] if avoid_axis else [eigs]
    circles: list[Circle] = []
    for pts in sides:
        if pts.size == 0:
            continue
        groups = _single_linkage(pts, 2 * margin)
        while True:
            cs = [_circle_for(pts[g], margin, nodes) for g in groups]
            merged = False
            for a in range(len(cs)):
                for b in range(a + 1, len(cs)):
                    if abs(cs[a].center - cs[b].center) <= cs[a].radius + cs[b].radius:
                        groups[a] = groups[a] + groups[b]
                        del groups[b]
                        merged = True
                        break
                if merged:
                    break
            if not merged:
                break
        circles.extend(cs)
    out = ContourSet(tuple(circles))
    if avoid_axis and not out.avoids_axis():
        raise ContourError(
            f"margin {margin:.3e} is incompatible with the eigenvalue-to-axis gap: "
            "a cluster circle would cross the imaginary axis"
        )
    if not out.is_disjoint():
        raise ContourError("could not build disjoint circles; reduce the margin")
    return out


def evaluate_scalar(f: Callable, z: np.ndarray) -> np.ndarray:
    """Evaluate ``f`` on an array, falling back to element-wise calls."""
    z = np.asarray(z)
    try:
        out = np.asarray(f(z), dtype=complex)
        if out.shape == z.shape:
            return out
        if out.ndim == 0:
            return np.full(z.shape, complex(out))
    except (TypeError, ValueError):
        pass
    return np.array([complex(f(v)) for v in z.ravel()]).reshape(z.shape)


def resolvents(M: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Stack of ``(z_k I - M)^{-1}``, one dense LU solve per node."""
    M = np.asarray(M, dtype=complex)
    n = M.shape[0]
    eye = np.eye(n, dtype=complex)
    shifted = z[:, None, None] * eye - M
    try:
        R = np.linalg.solve(shifted, np.broadcast_to(eye, shifted.shape))
    except np.linalg.LinAlgError as exc:
        raise ContourError(
            "resolvent solve failed at a quadrature node (node too close to the "
            "spectrum); use a larger margin"
        ) from exc
    if not np.all(np.isfinite(R)):
        raise ContourError("non-finite resolvent at a quadrature node; use a larger margin")
    return R


def _needs_axis_split(f) -> bool:
    return bool(getattr(f, "splits_axis", False))


def cauchy_function(M, f: Callable, contour: ContourSet | None = None) -> np.ndarray:
    """``f(M) = (1/2 pi i) int f(lam) (lam I - M)^{-1} d lam`` by quadrature.

    When ``contour`` is omitted, circles are built around the eigenvalues
    of ``M``; a function carrying ``splits_axis = True`` (the Green kernel)
    gets axis-avoiding circles.
    """
    M = np.asarray(M, dtype=complex)
    if M.ndim == 0:
        M = M.reshape(1, 1)
    if contour is None:
        contour = enclose(np.linalg.eigvals(M), avoid_axis=_needs_axis_split(f))
    z, w = contour.quadrature()
    R = resolvents(M, z)
    fz = evaluate_scalar(f, z)
    return np.einsum("k,kij->ij", w * fz, R)


@dataclass(frozen=True)
class SpectralSplit:
    """Riesz projectors onto the left/right half-plane parts of the spectrum."""

    projector_left: np.ndarray
    projector_right: np.ndarray


def riesz_split(M, gap_tol: float = 1e-8, nodes: int = DEFAULT_NODES) -> SpectralSplit:
    """Spectral projectors for ``Re lam < 0`` and ``Re lam > 0``.

    Raises
    ------
    SpectrumOnAxisError
        If some eigenvalue is within ``gap_tol`` of the imaginary axis.
    """
    M = np.asarray(M, dtype=complex)
    if M.ndim == 0:
        M = M.reshape(1, 1)
    n = M.shape[0]
    eigs = np.linalg.eigvals(M)
    gap = float(np.min(np.abs(eigs.real)))
    if gap < gap_tol:
        raise SpectrumOnAxisError(gap, gap_tol)
    contour = enclose(eigs, nodes=nodes, avoid_axis=True)
    left = tuple(c for c in contour.circles if c.center.real < 0)
    right = tuple(c for c in contour.circles if c.center.real > 0)
    one = lambda z: np.ones_like(z)
    P_left = cauchy_function(M, one, ContourSet(left)) if left else np.zeros((n, n), complex)
    P_right = cauchy_function(M, one, ContourSet(right)) if right else np.zeros((n, n), complex)
    return SpectralSplit(P_left, P_right)


def eig_function(M, f: Callable, cond_limit: float = EIG_COND_LIMIT) -> np.ndarray:
    """Reference ``f(M) = V f(D) V^{-1}`` from a dense eigendecomposition.

    Raises
    ------
    NotDiagonalizableError
        If the eigenvector matrix is too ill-conditioned to trust.
    """
    M = np.asarray(M, dtype=complex)
    if M.ndim == 0:
        M = M.reshape(1, 1)
    w, V = np.linalg.eig(M)
    cond = np.linalg.cond(V)
    if not np.isfinite(cond) or cond > cond_limit:
        raise NotDiagonalizableError(
            f"eigenvector matrix condition {cond:.3e} exceeds {cond_limit:.1e}"
        )
    fw = evaluate_scalar(f, w)
    return (V * fw) @ np.linalg.inv(V)
