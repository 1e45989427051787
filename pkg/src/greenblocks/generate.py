"""Random block lower-triangular test matrices."""

from __future__ import annotations

import os

import numpy as np

from .blockmat import BlockLowerTriangular, BlockPartition

SEED_ENV = "GREENBLOCKS_SEED"


def rng_from_env(default: int = 0) -> np.random.Generator:
    return np.random.default_rng(int(os.environ.get(SEED_ENV, default)))


def _separated_points(rng, count, separation, radius, axis_gap, existing=()):
    pts = list(existing)
    out = []
    for _ in range(10000):
        if len(out) == count:
            return np.array(out)
        z = complex(rng.uniform(-radius, radius), rng.uniform(-radius, radius))
        if abs(z) > radius:
            continue
        if axis_gap and abs(z.real) < axis_gap:
            continue
        if all(abs(z - p) >= separation for p in pts):
            pts.append(z)
            out.append(z)
    raise RuntimeError("could not place separated eigenvalues; relax the constraints")


def random_spectrum_block(rng, eigs, coupling=0.3):
    """Dense matrix with prescribed eigenvalues and well-conditioned eigenvectors."""
    n = len(eigs)
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
    V = Q @ (np.eye(n) + coupling * np.triu(rng.standard_normal((n, n)), 1))
    return V @ np.diag(eigs) @ np.linalg.inv(V)


def random_block_triangular(
    rng: np.random.Generator,
    sizes,
    separation: float = 0.3,
    eig_radius: float = 1.5,
    axis_gap: float | None = None,
    max_block_norm: float = 2.0,
    coupling_scale: float = 0.7,
    density: float = 1.0,
    bidiagonal: bool = False,
) -> BlockLowerTriangular:
    """Random matrix whose causal eigenvalues are pairwise ``separation`` apart.

    ``axis_gap`` keeps every eigenvalue at least that far from the
    imaginary axis.  Off-diagonal blocks have spectral norm at most
    ``coupling_scale``; ``bidiagonal`` keeps only the first sub-diagonal.
    """
    part = BlockPartition(tuple(sizes))
    for _ in range(200):
        eigs = _separated_points(rng, part.total, separation, eig_radius, axis_gap)
        blocks = {}
        ok = True
        start = 0
        for i in range(1, part.k + 1):
            n = part.size(i)
            D = random_spectrum_block(rng, eigs[start:start + n])
            start += n
            if np.linalg.norm(D, 2) > max_block_norm:
                ok = False
                break
            blocks[(i, i)] = D
        if not ok:
            continue
        for i in range(2, part.k + 1):
            for j in range(1, i):
                if bidiagonal and j != i - 1:
                    continue
                if not bidiagonal and j != i - 1 and rng.uniform() > density:
                    continue
                C = rng.standard_normal((part.size(i), part.size(j))) + 1j * rng.standard_normal(
                    (part.size(i), part.size(j))
                )
                C *= coupling_scale * rng.uniform(0.3, 1.0) / np.linalg.norm(C, 2)
                blocks[(i, j)] = C
        return BlockLowerTriangular(part, blocks)
    raise RuntimeError("could not generate a matrix satisfying the norm bound")


def random_invertible_triangular(rng, sizes, max_cond: float = 100.0) -> BlockLowerTriangular:
    """Random matrix whose diagonal blocks have condition number at most ``max_cond``."""
    part = BlockPartition(tuple(sizes))
    blocks = {}
    for i in range(1, part.k + 1):
        n = part.size(i)
        while True:
            Q1, _ = np.linalg.qr(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
            Q2, _ = np.linalg.qr(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
            s = rng.uniform(0.2, 2.0, n)
            if s.max() / s.min() <= max_cond:
                break
        blocks[(i, i)] = Q1 @ np.diag(s) @ Q2
        for j in range(1, i):
            blocks[(i, j)] = rng.standard_normal((n, part.size(j))) + 1j * rng.standard_normal((n, part.size(j)))
    return BlockLowerTriangular(part, blocks)
