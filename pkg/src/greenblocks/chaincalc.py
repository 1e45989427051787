"""Functions of block lower-triangular matrices as sums over index chains.

Block ``(i, j)`` of ``f(A)`` is the sum over strictly decreasing chains
``i = i_1 > i_2 > ... > i_m = j`` of the operator divided differences::

    f[m-1](A; i_1..i_m) = (1/2 pi i) int f(lam) R_{i_1}(lam) A_{i_1 i_2}
                                  R_{i_2}(lam) ... A_{i_(m-1) i_m} R_{i_m}(lam) dlam

with ``R_i(lam) = (lam - A_ii)^{-1}``.  Three routes compute ``f(A)``:
``contour_chain`` (the chain integrals above), ``convolution`` (nested time
convolutions, only for the exp+/exp-/g kernels) and ``oracle`` (dense
eigendecomposition of the assembled matrix).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import expm

from .blockmat import BlockLowerTriangular, assemble, causal_spectrum
from .divdiff import PiecewiseExpKernel
from .errors import BlockStructureError, NotDiagonalizableError, PoleError
from .quadrature import SplitKernel, chain_value
from .spectral import ContourSet, eig_function, enclose, evaluate_scalar, resolvents

ROUTES = ("contour_chain", "convolution", "oracle")
MAX_BLOCKS = 8


@dataclass(frozen=True)
class Chain:
    """Strictly decreasing block indices ``i_1 > ... > i_m`` (1-based)."""

    indices: tuple[int, ...]

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if not idx:
            raise ValueError("empty chain")
        if any(a <= b for a, b in zip(idx, idx[1:])):
            raise ValueError(f"chain {idx} is not strictly decreasing")
        if idx[-1] < 1:
            raise ValueError(f"chain {idx} has non-positive index")
        object.__setattr__(self, "indices", idx)

    @property
    def order(self) -> int:
        return len(self.indices) - 1

    @property
    def links(self) -> list[tuple[int, int]]:
        return list(zip(self.indices[:-1], self.indices[1:]))

    def __len__(self):
        return len(self.indices)


def enumerate_chains(i: int, j: int, A: BlockLowerTriangular | None = None) -> list[Chain]:
    """All decreasing chains from ``i`` down to ``j``.

    With ``A`` given, chains through an absent block are skipped.  Chains
    are returned shortest first, then lexicographically descending.
    """
    if i < j:
        raise BlockStructureError(f"no chains from {i} to {j}: need i >= j")
    if A is not None and not (1 <= j and i <= A.k):
        raise BlockStructureError(f"indices ({i},{j}) out of range for {A.k} blocks")
    out: list[tuple[int, ...]] = []

    def walk(path):
        last = path[-1]
        if last == j:
            out.append(tuple(path))
            return
        for nxt in range(last - 1, j - 1, -1):
            if A is None or A.has(last, nxt):
                walk(path + [nxt])

    walk([i])
    out.sort(key=lambda c: (len(c), [-x for x in c]))
    return [Chain(c) for c in out]


def block_resolvent(A: BlockLowerTriangular, lam: complex, pole_tol: float = 1e-10) -> BlockLowerTriangular:
    """Causal resolvent ``(lam I - A)^{-1}`` assembled from chain products."""
    lam = complex(lam)
    spec = causal_spectrum(A)
    dist = np.min(np.abs(spec.eigenvalues - lam))
    if dist < pole_tol:
        raise PoleError(f"lambda={lam} is within {dist:.2e} of a diagonal-block eigenvalue")
    R = {i: np.linalg.inv(lam * np.eye(A.partition.size(i)) - A.diag(i)) for i in range(1, A.k + 1)}
    blocks = {}
    for i in range(1, A.k + 1):
        for j in range(1, i + 1):
            acc = np.zeros((A.partition.size(i), A.partition.size(j)), dtype=complex)
            for chain in enumerate_chains(i, j, A):
                idx = chain.indices
                term = R[idx[0]]
                for a, b in chain.links:
                    term = term @ A.blocks[(a, b)] @ R[b]
                acc += term
            blocks[(i, j)] = acc
    return BlockLowerTriangular(A.partition, blocks)


def default_contour(A: BlockLowerTriangular, f=None, nodes: int = 64) -> ContourSet:
    eigs = causal_spectrum(A).eigenvalues
    return enclose(eigs, nodes=nodes, avoid_axis=bool(getattr(f, "splits_axis", False)))


class _NodeTable:
    """Quadrature nodes shared by all chains, with per-block resolvents."""

    def __init__(self, A: BlockLowerTriangular, f: Callable, contour: ContourSet):
        contour.check_encloses(causal_spectrum(A).eigenvalues)
        self.A = A
        self.z, w = contour.quadrature()
        self.wf = w * evaluate_scalar(f, self.z)
        self.R = {i: resolvents(A.diag(i), self.z) for i in range(1, A.k + 1)}

    def term(self, chain: Chain) -> np.ndarray:
        idx = chain.indices
        prod = self.R[idx[0]]
        for a, b in chain.links:
            prod = prod @ self.A.block(a, b) @ self.R[b]
        return np.einsum("k,kij->ij", self.wf, prod)


def op_dd_contour(A: BlockLowerTriangular, f: Callable, chain: Chain, contour: ContourSet | None = None) -> np.ndarray:
    """Chain term ``f[m-1](A; chain)`` by one contour integral."""
    if contour is None:
        contour = default_contour(A, f)
    return _NodeTable(A, f, contour).term(chain)


def op_dd_convolution(A: BlockLowerTriangular, kernel: PiecewiseExpKernel, chain: Chain, tol: float = 1e-10, kerns=None) -> np.ndarray:
    """Chain term for an exp-type kernel as a nested time convolution.

    ``kernel(s_1, A_{i_1}) A_{i_1 i_2} kernel(s_2 - s_1, A_{i_2}) ... `` is
    integrated over the ordered simplex (exp+/exp-) or the whole space (g).
    """
    if kerns is None:
        kerns = {i: SplitKernel.for_kind(kernel.kind, A.diag(i)) for i in set(chain.indices)}
    seq = [kerns[i] for i in chain.indices]
    couplings = [A.block(a, b) for a, b in chain.links]
    return chain_value(seq, couplings, kernel.t, tol=tol)


@dataclass(frozen=True)
class BlockFunctionResult:
    matrix: BlockLowerTriangular
    route: str
    per_block_terms: dict = field(default_factory=dict)


def _exp_fallback(M: np.ndarray, kernel: PiecewiseExpKernel) -> np.ndarray:
    t = kernel.t
    if kernel.kind == "exp+":
        return expm(t * M) if t > 0 else np.zeros_like(M)
    if kernel.kind == "exp-":
        return -expm(t * M) if t < 0 else np.zeros_like(M)
    raise NotDiagonalizableError("Green kernel oracle needs a diagonalizable matrix")


def oracle_function(M: np.ndarray, f: Callable) -> np.ndarray:
    """Dense reference ``f(M)`` by eigendecomposition.

    For ``exp+``/``exp-`` kernels a non-diagonalizable ``M`` falls back to
    the dense matrix exponential; other functions raise.
    """
    try:
        return eig_function(M, f)
    except NotDiagonalizableError:
        if isinstance(f, PiecewiseExpKernel):
            return _exp_fallback(M, f)
        raise


def block_function(
    A: BlockLowerTriangular,
    f: Callable,
    route: str = "contour_chain",
    contour: ContourSet | None = None,
    nodes: int = 64,
    tol: float = 1e-10,
) -> BlockFunctionResult:
    """``f(A)`` for block lower-triangular ``A`` by the selected route."""
    if route not in ROUTES:
        raise ValueError(f"unknown route {route!r}; expected one of {ROUTES}")
    if A.k > MAX_BLOCKS:
        raise BlockStructureError(f"at most {MAX_BLOCKS} blocks are supported, got {A.k}")

    if route == "oracle":
        F = oracle_function(assemble(A), f)
        return BlockFunctionResult(BlockLowerTriangular.from_dense(F, A.partition, drop_zero=False), route)

    if route == "contour_chain":
        if contour is None:
            contour = default_contour(A, f, nodes)
        table = _NodeTable(A, f, contour)
        term = table.term
    else:
        if not isinstance(f, PiecewiseExpKernel):
            raise ValueError("the convolution route applies only to exp+/exp-/g kernels")
        kerns = {i: SplitKernel.for_kind(f.kind, A.diag(i)) for i in range(1, A.k + 1)}
        term = lambda chain: (
            kerns[chain.indices[0]].value(f.t)
            if len(chain) == 1
            else op_dd_convolution(A, f, chain, tol=tol, kerns=kerns)
        )

    blocks, terms = {}, {}
    for i in range(1, A.k + 1):
        for j in range(1, i + 1):
            contribs = [(c, term(c)) for c in enumerate_chains(i, j, A)]
            terms[(i, j)] = contribs
            acc = np.zeros((A.partition.size(i), A.partition.size(j)), dtype=complex)
            for _, val in contribs:
                acc += val
            blocks[(i, j)] = acc
    return BlockFunctionResult(BlockLowerTriangular(A.partition, blocks), route, terms)
