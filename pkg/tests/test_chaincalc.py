import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.linalg import expm

from greenblocks import (
    BlockLowerTriangular,
    BlockStructureError,
    Chain,
    PiecewiseExpKernel,
    assemble,
    block_function,
    block_resolvent,
    enumerate_chains,
)
from greenblocks.chaincalc import op_dd_contour, op_dd_convolution
from greenblocks.divdiff import dd_recurrence
from greenblocks.errors import PoleError
from greenblocks.generate import random_block_triangular

from conftest import rel_err

seeds = st.integers(0, 2**32 - 1)


def test_chain_validation():
    assert Chain((3, 1)).order == 1
    assert Chain((4, 2, 1)).links == [(4, 2), (2, 1)]
    for bad in [(), (1, 2), (2, 2), (1, 0)]:
        with pytest.raises(ValueError):
            Chain(bad)


def test_chain_count_full():
    # subsets of the interior indices
    for i, j in [(1, 1), (2, 1), (4, 1), (5, 2)]:
        assert len(enumerate_chains(i, j)) == 2 ** max(i - j - 1, 0)


def test_chain_order_shortest_first():
    assert [c.indices for c in enumerate_chains(3, 1)] == [(3, 1), (3, 2, 1)]


def test_chain_errors():
    with pytest.raises(BlockStructureError):
        enumerate_chains(1, 2)


@given(seed=seeds, k=st.integers(2, 5))
def test_bidiagonal_has_single_chain(seed, k):
    A = random_block_triangular(np.random.default_rng(seed), [1] * k, bidiagonal=True)
    for i in range(1, k + 1):
        for j in range(1, i + 1):
            chains = enumerate_chains(i, j, A)
            assert len(chains) == 1
            assert chains[0].indices == tuple(range(i, j - 1, -1))


def test_missing_block_prunes_chains():
    A = BlockLowerTriangular.from_blocks([1, 1, 1], {(1, 1): [[0]], (2, 2): [[1]], (3, 3): [[2]], (3, 2): [[1]], (2, 1): [[1]]})
    assert [c.indices for c in enumerate_chains(3, 1, A)] == [(3, 2, 1)]


@given(seed=seeds, lam=st.builds(complex, st.floats(-3, 3), st.floats(-3, 3)))
def test_block_resolvent_matches_dense(seed, lam):
    A = random_block_triangular(np.random.default_rng(seed), [2, 1, 2])
    M = assemble(A)
    if np.min(np.abs(np.linalg.eigvals(M) - lam)) < 0.1:
        return
    R = assemble(block_resolvent(A, lam))
    np.testing.assert_allclose(R @ (lam * np.eye(5) - M), np.eye(5), atol=1e-9)


def test_block_resolvent_pole():
    A = BlockLowerTriangular.from_blocks([1], {(1, 1): [[2.0]]})
    with pytest.raises(PoleError):
        block_resolvent(A, 2.0)


@given(seed=seeds, k=st.integers(2, 4), which=st.sampled_from(["exp", "square", "pole"]))
def test_scalar_block_reduction(seed, k, which):
    # with 1x1 blocks each chain term is a scalar divided difference times couplings
    rng = np.random.default_rng(seed)
    A = random_block_triangular(rng, [1] * k)
    f = {"exp": np.exp, "square": lambda z: z**2, "pole": lambda z: 1 / (3 - z)}[which]
    d = [A.diag(i)[0, 0] for i in range(1, k + 1)]
    for chain in enumerate_chains(k, 1, A):
        coupling = math.prod(A.block(a, b)[0, 0] for a, b in chain.links)
        expected = complex(dd_recurrence(f, [d[i - 1] for i in chain.indices])) * coupling
        got = op_dd_contour(A, f, chain)[0, 0]
        assert abs(got - expected) <= 1e-9 * max(1.0, abs(expected))


@given(seed=seeds)
def test_multiplicativity(seed):
    A = random_block_triangular(np.random.default_rng(seed), [2, 1, 2])
    f, g = np.exp, (lambda z: 1 / (3 - z))
    F = assemble(block_function(A, f).matrix)
    G = assemble(block_function(A, g).matrix)
    FG = assemble(block_function(A, lambda z: f(z) * g(z)).matrix)
    assert rel_err(F @ G, FG) < 1e-9


@given(seed=seeds, s=st.floats(0.1, 1.5), t=st.floats(0.1, 1.5))
def test_exp_semigroup(seed, s, t):
    A = random_block_triangular(np.random.default_rng(seed), [2, 2])
    E = lambda u: assemble(block_function(A, PiecewiseExpKernel("exp+", u), route="convolution").matrix)
    assert rel_err(E(s) @ E(t), E(s + t)) < 1e-9


def test_routes_agree_for_polynomials(rng):
    A = random_block_triangular(rng, [2, 2, 1])
    M = assemble(A)
    for f, ref in [(lambda z: z**2, M @ M), (lambda z: z**3, M @ M @ M)]:
        assert rel_err(assemble(block_function(A, f).matrix), ref) < 1e-9
        assert rel_err(assemble(block_function(A, f, route="oracle").matrix), ref) < 1e-9


@pytest.mark.parametrize("kind, t", [("exp+", 0.8), ("exp-", -0.8), ("g", 1.3), ("g", -0.4)])
def test_kernel_routes_agree(kind, t):
    A = random_block_triangular(np.random.default_rng(7), [2, 1, 2], axis_gap=0.3)
    k = PiecewiseExpKernel(kind, t)
    ref = assemble(block_function(A, k, route="oracle").matrix)
    for route in ("contour_chain", "convolution"):
        assert rel_err(assemble(block_function(A, k, route=route).matrix), ref) < 1e-9


def test_convolution_chain_term_matches_contour(rng):
    A = random_block_triangular(rng, [1, 2, 1], axis_gap=0.3)
    k = PiecewiseExpKernel("g", 0.9)
    chain = Chain((3, 2, 1))
    a = op_dd_convolution(A, k, chain)
    b = op_dd_contour(A, k, chain)
    assert rel_err(a, b) < 1e-9


def test_exp_with_jordan_diagonal_block_falls_back():
    A = BlockLowerTriangular.from_blocks([2, 1], {(1, 1): [[1.0, 0.0], [1.0, 1.0]], (2, 2): [[-1.0]], (2, 1): [[1.0, 0.5]]})
    k = PiecewiseExpKernel("exp+", 1.0)
    ref = expm(assemble(A))
    for route in ("oracle", "contour_chain", "convolution"):
        assert rel_err(assemble(block_function(A, k, route=route).matrix), ref) < 1e-9


def test_convolution_route_needs_kernel(rng):
    A = random_block_triangular(rng, [1, 1])
    with pytest.raises(ValueError):
        block_function(A, np.exp, route="convolution")
    with pytest.raises(ValueError):
        block_function(A, np.exp, route="other")


def test_per_block_terms_recorded(scalar_exp_example):
    res = block_function(scalar_exp_example, np.exp)
    assert [c.indices for c, _ in res.per_block_terms[(2, 1)]] == [(2, 1)]
    assert res.matrix.block(2, 1)[0, 0] == pytest.approx(math.e - 1, abs=1e-12)
