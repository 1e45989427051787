import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from greenblocks import (
    BlockLowerTriangular,
    BlockPartition,
    BlockStructureError,
    ParseError,
    SingularBlockError,
    assemble,
    causal_inverse,
    causal_spectrum,
    load_matrix,
    save_matrix,
)
from greenblocks.blockmat import matrix_from_dict, matrix_to_dict, spectral_norm
from greenblocks.generate import random_block_triangular, random_invertible_triangular


def test_partition_offsets_and_slices():
    p = BlockPartition((2, 1, 3))
    assert p.k == 3 and p.total == 6
    assert p.offsets == (0, 2, 3, 6)
    assert p.slice(2) == slice(2, 3)
    assert p.size(3) == 3


@pytest.mark.parametrize("sizes", [(), (0, 2), (-1,)])
def test_partition_rejects_bad_sizes(sizes):
    with pytest.raises(BlockStructureError):
        BlockPartition(sizes)


def test_upper_block_rejected():
    with pytest.raises(BlockStructureError):
        BlockLowerTriangular.from_blocks([1, 1], {(1, 1): [[1]], (2, 2): [[1]], (1, 2): [[1]]})


def test_shape_mismatch_rejected():
    with pytest.raises(BlockStructureError):
        BlockLowerTriangular.from_blocks([2, 1], {(1, 1): [[1]], (2, 2): [[1]]})


def test_blocks_are_read_only():
    A = BlockLowerTriangular.from_blocks([1, 1], {(1, 1): [[1]], (2, 2): [[2]]})
    with pytest.raises(ValueError):
        A.blocks[(1, 1)][0, 0] = 5


def test_assemble_places_blocks(scalar_green_example):
    M = assemble(scalar_green_example)
    np.testing.assert_array_equal(M, [[-1, 0], [1, 1]])


def test_from_dense_roundtrip(rng):
    A = random_block_triangular(rng, [2, 1, 3])
    B = BlockLowerTriangular.from_dense(assemble(A), A.partition)
    np.testing.assert_array_equal(assemble(B), assemble(A))


def test_from_dense_discards_upper_part():
    A = BlockLowerTriangular.from_dense(np.array([[1.0, 7.0], [0.0, 1.0]]), BlockPartition((1, 1)))
    np.testing.assert_array_equal(assemble(A), np.eye(2))
    assert not A.has(2, 1)


def test_from_dense_rejects_wrong_shape():
    with pytest.raises(BlockStructureError):
        BlockLowerTriangular.from_dense(np.eye(3), BlockPartition((1, 1)))


def test_causal_spectrum_is_union_of_block_spectra(rng):
    A = random_block_triangular(rng, [2, 3, 1])
    spec = causal_spectrum(A)
    dense = np.linalg.eigvals(assemble(A))
    assert sorted(spec.eigenvalues, key=lambda z: (z.real, z.imag)) == pytest.approx(
        sorted(dense, key=lambda z: (z.real, z.imag)), abs=1e-10
    )
    assert len(spec.of_block(2)) == 3


def test_gap_to_axis(scalar_green_example):
    assert causal_spectrum(scalar_green_example).gap_to_imaginary_axis == pytest.approx(1.0)


def test_spectral_norm_matches_dense(rng):
    A = random_block_triangular(rng, [2, 2])
    assert spectral_norm(A) == pytest.approx(np.linalg.norm(assemble(A), 2))


def test_scalar_inverse_closed_form():
    T = BlockLowerTriangular.from_blocks([1, 1], {(1, 1): [[2.0]], (2, 1): [[1.0]], (2, 2): [[4.0]]})
    inv = assemble(causal_inverse(T))
    np.testing.assert_allclose(inv, [[0.5, 0], [-1 / 8, 0.25]], atol=1e-15)


def test_singular_diagonal_block_named():
    T = BlockLowerTriangular.from_blocks([1, 2], {(1, 1): [[1.0]], (2, 2): [[1.0, 1.0], [1.0, 1.0]]})
    with pytest.raises(SingularBlockError) as info:
        causal_inverse(T)
    assert info.value.index == 2


def test_unknown_inverse_method():
    T = BlockLowerTriangular.from_blocks([1], {(1, 1): [[1.0]]})
    with pytest.raises(ValueError):
        causal_inverse(T, method="magic")


@given(seed=st.integers(0, 2**32 - 1), sizes=st.lists(st.integers(1, 4), min_size=2, max_size=4))
def test_inverse_round_trip(seed, sizes):
    T = random_invertible_triangular(np.random.default_rng(seed), sizes)
    n = sum(sizes)
    inv = assemble(causal_inverse(T))
    M = assemble(T)
    assert np.linalg.norm(inv @ M - np.eye(n)) < 1e-8
    assert np.linalg.norm(M @ inv - np.eye(n)) < 1e-8


@given(seed=st.integers(0, 2**32 - 1), sizes=st.lists(st.integers(1, 3), min_size=2, max_size=5))
def test_substitution_matches_chain_sum(seed, sizes):
    T = random_invertible_triangular(np.random.default_rng(seed), sizes)
    a = assemble(causal_inverse(T))
    b = assemble(causal_inverse(T, method="chains"))
    assert np.linalg.norm(a - b) <= 1e-10 * max(1.0, np.linalg.norm(a))


def test_inverse_keeps_structure(rng):
    T = random_invertible_triangular(rng, [2, 2, 1])
    inv = causal_inverse(T)
    assert inv.partition == T.partition
    assert all(i >= j for (i, j), _ in inv.items())


def test_json_round_trip(tmp_path, rng):
    A = random_block_triangular(rng, [2, 1])
    path = tmp_path / "m.json"
    save_matrix(A, path)
    B = load_matrix(path)
    np.testing.assert_array_equal(assemble(A), assemble(B))


def test_dict_round_trip_keeps_sparsity():
    A = BlockLowerTriangular.from_blocks([1, 1, 1], {(1, 1): [[1]], (2, 2): [[2]], (3, 3): [[3]], (3, 1): [[4]]})
    B = matrix_from_dict(json.loads(json.dumps(matrix_to_dict(A))))
    assert B.has(3, 1) and not B.has(2, 1)


def test_complex_entries_parse():
    A = matrix_from_dict({"partition": [1], "blocks": {"1,1": [[[1.0, 2.0]]]}})
    assert A.diag(1)[0, 0] == 1 + 2j


def test_missing_diagonal_defaults_to_zero():
    A = matrix_from_dict({"partition": [1, 1], "blocks": {"1,1": [[1]]}})
    assert A.diag(2)[0, 0] == 0


@pytest.mark.parametrize(
    "data, fragment",
    [
        ({"blocks": {}}, "partition"),
        ({"partition": [1]}, "blocks"),
        ({"partition": "x", "blocks": {}}, "partition"),
        ({"partition": [1, 1], "blocks": {"1,2": [[1]]}}, "1,2"),
        ({"partition": [1], "blocks": {"a": [[1]]}}, "i,j"),
        ({"partition": [2], "blocks": {"1,1": [[1, 2]]}}, "rows"),
        ({"partition": [1], "blocks": {"1,1": [["x"]]}}, "row 0 col 0"),
    ],
)
def test_parse_errors_name_the_field(data, fragment):
    with pytest.raises(ParseError) as info:
        matrix_from_dict(data)
    assert fragment in str(info.value)


def test_malformed_json_reports_line(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{\n "partition": [1],\n "blocks": {\n')
    with pytest.raises(ParseError) as info:
        load_matrix(path)
    assert "line" in str(info.value)
