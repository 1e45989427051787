"""Block lower-triangular complex matrices.

Block indices are 1-based everywhere in the public API so that chains such
as ``(3, 2, 1)`` and the ``"i,j"`` keys of the matrix file format read the
same way.  Blocks that are not stored are zero.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Mapping

import numpy as np

from .errors import BlockStructureError, ParseError, SingularBlockError, SpectrumError

#: Reciprocal condition number below which a diagonal block counts as singular.
RCOND_THRESHOLD = 1e-12


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=complex, copy=True)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class BlockPartition:
    """Block dimensions ``n_1, ..., n_k`` of ``X = X_1 + ... + X_k``."""

    sizes: tuple[int, ...]

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.sizes)
        if not sizes:
            raise BlockStructureError("partition needs at least one block")
        if any(s < 1 for s in sizes):
            raise BlockStructureError(f"block sizes must be positive, got {sizes}")
        object.__setattr__(self, "sizes", sizes)

    @property
    def k(self) -> int:
        return len(self.sizes)

    @property
    def total(self) -> int:
        return sum(self.sizes)

    @property
    def offsets(self) -> tuple[int, ...]:
        """Start row of each block, plus ``total`` at the end."""
        out = [0]
        for s in self.sizes:
            out.append(out[-1] + s)
        return tuple(out)

    def slice(self, i: int) -> slice:
        off = self.offsets
        return slice(off[i - 1], off[i])

    def size(self, i: int) -> int:
        return self.sizes[i - 1]


@dataclass(frozen=True)
class BlockLowerTriangular:
    """A matrix in the algebra of lower block-triangular matrices.

    ``blocks`` maps ``(i, j)`` with ``i >= j`` to a dense ``n_i x n_j``
    complex array.  Arrays are copied and made read-only on construction.
    """

    partition: BlockPartition
    blocks: Mapping[tuple[int, int], np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        part = self.partition
        if not isinstance(part, BlockPartition):
            part = BlockPartition(tuple(part))
            object.__setattr__(self, "partition", part)
        clean = {}
        for key, value in self.blocks.items():
            i, j = (int(x) for x in key)
            if not (1 <= j <= i <= part.k):
                raise BlockStructureError(
                    f"block ({i},{j}) is not in the lower triangle of a "
                    f"{part.k}-block partition"
                )
            arr = _frozen(value)
            if arr.shape != (part.size(i), part.size(j)):
                raise BlockStructureError(
                    f"block ({i},{j}) has shape {arr.shape}, "
                    f"expected {(part.size(i), part.size(j))}"
                )
            clean[(i, j)] = arr
        object.__setattr__(self, "blocks", dict(sorted(clean.items())))

    @property
    def k(self) -> int:
        return self.partition.k

    def has(self, i: int, j: int) -> bool:
        return (i, j) in self.blocks

    def block(self, i: int, j: int) -> np.ndarray:
        """Block ``(i, j)``; zeros when absent or above the diagonal."""
        got = self.blocks.get((i, j))
        if got is not None:
            return got
        return np.zeros((self.partition.size(i), self.partition.size(j)), dtype=complex)

    def diag(self, i: int) -> np.ndarray:
        return self.block(i, i)

    def items(self) -> Iterator[tuple[tuple[int, int], np.ndarray]]:
        return iter(self.blocks.items())

    def assemble(self) -> np.ndarray:
        return assemble(self)

    @classmethod
    def from_dense(cls, M, partition, drop_zero=True) -> "BlockLowerTriangular":
        """Cut a dense matrix into lower blocks; upper blocks are discarded."""
        if not isinstance(partition, BlockPartition):
            partition = BlockPartition(tuple(partition))
        M = np.asarray(M, dtype=complex)
        if M.shape != (partition.total, partition.total):
            raise BlockStructureError(
                f"matrix shape {M.shape} does not match partition total {partition.total}"
            )
        blocks = {}
        for i in range(1, partition.k + 1):
            for j in range(1, i + 1):
                b = M[partition.slice(i), partition.slice(j)]
                if i == j or not drop_zero or np.any(b != 0):
                    blocks[(i, j)] = b
        return cls(partition, blocks)

    @classmethod
    def from_blocks(cls, sizes, blocks) -> "BlockLowerTriangular":
        return cls(BlockPartition(tuple(sizes)), blocks)


@dataclass(frozen=True)
class CausalSpectrum:
    """Union of the spectra of the diagonal blocks, with owning block."""

    eigenvalues: np.ndarray
    owners: np.ndarray

    @property
    def gap_to_imaginary_axis(self) -> float:
        return float(np.min(np.abs(self.eigenvalues.real)))

    def of_block(self, i: int) -> np.ndarray:
        return self.eigenvalues[self.owners == i]

    def __len__(self):
        return len(self.eigenvalues)


def assemble(A: BlockLowerTriangular) -> np.ndarray:
    part = A.partition
    M = np.zeros((part.total, part.total), dtype=complex)
    for (i, j), b in A.items():
        M[part.slice(i), part.slice(j)] = b
    return M


def causal_spectrum(A: BlockLowerTriangular) -> CausalSpectrum:
    """Eigenvalues of all diagonal blocks, tagged with their block index."""
    vals, owners = [], []
    for i in range(1, A.k + 1):
        try:
            w = np.linalg.eigvals(A.diag(i))
        except np.linalg.LinAlgError as exc:
            raise SpectrumError(f"eigenvalue solver failed on diagonal block {i}: {exc}") from exc
        if not np.all(np.isfinite(w)):
            raise SpectrumError(f"non-finite eigenvalues in diagonal block {i}")
        vals.append(w)
        owners.append(np.full(len(w), i))
    eig = np.concatenate(vals)
    own = np.concatenate(owners)
    eig.setflags(write=False)
    own.setflags(write=False)
    return CausalSpectrum(eig, own)


def spectral_norm(A: BlockLowerTriangular) -> float:
    """2-norm of the assembled matrix."""
    return float(np.linalg.norm(assemble(A), 2))


def _checked_inverse(T_ii: np.ndarray, index: int) -> np.ndarray:
    if not np.all(np.isfinite(T_ii)):
        raise SingularBlockError(index, 0.0)
    s = np.linalg.svd(T_ii, compute_uv=False)
    rcond = float(s[-1] / s[0]) if s[0] > 0 else 0.0
    if rcond < RCOND_THRESHOLD:
        raise SingularBlockError(index, rcond)
    return np.linalg.inv(T_ii)


def diagonal_inverses(T: BlockLowerTriangular) -> dict[int, np.ndarray]:
    return {i: _checked_inverse(T.diag(i), i) for i in range(1, T.k + 1)}


def _inverse_by_substitution(T, inv):
    k = T.k
    B = {}
    for j in range(1, k + 1):
        B[(j, j)] = inv[j]
        for i in range(j + 1, k + 1):
            acc = np.zeros((T.partition.size(i), T.partition.size(j)), dtype=complex)
            for l in range(j, i):
                if T.has(i, l):
                    acc += T.blocks[(i, l)] @ B[(l, j)]
            B[(i, j)] = -inv[i] @ acc
    return B


def _inverse_by_chains(T, inv):
    from .chaincalc import enumerate_chains

    B = {}
    for i in range(1, T.k + 1):
        for j in range(1, i + 1):
            acc = np.zeros((T.partition.size(i), T.partition.size(j)), dtype=complex)
            for chain in enumerate_chains(i, j, T):
                idx = chain.indices
                term = inv[idx[0]]
                for a, b in zip(idx[:-1], idx[1:]):
                    term = term @ T.blocks[(a, b)] @ inv[b]
                sign = 1 if len(idx) % 2 == 1 else -1
                acc += sign * term
            B[(i, j)] = acc
    return B


def causal_inverse(T: BlockLowerTriangular, method: str = "substitution") -> BlockLowerTriangular:
    """Inverse of a causally invertible block lower-triangular matrix.

    ``method="chains"`` sums signed products over all decreasing index
    chains ``i = i_1 > ... > i_m = j``; ``method="substitution"`` performs
    block forward substitution.  Both give the same lower-triangular result.

    Raises
    ------
    SingularBlockError
        If some diagonal block has reciprocal condition below
        ``RCOND_THRESHOLD``.
    """
    inv = diagonal_inverses(T)
    if method == "substitution":
        B = _inverse_by_substitution(T, inv)
    elif method == "chains":
        B = _inverse_by_chains(T, inv)
    else:
        raise ValueError(f"unknown inversion method {method!r}")
    return BlockLowerTriangular(T.partition, B)


# -- matrix file format ----------------------------------------------------


def _parse_entry(value, where):
    if isinstance(value, (list, tuple)):
        if len(value) != 2 or not all(isinstance(v, (int, float)) for v in value):
            raise ParseError(f"{where}: expected [re, im] pair, got {value!r}")
        return complex(value[0], value[1])
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return complex(value)
    raise ParseError(f"{where}: expected number or [re, im] pair, got {value!r}")


def matrix_from_dict(data) -> BlockLowerTriangular:
    """Build a matrix from the decoded JSON object of the file format."""
    if not isinstance(data, dict):
        raise ParseError("top level: expected an object with 'partition' and 'blocks'")
    if "partition" not in data:
        raise ParseError("missing field 'partition'")
    if "blocks" not in data:
        raise ParseError("missing field 'blocks'")
    sizes = data["partition"]
    if not isinstance(sizes, list) or not all(
        isinstance(s, int) and not isinstance(s, bool) for s in sizes
    ):
        raise ParseError(f"partition: expected a list of integers, got {sizes!r}")
    try:
        part = BlockPartition(tuple(sizes))
    except BlockStructureError as exc:
        raise ParseError(f"partition: {exc}") from exc
    raw = data["blocks"]
    if not isinstance(raw, dict):
        raise ParseError("blocks: expected an object keyed by 'i,j'")
    blocks = {}
    for key, rows in raw.items():
        where = f"blocks[{key!r}]"
        try:
            i, j = (int(p) for p in key.split(","))
        except ValueError:
            raise ParseError(f"{where}: key must look like 'i,j'") from None
        if i < j:
            raise ParseError(f"{where}: upper block (i < j) not allowed in a lower-triangular matrix")
        if not (1 <= j and i <= part.k):
            raise ParseError(f"{where}: index out of range for {part.k} blocks")
        if not isinstance(rows, list) or len(rows) != part.size(i):
            raise ParseError(f"{where}: expected {part.size(i)} rows")
        mat = np.empty((part.size(i), part.size(j)), dtype=complex)
        for r, row in enumerate(rows):
            if not isinstance(row, list) or len(row) != part.size(j):
                raise ParseError(f"{where} row {r}: expected {part.size(j)} entries")
            for c, entry in enumerate(row):
                mat[r, c] = _parse_entry(entry, f"{where} row {r} col {c}")
        blocks[(i, j)] = mat
    for i in range(1, part.k + 1):
        blocks.setdefault((i, i), np.zeros((part.size(i), part.size(i))))
    return BlockLowerTriangular(part, blocks)


def matrix_to_dict(A: BlockLowerTriangular) -> dict:
    return {
        "partition": list(A.partition.sizes),
        "blocks": {
            f"{i},{j}": [[[float(z.real), float(z.imag)] for z in row] for row in b]
            for (i, j), b in A.items()
        },
    }


def load_matrix(path) -> BlockLowerTriangular:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    try:
        return matrix_from_dict(data)
    except ParseError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def save_matrix(A: BlockLowerTriangular, path) -> None:
    Path(path).write_text(json.dumps(matrix_to_dict(A), indent=1) + "\n")
