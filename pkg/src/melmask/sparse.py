"""Sparse weight encodings and their integer matvec kernels.

Three structures are supported: unstructured per-weight sparsity (CSR-style
payload), 1x8 block sparsity (BSR-style payload, whole blocks of eight
weights are kept or dropped so a SIMD MAC cycle can be skipped), and unit
sparsity (whole output rows removed, stored as a smaller dense matrix plus
the surviving row/column indices).

All kernels accumulate in exact integer arithmetic, so a sparse matvec is
bit-identical to a dense matvec over the decoded matrix.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .quant import QuantFormat, QuantTensor, check_acc_range, requantize_product


class StructureKind(enum.Enum):
    WEIGHT = "weight"
    BLOCK = "block"
    UNIT = "unit"


@dataclass(frozen=True)
class SparsityStructure:
    """Pruning granularity: single weights, 1x8 blocks, or whole units."""

    kind: StructureKind
    block_w: int = 1
    block_h: int = 1

    def __post_init__(self):
        if self.block_h != 1:
            raise ValueError("only 1-row-high groups are supported")
        if self.kind is StructureKind.BLOCK and self.block_w < 2:
            raise ValueError("block structure needs block_w >= 2")

    @staticmethod
    def weight() -> "SparsityStructure":
        return SparsityStructure(StructureKind.WEIGHT, block_w=1)

    @staticmethod
    def block(block_w: int = 8) -> "SparsityStructure":
        return SparsityStructure(StructureKind.BLOCK, block_w=block_w)

    @staticmethod
    def unit() -> "SparsityStructure":
        # Degenerate block the width of a full row; rows live or die whole.
        return SparsityStructure(StructureKind.UNIT, block_w=0)


def structure_from_name(name: str) -> SparsityStructure:
    try:
        kind = StructureKind(name)
    except ValueError:
        raise ValueError(f"unknown structure {name!r}") from None
    if kind is StructureKind.WEIGHT:
        return SparsityStructure.weight()
    if kind is StructureKind.BLOCK:
        return SparsityStructure.block()
    return SparsityStructure.unit()


@dataclass
class PruneMask:
    """Boolean keep/drop decision per weight of one matrix."""

    rows: int
    cols: int
    bits: np.ndarray

    def __post_init__(self):
        self.bits = np.asarray(self.bits, dtype=bool)
        if self.bits.shape != (self.rows, self.cols):
            raise ValueError("mask shape mismatch")

    @staticmethod
    def all_true(rows: int, cols: int) -> "PruneMask":
        return PruneMask(rows, cols, np.ones((rows, cols), dtype=bool))


class KernelStats:
    """Counts MAC groups actually executed by the kernels."""

    def __init__(self):
        self.mac_groups = 0
        self.macs = 0

    def add(self, groups: int, macs: int):
        self.mac_groups += groups
        self.macs += macs


class GroupConsistencyError(ValueError):
    """Mask does not respect the requested group structure."""


def _segment_sums(contrib: np.ndarray, row_ptr: np.ndarray, rows: int) -> np.ndarray:
    """Sum contributions per CSR row, exact int64, tolerating empty rows."""
    if len(contrib) == 0:
        return np.zeros(rows, dtype=np.int64)
    csum = np.zeros(len(contrib) + 1, dtype=np.int64)
    np.cumsum(contrib, out=csum[1:])
    return csum[row_ptr[1:]] - csum[row_ptr[:-1]]


@dataclass
class SparseMatrix:
    """One pruned weight matrix in its structure-specific encoding.

    rows/cols are always the logical (pre-pruning) dimensions. Immutable
    after construction; kernels are pure.
    """

    structure: SparsityStructure
    rows: int
    cols: int
    fmt: QuantFormat
    # WEIGHT payload
    row_ptr: np.ndarray | None = None
    col_idx: np.ndarray | None = None
    values: np.ndarray | None = None
    # BLOCK payload (reuses row_ptr for block rows)
    block_col: np.ndarray | None = None
    blocks: np.ndarray | None = None
    # UNIT payload
    kept_rows: np.ndarray | None = None
    kept_cols: np.ndarray | None = None
    dense: np.ndarray | None = None

    @property
    def kind(self) -> StructureKind:
        return self.structure.kind

    # -- encoding-dependent accounting ------------------------------------

    def stored_weight_count(self) -> int:
        """Number of logical weights still present (padding excluded)."""
        if self.kind is StructureKind.WEIGHT:
            return int(len(self.values))
        if self.kind is StructureKind.BLOCK:
            bw = self.structure.block_w
            starts = self.block_col.astype(np.int64) * bw
            return int(np.minimum(self.cols - starts, bw).sum()) if len(starts) else 0
        return int(len(self.kept_rows) * len(self.kept_cols))

    def value_bytes(self) -> int:
        """Bytes spent on stored weight values (padding lanes included)."""
        per = self.fmt.bits // 8
        if self.kind is StructureKind.WEIGHT:
            return len(self.values) * per
        if self.kind is StructureKind.BLOCK:
            return self.blocks.size * per
        return self.dense.size * per

    def index_bytes(self) -> int:
        """Bytes of structural metadata accompanying the values."""
        if self.kind is StructureKind.WEIGHT:
            return 2 * len(self.col_idx) + 4 * (self.rows + 1)
        if self.kind is StructureKind.BLOCK:
            return 2 * len(self.block_col) + 4 * (self.rows + 1)
        return 2 * (len(self.kept_rows) + len(self.kept_cols))

    # -- reconstruction ----------------------------------------------------

    def decode(self) -> QuantTensor:
        """Dense rows x cols matrix with pruned entries zeroed."""
        out = np.zeros((self.rows, self.cols), dtype=np.int64)
        if self.kind is StructureKind.WEIGHT:
            rows = np.repeat(np.arange(self.rows), np.diff(self.row_ptr))
            out[rows, self.col_idx] = self.values
        elif self.kind is StructureKind.BLOCK:
            bw = self.structure.block_w
            rows = np.repeat(np.arange(self.rows), np.diff(self.row_ptr))
            for r, bc, blk in zip(rows, self.block_col, self.blocks):
                lo = int(bc) * bw
                hi = min(lo + bw, self.cols)
                out[r, lo:hi] = blk[: hi - lo]
        else:
            out[np.ix_(self.kept_rows, self.kept_cols)] = self.dense
        return QuantTensor(out, self.fmt)

    def mask(self) -> PruneMask:
        """Keep/drop pattern implied by the stored payload."""
        bits = np.zeros((self.rows, self.cols), dtype=bool)
        if self.kind is StructureKind.WEIGHT:
            rows = np.repeat(np.arange(self.rows), np.diff(self.row_ptr))
            bits[rows, self.col_idx] = True
        elif self.kind is StructureKind.BLOCK:
            bw = self.structure.block_w
            rows = np.repeat(np.arange(self.rows), np.diff(self.row_ptr))
            for r, bc in zip(rows, self.block_col):
                lo = int(bc) * bw
                bits[r, lo : min(lo + bw, self.cols)] = True
        else:
            bits[np.ix_(self.kept_rows, self.kept_cols)] = True
        return PruneMask(self.rows, self.cols, bits)

    # -- kernels -------------------------------------------------------------

    def matvec_acc(self, x: np.ndarray, stats: KernelStats | None = None,
                   reduced: bool = False) -> np.ndarray:
        """Row accumulators (int64, unscaled) for this matrix times x.

        For UNIT matrices, ``reduced=True`` takes a kept-length input and
        returns kept-length accumulators; otherwise full-length semantics
        with zeros in pruned rows.
        """
        x = np.asarray(x, dtype=np.int64)
        if self.kind is StructureKind.UNIT:
            if reduced or len(x) == len(self.kept_cols) != self.cols:
                xk = x
                if len(xk) != len(self.kept_cols):
                    raise ValueError("input length mismatch")
            elif len(x) == self.cols:
                xk = x[self.kept_cols]
            else:
                raise ValueError("input length mismatch")
            acc_kept = self.dense.astype(np.int64) @ xk
            if stats is not None:
                stats.add(len(self.kept_rows), self.dense.size)
            check_acc_range(acc_kept)
            if reduced:
                return acc_kept
            acc = np.zeros(self.rows, dtype=np.int64)
            acc[self.kept_rows] = acc_kept
            return acc
        if len(x) != self.cols:
            raise ValueError("input length mismatch")
        if self.kind is StructureKind.WEIGHT:
            contrib = self.values.astype(np.int64) * x[self.col_idx]
            acc = _segment_sums(contrib, self.row_ptr, self.rows)
            if stats is not None:
                stats.add(len(self.values), len(self.values))
        else:
            bw = self.structure.block_w
            pad = -self.cols % bw
            xp = np.concatenate([x, np.zeros(pad, dtype=np.int64)]) if pad else x
            lanes = self.block_col.astype(np.int64)[:, None] * bw + np.arange(bw)
            contrib = (self.blocks.astype(np.int64) * xp[lanes]).sum(axis=1)
            acc = _segment_sums(contrib, self.row_ptr, self.rows)
            if stats is not None:
                stats.add(len(self.block_col), len(self.block_col) * bw)
        check_acc_range(acc)
        return acc


def _unit_pattern(mask: PruneMask):
    """Validate a unit mask and return (kept_rows, kept_cols)."""
    row_keep = mask.bits.any(axis=1)
    col_keep = mask.bits.any(axis=0)
    if not np.array_equal(mask.bits, np.outer(row_keep, col_keep)):
        raise GroupConsistencyError("unit mask is not a row x column keep pattern")
    return np.flatnonzero(row_keep), np.flatnonzero(col_keep)


def encode(dense: QuantTensor, mask: PruneMask, structure: SparsityStructure) -> SparseMatrix:
    """Encode a dense matrix under a mask into the structure's payload.

    Rejects masks that are inconsistent with the group structure (e.g. a
    half-pruned block). Kept entries survive exactly, so decode(encode(d))
    equals d with pruned entries zeroed.
    """
    w = np.asarray(dense.data)
    if w.ndim != 2:
        raise ValueError("encode expects a 2-D tensor")
    rows, cols = w.shape
    if (mask.rows, mask.cols) != (rows, cols):
        raise ValueError("mask shape mismatch")
    bits = mask.bits
    if structure.kind is StructureKind.WEIGHT:
        r_of, c_of = np.nonzero(bits)
        row_ptr = np.zeros(rows + 1, dtype=np.int64)
        row_ptr[1:] = np.cumsum(np.bincount(r_of, minlength=rows))
        return SparseMatrix(structure, rows, cols, dense.fmt,
                            row_ptr=row_ptr, col_idx=c_of.astype(np.int32),
                            values=w[r_of, c_of].astype(dense.fmt.dtype))
    if structure.kind is StructureKind.BLOCK:
        bw = structure.block_w
        nb = -(-cols // bw)
        padded = np.zeros((rows, nb * bw), dtype=bool)
        padded[:, :cols] = bits
        grouped = padded.reshape(rows, nb, bw)
        keep = grouped.any(axis=2)
        real_lane = np.arange(nb * bw).reshape(nb, bw) < cols
        if not np.array_equal(grouped, keep[:, :, None] & real_lane[None, :, :]):
            raise GroupConsistencyError("mask splits a block")
        row_ptr = np.zeros(rows + 1, dtype=np.int64)
        row_ptr[1:] = np.cumsum(keep.sum(axis=1))
        r_of, bc = np.nonzero(keep)
        wpad = np.zeros((rows, nb * bw), dtype=np.int64)
        wpad[:, :cols] = w
        blocks = wpad.reshape(rows, nb, bw)[r_of, bc]
        return SparseMatrix(structure, rows, cols, dense.fmt,
                            row_ptr=row_ptr, block_col=bc.astype(np.int32),
                            blocks=blocks.astype(dense.fmt.dtype))
    kept_r, kept_c = _unit_pattern(mask)
    return SparseMatrix(structure, rows, cols, dense.fmt,
                        kept_rows=kept_r, kept_cols=kept_c,
                        dense=w[np.ix_(kept_r, kept_c)].astype(dense.fmt.dtype))


def decode(m: SparseMatrix) -> QuantTensor:
    return m.decode()


def sparsity(m: SparseMatrix) -> float:
    """Fraction of logical weights pruned, in [0, 1]."""
    total = m.rows * m.cols
    return 1.0 - m.stored_weight_count() / total if total else 0.0


def dense_matvec_acc(w: QuantTensor, x: np.ndarray,
                     stats: KernelStats | None = None) -> np.ndarray:
    """Reference dense kernel: exact int64 row accumulators."""
    wm = np.asarray(w.data, dtype=np.int64)
    acc = wm @ np.asarray(x, dtype=np.int64)
    if stats is not None:
        stats.add(wm.shape[0], wm.size)
    check_acc_range(acc)
    return acc


def spmv(m: SparseMatrix, x: QuantTensor, out_fmt: QuantFormat,
         stats: KernelStats | None = None) -> QuantTensor:
    """Sparse matrix times quantized vector, requantized to out_fmt.

    Bit-identical to the dense kernel over m.decode() by construction.
    """
    acc = m.matvec_acc(np.asarray(x.data), stats=stats)
    out = requantize_product(acc, m.fmt, x.fmt, out_fmt)
    return QuantTensor(np.clip(out, out_fmt.qmin, out_fmt.qmax).astype(out_fmt.dtype), out_fmt)
