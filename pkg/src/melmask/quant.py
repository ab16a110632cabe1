"""Fixed-point formats and saturating integer arithmetic.

Every weight and activation in the engine lives in a symmetric [-1, 1)
fixed-point format; accumulators are 32-bit. All rounding is round half
to even so results are bit-identical across runs and platforms.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ACC_MIN = -(1 << 31)
ACC_MAX = (1 << 31) - 1


class AccumulatorOverflowError(ArithmeticError):
    """A MAC chain exceeded the 32-bit accumulator contract."""


@dataclass(frozen=True)
class QuantFormat:
    """Signed fixed-point format with range [-1, 1 - 2**-frac_bits]."""

    bits: int
    frac_bits: int

    def __post_init__(self):
        if self.bits not in (8, 16):
            raise ValueError(f"bits must be 8 or 16, got {self.bits}")
        if self.frac_bits != self.bits - 1:
            raise ValueError("frac_bits must be bits - 1")

    @property
    def qmin(self) -> int:
        return -(1 << (self.bits - 1))

    @property
    def qmax(self) -> int:
        return (1 << (self.bits - 1)) - 1

    @property
    def scale(self) -> int:
        """Integer codes per unit, 2**frac_bits."""
        return 1 << self.frac_bits

    @property
    def dtype(self):
        return np.int8 if self.bits == 8 else np.int16

    @property
    def lsb(self) -> float:
        return 1.0 / self.scale


Q8 = QuantFormat(bits=8, frac_bits=7)
Q16 = QuantFormat(bits=16, frac_bits=15)


@dataclass(frozen=True)
class QuantTensor:
    """Integer tensor plus the format its codes are expressed in."""

    data: np.ndarray
    fmt: QuantFormat

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.dtype != self.fmt.dtype:
            if np.any(data < self.fmt.qmin) or np.any(data > self.fmt.qmax):
                raise ValueError("values outside format range")
            data = data.astype(self.fmt.dtype)
        object.__setattr__(self, "data", data)

    @property
    def shape(self):
        return self.data.shape

    def dequantized(self) -> np.ndarray:
        return dequantize(self.data, self.fmt)


def quantize(x, fmt: QuantFormat):
    """Round a real value (or array) to the nearest code, saturating.

    Round half to even; never fails. NaN maps to 0.
    """
    scaled = np.rint(np.nan_to_num(np.asarray(x, dtype=np.float64)) * fmt.scale)
    q = np.clip(scaled, fmt.qmin, fmt.qmax).astype(np.int64)
    if np.isscalar(x) or np.ndim(x) == 0:
        return int(q)
    return q.astype(fmt.dtype)


def dequantize(q, fmt: QuantFormat):
    """Map codes back to real values, q / 2**frac_bits."""
    if np.isscalar(q) or np.ndim(q) == 0:
        return float(q) / fmt.scale
    return np.asarray(q, dtype=np.float64) / fmt.scale


def quantize_tensor(x, fmt: QuantFormat) -> QuantTensor:
    return QuantTensor(quantize(np.atleast_1d(np.asarray(x, dtype=np.float64)), fmt), fmt)


def mac(acc: int, a: int, b: int) -> int:
    """One multiply-accumulate step, exact integer arithmetic."""
    out = acc + a * b
    if out < ACC_MIN or out > ACC_MAX:
        raise AccumulatorOverflowError(f"accumulator {out} exceeds 32 bits")
    return out


def check_acc_range(acc) -> None:
    """Raise if any accumulator value left the 32-bit envelope."""
    a = np.asarray(acc)
    if a.size and (a.min() < ACC_MIN or a.max() > ACC_MAX):
        raise AccumulatorOverflowError("accumulator exceeds 32 bits")


def rshift_round_half_even(v, shift: int):
    """Arithmetic right shift with round-half-to-even tie breaking.

    Works on Python ints and integer ndarrays; exact for negatives
    (floor-division semantics keep the remainder nonnegative).
    """
    if shift == 0:
        return v
    half = 1 << (shift - 1)
    if isinstance(v, (int, np.integer)):
        q = int(v) >> shift
        r = int(v) - (q << shift)
        if r > half or (r == half and (q & 1)):
            q += 1
        return q
    v = np.asarray(v)
    q = v >> shift
    r = v - (q << shift)
    q = q + ((r > half) | ((r == half) & ((q & 1) == 1)))
    return q


def requantize(acc, in_fmt: QuantFormat, out_fmt: QuantFormat):
    """Rescale a sum of in_fmt*in_fmt products to out_fmt codes, saturating."""
    return requantize_product(acc, in_fmt, in_fmt, out_fmt)


def requantize_product(acc, fmt_a: QuantFormat, fmt_b: QuantFormat, out_fmt: QuantFormat):
    """Rescale a sum of fmt_a*fmt_b products to out_fmt codes, saturating.

    A finer output format than the product scale is an exact left shift.
    """
    shift = fmt_a.frac_bits + fmt_b.frac_bits - out_fmt.frac_bits
    if shift < 0:
        scaled = np.asarray(acc) << -shift if not isinstance(acc, (int, np.integer)) \
            else int(acc) << -shift
    else:
        scaled = rshift_round_half_even(acc, shift)
    if isinstance(scaled, (int, np.integer)):
        return int(min(max(scaled, out_fmt.qmin), out_fmt.qmax))
    return np.clip(scaled, out_fmt.qmin, out_fmt.qmax).astype(np.int64)
