import hashlib
import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from melmask.quant import (ACC_MAX, Q8, Q16, AccumulatorOverflowError,
                           QuantFormat, QuantTensor, dequantize, mac,
                           quantize, requantize, requantize_product,
                           rshift_round_half_even)

GOLDEN = json.loads((Path(__file__).parent.parent / "golden" / "quant_golden.json").read_text())


def test_format_constants():
    assert Q8.qmin == -128 and Q8.qmax == 127 and Q8.scale == 128
    assert Q16.qmin == -32768 and Q16.qmax == 32767 and Q16.scale == 32768
    with pytest.raises(ValueError):
        QuantFormat(bits=12, frac_bits=11)
    with pytest.raises(ValueError):
        QuantFormat(bits=8, frac_bits=8)


def test_quantize_examples():
    assert quantize(0.0, Q8) == 0
    assert quantize(0.5, Q8) == 64
    assert quantize(1.5, Q8) == 127
    assert quantize(-1.0, Q8) == -128


def test_dequantize_examples():
    assert dequantize(64, Q8) == 0.5
    assert dequantize(-128, Q8) == -1.0


def test_round_half_even_ties():
    # exact half codes round toward the even neighbor
    assert quantize(1 / 256, Q8) == 0
    assert quantize(3 / 256, Q8) == 2
    assert quantize(-1 / 256, Q8) == 0
    assert quantize(-3 / 256, Q8) == -2


def test_mac_examples():
    assert mac(0, 0, 77) == 0
    assert mac(10, 3, -4) == -2


def test_mac_overflow_checked():
    with pytest.raises(AccumulatorOverflowError):
        mac(ACC_MAX, 1, 1)


def test_mac_fold_matches_bigint_dot():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        n = rng.integers(1, 64)
        a = rng.integers(-128, 128, n)
        b = rng.integers(-128, 128, n)
        acc = 0
        for x, y in zip(a, b):
            acc = mac(acc, int(x), int(y))
        assert acc == sum(int(x) * int(y) for x, y in zip(a, b))


def test_requantize_examples():
    assert requantize(0, Q8, Q8) == 0
    assert requantize(128 * 128, Q8, Q8) == 127  # ideal 1.0 saturates
    assert requantize(64 * 64, Q8, Q8) == 32     # 0.25 exactly
    assert requantize_product(quantize(0.5, Q8) * quantize(0.5, Q16), Q8, Q16, Q16) \
        == quantize(0.25, Q16)


def test_rshift_round_half_even_scalar_and_array():
    assert rshift_round_half_even(5, 1) == 2   # 2.5 -> 2
    assert rshift_round_half_even(7, 1) == 4   # 3.5 -> 4
    assert rshift_round_half_even(-5, 1) == -2
    assert rshift_round_half_even(-7, 1) == -4
    arr = np.array([5, 7, -5, -7, 8])
    assert rshift_round_half_even(arr, 1).tolist() == [2, 4, -2, -4, 4]


@given(st.floats(min_value=-4, max_value=4, allow_nan=False), st.sampled_from([8, 16]))
@settings(max_examples=300)
def test_round_trip_bound(x, bits):
    fmt = Q8 if bits == 8 else Q16
    q = quantize(x, fmt)
    clamped = min(max(x, -1.0), 1.0 - fmt.lsb)
    assert abs(dequantize(q, fmt) - clamped) <= fmt.lsb / 2 + 1e-15


@given(st.floats(-2, 2, allow_nan=False), st.floats(-2, 2, allow_nan=False))
@settings(max_examples=300)
def test_saturation_monotonicity(x, y):
    lo, hi = sorted((x, y))
    assert quantize(lo, Q8) <= quantize(hi, Q8)
    assert quantize(lo, Q16) <= quantize(hi, Q16)


def test_quantize_vectorized_matches_scalar():
    rng = np.random.default_rng(1)
    xs = rng.uniform(-1.5, 1.5, 257)
    vec = quantize(xs, Q8)
    assert vec.dtype == np.int8
    assert vec.tolist() == [quantize(float(v), Q8) for v in xs]


def test_quant_tensor_validates_range():
    QuantTensor(np.array([-128, 127], dtype=np.int64), Q8)
    with pytest.raises(ValueError):
        QuantTensor(np.array([300]), Q8)


def _golden_sequence(fmt):
    seq = []
    for q in range(fmt.qmin, fmt.qmax + 1):
        seq.append(quantize(q / fmt.scale, fmt))
        seq.append(quantize((q + 0.5) / fmt.scale, fmt))
    for k in range(17):
        seq.append(quantize(1 + k / 8, fmt))
        seq.append(quantize(-(1 + k / 8), fmt))
    return seq


@pytest.mark.parametrize("bits,fmt", [(8, Q8), (16, Q16)])
def test_golden_vectors(bits, fmt):
    seq = _golden_sequence(fmt)
    digest = hashlib.sha256(",".join(str(v) for v in seq).encode()).hexdigest()
    assert len(seq) == GOLDEN[f"q{bits}"]["length"]
    assert digest == GOLDEN[f"q{bits}"]["sha256"]


def test_golden_samples():
    from fractions import Fraction
    for s in GOLDEN["samples"]:
        fmt = Q8 if s["bits"] == 8 else Q16
        assert quantize(float(Fraction(s["x"])), fmt) == s["q"]
