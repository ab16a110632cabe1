#!/usr/bin/env python3
"""Generate the quantizer golden-vector file shared by both test suites.

Expected codes are computed with exact rational arithmetic (round half to
even, then saturate), deliberately independent of the package under test.

Sequence definition, per format (scale = 2**frac_bits, codes [qmin, qmax]):
  for q in qmin..qmax:
    emit quantize(q / scale)          -> q (identity on representable values)
    emit quantize((q + 1/2) / scale)  -> tie, rounds to the even neighbor
  for k in 0..16:
    emit quantize(+(1 + k/8))         -> qmax (saturation)
    emit quantize(-(1 + k/8))         -> qmin
The digest is sha256 over the comma-joined decimal codes.
"""
import hashlib
import json
import sys
from fractions import Fraction
from pathlib import Path


def round_half_even(x: Fraction) -> int:
    floor = x.numerator // x.denominator
    rem = x - floor
    if rem > Fraction(1, 2):
        return floor + 1
    if rem < Fraction(1, 2):
        return floor
    return floor if floor % 2 == 0 else floor + 1


def quantize_exact(x: Fraction, scale: int, qmin: int, qmax: int) -> int:
    return min(max(round_half_even(x * scale), qmin), qmax)


def sequence(bits: int):
    scale = 1 << (bits - 1)
    qmin, qmax = -scale, scale - 1
    out = []
    for q in range(qmin, qmax + 1):
        out.append(quantize_exact(Fraction(q, scale), scale, qmin, qmax))
        out.append(quantize_exact(Fraction(2 * q + 1, 2 * scale), scale, qmin, qmax))
    for k in range(17):
        x = Fraction(8 + k, 8)
        out.append(quantize_exact(x, scale, qmin, qmax))
        out.append(quantize_exact(-x, scale, qmin, qmax))
    return out


def main():
    golden = {"version": 1, "sequence_rule": __doc__.strip()}
    for bits in (8, 16):
        seq = sequence(bits)
        digest = hashlib.sha256(",".join(str(v) for v in seq).encode()).hexdigest()
        golden[f"q{bits}"] = {"length": len(seq), "sha256": digest}
    # a few spot samples for debuggability, exact inputs as fraction strings
    golden["samples"] = [
        {"bits": 8, "x": "0", "q": 0},
        {"bits": 8, "x": "1/2", "q": 64},
        {"bits": 8, "x": "3/2", "q": 127},
        {"bits": 8, "x": "-1", "q": -128},
        {"bits": 8, "x": "1/256", "q": 0},    # tie at 0.5 code, rounds to even 0
        {"bits": 8, "x": "3/256", "q": 2},    # tie at 1.5 code, rounds to even 2
        {"bits": 16, "x": "1/2", "q": 16384},
        {"bits": 16, "x": "1/65536", "q": 0},
        {"bits": 16, "x": "3/65536", "q": 2},
        {"bits": 16, "x": "-2", "q": -32768},
    ]
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("golden/quant_golden.json")
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(golden, indent=2) + "\n")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
