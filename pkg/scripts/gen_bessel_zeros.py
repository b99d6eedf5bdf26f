"""Regenerate the tabulated zeros of J_0..J_4 used for near-zero refinement.

Each zero is stored as an unevaluated sum hi + lo of two doubles.
Requires mpmath (a test-only dependency).
"""

import csv
import sys
from pathlib import Path

import mpmath as mp

X_MAX = 200.0
OUT = Path(__file__).resolve().parents[1] / "src" / "waveop4d" / "data" / "bessel_j_zeros.csv"


def main() -> None:
    mp.mp.dps = 40
    with open(OUT, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["order", "k", "hi", "lo"])
        for n in range(5):
            k = 1
            while True:
                z = mp.besseljzero(n, k)
                if z > X_MAX:
                    break
                hi = float(z)
                lo = float(z - mp.mpf(hi))
                w.writerow([n, k, repr(hi), repr(lo)])
                k += 1
    print(f"wrote {OUT}", file=sys.stderr)


if __name__ == "__main__":
    main()
