"""Why a kernel of size <x>^-2 <y>^-3 on |y| > 2|x| cannot be bounded on every
L^p: test it against the indicator of the shell R < |y| < 2R. The norm ratio
decays for p = 2 but grows like R^(1/2) at p = 8, while one more power of
<y> keeps it bounded. A ring kernel <x>^-3 <|x|-|y|>^-1 shows the companion
logarithmic failure.

Run: python3 demos/03_lp_counterexample.py
"""

import numpy as np

from waveop4d.bounds_lab import annulus_log_probe, lp_growth_probe

radii = (1e3, 1e4, 1e5)
for a, b, p in [(2, 3, 2), (2, 3, 8), (2, 4, 8)]:
    ratios = lp_growth_probe(a, b, p, radii)
    slope = np.polyfit(np.log(radii), np.log(ratios), 1)[0]
    print(f"<x>^-{a}<y>^-{b}, p={p}: ratios {', '.join(f'{v:.3e}' for v in ratios)}  slope {slope:+.3f}")

ring = (8.0, 32.0, 128.0)
vals = annulus_log_probe(ring)
print("ring kernel, value / log R:", ", ".join(f"{v / np.log(R):.3f}" for v, R in zip(vals, ring)))
