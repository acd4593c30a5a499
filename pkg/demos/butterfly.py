"""Band edges of the almost Mathieu operator for all p/q with q <= QMAX.

Writes butterfly.csv (p, q, alpha, band, lo, hi) in the working directory.
Plot lo..hi against alpha for the Hofstadter butterfly.
"""

import sys

from gaplab.io import write_csv
from gaplab.spectrum import butterfly

qmax = int(sys.argv[1]) if len(sys.argv) > 1 else 20
lam = float(sys.argv[2]) if len(sys.argv) > 2 else 1.0

rows = [(p, q, p / q, i, lo, hi) for p, q, i, lo, hi in butterfly(qmax, lam)]
write_csv("butterfly.csv", ["p", "q", "alpha", "band", "lo", "hi"], rows)
measure = {}
for p, q, _, _, lo, hi in rows:
    measure[(p, q)] = measure.get((p, q), 0.0) + (hi - lo)
print(f"{len(rows)} bands over {len(measure)} frequencies -> butterfly.csv")
for (p, q), m in sorted(measure.items(), key=lambda t: t[0][1])[-5:]:
    # at lam = 1 the measure of the spectrum shrinks like 1/q
    print(f"  {p}/{q}: |spectrum| = {m:.6f}")
