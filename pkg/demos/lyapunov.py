"""Lyapunov exponent across the spectrum against max(0, ln|lam|)."""

import math

import numpy as np

from gaplab.cocycle import lyapunov_batch
from gaplab.frequency import golden

alpha = golden(30)
energies = np.linspace(-3, 3, 13)
for lam in (0.5, 1.0, 2.0):
    est = lyapunov_batch(lam, energies, alpha, n_iters=50_000)
    floor = max(0.0, math.log(lam))
    print(f"lam = {lam}: predicted floor on the spectrum {floor:.4f}")
    for E, e in zip(energies, est):
        print(f"  E = {E:+.2f}  L = {e.mean:.4f}")
