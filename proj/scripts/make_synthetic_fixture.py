#!/usr/bin/env python3
"""Regenerates tests/fixtures/synthetic.csv.

A PIMA-shaped stand-in for tests that must not depend on downloaded data:
768 rows, 8 numeric attributes, binary outcome (~65:35), class-conditional
Gaussians with enough overlap that a Gaussian Naive Bayes lands in the mid-70%
accuracy range. Fixed seed; committing the output keeps CI hermetic.
"""
import csv
import pathlib

import numpy as np

OUT = pathlib.Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "synthetic.csv"

N_ROWS = 768
N_ATTRS = 8
P_POSITIVE = 0.349  # PIMA's positive-class share

rng = np.random.default_rng(20240817)

labels = (rng.random(N_ROWS) < P_POSITIVE).astype(int)

# Per-attribute class means/scales, loosely shaped like standardized PIMA
# attributes: a few informative columns, several weak ones.
mean_shift = np.array([0.50, 0.78, 0.17, 0.11, 0.28, 0.45, 0.22, 0.39])
scales = np.array([1.0, 1.1, 1.3, 1.2, 1.5, 1.0, 1.1, 1.2])
base = np.array([3.8, 120.0, 69.0, 20.5, 80.0, 32.0, 0.47, 33.0])
spread = np.array([3.4, 32.0, 19.0, 16.0, 115.0, 7.9, 0.33, 11.8])

values = np.empty((N_ROWS, N_ATTRS))
for a in range(N_ATTRS):
    z = rng.normal(0.0, scales[a], size=N_ROWS) + labels * mean_shift[a]
    values[:, a] = base[a] + spread[a] * z / 2.2

OUT.parent.mkdir(parents=True, exist_ok=True)
with OUT.open("w", newline="") as fh:
    writer = csv.writer(fh)
    writer.writerow([f"x{a}" for a in range(N_ATTRS)] + ["outcome"])
    for i in range(N_ROWS):
        writer.writerow([f"{v:.6f}" for v in values[i]] + [str(labels[i])])

print(f"wrote {OUT} ({N_ROWS} rows)")
