#!/usr/bin/env python3
"""The ranking loss geometry: fixed half-integer thresholds, prefix-of-ones
labels, the loss landscape over the regression value, and the brute-force
minimizer check."""

import numpy as np

from agenet.tensor import Tensor, backward
from agenet.ranking import (ecr_loss, ecr_loss_values, ecr_minimizer_oracle,
                            encode_ages, encode_ranking_label, make_interval_points)

points = make_interval_points(16, 25)
print("ages 16..25  ->  K =", points.k)
print("thresholds b =", points.b)

for age in (16, 20, 25):
    label = encode_ranking_label(age, points)
    print(f"age {age}: y = {label.y.astype(int)}  (popcount {int(label.y.sum())})")

# --- loss landscape ----------------------------------------------------------
age = 20
y = encode_ages([age], points)
hs = np.linspace(14.0, 28.0, 29)
vals = ecr_loss_values(hs, np.repeat(y, len(hs), axis=0), points.b)
print(f"\nloss over h for true age {age}:")
for h, v in zip(hs, vals):
    bar = "#" * int(v * 4)
    print(f"  h={h:5.1f}  loss={v:8.4f}  {bar}")

# --- gradient and the minimizer ----------------------------------------------
h = Tensor(np.array([22.0]), requires_grad=True)
loss = ecr_loss(h, y, points)
backward(loss)
print(f"\nat h=22.0: loss={float(loss.data):.6f}, dL/dh={h.grad[0]:+.6f} "
      "(positive pushes h down toward the age)")

m, hit = ecr_minimizer_oracle(encode_ranking_label(age, points), points)
print(f"brute-force minimizer: {m:.4f} (boundary hit: {hit}); "
      f"within half a year of the age: {abs(m - age) <= 0.5}")

# Interior ages always minimize within +-0.5 of the truth.
print("\nminimizer sweep:")
for a in range(17, 25):
    m, _ = ecr_minimizer_oracle(encode_ranking_label(a, points), points)
    print(f"  age {a}: argmin {m:7.4f}  offset {m - a:+.4f}")
