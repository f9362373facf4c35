#!/usr/bin/env python3
"""Desk-scale ablations: ranking loss vs the L1 baseline, and the guided
head vs the same model with the guidance path frozen. Scaled-down version of
the acceptance experiments (2 seeds instead of 5) so it finishes in a few
minutes."""

import numpy as np

from agenet.experiments import run_guidance_ablation, run_loss_ablation

seeds = (1, 2)

print("=== loss ablation: ranking loss vs L1 (same network, same data) ===")
maes = run_loss_ablation(seeds, counts=(400, 80, 80), epochs=6)
for kind, vals in maes.items():
    print(f"  {kind:3s}: per-seed test MAE {[round(v, 3) for v in vals]} "
          f"mean {np.mean(vals):.3f}")

print("\n=== guidance ablation: guided head vs frozen guidance path ===")
print("(noisy fine age cue + age-correlated attribute renderings)")
maes = run_guidance_ablation(seeds, counts=(400, 80, 80), epochs=8)
for guided, vals in maes.items():
    tag = "guided  " if guided else "unguided"
    print(f"  {tag}: per-seed best val MAE {[round(v, 3) for v in vals]} "
          f"mean {np.mean(vals):.3f}")
