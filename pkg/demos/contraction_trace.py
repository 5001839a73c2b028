#!/usr/bin/env python3
"""Track the subset-vs-full gradient discrepancy across training epochs.

Full-batch descent at a small learning rate; the per-epoch discrepancy
norm should settle into a non-increasing tail. Prints the estimated
onset epoch, the tail contraction ratio, and the cumulative-energy
bound check.
"""
import numpy as np

from gradal import ContractionConfig, Dataset, make_blobs, run_contraction_trace
from gradal.contraction import cumulative_df_bound_check

base = make_blobs(n_samples=1500, n_classes=3, n_features=8, spread=1.0, seed=3)
dataset = Dataset(base.features * 3.0, base.labels, base.n_classes)

cfg = ContractionConfig(
    s_size=1000,
    subset_fraction=0.1,
    epochs=150,
    learning_rate=1e-4,
    seed=0,
    scope="full",
    hidden_widths=(64,),
)
report = run_contraction_trace(cfg, dataset)
df = report.df_norms

print("epoch   ||dF||")
for t in range(0, len(df), 15):
    print(f"{t:5d}   {df[t]:.6f}")
print(f"{len(df) - 1:5d}   {df[-1]:.6f}")

print()
print(f"max of first 10 epochs: {df[:10].max():.6f}")
print(f"final epoch:            {df[-1]:.6f}")
print(f"t0 estimate:            {report.t0_estimate}")
print(f"violations after t0:    {report.violation_count_after_t0}")
print(f"rho_hat:                {report.rho_hat:.6f}")

lhs, rhs = cumulative_df_bound_check(df, report.t0_estimate)
print(f"tail energy {lhs:.3f} <= bound {rhs:.3f}: {lhs <= rhs}")
