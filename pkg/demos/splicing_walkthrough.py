"""Resampling a thin strip and watching the crossing count.

Builds the tranche for n = 64, resamples it one ball at a time, and reports
where along the sequence N first changes.  Then estimates the mismatch
probability P(N(omega) != N(omega_eps)) for a few strip widths.

    python demos/splicing_walkthrough.py
"""

from ipsplice.splicing import build_tranche, estimate_mismatch, splice_run

n = 64
tr = build_tranche(n, 1 / 8)
print(f"tranche: {len(tr)} edges around level {tr.centerline}, half-width {tr.half_width}, "
      f"{tr.num_balls} balls of radius {tr.ball_radius}")

for k in range(5):
    run = splice_run(n, 1 / 8, seed=2024, index=k)
    where = "no change" if run.first_change_index is None else f"first change at ball {run.first_change_index}"
    print(f"replicate {k}: N {run.N_original} -> {run.N_resampled} ({where})")

res = estimate_mismatch(n, [1 / 4, 1 / 8, 1 / 16], 30, 400, seed=7)
for eps, est in zip(res.eps, res.estimates):
    print(f"eps = {eps:<7g} mismatch {est.estimate:.3f} +- {est.stderr:.3f}")
