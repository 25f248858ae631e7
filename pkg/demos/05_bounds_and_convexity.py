"""The probability bounds behind the scheme, checked by exact oracles.

Every line compares a closed-form bound with an independently computed
probability.  The binary cases come from exhaustive enumeration and the
correlation tail from a Beta-distribution integral.
"""
import numpy as np

from indchan import harness
from indchan.harness import csv_text, figure_data

for suite in ("lemma1", "lemma3", "lemma4", "lemma7"):
    rep = harness.verify_bounds(suite)
    print(f"{suite:8s} {len(rep.rows):3d} checks, passed={rep.passed}, "
          f"smallest margin {rep.min_margin:.3g}")
rep = harness.verify_lemma6(n=2000)
print(f"lemma6   {len(rep.rows):3d} checks, passed={rep.passed}")

conv = harness.convexity_check(n=200, p=(2, 3, 4), trials=1000)
print(f"\nsplitting time into subsets costs at most I(x;u): "
      f"{conv.violations} violations in {conv.trials}, mean deviation {conv.mean_deviation:.4f} bit")
print(f"the all-zeros-then-all-ones input loses {harness.step_sequence_deviation(200)} bit")

rows = figure_data("bsc_compare", points=11)
print("\nBSC: capacity vs. the rate of a Gaussian-input receiver")
print(csv_text(rows))
ratio = np.nanmin([r["ratio"] for r in figure_data("bsc_compare")])
print(f"worst ratio R/C = {ratio:.4f} (2/pi = {2 / np.pi:.4f})")
