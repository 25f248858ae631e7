"""A fixed-rate code whose decoder never learns the channel.

The receiver picks the codeword with the largest empirical mutual
information against what it heard.  The same decoder is used over three
channels with very different statistics, and over each one it succeeds
whenever the realized empirical mutual information clears the rate,
and fails when it does not.
"""
import numpy as np

from indchan.channels import parse_channel
from indchan.codebook import Prior
from indchan.empirical import empirical_mi_of
from indchan.fixed_rate import (FixedRateConfig, decode_mmi, encode_fixed,
                                ensemble_error_probability, sample_candidates)

n, rate = 256, 0.25
channels = ["bsc:0.05", "modulo:2:0,0,0,1", "adversarial:periodic:pattern=0001000"]

for spec in channels:
    errors, mi, exact = 0, [], []
    for trial in range(40):
        cfg = FixedRateConfig(n, rate, Prior.uniform(2), seed=trial)
        w = 12345 + trial
        x = encode_fixed(cfg, w)
        y = parse_channel(spec, seed=trial).respond(x)
        # score the true codeword against 63 random rivals out of 2^64
        res = decode_mmi(cfg, y, sample_candidates(cfg, w, 63, stream=trial))
        errors += res.w_hat != w
        mi.append(empirical_mi_of(x, y, 2, 2))
        exact.append(ensemble_error_probability(cfg, "mmi", x, y))
    print(f"{spec:40s} mean I(x;y) = {np.mean(mi):.3f} bit, "
          f"sampled errors {errors}/40, exact error over all 2^64 rivals {np.mean(exact):.2e}")

print(f"\nrate was {rate} bit/use.  Where I(x;y) falls below it (the modulo channel),")
print("a handful of random rivals still lose, but among all 2^64 some rival wins.")
