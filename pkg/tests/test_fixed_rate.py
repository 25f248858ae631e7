import itertools
import math

import numpy as np
import pytest
from scipy.special import betainc

from indchan.channels import AWGN, BSC
from indchan.codebook import Prior
from indchan.empirical import empirical_mi_of
from indchan.fixed_rate import (FixedRateConfig, codebook_size, decode_maxcorr, decode_mmi,
                                decode_projection, encode_fixed, ensemble_error_probability,
                                maxcorr_wrong_tail, mmi_wrong_tail, projection_wrong_tail,
                                sample_candidates, union_of_wrong)

BIN = Prior.uniform(2)
GAUSS = Prior.gaussian(1.0)


def test_codebook_size():
    assert codebook_size(10, 0.2) == 4
    assert math.log2(codebook_size(512, 0.3)) == pytest.approx(153.6, abs=1e-12)
    assert math.log2(codebook_size(256, 0.8)) == pytest.approx(204.8, abs=1e-12)
    assert codebook_size(4, 0.01) == 2


def test_encode_rows():
    cfg = FixedRateConfig(16, 0.25, BIN, seed=3)
    cb = cfg.codebook.entries
    assert np.array_equal(encode_fixed(cfg, 1), cb[1])
    assert np.array_equal(encode_fixed(cfg, cfg.M - 1), cb[-1])
    with pytest.raises(IndexError):
        encode_fixed(cfg, cfg.M)


def test_seeds_give_distinct_codebooks():
    a = FixedRateConfig(64, 0.1, BIN, seed=1).codebook.row(0)
    b = FixedRateConfig(64, 0.1, BIN, seed=2).codebook.row(0)
    assert not np.array_equal(a, b)


def test_mmi_recovers_exact_codeword():
    cfg = FixedRateConfig(64, 2 / 64, BIN, seed=5)
    assert cfg.M == 4
    y = encode_fixed(cfg, 3)
    res = decode_mmi(cfg, y)
    assert res.w_hat == 3 and res.score > res.runner_up


def test_mmi_constant_output_ties_to_lowest():
    cfg = FixedRateConfig(64, 2 / 64, BIN, seed=5)
    res = decode_mmi(cfg, np.zeros(64, int))
    assert res.w_hat == 0 and res.score == 0.0


@pytest.mark.parametrize("decode", [decode_maxcorr, decode_projection])
def test_real_decoders(decode):
    cfg = FixedRateConfig(32, 3 / 32, GAUSS, seed=8)
    assert decode(cfg, 5 * encode_fixed(cfg, 2)).w_hat == 2
    assert decode(cfg, -5 * encode_fixed(cfg, 6)).w_hat == 6
    assert decode(cfg, np.zeros(32)).w_hat == 0


def test_scan_needs_candidates_for_huge_m():
    cfg = FixedRateConfig(512, 0.3, BIN)
    with pytest.raises(ValueError):
        decode_mmi(cfg, np.zeros(512, int))


def test_sample_candidates():
    cfg = FixedRateConfig(512, 0.3, BIN)
    c = sample_candidates(cfg, 12345, 63, stream=4)
    assert len(c) == 64 and 12345 in set(c) and len(set(c)) == 64
    assert all(0 <= v < cfg.M for v in c)
    assert list(c) == list(sample_candidates(cfg, 12345, 63, stream=4))
    small = FixedRateConfig(8, 0.25, BIN)
    assert sorted(sample_candidates(small, 1, 50)) == [0, 1, 2, 3]


def test_sampled_competitors_span_the_index_range():
    cfg = FixedRateConfig(256, 0.8, GAUSS)
    c = np.array([float(v) for v in sample_candidates(cfg, 0, 500, stream=1)]) / float(cfg.M)
    assert 0.4 < c.mean() < 0.6


def brute_mmi_tail(y, t, q):
    n = len(y)
    total = 0.0
    for xs in itertools.product((0, 1), repeat=n):
        x = np.array(xs)
        if empirical_mi_of(x, y, 2, 2) >= t - 1e-12:
            k = x.sum()
            total += q ** k * (1 - q) ** (n - k)
    return total


@pytest.mark.parametrize("q", [0.5, 0.3])
def test_mmi_tail_matches_enumeration(q):
    rng = np.random.default_rng(0)
    prior = Prior.discrete([1 - q, q])
    for _ in range(3):
        y = rng.integers(0, 2, 12)
        for t in (0.0, 0.05, 0.2, 0.5):
            assert mmi_wrong_tail(y, t, prior) == pytest.approx(brute_mmi_tail(y, t, q), rel=1e-10, abs=1e-15)


def test_maxcorr_tail_against_beta():
    for n in (5, 40, 256):
        for t in (0.1, 0.3, 0.7):
            ref = betainc((n - 1) / 2, 0.5, 1 - t * t)   # upper tail, no cancellation
            assert maxcorr_wrong_tail(t, n) == pytest.approx(ref, rel=1e-9, abs=1e-300)


def test_projection_tail_monte_carlo():
    rng = np.random.default_rng(1)
    y = rng.standard_normal(20)
    s = 4.0
    X = rng.standard_normal((200_000, 20))
    freq = np.mean(np.abs(X @ y) >= s)
    p = projection_wrong_tail(s, y, 1.0)
    assert abs(freq - p) < 4 * math.sqrt(p * (1 - p) / 200_000)


def test_union_of_wrong():
    assert union_of_wrong(0.0, 10) == 0.0
    assert union_of_wrong(1.0, 10) == 1.0
    assert union_of_wrong(0.5, 3) == pytest.approx(0.75)
    assert union_of_wrong(1e-300, 2 ** 200) == pytest.approx(1 - math.exp(-(2 ** 200) * 1e-300))


def test_ensemble_error_matches_full_decoding_frequency():
    # small codebooks: the exact ensemble value predicts the full-scan error rate
    errs, probs = [], []
    for t in range(300):
        cfg = FixedRateConfig(24, 4 / 24, BIN, seed=t)
        x = encode_fixed(cfg, 7)
        y = BSC(0.2, seed=t).respond(x)
        errs.append(decode_mmi(cfg, y).w_hat != 7)
        probs.append(ensemble_error_probability(cfg, "mmi", x, y))
    # ties count as errors in the exact value, so it is an upper envelope
    sd = math.sqrt(np.mean(probs) / 300)
    assert np.mean(errs) <= np.mean(probs) + 3 * sd


def test_projection_loses_to_maxcorr():
    n, R = 64, 0.8
    proj, corr = [], []
    for t in range(50):
        cfg = FixedRateConfig(n, R, GAUSS, seed=t)
        x = encode_fixed(cfg, 0)
        y = AWGN(0.1, seed=t).respond(x)
        proj.append(ensemble_error_probability(cfg, "projection", x, y))
        corr.append(ensemble_error_probability(cfg, "maxcorr", x, y))
    assert np.mean(proj) > 0.5 > 1e-6 > np.mean(corr)


def test_projection_loses_to_maxcorr_full_scan():
    proj = corr = 0
    for t in range(200):
        cfg = FixedRateConfig(16, 0.5, GAUSS, seed=t)
        x = encode_fixed(cfg, 5)
        y = AWGN(0.1, seed=t).respond(x)
        proj += decode_projection(cfg, y).w_hat != 5
        corr += decode_maxcorr(cfg, y).w_hat != 5
    assert proj > corr + 10
