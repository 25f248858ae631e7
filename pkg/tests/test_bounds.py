import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import betainc

from indchan import bounds
from indchan.channels import clip, tabulated
from indchan.empirical import gaussian_rate


def test_lemma1_values():
    n = 10 ** 4
    d = 4 * math.log2(n + 1) / n
    assert bounds.lemma1_bound(d, n, 2, 2) == 1.0
    assert bounds.lemma1_bound(1.0, 12, 2, 2) == 1.0
    assert bounds.log2_lemma1_bound(0.1, n, 2, 2) == pytest.approx(-947, abs=1)
    assert bounds.log2_lemma1_bound(0.1, n, 2, 2) == pytest.approx(-n * (0.1 - 0.0053151), abs=0.01)


def test_lemma4_values():
    assert bounds.lemma4_bound(1.0, 5) == 0.0
    assert bounds.lemma4_bound(0.0, 5) == 1.0
    assert bounds.lemma4_bound(0.3, 101) == pytest.approx(2 * 0.91 ** 50, rel=1e-12)
    assert bounds.lemma4_bound(0.3, 101) == pytest.approx(0.0179, abs=1e-4)
    with pytest.raises(ValueError):
        bounds.lemma4_bound(1.2, 5)


def test_rho_oracle_endpoints():
    assert bounds.rho_tail_oracle(0.0, 50) == pytest.approx(1.0, abs=1e-12)
    assert bounds.rho_tail_oracle(1.0, 50) == 0.0
    assert bounds.rho_tail_oracle(0.5, 2) == pytest.approx(1 - 2 * math.asin(0.5) / math.pi)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.01, 0.99), st.integers(3, 3000))
def test_rho_oracle_against_regularized_beta(t, n):
    ref = betainc((n - 1) / 2, 0.5, 1 - t * t)
    got = bounds.rho_tail_oracle(t, n)
    if ref > 1e-290:
        assert got == pytest.approx(ref, rel=1e-8)
    assert bounds.log_rho_tail_oracle(t, n) / math.log(2) <= bounds.log2_lemma4_bound(t, n)


def test_rho_oracle_deep_tail_stays_finite():
    lo = bounds.log_rho_tail_oracle(0.9, 10 ** 5)
    assert math.isfinite(lo)
    assert lo / math.log(2) <= bounds.log2_lemma4_bound(0.9, 10 ** 5)
    assert lo == pytest.approx(0.5 * (10 ** 5 - 3) * math.log(0.19), rel=1e-3)


def test_lemma3_values():
    n = 10 ** 4
    dt = 4 * 2 * math.log2(n + 1) / n
    assert bounds.lemma3_bound(dt, n, 2, 4) == 1.0
    assert bounds.log2_lemma3_bound(0.05, n, 2, 4) == pytest.approx(-394, abs=1)


def test_lemma6_values():
    assert bounds.lemma6_bound(1e-6, 100, 2) == 1.0
    assert bounds.lemma6_bound(0.1, 10 ** 5, 4) == pytest.approx(16 * math.exp(-125), rel=1e-9)
    assert bounds.lemma6_bound(0.1, 10 ** 5, 4) == pytest.approx(2.1e-53, rel=0.05)
    inflated = bounds.log2_lemma6_bound(0.1, 10 ** 5, 4, p_max=4)
    assert inflated == pytest.approx(bounds.log2_lemma6_bound(0.1, 10 ** 5, 4) + 8 * math.log2(10 ** 5))
    with pytest.raises(ValueError):
        bounds.lemma6_bound(0.2, 100, 2)


def test_lemma7_values():
    A = 1.0
    a = np.array([0.25, 0.0])
    lam = np.array([0.5, 0.5])
    assert bounds.lemma7_bound(a, lam, A, A / 8, 10 ** 4) == pytest.approx(math.exp(-10 ** 4 / 384))
    assert bounds.lemma7_bound([1e-9, 0], [0.5, 0.5], 1.0, 5e-10, 100) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        bounds.lemma7_bound([1.0, -0.5], [0.5, 0.5], 1.0, 0.25, 200)   # abar > A/8
    with pytest.raises(ValueError):
        bounds.lemma7_bound([1.0, -0.5], [0.5, 0.5], 2.0, 0.3, 200)    # abar mismatch


def test_pipeline_set1():
    pipe = bounds.continuous_pipeline(1e8, 1e6, 1e-3, 1e-3, 2.5e5)
    assert pipe.delta_mu == pytest.approx(math.log2(2e8 / 1e-3))
    assert pipe.eps1 == 0.01
    assert pipe.eta2 == pytest.approx(1 / (1 + pipe.delta_mu / 1e6))
    assert pipe.r_lb1(0.0) < 0


def test_solve_delta_is_a_root():
    for n, T, pa in ((1e8, 2.5e5, 1e-3), (1e20, 7.5e15, 1e-3), (1e5, 100.0, 1e-2)):
        d = bounds.solve_delta(n, T, pa)
        lhs = n * (math.log2(math.e) * d * d / 8 - (2 / T) * math.log2(math.sqrt(2) * n))
        assert lhs == pytest.approx(math.log2(1 / pa), rel=1e-10)


def test_calibrated_curve():
    pipe = bounds.continuous_pipeline(1e8, 1e6, 1e-3, 1e-3, 2.5e5)
    curve = pipe.calibrate(0.9)
    assert curve(0.9) == pytest.approx(curve.rbar)
    assert curve(0.999) == pytest.approx(curve.rbar)
    assert curve(0.5) == pytest.approx(gaussian_rate(0.5) - curve.eps)
    # the capped curve meets R_LB1 at rho0
    assert curve.rbar == pytest.approx(pipe.r_lb1(0.9))


def test_discrete_delta_value():
    d = bounds.discrete_delta(10 ** 5, 64, 2, 2, 1e-3)
    expect = (3 * 1562.5 + 2) * 2 * math.log2(10 ** 5 + 1) / 10 ** 5 + math.log2(1e3) / 10 ** 5
    assert d == pytest.approx(expect, rel=1e-12)
    assert d == pytest.approx(1.557, abs=1e-3)
    assert bounds.discrete_delta(10 ** 12, int(1e6), 2, 2, 1e-3) < 0.01


def test_bsc_comparison_values():
    C, R = bounds.bsc_comparison(np.array([0.0, 0.5]))
    assert C[0] == 1.0 and C[1] == 0.0 and R[1] == 0.0
    assert R[0] == pytest.approx(-0.5 * math.log2(1 - 2 / math.pi))
    assert R[0] == pytest.approx(0.7302, abs=1e-4)


def test_effective_snr_identity():
    r = bounds.effective_snr("identity", 4.0, 1.0)
    assert r.gamma == pytest.approx(1.0) and r.p_eff == pytest.approx(4.0)
    assert r.n_eff == pytest.approx(0.0, abs=1e-12) and r.snr == pytest.approx(4.0)


def test_effective_snr_zero():
    r = bounds.effective_snr("zero", 1.0, 0.1)
    assert r.gamma == 0.0 and r.snr == 0.0


def test_effective_snr_clip_closed_form():
    # E[X clip(X)] = 2 Phi(1) - 1 for unit power and unit clip level
    r = bounds.effective_snr(clip(1.0), 1.0, 0.1)
    assert r.gamma == pytest.approx(math.erf(1 / math.sqrt(2)), rel=1e-10)


def test_effective_snr_callable_and_tabulated():
    a = bounds.effective_snr(lambda x: 2 * x, 1.0, 0.5)
    assert a.snr == pytest.approx(8.0)
    lin = bounds.effective_snr(tabulated([-50.0, 50.0], [-100.0, 100.0]), 1.0, 0.5)
    assert lin.snr == pytest.approx(8.0, rel=1e-8)


def test_lemma2_jointly_gaussian():
    def sample(rng, k):
        x = rng.standard_normal(k)
        return x, 0.8 * x + 0.6 * rng.standard_normal(k)
    out = bounds.lemma2_check(sample, 10 ** 6)
    assert abs(out["mi"] - gaussian_rate(0.8)) < 0.02


def test_lemma2_independent():
    out = bounds.lemma2_check(lambda r, k: (r.standard_normal(k), r.standard_normal(k)), 10 ** 5)
    assert abs(out["r2"]) < 1e-4 and out["mi"] - out["bias"] < 0.01


def test_lemma2_non_gaussian_binary_pair_unbounded():
    # X = Y ~ Ber(1/2): I = 1 bit while R_2(ρ=1) is unbounded, so the
    # inequality fails without Gaussian inputs
    out = bounds.lemma2_check(lambda r, k: (lambda b: (b, b))(r.integers(0, 2, k).astype(float)), 1000)
    assert out["rho"] == pytest.approx(1.0, abs=1e-12)
    assert out["mi"] == pytest.approx(1.0, abs=1e-2)
    assert out["margin"] < -10
