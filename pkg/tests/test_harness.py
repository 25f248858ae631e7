import math

import numpy as np
import pytest

from indchan import harness
from indchan.empirical import Partition, empirical_mi_of
from indchan.harness import ExperimentSpec


def test_parse_prior():
    assert harness.parse_prior("binary").size == 2
    assert harness.parse_prior("uniform:4").size == 4
    assert harness.parse_prior("discrete:0.2,0.8").probs == (0.2, 0.8)
    assert harness.parse_prior("gaussian:2").power == 2.0
    with pytest.raises(ValueError):
        harness.parse_prior("laplace")


def test_spec_validation():
    with pytest.raises(ValueError):
        ExperimentSpec(scheme="other")
    with pytest.raises(ValueError):
        ExperimentSpec(channel="bsc:oops")
    with pytest.raises(ValueError):
        ExperimentSpec.from_mapping({"nonsense": 1})
    spec = ExperimentSpec.from_mapping({"n": "500", "p_e": "0.05", "exact": "false"})
    assert spec.n == 500 and spec.p_e == 0.05 and spec.exact is False


def test_trial_seed():
    assert harness.trial_seed(0, 5) == 5
    assert harness.trial_seed(2 ** 64 - 1, 1) == 2 ** 64 - 2


@pytest.mark.parametrize("spec", [
    ExperimentSpec(scheme="fixed", n=128, rate=0.2, trials=6, competitors=15),
    ExperimentSpec(scheme="fixed", prior="gaussian", channel="awgn:0.1", decoder="maxcorr",
                   n=64, rate=0.5, trials=4),
    ExperimentSpec(scheme="adaptive", n=1500, k_bits=12, trials=4),
])
def test_sweep_determinism_and_parallel_merge(spec):
    a = harness.run_sweep(spec)
    b = harness.run_sweep(spec)
    c = harness.run_sweep(spec, workers=2)
    ta = harness.csv_text(a.rows, spec.comments())
    assert ta == harness.csv_text(b.rows, spec.comments())
    assert ta == harness.csv_text(c.rows, spec.comments())
    assert a.summary() == c.summary()


def test_fixed_sweep_summary():
    spec = ExperimentSpec(scheme="fixed", n=128, rate=0.2, trials=10, delta=0.05)
    s = harness.run_sweep(spec).summary()
    assert s["trials"] == 10 and 0 <= s["qualifying"] <= 10
    assert 0.0 <= s["exact_conditional_error"] <= 1.0


def test_adaptive_sweep_rows():
    spec = ExperimentSpec(n=2000, k_bits=16, trials=3)
    res = harness.run_sweep(spec)
    for r in res.rows:
        assert r["r_act"] * 2000 == r["blocks"] * 16
        assert 0 <= r["eps_hat"] <= 1
    assert res.summary()["r_act_mean"] == pytest.approx(np.mean([r["r_act"] for r in res.rows]))


def test_csv_format():
    txt = harness.csv_text([{"a": 1, "b": 1 / 3}, {"a": 2, "c": True}], ["x=1"])
    assert txt == "# x=1\na,b,c\n1,0.333333333333,\n2,,1\n"


def test_verify_lemma1_exact():
    rep = harness.verify_lemma1()
    assert rep.passed and len(rep.rows) == 50


def test_exact_mi_tail_small_oracle():
    y = np.array([0, 1, 1, 0, 1, 0])
    tails = harness.exact_mi_tail(y, [0.0, 0.3], 6)
    X = harness.binary_sequences(6)
    mi = np.array([empirical_mi_of(x, y, 2, 2) for x in X])
    assert tails[0] == 1.0
    assert tails[1] == np.mean(mi >= 0.3 - 1e-12)


def test_verify_lemma4_grid():
    rep = harness.verify_lemma4(ns=(101,))
    assert rep.passed and rep.min_margin > 0


def test_verify_lemma3_and_lemma7():
    assert harness.verify_lemma3(n=12).passed
    assert harness.verify_lemma7(trials=5000).passed


def test_verify_lemma6():
    assert harness.verify_lemma6(n=2000, trials=5000).passed
    with pytest.raises(ValueError):
        harness.verify_lemma6(deltas=(0.2,))


def test_verify_bounds_lookup():
    with pytest.raises(ValueError):
        harness.verify_bounds("lemma9")


def test_convexity_discrete():
    rep = harness.convexity_check(n=200, p=(2, 3, 4), trials=200)
    assert rep.passed and rep.max_excess <= 1e-12


def test_convexity_single_label():
    rng = np.random.default_rng(0)
    x, y = rng.integers(0, 2, 100), rng.integers(0, 2, 100)
    part = Partition(np.zeros(100, int), 1)
    from indchan.empirical import per_subset_mi
    assert empirical_mi_of(x, y) - float(part.weights @ per_subset_mi(x, y, part, 2, 2)) == 0.0


def test_step_sequence():
    assert harness.step_sequence_deviation(200) == 1.0


def test_convexity_gaussian_worst_case():
    rep = harness.convexity_check(n=400, p=(2, 4), prior="gaussian", trials=100)
    assert rep.passed


def test_worst_output_attains_supremum():
    rng = np.random.default_rng(5)
    x = rng.standard_normal(300)
    part = Partition.contiguous(300, 3)
    y = harness.worst_output(x, part)
    sup = harness.correlation_deviation_sup(x, part)
    assert harness.correlation_deviation(x, y, part) == pytest.approx(sup, abs=1e-12)
    for _ in range(50):
        yy = rng.standard_normal(300) + rng.uniform(-2, 2) * x
        assert harness.correlation_deviation(x, yy, part) <= sup + 1e-12


def test_gaussian_deviation_frequency_vs_lemma6():
    # Gaussian x, p = 4, n = 10^4: deviation > Δ never more often than the bound
    from indchan import bounds
    rng = np.random.default_rng(2)
    n, p, d, trials = 10 ** 4, 4, 0.05, 300
    part = Partition.contiguous(n, p)
    hits = sum(harness.correlation_deviation_sup(rng.standard_normal(n), part) > d
               for _ in range(trials))
    bnd = bounds.lemma6_bound(d, n, p)
    assert hits / trials <= bnd + 3 * math.sqrt(bnd * (1 - bnd) / trials)


def test_figure_continuous_columns():
    rows = harness.figure_data("continuous_lb", 1, 11)
    assert list(rows[0]) == ["rho", "snr_eff", "R2", "R_LB1", "R_LB2"]
    assert rows[0]["R_LB1"] < 0
    assert all(r["R_LB2"] <= r["R2"] for r in rows)


def test_figure_set2_tracks_r2():
    rows = harness.figure_data("continuous_lb", 2, 201)
    for r in rows:
        if 0 < r["rho"] < 0.99998:
            assert r["R2"] - r["R_LB1"] < 0.02


def test_figure_bsc():
    rows = harness.figure_data("bsc_compare", points=101)
    assert list(rows[0]) == ["eps", "C", "R", "ratio"]
    ratios = [r["ratio"] for r in rows if not math.isnan(r["ratio"])]
    assert min(ratios) >= 2 / math.pi - 1e-9
    with pytest.raises(ValueError):
        harness.figure_data("nope")


def test_table_values_keys():
    t = harness.table_values(1)
    for k in ("delta_mu", "eta1", "eta2", "eps1", "Delta", "eps", "rbar"):
        assert k in t
