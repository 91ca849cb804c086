import math

import numpy as np
import pytest
from scipy import stats

from crs_toolkit.errors import InvalidParameterError
from crs_toolkit.measures import (
    DiscreteSpec,
    GaussianSpec,
    LaplaceSpec,
    SyntheticSpec,
    discrete_spec,
    make_pair,
)
from crs_toolkit.streams import RngStream
from crs_toolkit.width import (
    GaussianWidth,
    OptimalAcsWidth,
    OptimalCsWidth,
    StepWidth,
    d_infinity,
    equality_case_width,
    indicator_width,
    noncentral_chi2_cdf,
    superlevel_measures,
    two_level_width,
    width_eval,
    width_from_discrete,
    width_from_table,
    width_mc_estimate,
    width_table,
    width_table_csv,
)

DISCRETE_EXAMPLE = discrete_spec((0.5, 0.5, 0.0, 0.0), (0.25,) * 4)

FAMILY_SPECS = [
    LaplaceSpec(0.5),
    LaplaceSpec(0.25),
    GaussianSpec(1.0, 0.5, 1),
    GaussianSpec(1.0, 0.5, 2),
    DISCRETE_EXAMPLE,
    SyntheticSpec(two_level_width(0.1)),
]


def test_laplace_width_is_linear_at_half():
    w = width_eval(LaplaceSpec(0.5))
    h = np.linspace(0.0, 2.0, 101)
    assert np.allclose(w(h), 1.0 - h / 2.0, atol=1e-12)
    assert w(1.0)[0] == pytest.approx(0.5, abs=1e-12)
    assert w.h_max == 2.0
    assert float(w(2.5)[0]) == 0.0


def test_laplace_width_monte_carlo_oracle():
    pair = make_pair(LaplaceSpec(0.5))
    est, se = width_mc_estimate(pair, 1.0, 10**6, RngStream(0, 2))
    assert se == pytest.approx(0.0005, abs=2e-5)
    assert abs(est - 0.5) <= 4 * se


def test_discrete_example_width():
    w = width_eval(DISCRETE_EXAMPLE)
    assert float(w(0.0)[0]) == 1.0
    assert np.allclose(w(np.array([0.5, 1.0, 2.0])), 0.5)
    assert float(w(2.0 + 1e-12)[0]) == 0.0
    assert w.total_mass == pytest.approx(1.0, abs=1e-15)
    assert w.h_max == 2.0


def test_gaussian_width_normal_interval_oracle():
    # the h-superlevel set of the d=1 ratio is an interval around the peak:
    # solve t0 - a (x - c)^2 >= ln h directly with normal CDFs
    gw = GaussianWidth(1.0, 0.5, 1)
    for h in (0.25, 1.0, 2.5):
        half = math.sqrt((gw.t0 - math.log(h)) / gw.a)
        oracle = stats.norm.cdf(gw.c + half) - stats.norm.cdf(gw.c - half)
        assert gw(h)[0] == pytest.approx(oracle, rel=1e-12)
    assert gw(1.0)[0] == pytest.approx(0.3404, abs=5e-5)


def test_gaussian_width_h_max_in_bits():
    gw = GaussianWidth(1.0, 0.5, 2)
    assert d_infinity(gw) == pytest.approx(2 * 1.359813847226612 / math.log(2.0), abs=1e-9)


def test_gaussian_width_rejects_large_dimension():
    with pytest.raises(InvalidParameterError):
        GaussianWidth(1.0, 0.5, 300)


@pytest.mark.parametrize("spec", FAMILY_SPECS)
def test_width_monotone_on_random_pairs(spec):
    w = width_eval(spec)
    rng = np.random.default_rng(21)
    hi = w.h_max if math.isfinite(w.h_max) else 50.0
    a = rng.uniform(0.0, hi, 1000)
    b = rng.uniform(0.0, hi, 1000)
    lo = np.minimum(a, b)
    hi_ = np.maximum(a, b)
    assert np.all(w(lo) >= w(hi_) - 1e-12)


@pytest.mark.parametrize("spec", [LaplaceSpec(0.5), LaplaceSpec(0.02), DISCRETE_EXAMPLE,
                                  SyntheticSpec(two_level_width(0.3))])
def test_width_normalization_tight(spec):
    assert width_eval(spec).total_mass == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("d", [1, 2, 4, 8, 64])
def test_gaussian_width_normalization_series_route(d):
    assert GaussianWidth(1.0, 0.5, d).total_mass == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("spec", FAMILY_SPECS)
def test_width_analytic_vs_monte_carlo_grid(spec):
    pair = make_pair(spec)
    w = width_eval(spec)
    n = 10**5
    hi = min(w.h_max, 50.0)
    grid = np.linspace(hi / 21.0, hi * 0.999, 20)
    draws = pair.sample_proposal(RngStream(8, 3), n)
    log_r = pair.log_ratio(draws)
    for h in grid:
        target = float(w(h)[0])
        est = float(np.mean(log_r >= math.log(h)))
        sigma = math.sqrt(max(target * (1.0 - target), 1e-12) / n)
        assert abs(est - target) <= 4.0 * sigma + 1e-12


def test_width_mc_estimate_trivial_cases():
    assert width_mc_estimate(make_pair(LaplaceSpec(1.0)), 0.5, 1000, RngStream(0, 0))[0] == 1.0
    assert width_mc_estimate(make_pair(DISCRETE_EXAMPLE), 3.0, 1000, RngStream(0, 0))[0] == 0.0
    with pytest.raises(InvalidParameterError):
        width_mc_estimate(make_pair(LaplaceSpec(1.0)), 0.5, 50, RngStream(0, 0))


def test_superlevel_measures_examples():
    w = width_eval(DISCRETE_EXAMPLE)
    p_mass, q_mass = superlevel_measures(w, 1.0)
    assert p_mass == pytest.approx(0.5, abs=1e-12)
    assert q_mass == pytest.approx(1.0, abs=1e-9)
    p0, q0 = superlevel_measures(w, 0.0)
    assert p0 == 1.0 and q0 == pytest.approx(1.0, abs=1e-9)
    wl = width_eval(LaplaceSpec(0.5))
    p2, q2 = superlevel_measures(wl, 2.0)
    assert p2 == pytest.approx(0.0, abs=1e-12)
    assert q2 == pytest.approx(0.0, abs=1e-9)


def test_q_mass_monotone_in_h():
    wl = width_eval(LaplaceSpec(0.5))
    values = [superlevel_measures(wl, h)[1] for h in np.linspace(0.0, 2.0, 21)]
    assert all(a >= b - 1e-9 for a, b in zip(values[:-1], values[1:]))


def test_equality_case_masses_exact():
    for c in (1.0, 2.0, 4.0, 10.0):
        assert equality_case_width(c).total_mass == pytest.approx(1.0, abs=1e-15)


def test_d_infinity_examples():
    assert d_infinity(width_eval(LaplaceSpec(0.5))) == pytest.approx(1.0, abs=1e-12)
    assert d_infinity(width_eval(DISCRETE_EXAMPLE)) == pytest.approx(1.0, abs=1e-12)
    assert d_infinity(width_eval(LaplaceSpec(1.0))) == pytest.approx(0.0, abs=1e-12)
    assert d_infinity(OptimalCsWidth(0.5)) == math.inf


def test_noncentral_chi2_against_scipy():
    rng = np.random.default_rng(5)
    for df, nc in ((1, 1.5), (3, 0.0), (8, 20.0), (64, 113.8)):
        x = rng.uniform(0.1, df + nc + 30.0, 50)
        mine = noncentral_chi2_cdf(x, df, nc)
        ref = stats.ncx2.cdf(x, df, nc) if nc > 0 else stats.chi2.cdf(x, df)
        assert np.allclose(mine, ref, rtol=5e-11, atol=1e-300)


def test_noncentral_chi2_deep_tail_relative_accuracy():
    # Poisson-mixture sum must keep its low-j terms: the j = 0 term dominates
    # this regime and a bulk-only truncation loses double-digit percentages
    mine = noncentral_chi2_cdf(np.array([11.35]), 64, 113.7778)
    ref = stats.ncx2.cdf(11.35, 64, 113.7778)
    assert mine[0] == pytest.approx(ref, rel=1e-9)
    assert mine[0] < 1e-30


def test_step_width_band_and_tail_integrals_exact():
    w = two_level_width(0.1)
    a = 1.0 / (1.0 + math.e)
    assert w.band_integral(0.0, 1.0) == pytest.approx(a + (1.0 - a) * 0.1, abs=1e-15)
    assert w.tail_integral(0.0).value == pytest.approx(1.0, abs=1e-15)
    assert w.tail_integral(w.h_max).value == 0.0


def test_step_width_ratio_inverse_levels():
    w = equality_case_width(4.0)
    u = np.array([0.1, 0.2499, 0.25, 0.9])
    assert np.array_equal(w.ratio_inverse(u), np.array([4.0, 4.0, 0.0, 0.0]))
    wt = two_level_width(0.3)
    r = wt.ratio_inverse(np.array([0.5, 0.2, 0.29]))
    a = 1.0 / (1.0 + math.e)
    span = math.e / ((1.0 + math.e) * 0.3)
    assert r[0] == pytest.approx(a)
    assert r[1] == pytest.approx(a + span)
    assert r[2] == pytest.approx(a + span)


def test_optimal_width_inverses_match_levels():
    for w in (OptimalCsWidth(0.5), OptimalAcsWidth(2.0)):
        u = np.linspace(0.05, 0.95, 19)
        r = w.ratio_inverse(u)
        assert np.allclose(w(r), u, atol=1e-10)


def test_optimal_width_tail_certificates_hold():
    for w in (OptimalCsWidth(0.3), OptimalCsWidth(0.9), OptimalAcsWidth(1.5), OptimalAcsWidth(4.0)):
        t = w.tail
        h = np.geomspace(t.h_from, t.h_from * 1e6, 200)
        assert np.all(w(h) <= t.coef * h**-t.exponent + 1e-300)


def test_step_width_validation():
    with pytest.raises(InvalidParameterError):
        StepWidth([0.5, 1.0], [1.0])
    with pytest.raises(InvalidParameterError):
        StepWidth([0.0, 1.0, 0.5], [1.0, 0.5])
    with pytest.raises(InvalidParameterError):
        StepWidth([0.0, 1.0, 2.0], [0.5, 1.0])
    with pytest.raises(InvalidParameterError):
        StepWidth([0.0, 1.0, 2.0], [0.5, 0.0])


def test_width_from_discrete_merges_equal_ratios():
    w = width_from_discrete((0.5, 0.25, 0.25, 0.0), (0.25, 0.25, 0.25, 0.25))
    # ratios 2, 1, 1, 0: levels 2 (mass .25) and 1 (mass .5)
    assert np.array_equal(w.edges, np.array([0.0, 1.0, 2.0]))
    assert np.allclose(w.values, np.array([0.75, 0.25]))


def test_width_table_roundtrip():
    w = StepWidth([0.0, 0.5, 1.5], [1.0, 0.5])
    csv = width_table_csv(w, n=64)
    lines = csv.strip().split("\n")
    assert lines[0] == "h,w"
    assert len(lines) == 65
    rows = [(0.0, 1.0), (0.5, 0.5), (1.5, 0.0)]
    w2 = width_from_table(rows)
    assert np.array_equal(w2.edges, w.edges)
    assert np.array_equal(w2.values, w.values)
    assert len(width_table(w, 1024)) == 1024


def test_width_from_table_validation():
    with pytest.raises(InvalidParameterError):
        width_from_table([(0.0, 0.9), (1.0, 0.0)])
    with pytest.raises(InvalidParameterError):
        width_from_table([(0.0, 1.0), (1.0, 0.5)])  # does not end at zero
    with pytest.raises(InvalidParameterError):
        width_from_table([(0.0, 1.0), (0.5, 0.25), (4.0, 0.0)])  # mass != 1
    with pytest.raises(InvalidParameterError):
        width_from_table([(0.0, 1.0), (1.0, 1e-4), (1.001, 0.0)])  # mass 1.0001


def test_width_rejects_negative_argument():
    with pytest.raises(InvalidParameterError):
        width_eval(LaplaceSpec(0.5))(-0.5)


def test_indicator_width_unit_mass_only():
    assert indicator_width().total_mass == 1.0
    with pytest.raises(InvalidParameterError):
        indicator_width(2.0)
