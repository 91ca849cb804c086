import json
import math

import numpy as np
import pytest
from scipy import special, stats

from crs_toolkit.errors import InvalidParameterError, StepBudgetError
from crs_toolkit.grs import (
    GrsRecursion,
    default_eps_stop,
    grs_empirical,
    grs_index_distribution,
    grs_sample,
)
from crs_toolkit.measures import (
    GaussianSpec,
    LaplaceSpec,
    SyntheticSpec,
    discrete_spec,
    make_pair,
)
from crs_toolkit.streams import RngStream
from crs_toolkit.width import (
    OptimalCsWidth,
    equality_case_width,
    indicator_width,
    two_level_width,
    width_eval,
)

LN2 = math.log(2.0)
DISCRETE_EXAMPLE = discrete_spec((0.5, 0.5, 0.0, 0.0), (0.25,) * 4)


def test_discrete_recursion_is_geometric():
    dist = grs_index_distribution(width_eval(DISCRETE_EXAMPLE), eps_stop=1e-9)
    n = dist.truncation_index
    expected = 0.5 ** np.arange(1, n + 1)
    assert np.max(np.abs(dist.p - expected)) < 1e-15
    assert dist.entropy_bits == pytest.approx(2.0, abs=1e-7)
    assert dist.entropy_bits + dist.entropy_tail_bound_bits >= 2.0 - 1e-12
    assert dist.mean_index + dist.mean_tail_bound == pytest.approx(2.0, abs=1e-12)
    assert dist.tail_mass + float(np.sum(dist.p)) == pytest.approx(1.0, abs=1e-12)


def test_identity_pair_recursion():
    dist = grs_index_distribution(indicator_width())
    assert dist.truncation_index == 1
    assert dist.p[0] == 1.0
    assert dist.entropy_bits == 0.0
    assert dist.mean_index == 1.0
    assert dist.tail_mass == 0.0
    assert dist.mean_tail_bound == 0.0


def test_equality_case_c2_matches_discrete_example():
    a = grs_index_distribution(width_eval(DISCRETE_EXAMPLE), eps_stop=1e-9)
    b = grs_index_distribution(equality_case_width(2.0), eps_stop=1e-9)
    n = min(a.truncation_index, b.truncation_index)
    assert np.allclose(a.p[:n], b.p[:n], atol=1e-15)
    assert a.entropy_bits == pytest.approx(b.entropy_bits, abs=1e-12)


def test_blocked_and_scalar_paths_agree():
    w = two_level_width(0.1)
    dist = grs_index_distribution(w, eps_stop=1e-6)
    rec = GrsRecursion(w)
    n = dist.truncation_index
    rec.state(n + 1)
    scalar_p = np.array(rec.S[:n]) * np.array(rec.q[:n])
    assert np.max(np.abs(dist.p - scalar_p)) < 1e-12
    assert rec.S[n] == pytest.approx(dist.tail_mass, rel=1e-10)


def test_default_eps_stop_by_width_kind():
    assert default_eps_stop(two_level_width(0.1)) == 1e-12
    assert default_eps_stop(width_eval(LaplaceSpec(0.5))) == 1e-9


def test_laplace_recursion_mean_equals_h_max():
    # telescoping L: the certified mean interval pins E[K] at h_max = 1/b
    dist = grs_index_distribution(width_eval(LaplaceSpec(0.5)), eps_stop=1e-7)
    assert dist.mean_index + dist.mean_tail_bound == pytest.approx(2.0, abs=1e-10)
    assert dist.entropy_bits == pytest.approx(1.5338801, abs=1e-4)


def test_gaussian_recursion_thm_bounds():
    from crs_toolkit.divergences import alternative_divergence, channel_simulation_divergence
    w = width_eval(GaussianSpec(1.0, 0.5, 1))
    dist = grs_index_distribution(w, eps_stop=1e-9)
    dcs = channel_simulation_divergence(w).value_bits
    dacs = alternative_divergence(w).value_bits
    ent_hi = dist.entropy_bits + dist.entropy_tail_bound_bits
    assert dcs <= ent_hi + 1e-9
    assert dist.entropy_bits <= dcs + math.log2(math.e + 1.0) + 1e-9
    assert dist.entropy_bits <= dacs + 1.0 + 1e-9
    assert dist.mean_index + dist.mean_tail_bound == pytest.approx(w.h_max, abs=1e-9)


def test_stability_under_eps_refinement():
    for w in (width_eval(DISCRETE_EXAMPLE), two_level_width(0.1),
              width_eval(GaussianSpec(1.0, 0.5, 1))):
        coarse = grs_index_distribution(w, eps_stop=1e-9)
        fine = grs_index_distribution(w, eps_stop=1e-10)
        assert abs(fine.entropy_bits - coarse.entropy_bits) <= coarse.entropy_tail_bound_bits


def test_entropy_tail_bound_covers_true_tail():
    # geometric case in closed form: H_true = 2 bits exactly
    for eps in (1e-6, 1e-9, 1e-12):
        dist = grs_index_distribution(width_eval(DISCRETE_EXAMPLE), eps_stop=eps)
        missing = 2.0 - dist.entropy_bits
        assert 0.0 <= missing <= dist.entropy_tail_bound_bits


def test_step_cap_raises():
    with pytest.raises(StepBudgetError):
        grs_index_distribution(two_level_width(0.001), eps_stop=1e-9, step_cap=100)
    with pytest.raises(InvalidParameterError):
        grs_index_distribution(OptimalCsWidth(0.5))  # infinite h_max
    with pytest.raises(InvalidParameterError):
        grs_index_distribution(indicator_width(), eps_stop=2.0)


def test_sampler_identity_pair_accepts_first():
    pair = make_pair(LaplaceSpec(1.0))
    w = width_eval(LaplaceSpec(1.0))
    for seed in range(5):
        _, k = grs_sample(pair, w, RngStream(seed, 0))
        assert k == 1


def test_sampler_discrete_support_and_first_step():
    pair = make_pair(DISCRETE_EXAMPLE)
    w = width_eval(DISCRETE_EXAMPLE)
    res = grs_empirical(pair, w, RngStream(0, 4), 20_000)
    accepted = res.accepted.astype(int)
    assert set(np.unique(accepted)) <= {0, 1}
    p1 = res.survival_estimate(1) - res.survival_estimate(2)
    assert abs(p1 - 0.5) <= 4 * math.sqrt(0.25 / 20_000)


def test_sampler_trace_matches_recursion():
    w = width_eval(LaplaceSpec(0.5))
    rec = GrsRecursion(w)
    pair = make_pair(LaplaceSpec(0.5))
    grs_sample(pair, w, RngStream(5, 5), recursion=rec)
    fresh = GrsRecursion(w)
    k = len(rec.L)
    fresh.state(k)
    assert np.allclose(rec.L[:k], fresh.L[:k], atol=0.0)
    assert np.allclose(rec.S[:k], fresh.S[:k], atol=0.0)


def test_sampler_deterministic_given_stream():
    pair = make_pair(LaplaceSpec(0.5))
    w = width_eval(LaplaceSpec(0.5))
    x1, k1 = grs_sample(pair, w, RngStream(123, 7))
    x2, k2 = grs_sample(pair, w, RngStream(123, 7))
    assert (x1, k1) == (x2, k2)
    res1 = grs_empirical(pair, w, RngStream(9, 0), 2000)
    res2 = grs_empirical(pair, w, RngStream(9, 0), 2000)
    assert np.array_equal(res1.indices, res2.indices)
    assert np.array_equal(res1.accepted, res2.accepted)


def test_synthetic_first_step_acceptance():
    # extremal width, alpha = 1/2: P[K = 1] = 1/2 + int_(1/2)^1 (2h)^-2 dh = 3/4
    w = OptimalCsWidth(0.5)
    rec = GrsRecursion(w)
    rec.state(2)
    assert rec.q[0] == pytest.approx(0.75, abs=1e-12)
    pair = make_pair(SyntheticSpec(w))
    n = 5000
    u = pair.sample_proposal(RngStream(3, 1), n)
    beta1 = np.minimum(np.exp(pair.log_ratio(u)), 1.0)
    assert abs(float(beta1.mean()) - 0.75) <= 4 * float(beta1.std(ddof=1)) / math.sqrt(n)


def test_empirical_chi_square_against_recursion():
    pair = make_pair(DISCRETE_EXAMPLE)
    w = width_eval(DISCRETE_EXAMPLE)
    n = 10**5
    res = grs_empirical(pair, w, RngStream(0, 6), n)
    exp_p = 0.5 ** np.arange(1, 13)
    observed = np.array([(res.indices == k).sum() for k in range(1, 13)]
                        + [(res.indices > 12).sum()], dtype=float)
    expected = np.append(exp_p, 1.0 - exp_p.sum()) * n
    chi2 = float(((observed - expected) ** 2 / expected).sum())
    assert chi2 < stats.chi2.ppf(0.999, 12)


def test_empirical_ks_against_target():
    pair = make_pair(LaplaceSpec(0.5))
    w = width_eval(LaplaceSpec(0.5))
    n = 10**4
    res = grs_empirical(pair, w, RngStream(1, 6), n)
    xs = np.sort(res.accepted)
    F = stats.laplace(scale=0.5).cdf(xs)
    i = np.arange(1, n + 1)
    ks = max(float(np.max(i / n - F)), float(np.max(F - (i - 1) / n)))
    assert ks < special.kolmogi(1e-3) / math.sqrt(n)


def test_empirical_survival_matches_recursion():
    pair = make_pair(LaplaceSpec(0.5))
    w = width_eval(LaplaceSpec(0.5))
    n = 10**4
    rec = GrsRecursion(w)
    res = grs_empirical(pair, w, RngStream(2, 6), n, recursion=rec)
    for k in range(1, 11):
        s_k = rec.S[k - 1]
        sigma = math.sqrt(max(s_k * (1.0 - s_k), 1e-12) / n)
        assert abs(res.survival_estimate(k) - s_k) <= 4 * sigma + 1e-12


def test_empirical_histogram_and_validation():
    pair = make_pair(LaplaceSpec(1.0))
    w = width_eval(LaplaceSpec(1.0))
    res = grs_empirical(pair, w, RngStream(0, 0), 1000)
    assert res.histogram == {1: 1000}
    with pytest.raises(InvalidParameterError):
        grs_empirical(pair, w, RngStream(0, 0), 999)


def test_empirical_step_cap():
    w = OptimalCsWidth(0.5)
    pair = make_pair(SyntheticSpec(w))
    with pytest.raises(StepBudgetError):
        grs_empirical(pair, w, RngStream(0, 1), 1000, step_cap=50)


def test_index_distribution_json_schema():
    dist = grs_index_distribution(width_eval(DISCRETE_EXAMPLE), eps_stop=1e-6)
    blob = json.loads(json.dumps(dist.to_json()))
    assert set(blob) == {"p", "tail_mass", "entropy_bits", "entropy_tail_bound_bits",
                         "mean_index", "mean_tail_bound"}
    assert blob["p"] == [float(v) for v in dist.p]


def test_gaussian_vector_sampling_accepts():
    spec = GaussianSpec(1.0, 0.5, 2)
    pair = make_pair(spec)
    w = width_eval(spec)
    x, k = grs_sample(pair, w, RngStream(4, 2))
    assert isinstance(x, np.ndarray) and x.shape == (2,)
    assert k >= 1
    res = grs_empirical(pair, w, RngStream(4, 3), 1000)
    assert res.accepted.shape == (1000, 2)
