import math

import numpy as np
import pytest
import scipy.stats

from looptrees import laws, limits, sampling
from looptrees.errors import (
    NotCritical,
    NoVertexAtHeight,
    TooLarge,
    TooLargeToEnumerate,
)
from looptrees.limits import EmpiricalLaw, MetricSample
from looptrees.rng import RandomSource, Stream

GEO = laws.law_from_name("geometric")
BIN = laws.law_from_name("binary")
CIV = laws.law_from_name("critinfvar")
HEAVY = laws.HeavyTail(2.5, 0.6)
TRUNCGEO = laws.FiniteTable((0.5, 0.25, 0.25))


# ---------------------------------------------------------------------------
# sample containers


def test_empirical_law_from_sample():
    emp = EmpiricalLaw.from_sample([3.0, 1.0, 2.0], excluded=4)
    assert emp.size == 3
    assert emp.excluded == 4
    assert np.array_equal(emp.values, [1.0, 2.0, 3.0])
    assert emp.mean() == pytest.approx(2.0)
    assert emp.median() == 2.0
    assert emp.quantile(0.99) == 3.0
    assert emp.cdf(1.5) == pytest.approx(1 / 3)
    assert emp.cdf(3.0) == pytest.approx(1.0)
    assert emp.cdf(0.0) == 0.0


def test_empirical_law_validation():
    with pytest.raises(ValueError):
        EmpiricalLaw(np.array([2.0, 1.0]), np.array([0.5, 0.5]))  # unsorted
    with pytest.raises(ValueError):
        EmpiricalLaw(np.array([1.0, 2.0]), np.array([0.5, 0.4]))  # sum != 1
    with pytest.raises(ValueError):
        EmpiricalLaw(np.array([1.0, 2.0]), np.array([1.0]))  # shape mismatch
    empty = EmpiricalLaw.from_sample([])
    with pytest.raises(ValueError):
        empty.quantile(0.5)
    with pytest.raises(ValueError):
        empty.ks_against(lambda x: x)


def test_ks_statistic_matches_scipy():
    xs = Stream.from_seed(101).u01_block(0, 400)
    emp = EmpiricalLaw.from_sample(xs)
    ours = emp.ks_against(lambda x: np.clip(x, 0.0, 1.0))
    ref = scipy.stats.kstest(xs, "uniform").statistic
    assert ours == pytest.approx(ref, abs=1e-12)


def test_metric_sample_validation():
    m = MetricSample.from_matrix([[0.0, 1.0], [1.0, 0.0]])
    assert m.size == 2
    assert m.ids == (0, 1)
    with pytest.raises(ValueError):
        MetricSample.from_matrix([[0.0, 1.0], [2.0, 0.0]])  # asymmetric
    with pytest.raises(ValueError):
        MetricSample.from_matrix([[1.0, 1.0], [1.0, 0.0]])  # diagonal
    with pytest.raises(ValueError):
        MetricSample.from_matrix([[0, 1, 3], [1, 0, 1], [3, 1, 0]])  # triangle
    with pytest.raises(ValueError):
        MetricSample(ids=(0,), d=np.zeros((1, 1)), pair_dists=np.zeros((0, 3)))
    with pytest.raises(ValueError):
        MetricSample(ids=(0,))


# ---------------------------------------------------------------------------
# constants


def test_constants_closed_form():
    assert limits.c_mu(BIN) == 1.0
    assert limits.c_bar_mu(BIN) == 0.5
    assert limits.c_mu(GEO) == pytest.approx(4 / 3, abs=1e-15)
    assert limits.c_bar_mu(GEO) == pytest.approx(2 / 3, abs=1e-15)
    # infinite variance collapses both constants to 1/2
    assert limits.c_mu(CIV) == 0.5
    assert limits.c_bar_mu(CIV) == 0.5
    with pytest.raises(NotCritical):
        limits.c_mu(HEAVY)
    with pytest.raises(NotCritical):
        limits.c_bar_mu(HEAVY)


def test_constants_oracle_within_errorbars():
    # binary: min(U, X*-U+1) is identically 1, so the estimate is exact
    est, se = limits.c_mu_oracle(BIN, 50_000, RandomSource(3, 1))
    assert est == 1.0 and se == 0.0
    est, se = limits.c_mu_oracle(BIN, 200_000, RandomSource(3, 1), bar=True)
    assert abs(est - 0.5) <= 4 * se
    est, se = limits.c_mu_oracle(GEO, 200_000, RandomSource(3, 1))
    assert abs(est - 4 / 3) <= 4 * se
    est, se = limits.c_mu_oracle(GEO, 200_000, RandomSource(3, 1), bar=True)
    assert abs(est - 2 / 3) <= 4 * se


# ---------------------------------------------------------------------------
# scaling sequence


def test_bn_finite_variance_closed_form():
    assert limits.bn_value(GEO, 1000) == pytest.approx(math.sqrt(1000), rel=1e-12)
    assert limits.bn_value(BIN, 1000) == pytest.approx(math.sqrt(500), rel=1e-12)
    assert limits.scaling_for(GEO).mode == "finite-variance"
    assert limits.scaling_for(GEO) is limits.scaling_for(GEO)
    with pytest.raises(NotCritical):
        limits.ScalingSequence(HEAVY)
    with pytest.raises(ValueError):
        limits.bn_value(GEO, 0)


def test_bn_infinite_variance_solves_scaling_equation():
    seq = limits.scaling_for(CIV)
    assert seq.mode == "infinite-variance-a2"
    ns = (1000, 10_000, 100_000)
    got = limits.bn_values(CIV, ns)
    frozen = (26.349155, 104.615372, 385.615331)
    for g, f in zip(got, frozen):
        assert g == pytest.approx(f, abs=1e-3)
    # B_n grows strictly faster than sqrt(n) in this regime
    ratios = [g / math.sqrt(n) for g, n in zip(got, ns)]
    assert ratios[0] < ratios[1] < ratios[2]
    # the defining equation holds at the solution
    for g, n in zip(got, ns):
        assert n * seq._truncated_var(int(g)) / (g * g) == pytest.approx(2.0, abs=1e-2)


# ---------------------------------------------------------------------------
# exact walk tables


def test_phi_two_step_exhaustive():
    p1 = limits.phi(GEO, 1)
    p2 = limits.phi(GEO, 2)
    assert p1(1) == pytest.approx(0.5, abs=1e-15)
    assert p1.total == pytest.approx(1.0, abs=1e-12)
    assert p1.deficit == 0.0
    # W_2 = X_1 + X_2 - 2 with geometric(1/2) offspring
    assert p2(2) == pytest.approx(0.25, abs=1e-15)
    assert p2(1) == pytest.approx(0.25, abs=1e-15)
    assert p2(0) == pytest.approx(1 / 16 + 2 * (0.5 * 0.125), abs=1e-15)
    assert p2(3) == 0.0  # below -n is impossible
    js, vals = p2.by_j()
    assert np.all(np.diff(js) == 1)
    for j, v in zip(js, vals):
        assert p2(int(j)) == v


def test_phi_powering_route_certified_against_wide_reference():
    n, cap = 120, 80
    fast = limits.phi(GEO, n, cap=cap)
    # reference: sequential convolution with a cap so wide its own loss is
    # negligible (cap/sd ~ 15, versus ~5 for the table under test)
    ref_cap = 240
    step = GEO.pmf_array(ref_cap + 2)
    acc = np.array([1.0])
    lo = 0
    for _ in range(n):
        lo -= 1
        acc = np.convolve(acc, step)[: ref_cap - lo + 1]
    assert fast.w_lo == lo == -n
    # truncation only drops mass: every stored entry understates the truth
    # by at most the certified deficit, and never overstates it
    m = fast.probs.size
    gap = acc[:m] - fast.probs
    assert gap.min() > -1e-12
    assert gap.max() <= fast.deficit + 1e-12
    assert fast.deficit > 1e-9  # the cap genuinely bites at this width
    assert fast.total + fast.deficit == pytest.approx(1.0, abs=1e-12)


def test_phi_guards():
    with pytest.raises(ValueError):
        limits.phi(GEO, 0)
    with pytest.raises(TooLarge):
        limits.phi(GEO, 10**9)


def test_kemperman_identity_exact():
    for n in range(1, 11):
        assert limits.kemperman_discrepancy(GEO, n) < 1e-12
        assert limits.kemperman_discrepancy(BIN, n) < 1e-12
    for n, k in ((5, 2), (7, 3), (9, 4)):
        assert limits.forest_discrepancy(GEO, n, k) < 1e-12


def test_llt_gaussian_approach():
    vals = [limits.llt_check(GEO, n) for n in (500, 2000, 8000)]
    assert vals[0] == pytest.approx(0.006305, rel=0.02)
    assert vals[1] == pytest.approx(0.003115, rel=0.02)
    assert vals[2] == pytest.approx(0.001548, rel=0.02)
    assert vals[0] > vals[1] > vals[2]
    with pytest.raises(NotCritical):
        limits.llt_check(HEAVY, 100)
    with pytest.raises(ValueError):
        limits.llt_check(CIV, 100)


# ---------------------------------------------------------------------------
# trunk bias identity


def test_bias_identity_enumerated():
    assert limits.bias_identity_check(TRUNCGEO, 2) == 0.0
    assert limits.bias_identity_check(TRUNCGEO, 6) < 1e-10
    assert limits.bias_identity_check(BIN, 5) < 1e-10
    assert limits.bias_identity_check(BIN, 7) < 1e-10
    assert limits.bias_identity_check(GEO, 8) < 1e-10


def test_bias_identity_guards():
    with pytest.raises(TooLargeToEnumerate):
        limits.bias_identity_check(GEO, 10)
    with pytest.raises(ValueError):
        limits.bias_identity_check(BIN, 2)  # binary trees have odd size


# ---------------------------------------------------------------------------
# trunk growth bounds (deterministic for the two-atom law)


def test_trunk_star_binary_growth_bounds():
    for n in (1001, 8193):
        b = limits.bn_value(BIN, n)
        for i, t in enumerate((0.3, 0.7, 1.3)):
            h = int(t * n / b)
            sk = sampling.sample_trunk_star(BIN, h, Stream.from_seed(31).child(i))
            assert np.all(sk.child_counts == 2)
            assert sk.lukasiewicz_star() == 2 * h
            assert abs(sk.lukasiewicz_star() / b - 4 * t) <= 2 / b
            assert abs(sk.leaf_count / b - 2 * t) <= 2 / b


# ---------------------------------------------------------------------------
# spinal statistics on conditioned trees


def test_spinal_ratio_geometric():
    emp = limits.spinal_ratio_stats(GEO, 4096, 80, RandomSource(7, 2))
    assert emp.size + emp.excluded == 80
    assert abs(emp.median() - 4 / 3) < 0.1


def test_spinal_ratio_binary():
    # sigma^2 = 1 doubles the ratio relative to c_mu: the limit is
    # (2 / sigma^2) c_mu, which the geometric case hides since sigma^2 = 2
    emp = limits.spinal_ratio_stats(BIN, 4097, 40, RandomSource(29, 7))
    assert abs(emp.median() - 2.0) < 0.1


def test_profile_coupling_stat_separates_lattice_effects():
    geo_vals = [
        limits.profile_coupling_stat(GEO, 4096, Stream.from_seed(9).child(i))
        for i in range(24)
    ]
    bin_vals = [
        limits.profile_coupling_stat(BIN, 4097, Stream.from_seed(9).child(100 + i))
        for i in range(24)
    ]
    assert np.median(geo_vals) < 0.3
    assert np.median(bin_vals) > 0.4
    assert all(v >= 0 for v in geo_vals + bin_vals)


def test_loop_vs_scaled_tree_distortion_small():
    emp = limits.loop_vs_scaled_tree_distortion(GEO, 2000, 300, Stream.from_seed(13))
    assert emp.size == 300
    assert emp.values.min() >= 0.0
    assert emp.quantile(0.9) < 0.35


def test_height_law_check_geometric():
    ks = limits.height_law_check(GEO, 4096, 300, RandomSource(17, 4))
    assert ks < 0.08


# ---------------------------------------------------------------------------
# trunk distribution against the direct construction


def test_trunk_tv_binary_at_noise_floor():
    st = {}
    est = limits.trunk_tv_check(
        BIN, 1001, t=1.0, window=1, N=10_000, src=RandomSource(19, 5), stats=st
    )
    assert st["height"] == 44
    assert st["excluded"] > 0
    # window 1 of a binary trunk has two possible states, so the plug-in
    # estimate should sit well under a percent
    assert est.occupied == 2
    assert est.tv < 0.01


def test_trunk_tv_guards():
    with pytest.raises(ValueError):
        limits.trunk_tv_check(BIN, 101, t=0.01, window=1, N=100, src=RandomSource(19, 5))
    with pytest.raises(ValueError):
        limits.trunk_tv_check(BIN, 1001, t=1.0, window=50, N=100, src=RandomSource(19, 5))
    with pytest.raises(NoVertexAtHeight):
        limits.trunk_tv_check(BIN, 101, t=3.5, window=1, N=50, src=RandomSource(19, 5))


# ---------------------------------------------------------------------------
# condensation


def test_pareto_cdf_shape():
    assert limits.pareto_cdf(0.2, 0.4, 2.5) == 0.0
    assert limits.pareto_cdf(0.4, 0.4, 2.5) == 0.0
    assert limits.pareto_cdf(0.8, 0.4, 2.5) == pytest.approx(1 - 0.5**2.5, abs=1e-12)
    xs = np.linspace(0.0, 5.0, 50)
    out = limits.pareto_cdf(xs, 0.4, 2.5)
    assert out.shape == xs.shape
    assert np.all(np.diff(out) >= 0)


def test_condensation_stats_heavy_tail():
    st = {}
    md, sec, ghb = limits.condensation_stats(HEAVY, 2100, 30, RandomSource(23, 6), stats=st)
    assert st["replicates"] == 30
    assert md.size == sec.size == ghb.size == 30
    # one child count carries a macroscopic fraction of the mass
    assert 0.3 < md.median() < 0.95
    assert sec.median() < 0.1
    assert ghb.median() < 0.1


# ---------------------------------------------------------------------------
# exact Gromov-Hausdorff on small spaces


def _gh_brute(da, db):
    na, nb = da.shape[0], db.shape[0]
    pairs = [(a, b) for a in range(na) for b in range(nb)]
    best = math.inf
    for mask in range(1, 1 << len(pairs)):
        rel = [pairs[i] for i in range(len(pairs)) if mask >> i & 1]
        if len({a for a, _ in rel}) < na or len({b for _, b in rel}) < nb:
            continue
        dis = max(
            abs(da[a1, a2] - db[b1, b2]) for a1, b1 in rel for a2, b2 in rel
        )
        best = min(best, dis)
    return 0.5 * best


def test_gh_exact_oracles():
    line = MetricSample.from_matrix([[0, 1, 2], [1, 0, 1], [2, 1, 0]])
    tri = MetricSample.from_matrix([[0, 1, 1], [1, 0, 1], [1, 1, 0]])
    point = MetricSample.from_matrix([[0.0]])
    two = MetricSample.from_matrix([[0, 2], [2, 0]])
    assert limits.gh_exact_small(line, line) == 0.0
    assert limits.gh_exact_small(line, tri) == 0.5
    assert limits.gh_exact_small(tri, line) == 0.5
    assert limits.gh_exact_small(point, two) == 1.0


def test_gh_exact_matches_brute_force():
    st = Stream.from_seed(37)
    for case in range(12):
        child = st.child(case)
        ka = 1 + case % 3
        kb = 1 + (case // 3) % 3
        pa = child.u01_block(0, 2 * ka).reshape(ka, 2)
        pb = child.u01_block(2 * ka, 2 * kb).reshape(kb, 2)
        da = np.linalg.norm(pa[:, None] - pa[None, :], axis=2)
        db = np.linalg.norm(pb[:, None] - pb[None, :], axis=2)
        got = limits.gh_exact_small(da, db)
        assert got == pytest.approx(_gh_brute(da, db), abs=1e-9)


def test_gh_exact_guards():
    big = np.zeros((8, 8))
    with pytest.raises(TooLarge):
        limits.gh_exact_small(big, big)
    with pytest.raises(ValueError):
        limits.gh_exact_small(
            MetricSample(ids=(0, 1), pair_dists=np.zeros((1, 3))),
            MetricSample.from_matrix([[0.0]]),
        )
