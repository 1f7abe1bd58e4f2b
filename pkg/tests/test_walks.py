import logging
import math

import numpy as np
import pytest

from looptrees import laws, walks
from looptrees.errors import BudgetExhausted, CapTooSmall, TailTableMissing
from looptrees.rng import RandomSource

TABLE_LAW = walks.WalkLaw.from_table(-1, [0.5, 1 / 3, 1 / 6])
HEAVY = walks.WalkLaw.from_offspring(laws.HeavyTail(2.5, 0.6))


def test_walk_law_construction():
    assert abs(TABLE_LAW.gamma - 1 / 3) < 1e-14
    assert TABLE_LAW.skip_free
    assert abs(HEAVY.gamma - 0.4) < 1e-12
    assert HEAVY.beta == 2.5
    with pytest.raises(ValueError):
        walks.WalkLaw.from_offspring(laws.binary())  # critical, no drift
    with pytest.raises(ValueError):
        walks.WalkLaw.from_table(-1, [0.1, 0.2, 0.7])  # positive drift
    with pytest.raises(ValueError):
        walks.WalkLaw.from_table(0, [0.5, 0.5])  # cannot go down


def test_jump_threshold():
    assert walks.jump_threshold(0.4, 50) == 20
    assert walks.jump_threshold(0.4, 51) == 21  # 20.4 rounds up
    assert walks.jump_threshold(1 / 3, 9) == 3  # exact product, no dust
    assert walks.jump_threshold(0.1, 1) == 1  # floor at 1


def test_zeta_tail_dp_small_oracles():
    tails = walks.zeta_tail_dp(TABLE_LAW, 4)
    assert tails[0] == 1.0
    assert abs(tails[1] - 0.5) < 1e-14  # P(X >= 0)
    assert abs(tails[2] - 1 / 3) < 1e-12  # 2-step exhaustive
    # 3-step exhaustive enumeration
    p = {-1: 0.5, 0: 1 / 3, 1: 1 / 6}
    tot = sum(
        p[a] * p[b] * p[c]
        for a in p
        for b in p
        for c in p
        if a >= 0 and a + b >= 0 and a + b + c >= 0
    )
    assert abs(tails[3] - tot) < 1e-12


def test_wald_identity():
    t = walks.survival_table(TABLE_LAW, 512)
    assert abs(t.expected_zeta_exact() - 3.0) < 1e-13
    assert t.expected_zeta_partial() <= t.expected_zeta_exact() + 1e-12
    assert 0.0 <= t.zeta_tail_defect() < 1e-10
    assert t.truncation_bound == 0.0


def test_survival_monotonicity():
    t = walks.survival_table(HEAVY, 256)
    A = t.A
    assert np.all(A[1:, :] <= A[:-1, :] + 1e-12)  # more steps, less survival
    assert np.all(A[:, 1:] >= A[:, :-1] - 1e-12)  # higher start, more survival
    assert np.all((A >= 0) & (A <= 1))
    # v >= r is exactly 1 for skip-free walks
    for r in range(0, 256, 17):
        assert np.all(A[r, r:] == 1.0)


def test_free_mode_bracket():
    wf = walks.WalkLaw.from_table(-2, [0.3, 0.25, 0.2, 0.15, 0.1])
    t = walks.survival_table(wf, 256)
    assert 0.0 <= t.truncation_bound <= 1e-9
    p = {-2: 0.3, -1: 0.25, 0: 0.2, 1: 0.15, 2: 0.1}
    tot = sum(
        p[a] * p[b] * p[c]
        for a in p
        for b in p
        for c in p
        if a >= 0 and a + b >= 0 and a + b + c >= 0
    )
    assert abs(t.pzeta_ge(4) - tot) < 1e-12


def test_cap_too_small_for_wide_table():
    probs = np.concatenate([[0.99], np.full(39, 0.01 / 39)])
    law = walks.WalkLaw.from_table(-1, probs)
    with pytest.raises(CapTooSmall):
        law.head_pmf(16)


def test_segment_matches_bruteforce_law():
    src = RandomSource(123)
    tbl = walks.survival_table(TABLE_LAW, 64)
    from collections import Counter

    cnt = Counter()
    N = 60_000
    for r in range(N):
        seg, _ = walks.sample_survival_segment(TABLE_LAW, tbl, 3, src.replicate(r))
        cnt[tuple(seg.tolist())] += 1
    p = {-1: 0.5, 0: 1 / 3, 1: 1 / 6}
    paths = {}
    for a in p:
        for b in p:
            for c in p:
                if a >= 0 and a + b >= 0 and a + b + c >= 0:
                    paths[(a, b, c)] = p[a] * p[b] * p[c]
    Z = sum(paths.values())
    tv = 0.5 * sum(
        abs(paths.get(k, 0) / Z - cnt.get(k, 0) / N) for k in set(paths) | set(cnt)
    )
    assert tv < 0.015


def test_conditioned_walk_postcondition():
    src = RandomSource(7)
    for r in range(200):
        p = walks.sample_conditioned_walk(TABLE_LAW, 10, 30, src.replicate(r), method="dp")
        assert p.values[0] == 0
        assert np.min(p.values[1:10]) >= 0
        assert p.values.shape == (31,)
        if p.zeta is not None:
            assert p.zeta >= 10
            assert p.values[p.zeta] < 0
            assert np.min(p.values[1 : p.zeta]) >= 0 if p.zeta > 1 else True


def test_conditioned_walk_n1_is_free():
    # n=1 conditions on nothing
    src = RandomSource(11)
    p = walks.sample_conditioned_walk(TABLE_LAW, 1, 2000, src, method="rejection")
    assert p.meta["attempts"] == 1
    inc = p.increments
    assert abs(inc.mean() + TABLE_LAW.gamma) < 0.05


def test_dp_and_rejection_agree(caplog):
    n, hor, N = 8, 16, 20_000
    src_a, src_b = RandomSource(21), RandomSource(22)
    with caplog.at_level(logging.CRITICAL, logger="looptrees.walks"):
        va = np.array(
            [
                walks.sample_conditioned_walk(
                    TABLE_LAW, n, hor, src_a.replicate(r), method="dp"
                ).values[n - 1]
                for r in range(N)
            ]
        )
        vb = np.array(
            [
                walks.sample_conditioned_walk(
                    TABLE_LAW, n, hor, src_b.replicate(r), method="rejection"
                ).values[n - 1]
                for r in range(N)
            ]
        )
    se = math.sqrt(va.var() / N + vb.var() / N)
    assert abs(va.mean() - vb.mean()) < 4 * se


def test_rejection_budget_exhausted():
    with pytest.raises(BudgetExhausted):
        walks.sample_conditioned_walk(
            HEAVY, 400, 400, RandomSource(1), method="rejection", max_attempts=3
        )


def test_coupled_Z_jump_and_blocks():
    src = RandomSource(99)
    n = 50
    thr = walks.jump_threshold(HEAVY.gamma, n)
    assert thr == 20
    seen_jump = 0
    for r in range(500):
        z = walks.sample_coupled_Z(HEAVY, n, 60, src.replicate(r))
        assert z.values[0] == 0
        I = z.meta["I"]
        assert I >= 1
        if z.jump_index is not None:
            seen_jump += 1
            assert z.jump_index == I
            assert z.increments[I - 1] >= thr
            # prefix stays nonnegative through the jump index
            if I > 1:
                assert np.min(z.values[1:I]) >= 0
        assert z.meta["i_truncation_tv"] < 1e-4
    assert seen_jump > 450  # I rarely exceeds the horizon


def test_coupled_Z_I_law():
    # n kept small: a finite-support law has no jump past gamma*n otherwise
    src = RandomSource(31)
    tbl = walks.survival_table(TABLE_LAW, 2048)
    N = 100_000
    counts = {}
    for r in range(N):
        z = walks.sample_coupled_Z(TABLE_LAW, 3, 12, src.replicate(r))
        counts[z.meta["I"]] = counts.get(z.meta["I"], 0) + 1
    w = tbl.A[:, 0] / tbl.A[:, 0].sum()
    tv = 0.5 * sum(abs(counts.get(j + 1, 0) / N - w[j]) for j in range(40))
    assert tv < 0.01


def test_coupled_Z_needs_reachable_jump():
    with pytest.raises(ValueError):
        walks.sample_coupled_Z(TABLE_LAW, 40, 50, RandomSource(1))


def test_check_Gn():
    vals = np.concatenate([[0], np.cumsum(np.full(30, -1))])
    assert not walks.check_Gn(walks.WalkPath(vals, 1), 20, 0.4)
    inc = np.full(30, -1)
    inc[7] = walks.jump_threshold(0.4, 20)
    vals = np.concatenate([[0], np.cumsum(inc)])
    assert walks.check_Gn(walks.WalkPath(vals, None), 20, 0.4)
    inc[13] = walks.jump_threshold(0.4, 20) + 3  # second jump: no longer unique
    vals = np.concatenate([[0], np.cumsum(inc)])
    assert not walks.check_Gn(walks.WalkPath(vals, None), 20, 0.4)
    with pytest.raises(ValueError):
        walks.check_Gn(walks.WalkPath(np.zeros(5), None), 20, 0.4)


def _free_windows(law, k=3):
    def f(stream, N):
        return law.draw_free(stream, 0, N * k).reshape(N, k)

    return f


def test_windowed_tv_self():
    bins = walks.BinScheme(tuple(range(-1, 20)))
    est = walks.windowed_tv(
        _free_windows(TABLE_LAW), _free_windows(TABLE_LAW), 3, bins, 200_000, RandomSource(1001)
    )
    assert est.tv <= 0.01
    assert 0 < est.bias_note < 0.02


def test_windowed_tv_shifted():
    # mu(0) > 1/2 makes the exact one-coordinate shift TV exceed 1/2
    law = walks.WalkLaw.from_table(-1, [0.55, 0.25, 0.2])
    base = _free_windows(law)

    def shifted(stream, N):
        w = base(stream, N).copy()
        w[:, 0] += 1
        return w

    bins = walks.BinScheme(tuple(range(-1, 20)))
    est = walks.windowed_tv(base, shifted, 3, bins, 100_000, RandomSource(1002))
    assert est.tv >= 0.5


def test_windowed_tv_detects_conditioning():
    def free(stream, N):
        return TABLE_LAW.draw_free(stream, 0, N * 3).reshape(N, 3)

    def conditioned(stream, N):
        tbl = walks.survival_table(TABLE_LAW, 64)
        out = np.empty((N, 3), dtype=np.int64)
        for r in range(N):
            seg, _ = walks.sample_survival_segment(TABLE_LAW, tbl, 3, stream.child(r))
            out[r] = seg
        return out

    bins = walks.BinScheme((-1, 0, 1))
    est = walks.windowed_tv(free, conditioned, 3, bins, 20_000, RandomSource(5))
    # conditioning forbids the first increment -1: TV at least P(X=-1)
    assert est.tv > 0.4


def test_bin_scheme():
    b = walks.BinScheme((-1, 0, 5))
    assert b.states == 4
    assert list(b.digits(np.array([-3, -1, 0, 3, 5, 99]))) == [0, 1, 2, 2, 3, 3]
    cells = b.cells(np.array([[-3, 5], [0, 0]]))
    assert list(cells) == [0 * 4 + 3, 2 * 4 + 2]
    with pytest.raises(ValueError):
        walks.BinScheme((3, 1))
    with pytest.raises(ValueError):
        walks.BinScheme(())


def test_eq31_ratio_decreasing():
    r = [walks.eq31_ratio(HEAVY, n) for n in (100, 400, 1600)]
    assert r[0] > r[1] > r[2] > 1.0


def test_first_passage_scaling_basics():
    src = RandomSource(31)
    tg, prof, zfrac = walks.first_passage_scaling(HEAVY, 300, src.replicate(0))
    assert zfrac >= 1.0
    assert prof[0] == 0.0
    assert tg.shape == prof.shape
    # after death the profile freezes at a negative value
    dead = tg >= zfrac
    if np.any(dead):
        assert np.all(prof[dead] == prof[dead][0])
        assert prof[dead][0] < 0


def test_first_passage_zeta_median():
    src = RandomSource(77)
    zs = np.array(
        [walks.first_passage_scaling(HEAVY, 300, src.replicate(r))[2] for r in range(300)]
    )
    # J/gamma is Pareto(2.5) on [1, inf): median 2^{1/2.5} = 1.32
    med = np.median(zs)
    assert 1.1 < med < 1.6


def test_tail_table_missing():
    tbl = walks.survival_table(TABLE_LAW, 32)
    with pytest.raises(TailTableMissing):
        tbl.pzeta_ge(40)
    with pytest.raises(TailTableMissing):
        walks.sample_survival_segment(TABLE_LAW, tbl, 64, RandomSource(1).replicate(0))


def test_zeta_csv_roundtrip(tmp_path):
    t = walks.survival_table(TABLE_LAW, 8)
    p = tmp_path / "tails.csv"
    t.write_csv(p)
    j, pz, ci = walks.read_zeta_csv(p)
    assert np.array_equal(j, np.arange(1, 10))
    assert np.array_equal(pz, t.A[:, 0])
    assert np.all(ci == 0.0)
    assert p.read_text().splitlines()[0] == "j,p_zeta_ge,ci_half_width"
