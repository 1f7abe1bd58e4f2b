import numpy as np

from looptrees.rng import RandomSource, Stream, rng_u01, rng_u64, u01_block


def test_u64_deterministic():
    # the raw mixers wrap uint64 on purpose; numpy warns on scalar wrap
    with np.errstate(over="ignore"):
        k = np.uint64(0x9E3779B97F4A7C15)
        a = rng_u64(k, np.uint64(7))
        b = rng_u64(k, np.uint64(7))
        assert a == b
        assert rng_u64(k, np.uint64(8)) != a


def test_u01_range_and_block_agreement():
    s = Stream.from_seed(42, 0, 0)
    vals = [s.u01(i) for i in range(200)]
    assert all(0.0 <= v < 1.0 for v in vals)
    block = s.u01_block(0, 200)
    assert np.array_equal(np.asarray(vals), block)


def test_block_offsets():
    s = Stream.from_seed(42, 0, 0)
    full = s.u01_block(0, 64)
    assert np.array_equal(full[17:40], s.u01_block(17, 23))


def test_module_and_method_agree():
    s = Stream.from_seed(9, 1, 2)
    with np.errstate(over="ignore"):
        assert s.u01(5) == float(rng_u01(s.key_u64, np.uint64(5)))
        assert np.array_equal(s.u01_block(3, 7), u01_block(s.key_u64, 3, 7))


def test_replicates_differ():
    src = RandomSource(7)
    s0, s1 = src.replicate(0), src.replicate(1)
    assert s0.key != s1.key
    a = s0.u01_block(0, 32)
    b = s1.u01_block(0, 32)
    assert not np.array_equal(a, b)


def test_replicates_reproducible():
    a = RandomSource(7).replicate(3).u01_block(0, 16)
    b = RandomSource(7).replicate(3).u01_block(0, 16)
    assert np.array_equal(a, b)
    c = RandomSource(8).replicate(3).u01_block(0, 16)
    assert not np.array_equal(a, c)


def test_child_streams_are_disjoint_namespaces():
    s = Stream.from_seed(11, 0, 0)
    c0, c1 = s.child(0), s.child(1)
    assert c0.key != c1.key != s.key
    assert c0.key == s.child(0).key
    # child streams decorrelate slot-aligned draws
    a = c0.u01_block(0, 1000)
    b = c1.u01_block(0, 1000)
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.1


def test_uniformity_rough():
    s = Stream.from_seed(123, 0, 0)
    u = s.u01_block(0, 200_000)
    assert abs(u.mean() - 0.5) < 0.005
    assert abs(np.mean(u < 0.25) - 0.25) < 0.005
    # successive slots look independent
    assert abs(np.corrcoef(u[:-1], u[1:])[0, 1]) < 0.01
