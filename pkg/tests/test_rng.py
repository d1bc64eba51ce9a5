import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from ufgkit.sdesim.rng import normal_pair, normals, philox4x32, split_seed, uniform_pair

# published Random123 known-answer vectors for Philox4x32-10
KAT = [
    ((0, 0, 0, 0), (0, 0), (0x6627E8D5, 0xE169C58D, 0xBC57AC4C, 0x9B00DBD8)),
    ((0xFFFFFFFF,) * 4, (0xFFFFFFFF,) * 2, (0x408F276D, 0x41C83B0E, 0xA20BC7C6, 0x6D5451FD)),
    ((0x243F6A88, 0x85A308D3, 0x13198A2E, 0x03707344), (0xA4093822, 0x299F31D0),
     (0xD16CFE09, 0x94FDCCEB, 0x5001E420, 0x24126EA1)),
]


def test_philox_known_answers():
    for counter, key, expected in KAT:
        got = tuple(int(w) for w in philox4x32(counter, key))
        assert got == expected


def test_philox_vectorised_matches_scalar():
    ctr = np.arange(5, dtype=np.uint32)
    vec = philox4x32((ctr, 7, 0, 1), (3, 4))
    for i in range(5):
        one = philox4x32((i, 7, 0, 1), (3, 4))
        assert all(int(a[i]) == int(b) for a, b in zip(vec, one))


def test_uniform_ranges():
    w = [np.array([0, 0xFFFFFFFF], dtype=np.uint32)] * 4
    u1, u2 = uniform_pair(*w)
    assert u1[0] > 0.0 and u1[1] == 1.0
    assert u2[0] == 0.0 and u2[1] < 1.0


def test_seed_split():
    lo, hi = split_seed(2**40 + 5)
    assert int(lo) == 5 and int(hi) == 256


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**63), st.integers(1, 5), st.integers(0, 50))
def test_stream_layout_independent_of_width(seed, d, step):
    # the normals of one sub-step are consecutive draws of the path stream
    paths = np.array([0, 3, 2**33 + 1], dtype=np.uint64)
    block = normals(seed, paths, step, d)
    flat = np.concatenate([normals(seed, paths, step * d + j, 1) for j in range(d)], axis=1)
    np.testing.assert_array_equal(block, flat)


def test_stream_draws_from_pairs():
    paths = np.array([9], dtype=np.uint64)
    z0, z1 = normal_pair((np.uint32(2), np.uint32(0), np.uint32(9), np.uint32(0)), split_seed(11))
    got = normals(11, paths, 1, 3)  # draws 3, 4, 5; pair 2 holds draws 4 and 5
    assert got[0, 1] == z0 and got[0, 2] == z1
    assert normals(11, paths, 4, 1)[0, 0] == z0


def test_normal_moments():
    z = normals(5, np.arange(200000, dtype=np.uint64), 0, 2)
    assert abs(z.mean()) < 0.01
    assert abs(z.var() - 1.0) < 0.01
    assert abs(np.corrcoef(z.T)[0, 1]) < 0.01
