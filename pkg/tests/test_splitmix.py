import numpy as np

from densemodel import splitmix


def test_reference_vector():
    # first outputs of the reference splitmix64 generator with state 0
    assert [int(z) for z in splitmix.splitmix64(0, 3)] == [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]


def test_offset_continues_the_stream():
    full = splitmix.splitmix64(42, 10)
    assert np.array_equal(full[4:], splitmix.splitmix64(42, 6, offset=4))


def test_uniforms_in_unit_interval():
    u = splitmix.uniforms(7, 10**5)
    assert u.min() >= 0 and u.max() < 1
    assert abs(u.mean() - 0.5) < 0.005


def test_large_and_negative_seeds_wrap():
    assert np.array_equal(splitmix.splitmix64(-1, 3), splitmix.splitmix64(2**64 - 1, 3))
