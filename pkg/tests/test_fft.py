import numpy as np
import pytest
from hypothesis import given, strategies as st

from spandt import fft


@given(st.integers(1, 300), st.integers(0, 2**31))
def test_fft_matches_numpy(n, seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    assert np.allclose(fft.fft(x), np.fft.fft(x), atol=1e-9 * max(1, n))
    assert np.allclose(fft.ifft(fft.fft(x)), x, atol=1e-10 * max(1, n))


@pytest.mark.parametrize("n", [67, 101, 131, 2 * 97])
def test_bluestein_lengths(n, rng):
    x = rng.standard_normal((3, n)) + 0j
    assert np.allclose(fft.fft(x, axis=1), np.fft.fft(x, axis=1), atol=1e-9)


def test_prime_factors():
    assert fft.prime_factors(360) == [2, 2, 2, 3, 3, 5]
    assert fft.prime_factors(97) == [97]
    assert fft.prime_factors(1) == []


def test_flop_counts_grow_like_n_log_n():
    a, b = fft.fft_flops(1024), fft.fft_flops(4096)
    assert 4 < b / a < 5


def test_counter_accumulates():
    ops = fft.Counter()
    fft.fft(np.ones(16, dtype=complex), ops=ops)
    assert ops.flops == fft.fft_flops(16) > 0
