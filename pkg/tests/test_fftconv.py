import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from specenc.fftconv import convolve_same, fft_shape, kernel_table


def _direct(u, spacing, radial, self_term):
    """O(n^2) sum over all node pairs."""
    idx = np.stack(np.meshgrid(*[np.arange(m) for m in u.shape], indexing="ij"), -1)
    idx = idx.reshape(-1, u.ndim)
    flat = u.ravel()
    out = np.empty(len(flat), dtype=np.result_type(u, complex))
    for i, p in enumerate(idx):
        r = np.linalg.norm((idx - p) * spacing, axis=1)
        k = np.where(r > 0, radial(np.where(r > 0, r, 1.0)), self_term)
        out[i] = np.sum(k * flat)
    return out.reshape(u.shape)


@given(st.lists(st.integers(1, 6), min_size=1, max_size=3), st.integers(0, 1000),
       st.booleans())
@settings(max_examples=30, deadline=None)
def test_fft_convolution_matches_direct_sum(extent, seed, complex_kernel):
    rng = np.random.default_rng(seed)
    extent = tuple(extent)
    spacing = rng.uniform(0.2, 1.5, len(extent))
    u = rng.standard_normal(extent)
    if complex_kernel:
        radial = lambda r: np.exp(-(0.5 + 1j) * r) / r
        self_term = 3.0 + 1j
    else:
        radial = lambda r: r**-0.5
        self_term = 2.5
    shape = fft_shape(extent)
    got = convolve_same(u, kernel_table(shape, extent, spacing, radial, self_term), shape)
    assert np.allclose(got, _direct(u, spacing, radial, self_term), rtol=1e-10, atol=1e-12)


def test_fft_shape_is_large_enough():
    for m in (1, 7, 16, 33):
        assert fft_shape((m,))[0] >= 2 * m - 1
