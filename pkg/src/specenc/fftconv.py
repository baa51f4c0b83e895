"""Linear convolution on uniform grids through zero-padded FFTs.

Kernel tables hold a radial kernel at every grid offset ``delta`` with
``|delta_i| < extent_i``, stored in FFT wrap-around order so that a
circular convolution of size ``>= 2*extent - 1`` equals the linear one.
"""

from __future__ import annotations

import numpy as np
import scipy.fft


def offset_distances(spacing, extent):
    """``|delta * spacing|`` for offsets ``|delta_i| < extent_i`` in wrap order."""
    axes = [np.fft.ifftshift(np.arange(-(m - 1), m)) * sp for m, sp in zip(extent, spacing)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.sqrt(sum(m * m for m in mesh))


def kernel_table(shape_fft, extent, spacing, radial, self_term):
    """Wrap-around kernel array of FFT size for offsets up to ``extent - 1``."""
    r = offset_distances(spacing, extent)
    with np.errstate(divide="ignore"):
        vals = radial(np.where(r > 0, r, 1.0))
    vals = np.asarray(vals, dtype=float if np.isrealobj(vals) else complex)
    vals.flat[0] = self_term
    table = np.zeros(shape_fft, dtype=vals.dtype)
    idx = []
    for m, P in zip(extent, shape_fft):
        off = np.arange(-(m - 1), m)
        idx.append(np.fft.ifftshift(off) % P)
    table[np.ix_(*idx)] = vals
    return table


def fft_shape(extent):
    return tuple(scipy.fft.next_fast_len(2 * m - 1, real=True) for m in extent)


def convolve_same(u, table, shape_fft):
    """Linear convolution of ``u`` (shape ``m``) with a wrap-order table."""
    d = table.ndim
    axes = tuple(range(u.ndim - d, u.ndim))
    if np.iscomplexobj(u) or np.iscomplexobj(table):
        U = scipy.fft.fftn(u, s=shape_fft, axes=axes)
        out = scipy.fft.ifftn(U * scipy.fft.fftn(table), axes=axes)
    else:
        U = scipy.fft.rfftn(u, s=shape_fft, axes=axes)
        out = scipy.fft.irfftn(U * scipy.fft.rfftn(table), s=shape_fft, axes=axes)
    sl = (Ellipsis,) + tuple(slice(0, m) for m in u.shape[u.ndim - d:])
    return out[sl]
