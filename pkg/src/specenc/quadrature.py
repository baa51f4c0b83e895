"""Cell self-integrals of radial kernels.

A box cell ``[-a, a]`` (half-sides ``a_i``) is cut into pyramids with apex at
the centre and one face as base.  With ``y = t p`` (``p`` on the face
``x_i = a_i``, ``0 <= t <= 1``) the volume element is ``a_i t^{d-1} dt dA``,
so

    int_cell f(|y|) dy = sum_faces a_i int_face M(|p|) dA,
    M(rho) = int_0^1 t^{d-1} f(t rho) dt.

``M`` is available in closed form for every kernel used here, which removes
the singularity at the centre; the face integrals are smooth and are done by
tensor Gauss-Legendre rules on one quadrant (faces and quadrants are
congruent by symmetry).
"""

from __future__ import annotations

from functools import lru_cache
from typing import Callable

import numpy as np

from .special import macdonald_k

_EULER_GAMMA = 0.57721566490153286061
_NGAUSS = 24


def _face_quadrature(half_sides, i, n=_NGAUSS):
    """Points on the positive quadrant of face ``x_i = a_i`` and weights."""
    d = len(half_sides)
    x, w = np.polynomial.legendre.leggauss(n)
    cols, wts = [], []
    for j in range(d):
        if j == i:
            cols.append(np.array([half_sides[j]]))
            wts.append(np.array([1.0]))
        else:
            aj = half_sides[j]
            cols.append(0.5 * aj * (x + 1.0))
            wts.append(0.5 * aj * w)
    pts = np.stack([m.ravel() for m in np.meshgrid(*cols, indexing="ij")], axis=-1)
    wt = np.ones(len(pts))
    for m in np.meshgrid(*wts, indexing="ij"):
        wt = wt * m.ravel()
    return pts, wt


def centered_cell_integral(moment: Callable[[np.ndarray], np.ndarray], half_sides) -> complex:
    """``int_cell f(|y|) dy`` from the radial moment ``M(rho)`` of ``f``."""
    half_sides = tuple(float(a) for a in half_sides)
    d = len(half_sides)
    total = 0j
    for i in range(d):
        pts, wt = _face_quadrature(half_sides, i)
        rho = np.linalg.norm(pts, axis=1)
        total += half_sides[i] * np.sum(wt * moment(rho))
    # two faces per axis, 2^(d-1) quadrants per face
    return complex(2**d * total)


@lru_cache(maxsize=256)
def power_center_integral(alpha: float, half_sides: tuple) -> float:
    """``int_cell |y|^{alpha-d} dy`` over a cell centred at the origin."""
    d = len(half_sides)
    if not 0 < alpha:
        raise ValueError("alpha must be positive")
    return centered_cell_integral(lambda rho: rho ** (alpha - d) / alpha, half_sides).real


@lru_cache(maxsize=256)
def power_pair_integral(alpha: float, sides: tuple) -> float:
    """``int_cell int_cell |x-y|^{alpha-d} dx dy`` for a box cell of the given sides.

    The difference ``z = x - y`` ranges over ``[-h, h]`` with density
    ``prod_j (h_j - |z_j|)``; on the pyramid over face ``z_i = h_i`` the
    ``t``-integral of ``t^{alpha-1} prod_j (h_j - t |p_j|)`` is done exactly
    by expanding the product as a polynomial in ``t``.
    """
    d = len(sides)
    if not 0 < alpha:
        raise ValueError("alpha must be positive")
    total = 0.0
    for i in range(d):
        pts, wt = _face_quadrature(sides, i)
        rho = np.linalg.norm(pts, axis=1)
        # coefficients of prod_j (h_j - |p_j| t) in powers of t, per point
        coef = np.zeros((len(pts), d + 1))
        coef[:, 0] = 1.0
        for j in range(d):
            new = coef * sides[j]
            new[:, 1:] -= coef[:, :-1] * pts[:, j : j + 1]
            coef = new
        tint = np.sum(coef / (alpha + np.arange(d + 1)), axis=1)
        total += sides[i] * np.sum(wt * rho ** (alpha - d) * tint)
    return float(2**d * total)


def _phi3(a: np.ndarray) -> np.ndarray:
    """``int_0^1 t e^{-a t} dt``."""
    a = np.asarray(a, dtype=complex)
    out = np.empty_like(a)
    small = np.abs(a) < 0.5
    if small.any():
        x = a[small]
        acc = np.zeros_like(x)
        term = np.ones_like(x)
        fact = 2.0
        for k in range(25):
            acc += (k + 1) / fact * term
            term = term * (-x)
            fact *= k + 3
        out[small] = acc
    big = ~small
    if big.any():
        x = a[big]
        out[big] = (-np.expm1(-x) - x * np.exp(-x)) / (x * x)
    return out


def _phi2(a: np.ndarray) -> np.ndarray:
    """``int_0^1 t K_0(a t) dt``."""
    a = np.asarray(a, dtype=complex)
    out = np.empty_like(a)
    small = np.abs(a) < 1.0
    if small.any():
        x = a[small]
        lg = np.log(x / 2) + _EULER_GAMMA
        acc = np.zeros_like(x)
        pw = np.ones_like(x)
        harm = 0.0
        kfact2 = 1.0
        for k in range(30):
            if k > 0:
                harm += 1.0 / k
                kfact2 *= k * k
            m = 2 * k + 2
            acc += pw / kfact2 * (-lg / m + 1.0 / m**2 + harm / m)
            pw = pw * (x / 2) ** 2
        out[small] = acc
    big = ~small
    if big.any():
        x = a[big]
        out[big] = (1.0 - x * macdonald_k(1.0, x)) / (x * x)
    return out


def green_cell_integral(d: int, s: complex, half_sides) -> complex:
    """``int_cell G(|y|) dy`` for the free resolvent kernel with decay ``s``."""
    half_sides = tuple(float(a) for a in half_sides)
    if d == 1:
        a = half_sides[0]
        return complex(-np.expm1(-s * a) / (s * s))
    if d == 2:
        return centered_cell_integral(
            lambda rho: _phi2(s * rho) / (2 * np.pi), half_sides
        )
    if d == 3:
        return centered_cell_integral(lambda rho: _phi3(s * rho) / (4 * np.pi * rho), half_sides)
    raise ValueError(f"unsupported dimension {d}")
