"""Extremal singular values against an independent one-sided Jacobi SVD."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.sparse.linalg import aslinearoperator

from specenc.linalg import (
    ConvergenceError,
    largest_singular,
    smallest_singular_shifted,
    spectral_radius_estimate,
)


def jacobi_singular_values(A, sweeps=60, tol=1e-15):
    """One-sided Jacobi (Hestenes): rotate column pairs until mutually orthogonal."""
    U = np.array(A, dtype=complex, copy=True)
    n = U.shape[1]
    for _ in range(sweeps):
        off = 0.0
        for i in range(n - 1):
            for j in range(i + 1, n):
                a = np.vdot(U[:, i], U[:, i]).real
                b = np.vdot(U[:, j], U[:, j]).real
                c = np.vdot(U[:, i], U[:, j])
                if abs(c) <= tol * np.sqrt(a * b):
                    continue
                off = max(off, abs(c) / np.sqrt(a * b))
                # complex rotation zeroing the (i, j) Gram entry
                phase = c / abs(c)
                zeta = (b - a) / (2 * abs(c))
                t = np.sign(zeta) / (abs(zeta) + np.sqrt(1 + zeta * zeta)) if zeta else 1.0
                cs = 1 / np.sqrt(1 + t * t)
                sn = cs * t
                ui = U[:, i].copy()
                U[:, i] = cs * ui - sn * np.conj(phase) * U[:, j]
                U[:, j] = sn * phase * ui + cs * U[:, j]
        if off < tol:
            break
    return np.sort(np.linalg.norm(U, axis=0))[::-1]


def _rand(n, seed):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))


def test_jacobi_oracle_is_sound():
    A = _rand(12, 0)
    assert np.allclose(jacobi_singular_values(A), np.linalg.svd(A, compute_uv=False),
                       rtol=1e-12)


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_largest_matches_jacobi_50(seed):
    A = _rand(50, seed)
    ref = jacobi_singular_values(A)[0]
    assert largest_singular(A).value == pytest.approx(ref, rel=1e-8)


def test_diag_and_rank_one():
    assert largest_singular(np.diag([3.0, 1.0])).value == pytest.approx(3.0, rel=1e-12)
    rng = np.random.default_rng(4)
    u = rng.standard_normal(30) + 1j * rng.standard_normal(30)
    v = rng.standard_normal(30) + 1j * rng.standard_normal(30)
    top = largest_singular(np.outer(u, v.conj())).value
    assert top == pytest.approx(np.linalg.norm(u) * np.linalg.norm(v), rel=1e-12)


def test_degenerate_cluster():
    # exactly repeated top singular value with a close runner-up
    rng = np.random.default_rng(5)
    Q1 = np.linalg.qr(_rand(80, 6))[0]
    Q2 = np.linalg.qr(_rand(80, 7))[0]
    s = np.concatenate([[5.0, 5.0, 5.0, 4.999999], rng.uniform(0, 4.9, 76)])
    A = Q1 @ np.diag(s) @ Q2.conj().T
    assert largest_singular(A).value == pytest.approx(5.0, rel=1e-10)


def test_linear_operator_input():
    A = _rand(40, 8)
    ref = np.linalg.norm(A, 2)
    assert largest_singular(aslinearoperator(A)).value == pytest.approx(ref, rel=1e-8)


def test_zero_matrix():
    assert largest_singular(np.zeros((5, 5))).value == 0.0


@given(st.integers(2, 40), st.integers(0, 10_000))
@settings(max_examples=25, deadline=None)
def test_smallest_shifted_matches_svd(n, seed):
    A = _rand(n, seed) / np.sqrt(n)
    ref = np.linalg.svd(A + np.eye(n), compute_uv=False)[-1]
    got = smallest_singular_shifted(A, 1.0).value
    assert got == pytest.approx(ref, rel=1e-7)


def test_smallest_shifted_accumulating_spectrum():
    # a small positive semidefinite A: sigma(A + I) piles up at 1
    rng = np.random.default_rng(9)
    B = rng.standard_normal((200, 200)) * 1e-3
    A = B @ B.T
    ref = np.linalg.svd(A + np.eye(200), compute_uv=False)[-1]
    assert smallest_singular_shifted(A, 1.0).value == pytest.approx(ref, rel=1e-9)


def test_smallest_shifted_near_singular():
    # A + I with an isolated tiny singular value
    Q1 = np.linalg.qr(_rand(60, 10))[0]
    Q2 = np.linalg.qr(_rand(60, 14))[0]
    s = np.linspace(0.5, 2.0, 60)
    s[0] = 1e-6
    A = Q1 @ np.diag(s) @ Q2.conj().T - np.eye(60)
    assert smallest_singular_shifted(A, 1.0).value == pytest.approx(1e-6, rel=1e-6)


def test_smallest_shifted_exactly_singular():
    A = -np.eye(4, dtype=complex)
    A[0, 1] = 2.0
    assert smallest_singular_shifted(A, 1.0).value == 0.0


def test_spectral_radius_is_lower_bound():
    A = _rand(30, 11)
    rho = np.max(np.abs(np.linalg.eigvals(A)))
    est = spectral_radius_estimate(A)
    assert est <= np.linalg.norm(A, 2) + 1e-12
    assert est > 0.5 * rho


def test_convergence_error_carries_partial():
    A = _rand(60, 12)
    with pytest.raises(ConvergenceError) as info:
        largest_singular(A, tol=1e-15, max_iter=1)
    assert info.value.partial is not None
    assert 0 < info.value.partial.value <= np.linalg.norm(A, 2) * (1 + 1e-12)


def test_seed_determinism():
    A = _rand(30, 13)
    a = largest_singular(A, seed=1)
    b = largest_singular(A, seed=1)
    assert a.value == b.value and a.iterations == b.iterations
