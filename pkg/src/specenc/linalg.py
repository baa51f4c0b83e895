"""Block power-iteration estimates of extremal singular values.

Operators are dense arrays or :class:`scipy.sparse.linalg.LinearOperator`
instances providing ``matmat`` and ``rmatmat``.

Both routines apply a Gram operator (``M^H M`` for the top,
``(M+sI)^{-1} (M+sI)^{-H}`` for the bottom) to a block of vectors and take
Ritz values over the span of all power iterates so far.  The block makes
the iteration indifferent to clusters of nearly equal singular values
(common on symmetric grids), and the accumulated span handles spectra that
accumulate at the wanted end, e.g. ``sigma(A + I)`` near 1 for a small
positive ``A``.  A run stops on a small Ritz residual, or when the top Ritz
value has not moved (relative ``1e-13``) for three iterations, which is
what an exactly degenerate cluster looks like.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.sparse.linalg import LinearOperator, aslinearoperator

DEFAULT_SEED = 0xC0FFEE
DEFAULT_BLOCK = 8
_STAGNATION = 1e-13
_STALL_RUN = 3
MAX_BLOCKS = 24


class ConvergenceError(ArithmeticError):
    """Raised when an iteration exhausts its budget; carries the partial result."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


@dataclass
class PowerResult:
    value: float
    vector: np.ndarray
    iterations: int
    converged: bool


def _random_block(rng, n, b):
    X = rng.standard_normal((n, b)) + 1j * rng.standard_normal((n, b))
    return np.linalg.qr(X)[0]


def _as_op(M):
    return M if isinstance(M, LinearOperator) else aslinearoperator(np.asarray(M))


def _orthonormalize(Z, U):
    """Columns of ``Z`` orthonormalized against ``U`` (twice) and each other."""
    scale = float(np.linalg.norm(Z, axis=0).max(initial=0.0))
    if scale == 0.0:
        return Z[:, :0]
    for _ in range(2):
        if U.shape[1]:
            Z = Z - U @ (U.conj().T @ Z)
    Qz, R = np.linalg.qr(Z)
    # columns that cancelled to rounding level carry no new direction
    Qz = Qz[:, np.abs(np.diag(R)) > 1e-10 * scale]
    if U.shape[1] and Qz.shape[1]:
        # normalising a small remainder magnifies its overlap with U
        Qz = Qz - U @ (U.conj().T @ Qz)
        Qz = np.linalg.qr(Qz)[0]
    return Qz


def _subspace_top(forward, adjoint, Q, tol, max_iter, max_blocks=MAX_BLOCKS):
    """Top Ritz pair of ``H = adjoint(forward(.))`` started from the block ``Q``.

    The power iterates ``Q, HQ, H^2 Q, ...`` are kept in an orthonormal basis
    and the Ritz pair is taken over the whole basis (block Lanczos with full
    reorthogonalization).  When the basis reaches ``max_blocks`` blocks it
    is restarted from the current top Ritz vectors.  Returns
    ``(sigma, x, iterations, converged)`` with ``sigma**2`` the top Ritz
    value of ``H``, i.e. ``sigma`` the top singular value of ``forward``.
    """
    n, b = Q.shape
    U = np.zeros((n, 0), dtype=complex)
    HU = np.zeros((n, 0), dtype=complex)
    block = Q
    prev = -1.0
    stalled = 0
    sigma, x = 0.0, Q[:, 0]
    for it in range(1, max_iter + 1):
        Hb = adjoint(forward(block))
        U = np.hstack([U, block])
        HU = np.hstack([HU, Hb])
        T = U.conj().T @ HU
        T = (T + T.conj().T) / 2
        vals, vecs = np.linalg.eigh(T)
        theta = float(vals[-1])
        if theta <= 0.0:
            return 0.0, U[:, 0], it, True
        y = vecs[:, -1]
        x = U @ y
        resid = np.linalg.norm(HU @ y - theta * x)
        sigma = float(np.sqrt(theta))
        # a degenerate top cluster pins the value long before the vector
        stalled = stalled + 1 if abs(theta - prev) <= _STAGNATION * theta else 0
        if resid <= tol * theta or stalled >= _STALL_RUN:
            return sigma, x, it, True
        prev = theta
        if U.shape[1] >= min(n, max_blocks * b):
            # thick restart from the top Ritz vectors
            top = vecs[:, -b:]
            U, HU = U @ top, HU @ top
            block = _orthonormalize(Hb, U)
            if block.shape[1] == 0:
                block = _orthonormalize(HU - U @ (U.conj().T @ HU), U)
        else:
            block = _orthonormalize(Hb, U)
        if block.shape[1] == 0:
            # the basis spans an invariant subspace: the Ritz pair is exact
            return sigma, x, it, True
    return sigma, x, max_iter, False


def largest_singular(M, tol=1e-10, max_iter=5000, restarts=3, seed=DEFAULT_SEED, v0=None,
                     block=DEFAULT_BLOCK):
    """Largest singular value by block power iteration on ``M^H M``.

    A run stops when the top Ritz pair has residual
    ``||M^H M x - theta x|| <= tol * theta``.  ``v0`` (e.g. from a
    neighbouring problem) replaces the first column of the first start.  The
    best of the runs is returned.
    """
    op = _as_op(M)
    n = op.shape[1]
    b = max(1, min(block, n))
    rng = np.random.default_rng(seed)
    best = None
    total = 0
    for run in range(max(restarts, 1)):
        Q = _random_block(rng, n, b)
        if run == 0 and v0 is not None:
            Q[:, 0] = np.asarray(v0, dtype=complex)
            Q = np.linalg.qr(Q)[0]
        sigma, x, it, ok = _subspace_top(op.matmat, op.rmatmat, Q, tol, max_iter)
        total += it
        res = PowerResult(sigma, x, it, ok)
        if best is None or res.value > best.value:
            best = res
        if not ok:
            raise ConvergenceError(
                f"power iteration did not converge in {max_iter} iterations", partial=best
            )
    best.iterations = total
    return best


def spectral_radius_estimate(M, tol=1e-8, max_iter=2000, restarts=3, seed=DEFAULT_SEED):
    """Lower-bound estimate of the spectral radius by power iteration on ``M``.

    Non-normal matrices need not converge; the best Rayleigh-quotient modulus
    seen is returned either way.
    """
    op = _as_op(M)
    n = op.shape[1]
    rng = np.random.default_rng(seed + 1)
    best = 0.0
    for _ in range(max(restarts, 1)):
        v = _random_block(rng, n, 1)[:, 0]
        prev = None
        for _ in range(max_iter):
            y = op.matvec(v)
            ny = np.linalg.norm(y)
            if ny == 0.0:
                break
            rq = abs(np.vdot(v, y))
            best = max(best, rq)
            v = y / ny
            if prev is not None and abs(rq - prev) <= tol * max(rq, 1e-300):
                break
            prev = rq
    return float(best)


def smallest_singular_shifted(M, shift=1.0, tol=1e-10, max_iter=5000, seed=DEFAULT_SEED,
                              block=DEFAULT_BLOCK):
    """Smallest singular value of ``M + shift*I`` by block inverse iteration.

    Needs a dense ``M``; one LU factor of ``A = M + shift*I`` serves both
    ``A^{-1}`` and ``A^{-H}``.
    """
    A = np.asarray(M, dtype=complex) + shift * np.eye(M.shape[0])
    n = A.shape[0]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu = scipy.linalg.lu_factor(A)
    pivots = np.abs(np.diag(lu[0]))
    if not pivots.all():
        # a zero pivot: A is exactly singular
        return PowerResult(0.0, np.zeros(n, dtype=complex), 0, True)
    rng = np.random.default_rng(seed + 2)
    Q = _random_block(rng, n, max(1, min(block, n)))
    sigma, x, it, ok = _subspace_top(
        lambda X: scipy.linalg.lu_solve(lu, X, trans=2),
        lambda Y: scipy.linalg.lu_solve(lu, Y),
        Q, tol, max_iter,
    )
    res = PowerResult(float(1.0 / sigma) if sigma > 0 else np.inf, x, it, ok)
    if not ok:
        raise ConvergenceError("inverse iteration did not converge", partial=res)
    return res
