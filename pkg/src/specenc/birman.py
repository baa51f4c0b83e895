"""Discretised Birman-Schwinger operator and eigenvalue localisation.

``A(lam) = V^{1/2} (-Delta - lam)^{-1} |V|^{1/2}`` with
``V^{1/2} = (V/|V|) |V|^{1/2}`` is replaced by the Nystrom matrix

    A_ij = V^{1/2}(x_i) G_lam(|x_i - x_j|) |V|^{1/2}(x_j) w_j

on a uniform cell-centred grid.  The diagonal uses the exact integral of
``G_lam`` over the node's own cell.  If ``lam`` is an eigenvalue of
``-Delta + V`` then ``-1`` is an eigenvalue of ``A(lam)``, so ``||A|| >= 1``
and ``sigma_min(A + I) = 0``; where the discrete norm is below one, no
discrete eigenvalue can sit.  None of this is a rigorous certificate for
the continuum operator.
"""

from __future__ import annotations

import cmath
import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.fft
from scipy.optimize import minimize
from scipy.sparse.linalg import LinearOperator
from scipy.spatial.distance import cdist

from . import quadrature
from .core import Grid, PotentialSpec, SpectralPoint, sample_potential, sqrt_branch
from .fftconv import fft_shape, kernel_table
from .linalg import (
    DEFAULT_SEED,
    ConvergenceError,
    largest_singular,
    smallest_singular_shifted,
    spectral_radius_estimate,
)
from .special import free_green

__all__ = [
    "BSMatrix",
    "assemble_bs",
    "bs_operator",
    "support_grid",
    "SpectralStats",
    "spectral_stats",
    "ScanResult",
    "lambda_scan",
    "EigenSearchResult",
    "eigenvalue_search",
    "square_well_oracle_1d",
    "DecayReport",
    "norm_decay",
    "EXCLUSION_BANNER",
]

EXCLUSION_BANNER = (
    "exclusion mask refers to the discretised operator; "
    "it is not a rigorous certificate for the continuum operator"
)


def _point(lam) -> SpectralPoint:
    return lam if isinstance(lam, SpectralPoint) else sqrt_branch(lam)


# dense matrices beyond this many nodes would need gigabytes
MAX_DENSE = 8000


def support_grid(V: PotentialSpec, n: int | tuple[int, ...]) -> Grid:
    """Uniform grid with ``n`` points per axis on the support box of ``V``."""
    if V.variant == "sampled":
        return V.grid
    shape = (n,) * V.d if np.ndim(n) == 0 else tuple(n)
    return Grid(V.box_lo, V.box_hi, shape)


def _root_factors(V, grid):
    vals = sample_potential(V, grid)
    mod = np.abs(vals)
    root = np.sqrt(mod)
    phase = np.divide(vals, mod, out=np.zeros_like(vals), where=mod > 0)
    # exact unit phase where V is real, so real V gives left == right bitwise
    real = np.imag(vals) == 0
    phase[real] = np.sign(np.real(vals[real]))
    return vals, phase * root, root


def _self_term(d, s, grid):
    return quadrature.green_cell_integral(d, s, tuple(grid.spacing / 2)) / grid.cell_volume


@dataclass
class BSMatrix:
    matrix: np.ndarray
    lam: complex
    grid: Grid
    support: np.ndarray
    diagonal_kernel: complex
    notes: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


def assemble_bs(V: PotentialSpec, lam, grid: Grid, compress: bool = True) -> BSMatrix:
    """Dense Nystrom matrix of the Birman-Schwinger operator.

    With ``compress`` the rows and columns of nodes where ``V = 0`` are
    dropped; they only add the eigenvalue 0 to ``A``.
    """
    if V.d != grid.d:
        raise ValueError(f"dimension mismatch: potential d={V.d}, grid d={grid.d}")
    pt = _point(lam)
    _, left, right = _root_factors(V, grid)
    support = np.nonzero(right > 0)[0] if compress else np.arange(grid.size)
    if support.size > MAX_DENSE:
        raise ValueError(f"{support.size} nodes exceed the dense limit {MAX_DENSE}; "
                         "use a coarser grid or bs_operator")
    x = grid.nodes[support]
    r = cdist(x, x)
    np.fill_diagonal(r, 1.0)
    G = free_green(grid.d, pt, r)
    g0 = _self_term(grid.d, pt.s, grid)
    np.fill_diagonal(G, g0)
    w = grid.cell_volume
    # one outer product keeps A exactly symmetric when left == right
    A = G * (np.outer(left[support], right[support]) * w)
    return BSMatrix(A, pt.lam, grid, support, g0,
                    {"diagonal": "exact cell integral of G over the node's cell"})


def bs_operator(V: PotentialSpec, lam, grid: Grid) -> LinearOperator:
    """Matrix-free Birman-Schwinger operator (FFT convolution), full grid."""
    if V.d != grid.d:
        raise ValueError(f"dimension mismatch: potential d={V.d}, grid d={grid.d}")
    pt = _point(lam)
    _, left, right = _root_factors(V, grid)
    extent = grid.shape
    shape_fft = fft_shape(extent)
    w = grid.cell_volume
    g0 = _self_term(grid.d, pt.s, grid)
    table = kernel_table(shape_fft, extent, grid.spacing,
                         lambda r: w * free_green(grid.d, pt, r), w * g0)
    G_hat = scipy.fft.fftn(table)
    sl = tuple(slice(0, m) for m in extent)
    n = grid.size
    left = left.reshape(extent)
    right = right.reshape(extent)

    def _conv(x, kernel_hat):
        return scipy.fft.ifftn(scipy.fft.fftn(x, s=shape_fft) * kernel_hat)[sl]

    def matvec(v):
        v = np.asarray(v).reshape(extent)
        return (left * _conv(right * v, G_hat)).ravel()

    def rmatvec(v):
        # the kernel table is even in the offset, so the adjoint convolution
        # uses the conjugate kernel
        v = np.asarray(v).reshape(extent)
        return (right * _conv(np.conj(left) * v, np.conj(G_hat))).ravel()

    return LinearOperator((n, n), matvec=matvec, rmatvec=rmatvec, dtype=complex)


@dataclass
class SpectralStats:
    op_norm: float
    spec_radius: float
    sigma_min_plus_i: float | None
    iterations: int
    spec_radius_is_lower_bound: bool = True


def spectral_stats(M, tol: float = 1e-10, seed: int = DEFAULT_SEED,
                   restarts: int = 3, with_sigma: bool = True) -> SpectralStats:
    """Extremal spectral data of a BS matrix (or any square matrix/operator).

    ``sigma_min_plus_i`` needs a dense matrix and is ``None`` otherwise.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    A = M.matrix if isinstance(M, BSMatrix) else M
    top = largest_singular(A, tol=tol, seed=seed, restarts=restarts)
    rho = spectral_radius_estimate(A, seed=seed)
    sig = None
    if with_sigma and not isinstance(A, LinearOperator):
        sig = smallest_singular_shifted(A, 1.0, tol=tol, seed=seed).value
    return SpectralStats(top.value, rho, sig, top.iterations)


@dataclass
class ScanResult:
    lams: np.ndarray
    op_norm: np.ndarray
    excluded: np.ndarray
    iterations: np.ndarray
    skipped: np.ndarray
    sigma_min_plus_i: np.ndarray | None
    shape: tuple[int, int]
    banner: str = EXCLUSION_BANNER

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["re_lambda", "im_lambda", "op_norm", "excluded", "iters"])
        for lam, nrm, ex, it in zip(self.lams, self.op_norm, self.excluded, self.iterations):
            wr.writerow([repr(float(lam.real)), repr(float(lam.imag)),
                         "nan" if math.isnan(nrm) else repr(float(nrm)), int(ex), int(it)])
        return buf.getvalue()


def _on_halfaxis(lam: complex) -> bool:
    return lam.imag == 0.0 and lam.real >= 0.0


def lambda_scan(V: PotentialSpec, region, res, grid: Grid, with_sigma: bool = False,
                tol: float = 1e-9, seed: int = DEFAULT_SEED, workers: int = 1,
                dense: bool | None = None) -> ScanResult:
    """Operator norm of ``A(lam)`` over a rectangle ``(re0, re1, im0, im1)``.

    Points are visited row by row (imaginary part outer, real part inner);
    in serial mode each point warm-starts from the previous singular vector.
    Points on ``[0, inf)`` are skipped and reported as NaN.
    """
    re0, re1, im0, im1 = region
    nre, nim = res
    re = np.linspace(re0, re1, nre)
    im = np.linspace(im0, im1, nim)
    lams = np.array([complex(a, b) for b in im for a in re])
    skipped = np.array([_on_halfaxis(z) for z in lams])
    if skipped.all():
        raise ValueError("scan region lies entirely on [0, inf)")
    if dense is None:
        dense = grid.size <= 2048 or with_sigma

    def build(lam):
        return assemble_bs(V, lam, grid).matrix if dense else bs_operator(V, lam, grid)

    def point(lam, v0=None):
        A = build(lam)
        if A.shape[0] == 0:
            return 0.0, np.zeros(0), 0, 1.0
        top = largest_singular(A, tol=tol, seed=seed, restarts=1 if v0 is not None else 3,
                               v0=v0)
        sig = smallest_singular_shifted(A, 1.0, tol=tol, seed=seed).value if with_sigma else None
        return top.value, top.vector, top.iterations, sig

    n = len(lams)
    norms = np.full(n, np.nan)
    iters = np.zeros(n, dtype=int)
    sigmas = np.full(n, np.nan) if with_sigma else None
    todo = [i for i in range(n) if not skipped[i]]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(lambda i: point(lams[i]), todo))
    else:
        results = []
        v0 = None
        for i in todo:
            out = point(lams[i], v0)
            v0 = out[1] if out[1].size else None
            results.append(out)
    for i, (nrm, _, it, sig) in zip(todo, results):
        norms[i] = nrm
        iters[i] = it
        if with_sigma:
            sigmas[i] = sig
    excluded = np.where(skipped, False, norms < 1.0)
    return ScanResult(lams, norms, excluded, iters, skipped, sigmas, (nim, nre))


@dataclass
class EigenSearchResult:
    lam: complex
    residual: float
    found: bool
    message: str
    evaluations: int


FOUND_THRESHOLD = 0.05


def eigenvalue_search(V: PotentialSpec, lam0: complex, grid: Grid, step: float | None = None,
                      tol: float = 1e-10, max_evals: int = 400) -> EigenSearchResult:
    """Nelder-Mead minimisation of ``sigma_min(A(lam) + I)`` over the plane.

    Trial points on ``[0, inf)`` get a penalty value above any admissible
    residual.
    """
    lam0 = complex(lam0)
    if _on_halfaxis(lam0):
        raise ValueError("starting point lies on [0, inf)")

    def objective(xy):
        lam = complex(xy[0], xy[1])
        if _on_halfaxis(lam):
            return 2.0 + abs(lam)
        A = assemble_bs(V, lam, grid).matrix
        if A.shape[0] == 0:
            return 1.0
        try:
            return smallest_singular_shifted(A, 1.0, tol=tol).value
        except ConvergenceError as err:
            return err.partial.value

    step = step if step is not None else 0.1 * max(abs(lam0), 0.1)
    x0 = np.array([lam0.real, lam0.imag])
    simplex = np.array([x0, x0 + [step, 0.0], x0 + [0.0, step]])
    opt = minimize(objective, x0, method="Nelder-Mead",
                   options={"initial_simplex": simplex, "xatol": 1e-9, "fatol": 1e-12,
                            "maxfev": max_evals})
    lam = complex(opt.x[0], opt.x[1])
    resid = float(opt.fun)
    if lam.real > -1e-8 and abs(lam.imag) < 1e-8:
        return EigenSearchResult(lam, resid, False,
                                 "converged to the boundary [0, inf); no eigenvalue located",
                                 opt.nfev)
    if resid >= FOUND_THRESHOLD:
        return EigenSearchResult(lam, resid, False, "no eigenvalue located", opt.nfev)
    return EigenSearchResult(lam, resid, True, "eigenvalue found", opt.nfev)


# decay along a ray ------------------------------------------------------------------


@dataclass
class DecayReport:
    """Log-log slope of ``||A(lam)|| |lam|^e`` along ``lam = t e^{i phi}``."""

    alpha: float
    exponent: float
    t: np.ndarray
    op_norm: np.ndarray
    slope: float
    passed: bool
    tolerance: float

    def to_json(self) -> dict:
        return {"alpha": self.alpha, "exponent": self.exponent, "t": self.t.tolist(),
                "op_norm": self.op_norm.tolist(), "slope": self.slope,
                "passed": self.passed, "tolerance": self.tolerance}


def norm_decay(V: PotentialSpec, grid: Grid, alpha: float | None = None, t=None,
               angle: float = math.pi / 2, tol: float = 0.05,
               seed: int = DEFAULT_SEED) -> DecayReport:
    """Check that ``||A(t e^{i angle})|| t^e`` does not grow with ``t``.

    ``e = (alpha - d + 1) / (2 alpha - d + 1)``; the default ``alpha = d - 1``
    gives ``e = 0``, i.e. a norm bounded along the ray.  Norms come from the
    matrix-free operator, so grids of a few thousand nodes are cheap.
    """
    d = V.d
    alpha = float(d - 1) if alpha is None else float(alpha)
    e = (alpha - d + 1) / (2 * alpha - d + 1)
    t = np.geomspace(1.0, 1e3, 13) if t is None else np.asarray(t, dtype=float)
    vals = []
    v0 = None
    for ti in t:
        op = bs_operator(V, ti * cmath.exp(1j * angle), grid)
        res = largest_singular(op, tol=1e-8, seed=seed, restarts=1, v0=v0)
        v0 = res.vector
        vals.append(res.value)
    vals = np.asarray(vals)
    slope = float(np.polyfit(np.log(t), np.log(vals * t**e), 1)[0])
    return DecayReport(alpha, e, t, vals, slope, slope <= tol, tol)


# one-dimensional square well -------------------------------------------------------


def _well_equations(depth, a):
    """Even and odd matching functions in ``s = sqrt(-lam)``.

    Inside the well ``u'' = -k^2 u`` with ``k^2 = -s^2 - depth``.  Both
    functions are even in ``k`` and therefore entire in ``s``.
    """

    def parts(s):
        k = cmath.sqrt(-s * s - depth)
        ka = k * a
        sinc = cmath.sin(ka) / k if abs(k) > 1e-12 else a
        return k, ka, sinc

    def even(s):
        k, ka, sinc = parts(s)
        return k * k * sinc - s * cmath.cos(ka)

    def odd(s):
        k, ka, sinc = parts(s)
        return cmath.cos(ka) + s * sinc

    return even, odd


def _newton(f, z, tol=1e-14, max_iter=100):
    try:
        return _newton_steps(f, z, tol, max_iter)
    except (OverflowError, ZeroDivisionError):
        # the iterate ran off where the matching functions blow up
        return None


def _newton_steps(f, z, tol, max_iter):
    for _ in range(max_iter):
        fz = f(z)
        h = 1e-7 * max(1.0, abs(z))
        dfz = (f(z + h) - f(z - h)) / (2 * h)
        if dfz == 0:
            return None
        step = fz / dfz
        z = z - step
        if abs(step) <= tol * max(1.0, abs(z)):
            return z
        if abs(z) > 1e8:
            return None
    return None


def square_well_oracle_1d(depth: complex, half_width: float) -> list[complex]:
    """Eigenvalues of ``-u'' + V u`` with ``V = depth`` on ``[-a, a]``.

    Roots of the transmission (matching) equations are sought by complex
    Newton iteration from a ladder of starting points in ``s = sqrt(-lam)``;
    roots with ``Re s > 0`` and a matching residual below ``1e-10`` are kept.
    """
    depth = complex(depth)
    a = float(half_width)
    if depth == 0:
        return []
    scale = abs(cmath.sqrt(-depth))
    even, odd = _well_equations(depth, a)
    starts = [
        complex(scale * x, scale * y)
        for x in np.linspace(0.02, 1.2, 16)
        for y in np.linspace(-0.6, 0.6, 7)
    ]
    roots: list[complex] = []
    for f in (even, odd):
        for z0 in starts:
            z = _newton(f, z0)
            if z is None or z.real <= 1e-10:
                continue
            k = cmath.sqrt(-z * z - depth)
            if abs(f(z)) > 1e-10 * (1.0 + abs(z) + abs(k)):
                continue
            if all(abs(z - r) > 1e-8 * max(1.0, abs(r)) for r in roots):
                roots.append(z)
    lams = sorted((-(s * s) for s in roots), key=lambda z: (z.real, z.imag))
    return lams
