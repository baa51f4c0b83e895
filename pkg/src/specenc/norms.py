"""Kerman-Sawyer norms, companion class norms and the Riesz potential.

Every quantity is computed for the piecewise-constant interpolant of the
potential on a uniform grid of cubic (or box) cells.  Cell-pair sums use the
midpoint rule off the diagonal; the singular diagonal terms use the exact
self-integrals from :mod:`specenc.quadrature`.  Convolutions run through
real FFTs, batched over all dyadic cubes of one generation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.fft

from . import quadrature
from .core import DyadicCube, Grid, PotentialSpec, sample_potential
from .fftconv import convolve_same, fft_shape, kernel_table
from .linalg import DEFAULT_SEED, largest_singular

__all__ = [
    "NormRequest",
    "NormResult",
    "ZeroPotentialError",
    "dyadic_grid",
    "discretize",
    "cube_double_integral",
    "ks_norm",
    "ks_norm_field",
    "aux_norm",
    "apply_riesz",
    "ks_lemma_ratio",
    "DEFAULT_LEVEL",
]

DEFAULT_LEVEL = 5
MASS_FLOOR = 1e-12
MC_STEPS_PER_OCTAVE = 4
# elements per FFT batch chunk
_CHUNK = 1 << 22


class ZeroPotentialError(ValueError):
    pass


@dataclass
class NormRequest:
    kind: str
    alpha: float | None = None
    p: float | None = None
    beta: float = 1.0
    depth: tuple[int, int] | None = None
    level: int = DEFAULT_LEVEL

    def __post_init__(self):
        if self.kind not in ("KS", "Kato", "Rollnik", "MC", "Lp"):
            raise ValueError(f"unknown norm kind {self.kind!r}")
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if self.kind in ("KS", "MC") and self.alpha is None:
            raise ValueError(f"{self.kind} norm needs alpha")
        if self.kind in ("MC", "Lp") and self.p is None:
            raise ValueError(f"{self.kind} norm needs p")


@dataclass
class NormResult:
    kind: str
    value: float
    witness: dict | None = None
    trace: list = field(default_factory=list)
    flags: list = field(default_factory=list)
    params: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {"kind": self.kind, **self.params, "value": self.value,
               "witness": self.witness, "trace": self.trace}
        if self.flags:
            out["flags"] = self.flags
        return out


# grids ------------------------------------------------------------------------


def dyadic_grid(spec: PotentialSpec, level: int = DEFAULT_LEVEL) -> Grid:
    """Cubic grid with power-of-two spacing, aligned to the dyadic lattice.

    The spacing is ``2^(floor(log2 extent) - level)`` where ``extent`` is the
    largest side of the support box, so dilating the potential by a power of
    two dilates the grid exactly.
    """
    if spec.variant == "sampled":
        return spec.grid
    extent = max(h - l for l, h in zip(spec.box_lo, spec.box_hi))
    h = math.ldexp(1.0, math.floor(math.log2(extent)) - level)
    lo = [math.floor(l / h) * h for l in spec.box_lo]
    hi = [math.ceil(x / h) * h for x in spec.box_hi]
    shape = [int(round((b - a) / h)) for a, b in zip(lo, hi)]
    return Grid.cubic(lo, h, shape)


def discretize(spec: PotentialSpec, level: int = DEFAULT_LEVEL, grid: Grid | None = None):
    grid = grid or dyadic_grid(spec, level)
    return grid, sample_potential(spec, grid).reshape(grid.shape)


# kernel tables ----------------------------------------------------------------


def _pair_table(alpha, grid, extent, shape_fft):
    d = grid.d
    sp = grid.spacing
    w = grid.cell_volume
    self_term = quadrature.power_pair_integral(float(alpha), tuple(float(s) for s in sp))
    return kernel_table(shape_fft, extent, sp, lambda r: w * w * r ** (alpha - d), self_term)


def _center_table(alpha, grid, extent, shape_fft):
    d = grid.d
    sp = grid.spacing
    w = grid.cell_volume
    self_term = quadrature.power_center_integral(float(alpha), tuple(float(s) / 2 for s in sp))
    return kernel_table(shape_fft, extent, sp, lambda r: w * r ** (alpha - d), self_term)


# Kerman-Sawyer ----------------------------------------------------------------


def _cube_slices(grid: Grid, cube: DyadicCube):
    sl = []
    for ax, lo, hi in zip(grid.axes(), cube.lo, cube.hi):
        idx = np.nonzero((ax >= lo) & (ax < hi))[0]
        if idx.size == 0:
            return None
        sl.append(slice(int(idx[0]), int(idx[-1]) + 1))
    return tuple(sl)


def cube_double_integral(u: np.ndarray, grid: Grid, cube: DyadicCube, alpha: float) -> float:
    """``int_Q int_Q u(x) u(y) |x-y|^{alpha-d} dx dy`` for a nonnegative field ``u``.

    Cells belong to ``Q`` when their centre does.
    """
    d = grid.d
    if not 0 < alpha < d:
        raise ValueError(f"alpha={alpha} outside (0, {d})")
    u = np.abs(np.asarray(u)).reshape(grid.shape)
    sl = _cube_slices(grid, cube)
    if sl is None:
        return 0.0
    block = u[sl]
    extent = block.shape
    shape_fft = fft_shape(extent)
    conv = convolve_same(block, _pair_table(alpha, grid, extent, shape_fft), shape_fft)
    return float(np.sum(block * conv))


def _axis_segments(ax_centers, side):
    """Group consecutive cells by dyadic index ``floor(center / side)``."""
    idx = np.floor(ax_centers / side).astype(np.int64)
    starts = np.concatenate([[0], np.nonzero(np.diff(idx))[0] + 1])
    stops = np.concatenate([starts[1:], [len(idx)]])
    return idx[starts], starts, stops


def _generation_ratios(u, grid, alpha, k, tau):
    """Ratios for every generation-``k`` cube meeting the grid (batched FFT)."""
    d = grid.d
    side = math.ldexp(1.0, -k)
    segs = [_axis_segments(ax, side) for ax in grid.axes()]
    extent = tuple(int(np.max(stop - start)) for _, start, stop in segs)
    counts = tuple(len(m) for m, _, _ in segs)
    # scatter the field into a padded (S_1, M_1, ..., S_d, M_d) block array
    padded = np.zeros(sum(([c, m] for c, m in zip(counts, extent)), []), dtype=float)
    mesh = np.meshgrid(*[np.arange(n) for n in grid.shape], indexing="ij")
    index = []
    for ax, (_, start, stop) in enumerate(segs):
        pos = np.arange(stop[-1])
        which = np.searchsorted(start, pos, side="right") - 1
        index.append(which[mesh[ax]])
        index.append((pos - start[which])[mesh[ax]])
    padded[tuple(index)] = u
    perm = list(range(0, 2 * d, 2)) + list(range(1, 2 * d, 2))
    blocks = padded.transpose(perm).reshape((-1,) + extent)

    w = grid.cell_volume
    masses = blocks.reshape(len(blocks), -1).sum(axis=1) * w
    keep = np.nonzero(masses >= tau)[0]
    ratios = np.full(len(blocks), -np.inf)
    if keep.size:
        shape_fft = fft_shape(extent)
        table = _pair_table(alpha, grid, extent, shape_fft)
        per = max(1, _CHUNK // int(np.prod(shape_fft)))
        for c0 in range(0, keep.size, per):
            sel = keep[c0 : c0 + per]
            b = blocks[sel]
            conv = convolve_same(b, table, shape_fft)
            num = np.sum((b * conv).reshape(len(sel), -1), axis=1)
            ratios[sel] = num / masses[sel]
    cube_ids = np.array(list(np.ndindex(*counts)))
    first = [m for m, _, _ in segs]
    ms = np.stack([first[ax][cube_ids[:, ax]] for ax in range(d)], axis=1)
    return ratios, ms


def ks_norm_field(u, grid: Grid, alpha: float, depth: tuple[int, int] | None = None,
                  level: int = DEFAULT_LEVEL) -> NormResult:
    """Kerman-Sawyer norm of a sampled nonnegative field ``u`` on ``grid``.

    Dyadic generations ``depth = (k_min, k_max)`` are scanned; generations
    whose cubes are smaller than a grid cell are skipped (for a cellwise
    constant field such cubes are dominated by the cell itself).
    """
    d = grid.d
    if not 0 < alpha < d:
        raise ValueError(f"alpha={alpha} outside (0, {d})")
    u = np.abs(np.asarray(u, dtype=complex)).reshape(grid.shape).astype(float)
    hmax = float(np.max(grid.spacing))
    k_cell = math.floor(-math.log2(hmax) + 1e-9)
    if depth is None:
        extent = max(h - l for l, h in zip(grid.lo, grid.hi))
        k_top = math.floor(-math.log2(extent)) - 2
        depth = (k_top, k_cell)
    k_min, k_max = depth
    if k_min > k_max:
        raise ValueError("depth must satisfy k_min <= k_max")
    tau = MASS_FLOOR * grid.volume
    params = {"alpha": float(alpha)}
    per_gen = []
    best_val, witness = -np.inf, None
    for k in range(k_min, k_max + 1):
        if k > k_cell:
            per_gen.append((k, None))
            continue
        ratios, ms = _generation_ratios(u, grid, alpha, k, tau)
        j = int(np.argmax(ratios))
        per_gen.append((k, float(ratios[j])))
        # ties resolve to the finest cube
        if ratios[j] > -np.inf and ratios[j] >= best_val * (1 - 1e-12):
            if best_val == -np.inf or ratios[j] > best_val:
                best_val = max(best_val, float(ratios[j]))
            witness = {"k": k, "m": [int(v) for v in ms[j]]}
    trace = []
    run = -np.inf
    for _, v in per_gen:
        if v is not None:
            run = max(run, v)
        trace.append(run if run > -np.inf else 0.0)
    if best_val == -np.inf:
        return NormResult("KS", 0.0, None, trace, ["zero potential"], params)
    return NormResult("KS", best_val, witness, trace, [], params)


def ks_norm(V: PotentialSpec, alpha: float, beta: float = 1.0,
            depth: tuple[int, int] | None = None, level: int = DEFAULT_LEVEL,
            grid: Grid | None = None) -> NormResult:
    """``|| |V|^beta ||_{KS_alpha}`` by a truncated dyadic-cube scan."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    grid, vals = discretize(V, level, grid)
    res = ks_norm_field(np.abs(vals) ** beta, grid, alpha, depth, level)
    res.params["beta"] = float(beta)
    return res


# companion norms ---------------------------------------------------------------


def _log_plus_center(half_sides):
    def moment(rho):
        rho = np.asarray(rho, dtype=float)
        return np.where(rho <= 1.0, 0.25 - 0.5 * np.log(rho), 0.25 / rho**2)

    return quadrature.centered_cell_integral(moment, half_sides).real


def _kato_potential(u, grid):
    d = grid.d
    extent = grid.shape
    shape_fft = fft_shape(extent)
    if d == 3:
        table = _center_table(2.0, grid, extent, shape_fft)
    elif d == 2:
        w = grid.cell_volume
        self_term = _log_plus_center(tuple(float(s) / 2 for s in grid.spacing))
        table = kernel_table(shape_fft, extent, grid.spacing,
                              lambda r: w * np.maximum(0.0, -np.log(r)), self_term)
    else:
        raise ValueError("Kato norm is defined for d = 2, 3")
    return convolve_same(u, table, shape_fft)


def _ball_weights(grid, r, sub=5):
    """Fraction of each cell inside ``B(0, r)`` for cells at offsets from a node."""
    sp = grid.spacing
    reach = [min(int(math.ceil(r / s)) + 1, n - 1) for s, n in zip(sp, grid.shape)]
    offs = [np.arange(-m, m + 1) for m in reach]
    q = (np.arange(sub) + 0.5) / sub - 0.5
    mesh = np.meshgrid(*offs, indexing="ij")
    frac = np.zeros(mesh[0].shape)
    subs = np.meshgrid(*([q] * grid.d), indexing="ij")
    for pt in zip(*[s.ravel() for s in subs]):
        dist2 = sum(((m + c) * s) ** 2 for m, c, s in zip(mesh, pt, sp))
        frac += dist2 < r * r
    return frac / sub**grid.d, reach


def _mc_norm(u_p, grid, alpha, p, steps=None):
    """``sup_{x,r} r^alpha (r^{-d} int_{B(x,r)} |V|^p)^{1/p}``, ``u_p = |V|^p``.

    Radii run over ``2^(j/steps)`` from the cell size to the grid diameter.
    """
    steps = MC_STEPS_PER_OCTAVE if steps is None else steps
    d = grid.d
    w = grid.cell_volume
    hmin = float(np.min(grid.spacing))
    diam = float(np.linalg.norm(np.array(grid.hi) - np.array(grid.lo)))
    j_lo = math.floor(steps * math.log2(hmin) + 1e-9)
    j_hi = math.ceil(steps * math.log2(diam) - 1e-9) + steps
    best, witness, trace = 0.0, None, []
    nodes_shape = grid.shape
    for j in range(j_lo, j_hi + 1):
        r = 2.0 ** (j / steps)
        frac, reach = _ball_weights(grid, r)
        shape_fft = tuple(scipy.fft.next_fast_len(n + 2 * m + 1, real=True)
                          for n, m in zip(nodes_shape, reach))
        table = np.zeros(shape_fft)
        idx = [np.arange(-m, m + 1) % P for m, P in zip(reach, shape_fft)]
        table[np.ix_(*idx)] = frac * w
        conv = convolve_same(u_p, table, shape_fft)
        local = np.maximum(conv, 0.0)
        k = int(np.argmax(local))
        val = r**alpha * (local.flat[k] / r**d) ** (1.0 / p)
        if val > best:
            best = val
            witness = {"x": [float(c) for c in grid.nodes[k]], "r": r}
        trace.append(best)
    return best, witness, trace


def aux_norm(V: PotentialSpec, request: NormRequest, grid: Grid | None = None) -> NormResult:
    """Kato, Rollnik, Morrey-Campanato or L^p norm of ``|V|^beta`` (or KS)."""
    if request.kind == "KS":
        return ks_norm(V, request.alpha, request.beta, request.depth, request.level, grid)
    grid, vals = discretize(V, request.level, grid)
    u = np.abs(vals).astype(float) ** request.beta
    d = grid.d
    params = {"beta": request.beta}
    w = grid.cell_volume
    if request.kind == "Kato":
        pot = _kato_potential(u, grid)
        k = int(np.argmax(pot))
        val = float(pot.flat[k])
        wit = {"x": [float(c) for c in grid.nodes[k]]}
        return NormResult("Kato", val, wit, [val], [], params)
    if request.kind == "Rollnik":
        if d != 3:
            raise ValueError("Rollnik norm is defined for d = 3 only")
        extent = grid.shape
        shape_fft = fft_shape(extent)
        conv = convolve_same(u, _pair_table(1.0, grid, extent, shape_fft), shape_fft)
        val = float(np.sum(u * conv))
        return NormResult("Rollnik", val, None, [val], [], params)
    if request.kind == "MC":
        alpha, p = request.alpha, request.p
        if not alpha > 0:
            raise ValueError("MC norm needs alpha > 0")
        if not 1 <= p <= d / alpha + 1e-12:
            raise ValueError(f"MC norm needs 1 <= p <= d/alpha = {d / alpha}")
        val, wit, trace = _mc_norm(u**p, grid, alpha, p)
        params.update(alpha=alpha, p=p)
        return NormResult("MC", val, wit, trace, [], params)
    if request.kind == "Lp":
        p = request.p
        if not p >= 1:
            raise ValueError("Lp norm needs p >= 1")
        val = float((np.sum(u**p) * w) ** (1.0 / p))
        params["p"] = p
        return NormResult("Lp", val, None, [val], [], params)
    raise ValueError(request.kind)


# Riesz potential and the weighted lemma -------------------------------------------


def apply_riesz(f, alpha: float, grid: Grid) -> np.ndarray:
    """Fractional integral ``I_alpha f`` at the grid nodes.

    The self-term is the exact integral of ``|y|^{alpha-d}`` over the cell
    centred at the node.
    """
    d = grid.d
    if not 0 < alpha < d:
        raise ValueError(f"alpha={alpha} outside (0, {d})")
    f = np.asarray(f).reshape(grid.shape)
    extent = grid.shape
    shape_fft = fft_shape(extent)
    table = _center_table(alpha, grid, extent, shape_fft)
    out = convolve_same(f, table, shape_fft)
    return out


def _riesz_pair_operator(sw, alpha, grid):
    """``f -> sqrt(w) * I_alpha(sqrt(w) f)`` as a LinearOperator on the grid."""
    from scipy.sparse.linalg import LinearOperator

    extent = grid.shape
    shape_fft = fft_shape(extent)
    table = _center_table(alpha, grid, extent, shape_fft)
    T_hat = scipy.fft.rfftn(table)
    n = grid.size
    shape = grid.shape
    sl = tuple(slice(0, m) for m in shape)

    def mv(x):
        x = np.asarray(x).reshape(shape) * sw
        re = scipy.fft.irfftn(scipy.fft.rfftn(x.real, s=shape_fft) * T_hat, s=shape_fft)[sl]
        im = scipy.fft.irfftn(scipy.fft.rfftn(x.imag, s=shape_fft) * T_hat, s=shape_fft)[sl]
        return ((re + 1j * im) * sw).ravel()

    return LinearOperator((n, n), matvec=mv, rmatvec=mv, dtype=complex)


def ks_lemma_ratio(w_field, grid: Grid, alpha: float, seed: int = DEFAULT_SEED,
                   tol: float = 1e-9) -> float:
    """Operator norm of ``f -> w^{1/2} I_alpha(w^{1/2} f)`` over ``||w||_{KS_alpha}``."""
    w_field = np.asarray(w_field, dtype=float).reshape(grid.shape)
    if np.any(w_field < 0):
        raise ValueError("weight must be nonnegative")
    if not np.any(w_field > 0):
        raise ZeroPotentialError("weight is identically zero")
    op = _riesz_pair_operator(np.sqrt(w_field), alpha, grid)
    num = largest_singular(op, tol=tol, seed=seed).value
    den = ks_norm_field(w_field, grid, alpha).value
    if den == 0.0:
        raise ZeroPotentialError("weight is below the mass floor everywhere")
    return num / den
