"""Eigenvalue enclosures from Kerman-Sawyer norms.

For ``d >= 2`` and admissible ``alpha`` every eigenvalue ``lam`` of
``-Delta + V`` off ``[0, inf)`` obeys

    |lam|^e <= C || |V|^beta ||_{KS_alpha}^{1/beta},
    beta = (2 alpha - d + 1)/2,   e = (alpha - d + 1)/(2 alpha - d + 1),

with an unspecified constant ``C``.  In one dimension the sharp bound is
``|lam|^{1/2} <= (1/2) int |V|``.  At ``e = 0`` the bound is a smallness
criterion: ``C ||V^beta||^{1/beta} < 1`` rules out eigenvalues altogether.
"""

from __future__ import annotations

import hashlib
import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

from . import quadrature
from .core import Grid, PotentialSpec, sample_potential
from .norms import DEFAULT_LEVEL, NormRequest, aux_norm, discretize, ks_norm

__all__ = [
    "exponents",
    "admissible_alpha",
    "EnclosureReport",
    "enclosure_report",
    "l1_norm",
    "empirical_constant",
    "FrankChain",
    "frank_parameters",
    "frank_chain_check",
    "inverse_square_criterion",
    "origin_cube_ratio",
    "random_corpus",
]

SHARP_1D = 0.5


def exponents(alpha: float, d: int) -> tuple[float, float]:
    """``(beta, e)`` for the KS bound in dimension ``d``."""
    beta = (2 * alpha - d + 1) / 2
    e = (alpha - d + 1) / (2 * alpha - d + 1)
    return beta, e


def admissible_alpha(alpha: float, d: int) -> bool:
    if d == 2:
        return 1.5 <= alpha < 2
    if d >= 3:
        return d - 1 <= alpha < d
    return False


def l1_norm(V: PotentialSpec, level: int = DEFAULT_LEVEL, grid: Grid | None = None) -> float:
    """``int |V|``; exact for square wells, quadrature otherwise."""
    if V.variant == "squareWell":
        return abs(V.params["depth"]) * (2 * V.params["halfWidth"]) ** V.d
    if grid is None:
        grid, vals = discretize(V, level)
    else:
        vals = sample_potential(V, grid)
    return float(np.sum(np.abs(vals)) * grid.cell_volume)


@dataclass
class EnclosureReport:
    d: int
    alpha: float | None
    beta: float
    exponent: float
    ks_value: float
    C: float
    radius: float | None
    criterion: float | None
    eigenvalues: list = field(default_factory=list)
    checks: list = field(default_factory=list)
    flags: list = field(default_factory=list)
    mode: str = "KS"

    @property
    def passed(self) -> bool:
        return all(c["pass"] for c in self.checks) and "contradiction" not in self.flags

    def to_json(self) -> dict:
        out = asdict(self)
        out["eigenvalues"] = [[z.real, z.imag] for z in self.eigenvalues]
        out["passed"] = self.passed
        return out


def enclosure_report(V: PotentialSpec, alpha: float | None = None, C: float = 1.0,
                     eigenvalues=(), level: int = DEFAULT_LEVEL,
                     grid: Grid | None = None) -> EnclosureReport:
    """Evaluate both sides of the enclosure for each supplied eigenvalue.

    In one dimension ``alpha`` is ignored and the sharp constant 1/2 with
    ``int |V|`` replaces the KS side.  Otherwise ``alpha`` defaults to the
    bottom of the admissible range, where ``e = 0`` for ``d >= 3``.
    """
    eigs = [complex(z) for z in eigenvalues]
    d = V.d
    if d == 1:
        C = SHARP_1D
        beta, e = 1.0, 0.5
        value = l1_norm(V, level, grid)
        alpha = None
        mode = "dim1"
    else:
        if alpha is None:
            alpha = 1.5 if d == 2 else float(d - 1)
        if not admissible_alpha(alpha, d):
            lo = "3/2" if d == 2 else str(d - 1)
            raise ValueError(f"alpha={alpha} outside the admissible range [{lo}, {d}) for d={d}")
        beta, e = exponents(alpha, d)
        res = ks_norm(V, alpha, beta, level=level, grid=grid)
        value = res.value ** (1.0 / beta)
        mode = "KS"
    rhs = C * value
    checks = []
    flags = []
    if e > 0:
        radius = rhs ** (1.0 / e)
        criterion = None
        for z in eigs:
            lhs = abs(z) ** e
            checks.append({"lambda": [z.real, z.imag], "lhs": lhs, "rhs": rhs,
                           "pass": bool(lhs <= rhs)})
    else:
        radius = None
        criterion = rhs
        for z in eigs:
            checks.append({"lambda": [z.real, z.imag], "lhs": 1.0, "rhs": rhs,
                           "pass": bool(rhs >= 1.0)})
        if eigs and rhs < 1.0:
            flags.append("contradiction")
    if d == 3 and alpha == 2:
        flags.append("KS_2 used; the KS_{3/2} and KS_3 readings are taken as typos for KS_2")
    return EnclosureReport(d, alpha, beta, e, value, C, radius, criterion, eigs, checks,
                           flags, mode)


# empirical constant ---------------------------------------------------------------


def _corpus_hash(records) -> str:
    h = hashlib.sha256()
    for V, eigs in records:
        if V.variant == "sampled":
            h.update(json.dumps(V.grid.to_json(), sort_keys=True).encode())
            h.update(np.ascontiguousarray(V.samples).tobytes())
        else:
            h.update(json.dumps(V.to_json(), sort_keys=True).encode())
        h.update(json.dumps([[complex(z).real, complex(z).imag] for z in eigs]).encode())
    return h.hexdigest()


def empirical_constant(corpus, alpha: float | None = None, ledger: str | Path | None = None,
                       level: int = DEFAULT_LEVEL) -> float:
    """Largest ``|lam|^e / ||V^beta||^{1/beta}`` over a corpus of located eigenvalues.

    ``corpus`` is a list of ``(V, eigenvalues)``.  With ``ledger`` the value
    is merged into a JSON file keyed by ``(alpha, d)``; the stored value
    can only grow, and the merged value is returned.
    """
    corpus = list(corpus)
    if not corpus:
        raise ValueError("empty corpus")
    d = corpus[0][0].d
    if d > 1 and alpha is None:
        alpha = 1.5 if d == 2 else float(d - 1)
    best = 0.0
    for V, eigs in corpus:
        if V.d != d:
            raise ValueError("corpus mixes dimensions")
        if d == 1:
            value, e = l1_norm(V, level), 0.5
        else:
            beta, e = exponents(alpha, d)
            value = ks_norm(V, alpha, beta, level=level).value ** (1.0 / beta)
        eigs = [complex(z) for z in eigs]
        if value == 0 and eigs:
            raise ValueError("potential with vanishing norm has a located eigenvalue")
        for z in eigs:
            best = max(best, abs(z) ** e / value)
    if ledger is None:
        return best
    path = Path(ledger)
    entries = json.loads(path.read_text()) if path.exists() else []
    if not isinstance(entries, list) or not all(
            isinstance(x, dict) and {"alpha", "d", "value"} <= x.keys() for x in entries):
        raise ValueError(f"{path} is not an empirical-constant ledger")
    key_alpha = None if d == 1 else float(alpha)
    old = [x for x in entries if x["d"] == d and x["alpha"] == key_alpha]
    prev = max((x["value"] for x in old), default=0.0)
    merged = max(prev, best)
    entries = [x for x in entries if not (x["d"] == d and x["alpha"] == key_alpha)]
    entries.append({"alpha": key_alpha, "d": d, "value": merged,
                    "corpus_hash": _corpus_hash(corpus), "timestamp": time.time()})
    path.write_text(json.dumps(entries, indent=2, sort_keys=True))
    return merged


# Morrey-Campanato comparison ---------------------------------------------------------


@dataclass
class FrankChain:
    gamma: float
    p: float
    delta: float
    alpha: float
    beta: float
    lhs: float
    rhs: float
    ratio: float
    passed: bool
    slack: float


def frank_parameters(gamma: float, p: float, d: int) -> tuple[float, float, float]:
    """``(delta, alpha, beta)`` with ``alpha = delta beta`` and ``beta = (2 alpha - d + 1)/2``."""
    if not 0 < gamma < 0.5:
        raise ValueError("gamma must lie in (0, 1/2)")
    lo = (d - 1) * (2 * gamma + d) / (2 * (d - 2 * gamma))
    hi = gamma + d / 2
    if not lo < p <= hi:
        raise ValueError(f"p={p} outside ({lo}, {hi}]")
    delta = 2 * d / (2 * gamma + d)
    if not 1 < delta < 2:
        raise ValueError("degenerate exponent delta")
    beta = (d - 1) / (2 * (delta - 1))
    return delta, delta * beta, beta


def frank_chain_check(V: PotentialSpec, gamma: float, p: float, slack: float = 0.05,
                      level: int = DEFAULT_LEVEL, grid: Grid | None = None) -> FrankChain:
    """Compare ``||V^beta||_{KS_{delta beta}}^{1/beta}`` with ``||V||_{MC^{delta,p}}``."""
    delta, alpha, beta = frank_parameters(gamma, p, V.d)
    lhs = ks_norm(V, alpha, beta, level=level, grid=grid).value ** (1.0 / beta)
    rhs = aux_norm(V, NormRequest("MC", alpha=delta, p=p, level=level), grid).value
    ratio = lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else math.inf)
    return FrankChain(gamma, p, delta, alpha, beta, lhs, rhs, ratio,
                      bool(lhs <= rhs * (1 + slack)), slack)


# inverse-square potentials ---------------------------------------------------------


def _graded_cells(L, depth, m, d):
    """Cells of a mesh of ``[0, L]^d`` graded geometrically towards the origin.

    Shell ``j`` is ``[0, L 2^-j]^d`` minus ``[0, L 2^-(j+1)]^d``, cut into
    ``2^d - 1`` sub-cubes of ``m^d`` cells each.  Returns lower corners and
    sides of the cells; the innermost cube ``[0, L 2^-depth]^d`` is omitted.
    """
    corners, sides = [], []
    local = np.stack(np.meshgrid(*[np.arange(m)] * d, indexing="ij"), -1).reshape(-1, d)
    for j in range(depth):
        s = L * 2.0 ** -(j + 1)
        h = s / m
        for octant in np.ndindex(*(2,) * d):
            if not any(octant):
                continue
            corners.append(np.asarray(octant) * s + local * h)
            sides.append(np.full(len(local), h))
    return np.concatenate(corners), np.concatenate(sides)


def _cell_averages(V, corners, sides, q=3):
    """Gauss-Legendre cell averages of ``V`` (the cutoffs included)."""
    d = corners.shape[1]
    x, w = np.polynomial.legendre.leggauss(q)
    x = (x + 1) / 2
    w = w / 2
    pts = np.stack(np.meshgrid(*[x] * d, indexing="ij"), -1).reshape(-1, d)
    wts = np.prod(np.stack(np.meshgrid(*[w] * d, indexing="ij"), -1).reshape(-1, d), axis=1)
    acc = np.zeros(len(corners))
    for p, wt in zip(pts, wts):
        acc += wt * np.abs(V.evaluate(corners + p * sides[:, None]))
    return acc


def origin_cube_ratio(V: PotentialSpec, L: float, alpha: float, cutoff: float,
                      m: int = 6, chunk: int = 2048) -> float:
    """KS ratio of ``|V|`` on the cube ``[0, L]^d`` via a graded mesh.

    ``cutoff`` is a radius below which ``V`` vanishes; shells inside it are
    not meshed.
    """
    d = V.d
    depth = max(1, math.ceil(math.log2(L * math.sqrt(d) / cutoff))) if cutoff > 0 else 40
    corners, sides = _graded_cells(L, depth, m, d)
    u = _cell_averages(V, corners, sides)
    keep = u > 0
    corners, sides, u = corners[keep], sides[keep], u[keep]
    centers = corners + sides[:, None] / 2
    mass = u * sides**d
    num = 0.0
    for c0 in range(0, len(u), chunk):
        r = cdist(centers[c0 : c0 + chunk], centers)
        np.fill_diagonal(r[:, c0 : c0 + chunk], np.inf)
        num += float(mass[c0 : c0 + chunk] @ (r ** (alpha - d)) @ mass)
    self_terms = {h: quadrature.power_pair_integral(float(alpha), (float(h),) * d)
                  for h in np.unique(sides)}
    num += float(sum(ui * ui * self_terms[h] for ui, h in zip(u, sides)))
    return num / float(mass.sum())


def inverse_square_criterion(a: float, eps: float, R: float, d: int = 3,
                             alpha: float | None = None, method: str = "graded",
                             h: float | None = None, m: int = 6) -> float:
    """``|| (a/|x|^2)^beta ||_{KS_{d-1}}^{1/beta}`` for ``eps <= |x| <= R``.

    Dyadic cubes never straddle a coordinate hyperplane, so by reflection
    symmetry only cubes in the positive orthant matter, and for this
    radially decreasing potential the supremum sits on the cubes with a
    corner at the origin.  ``method="graded"`` evaluates those cubes
    (sides ``2^k`` from ``eps`` up to ``2R``) on meshes graded towards the
    origin.  ``method="grid"`` runs the full dyadic scan on a uniform grid
    of ``[0, R]^d`` with cells of side ``h`` (default ``eps``; ``R / h``
    must be a power of two).
    """
    alpha = d - 1 if alpha is None else alpha
    beta, _ = exponents(alpha, d)
    if alpha != d - 1 or not math.isclose(2 * beta, alpha):
        raise ValueError("the inverse-square criterion needs alpha = d - 1 (2 beta = alpha)")
    if a < 0:
        raise ValueError("a must be nonnegative")
    if not 0 < eps < R:
        raise ValueError("cutoffs must satisfy 0 < eps < R")
    if a == 0:
        return 0.0
    V = PotentialSpec.inverse_square(d, a, 2.0, inner=eps, outer=R)
    if method == "graded":
        k_lo = math.floor(math.log2(eps))
        k_hi = math.ceil(math.log2(R)) + 1
        best = max(origin_cube_ratio(V, 2.0**k, alpha, eps, m) for k in range(k_lo, k_hi + 1))
        return best ** (1.0 / beta)
    if method != "grid":
        raise ValueError(f"unknown method {method!r}")
    h = eps if h is None else h
    n = R / h
    if abs(n - 2 ** round(math.log2(n))) > 1e-9 * n:
        raise ValueError("R / h must be a power of two")
    n = int(round(n))
    grid = Grid.cubic((0.0,) * d, h, (n,) * d)
    return ks_norm(V, alpha, beta, grid=grid).value ** (1.0 / beta)


# corpora -------------------------------------------------------------------------------


def random_corpus(n: int, d: int = 3, seed: int = 0, cells: int = 16) -> list[PotentialSpec]:
    """Random nonnegative sampled potentials on ``[-2, 2]^d``.

    Each member is a sum of one to four Gaussian bumps and axis-aligned
    boxes with random centres, widths and heights.
    """
    rng = np.random.default_rng(seed)
    grid = Grid.cubic((-2.0,) * d, 4.0 / cells, (cells,) * d)
    x = grid.nodes
    out = []
    for _ in range(n):
        vals = np.zeros(grid.size)
        for _ in range(rng.integers(1, 5)):
            c = rng.uniform(-1.2, 1.2, d)
            w = rng.uniform(0.2, 0.8)
            amp = rng.uniform(0.2, 3.0)
            if rng.random() < 0.5:
                vals += amp * np.exp(-np.sum((x - c) ** 2, axis=1) / w**2)
            else:
                vals += amp * np.all(np.abs(x - c) < w, axis=1)
        out.append(PotentialSpec.sampled(grid, vals.reshape(grid.shape)))
    return out
