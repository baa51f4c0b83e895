"""Invariant suites behind ``specenc verify``.

Each check yields a :class:`Case`.  Reports hold no timings or timestamps,
so two runs with the same seed are byte-identical.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from . import birman, enclosure, norms, quadrature, special
from .core import Grid, PotentialSpec, sqrt_branch
from .linalg import DEFAULT_SEED

SCHEMA_VERSION = 1
SUITES = ("branch", "norms", "kernel", "bs", "enclosure")


@dataclass
class Case:
    suite: str
    name: str
    passed: bool
    value: float | None = None
    threshold: float | None = None
    detail: dict | None = None

    def row(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        val = "" if self.value is None else f"{self.value:.6g}"
        thr = "" if self.threshold is None else f"{self.threshold:.6g}"
        return f"{mark:4}  {self.suite:9}  {self.name:44}  {val:>12}  {thr:>10}"


def _f(x) -> float:
    return float(np.real(x))


# branch -------------------------------------------------------------------------


def suite_branch(seed: int = DEFAULT_SEED):
    rng = np.random.default_rng(seed)
    lams = rng.uniform(-10, 10, 1000) + 1j * rng.uniform(-10, 10, 1000)
    err = max(abs(sqrt_branch(z).s ** 2 + z) / max(1.0, abs(z)) for z in lams)
    yield Case("branch", "s^2 + lambda = 0", err < 1e-14, err, 1e-14)
    re_min = min(sqrt_branch(z).s.real for z in lams)
    yield Case("branch", "Re s > 0", re_min > 0, re_min, 0.0)
    conj = max(abs(sqrt_branch(z.conjugate()).s - sqrt_branch(z).s.conjugate()) for z in lams)
    yield Case("branch", "conjugation symmetry", conj < 1e-14, conj, 1e-14)
    neg = sqrt_branch(-4.0)
    yield Case("branch", "negative real axis admitted", abs(neg.s - 2) < 1e-15, abs(neg.s - 2))
    try:
        sqrt_branch(2.0)
        rejected = False
    except ValueError:
        rejected = True
    yield Case("branch", "[0, inf) rejected", rejected)
    g = Grid((-1.0, -2.0, 0.0), (1.0, 2.0, 3.0), (4, 8, 6))
    dv = abs(g.weights.sum() - g.volume) / g.volume
    yield Case("branch", "grid weights sum to volume", dv < 1e-14, dv, 1e-14)


# norms ----------------------------------------------------------------------------


def suite_norms(seed: int = DEFAULT_SEED):
    # cell self-integral against the Monte Carlo value of the unit-cube Coulomb energy
    pair = quadrature.power_pair_integral(2.0, (1.0, 1.0, 1.0))
    err = abs(pair - 1.8823126443896605) / 1.8823126443896605
    yield Case("norms", "unit cube pair integral", err < 1e-10, err, 1e-10)
    exact_1d = 2.0 / (0.5 * 1.5)
    err = abs(quadrature.power_pair_integral(0.5, (1.0,)) - exact_1d) / exact_1d
    yield Case("norms", "1D pair integral closed form", err < 1e-10, err, 1e-10)

    wells = {
        "cube": PotentialSpec.square_well(3, 1.0, 0.5, center=(0.5, 0.5, 0.5)),
        "gaussian": PotentialSpec.gaussian(3, 1.0, 0.5),
    }
    for label, V in wells.items():
        for alpha in (1.5, 2.0):
            base = norms.ks_norm(V, alpha, level=4).value
            for t in (2.0, 4.0):
                val = norms.ks_norm(V.dilate(t), alpha, level=4).value
                rel = abs(val * t**alpha / base - 1)
                yield Case("norms", f"KS scaling {label} alpha={alpha} t={t:g}", rel < 0.01,
                           rel, 0.01)
    V = wells["gaussian"]
    base = norms.ks_norm(V, 2.0, beta=1.5, level=4).value
    scaled = norms.ks_norm(V.scale(-3.0), 2.0, beta=1.5, level=4).value
    rel = abs(scaled / (3.0**1.5 * base) - 1)
    yield Case("norms", "KS homogeneity |c|^beta", rel < 1e-12, rel, 1e-12)
    wide = norms.ks_norm(V, 2.0, depth=(-4, 4), level=4).value
    narrow = norms.ks_norm(V, 2.0, depth=(-1, 2), level=4).value
    yield Case("norms", "KS sup monotone in depth", wide >= narrow, wide - narrow, 0.0)

    worst = 0.0
    for W in enclosure.random_corpus(50, 3, seed=seed % (2**32), cells=16):
        ks = norms.ks_norm(W, 2.0).value
        kato = norms.aux_norm(W, norms.NormRequest("Kato")).value
        worst = max(worst, ks / kato)
    yield Case("norms", "KS_2 <= Kato on corpus (2% slack)", worst <= 1.02, worst, 1.02)

    ball = PotentialSpec.square_well(3, 1.0, 0.5)
    chain = enclosure.frank_chain_check(ball, 0.25, 1.6, level=4)
    yield Case("norms", "chain KS <= MC, centred cube", chain.passed, chain.ratio, 1.05)
    # documented counterexample to the unit-constant chain: a uniform cube inside
    # one dyadic cube gives lhs/rhs = S^{1/beta} with S its pair integral
    delta, a, b = enclosure.frank_parameters(0.25, 1.75, 3)
    S = quadrature.power_pair_integral(a, (1.0, 1.0, 1.0))
    off = enclosure.frank_chain_check(
        PotentialSpec.square_well(3, 1.0, 0.5, center=(0.5, 0.5, 0.5)), 0.25, 1.75, level=4)
    rel = abs(off.ratio / S ** (1 / b) - 1)
    yield Case("norms", "chain constant S^(1/beta) reproduced", rel < 1e-3, off.ratio,
               S ** (1 / b), {"note": "unit-constant chain fails; ratio > 1 is expected"})


# kernel ---------------------------------------------------------------------------


def suite_kernel(seed: int = DEFAULT_SEED):
    for d, zeta in ((3, 1.0), (3, 1.25), (2, 0.75)):
        for lam in (-1.0, 1j):
            for regime in ("large_r", "small_r"):
                rep = special.kernel_bound_report(zeta, lam, d, regime)
                yield Case("kernel", f"slope d={d} zeta={zeta} lam={lam} {regime}", rep.passed,
                           rep.fitted, rep.predicted, rep.to_json())
    for nu in (0.25, 0.5, 1.0):
        dec = special.bessel_decay_check(nu)
        sm = special.bessel_small_check(nu)
        yield Case("kernel", f"(b2) decay shape nu={nu}", all(c.passed for c in dec),
                   max(c.slope for c in dec), 0.05)
        yield Case("kernel", f"(b1) small-argument shape nu={nu}", all(c.passed for c in sm),
                   min(c.slope for c in sm), -0.05)
    w = np.geomspace(0.01, 60, 200)
    closed = special.macdonald_k(0.5, w, method="closed")
    err = float(np.max(np.abs(special.macdonald_k(0.5, w) - closed) / np.abs(closed)))
    yield Case("kernel", "K_1/2 closed form", err < 1e-12, err, 1e-12)
    rng = np.random.default_rng(seed)
    ang = rng.uniform(-1.4, 1.4, 100)
    ws = 2.0 * np.exp(1j * ang)
    worst = 0.0
    for nu in (0.0, 0.5, 1.0):
        a = special.macdonald_k(nu, ws, method="series")
        b = special.macdonald_k(nu, ws, method="cf")
        worst = max(worst, float(np.max(np.abs(a - b) / np.abs(a))))
    yield Case("kernel", "series / continued fraction at |w| = 2", worst < 1e-9, worst, 1e-9)
    r = np.geomspace(0.1, 5, 9)
    ratio = special.paper_kernel(1.0, 1j, r, 3, branch="standard") / special.free_green(3, 1j, r)
    spread = float(np.max(np.abs(ratio / ratio[0] - 1)))
    expect = special.kernel_ratio_constant(1.0, 3)
    yield Case("kernel", "printed/classical kernel ratio constant", spread < 1e-10,
               abs(ratio[0]), expect)
    for d in (1, 3):
        err = weak_solution_error(d, -1.0 + 0.5j)
        yield Case("kernel", f"free_green weak solution d={d}", err < 1e-3, err, 1e-3)


def weak_solution_error(d: int, lam: complex, n: int = 400) -> float:
    """``|(G * (-Delta - lam) phi)(0) - phi(0)|`` for ``phi = exp(-|x|^2)``.

    The convolution at the origin reduces to a radial integral, done by
    Gauss-Legendre quadrature on ``[0, 8]``.
    """
    x, wts = np.polynomial.legendre.leggauss(n)
    r = 4.0 * (x + 1.0)
    wts = 4.0 * wts
    phi = np.exp(-r * r)
    lap = (4 * r * r - 2 * d) * phi
    f = -lap - lam * phi
    g = special.free_green(d, lam, r)
    area = 2.0 if d == 1 else 4 * math.pi * r * r
    return float(abs(np.sum(wts * area * g * f) - 1.0))


# Birman-Schwinger -------------------------------------------------------------------


def suite_bs(seed: int = DEFAULT_SEED):
    well = PotentialSpec.square_well(1, -2.0, 0.5)
    lam = birman.square_well_oracle_1d(-2.0, 0.5)
    yield Case("bs", "1D oracle single bound state", len(lam) == 1 and abs(lam[0] + 0.616) < 1e-3,
               _f(lam[0]) if lam else None, -0.616)
    lam_star = lam[0]
    sig = []
    for n in (100, 200, 400):
        B = birman.assemble_bs(well, lam_star, birman.support_grid(well, n))
        sig.append(birman.spectral_stats(B, seed=seed).sigma_min_plus_i)
    yield Case("bs", "sigma_min(A+I) < 0.05 at oracle, n=400", sig[-1] < 0.05, sig[-1], 0.05)
    ok = sig[1] <= sig[0] / 2 and sig[2] <= sig[1] / 2
    yield Case("bs", "residual halves under refinement", ok, sig[1] / sig[2], 2.0)
    norms_ = [birman.spectral_stats(birman.assemble_bs(well, -0.3 + 0.4j,
                                                       birman.support_grid(well, n)),
                                    seed=seed, with_sigma=False).op_norm for n in (200, 400)]
    rel = abs(norms_[1] / norms_[0] - 1)
    yield Case("bs", "grid convergence of ||A|| (n vs 2n)", rel < 0.02, rel, 0.02)
    rep = PotentialSpec.gaussian(1, 2.0, 0.7)
    B = birman.assemble_bs(rep, -0.7, birman.support_grid(rep, 120)).matrix
    asym = float(np.max(np.abs(B - B.T)))
    yield Case("bs", "A complex symmetric for V >= 0", asym == 0.0, asym, 0.0)
    smin = birman.spectral_stats(B, seed=seed).sigma_min_plus_i
    yield Case("bs", "no bound states for V >= 0", smin >= 0.99, smin, 0.99)
    found = birman.eigenvalue_search(well, -0.5, birman.support_grid(well, 200))
    rel = abs(found.lam / lam_star - 1)
    yield Case("bs", "eigenvalue search recovers oracle root", found.found and rel < 0.02, rel,
               0.02)
    scan = birman.lambda_scan(well, (-1.0, -0.3, -0.1, 0.1), (8, 3),
                              birman.support_grid(well, 100), seed=seed)
    near = np.abs(scan.lams - lam_star) < 0.06
    yield Case("bs", "scan does not exclude the eigenvalue", not scan.excluded[near].any())
    gauss = PotentialSpec.gaussian(3, -3.0, 1.0)
    grid = birman.support_grid(gauss, 16)
    for alpha in (2.0, 2.5):
        dec = birman.norm_decay(gauss, grid, alpha, t=np.geomspace(1.0, 1e3, 7), seed=seed)
        yield Case("bs", f"||A(it)|| t^e bounded, d=3, alpha={alpha:g}", dec.passed, dec.slope,
                   dec.tolerance)
    A = np.diag([3.0, 1.0]).astype(complex)
    top = birman.spectral_stats(A, seed=seed).op_norm
    yield Case("bs", "opNorm diag(3,1)", abs(top - 3) < 1e-10, top, 3.0)


# enclosure ---------------------------------------------------------------------------


def suite_enclosure(seed: int = DEFAULT_SEED):
    beta, e = enclosure.exponents(2.0, 3)
    yield Case("enclosure", "d=3 alpha=2: beta=1, e=0", beta == 1 and e == 0, e, 0.0)
    beta, e = enclosure.exponents(1.5, 2)
    yield Case("enclosure", "d=2 alpha=3/2: beta=1, e=1/4", beta == 1 and e == 0.25, e, 0.25)
    e_lim = enclosure.exponents(3 - 1e-9, 3)[1]
    yield Case("enclosure", "e -> 1/(d+1) as alpha -> d", abs(e_lim - 0.25) < 1e-8, e_lim, 0.25)
    rng = np.random.default_rng(seed)
    worst = 0.0
    count = 0
    for _ in range(30):
        depth = -rng.uniform(0.5, 6.0) * complex(1.0, rng.uniform(-0.6, 0.6))
        a = rng.uniform(0.2, 1.5)
        for z in birman.square_well_oracle_1d(depth, a):
            worst = max(worst, abs(z) ** 0.5 / (0.5 * abs(depth) * 2 * a))
            count += 1
    yield Case("enclosure", f"1D bound on 30 wells ({count} eigenvalues)", worst <= 1.0, worst, 1.0)
    ratios = []
    for eps in (0.2, 0.1, 0.05):
        (z,) = birman.square_well_oracle_1d(-2 / eps, eps / 2)
        ratios.append(abs(z) ** 0.5)
    mono = ratios[0] < ratios[1] < ratios[2]
    yield Case("enclosure", "delta-limit ratios increase to 1", mono and ratios[-1] >= 0.9,
               ratios[-1], 0.9)
    c1 = enclosure.inverse_square_criterion(1.0, 0.25, 4.0, m=4)
    c2 = enclosure.inverse_square_criterion(2.0, 0.25, 4.0, m=4)
    rel = abs(c2 / (2 * c1) - 1)
    yield Case("enclosure", "inverse-square criterion linear in a", rel < 1e-12, rel, 1e-12)
    c3 = enclosure.inverse_square_criterion(1.0, 1 / 16, 16.0, m=4)
    c4 = enclosure.inverse_square_criterion(1.0, 1 / 32, 32.0, m=4)
    rel = abs(c4 / c3 - 1)
    yield Case("enclosure", "inverse-square cutoff plateau", rel < 0.03, rel, 0.03)
    g = PotentialSpec.gaussian(3, 1.0, 0.5)
    base = enclosure.enclosure_report(g, 2.0, level=4).criterion
    t = 2.0
    moved = enclosure.enclosure_report(g.dilate(t).scale(t * t), 2.0, level=4).criterion
    rel = abs(moved / base - 1)
    yield Case("enclosure", "e=0 criterion invariant under t^2 V(t x)", rel < 0.02, rel, 0.02)


_RUNNERS = {
    "branch": suite_branch,
    "norms": suite_norms,
    "kernel": suite_kernel,
    "bs": suite_bs,
    "enclosure": suite_enclosure,
}


def run_suite(name: str, seed: int = DEFAULT_SEED) -> list[Case]:
    names = SUITES if name == "all" else (name,)
    cases = []
    for n in names:
        if n not in _RUNNERS:
            raise KeyError(n)
        cases.extend(_RUNNERS[n](seed))
    return cases


def report_json(name: str, cases: list[Case], seed: int) -> str:
    failures = [c for c in cases if not c.passed]
    doc = {
        "schema_version": SCHEMA_VERSION,
        "suite": name,
        "seed": seed,
        "tests": len(cases),
        "failures": len(failures),
        "cases": [asdict(c) for c in cases],
    }
    return json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n"


def report_table(cases: list[Case]) -> str:
    head = f"{'':4}  {'suite':9}  {'check':44}  {'value':>12}  {'threshold':>10}"
    lines = [head] + [c.row() for c in cases]
    bad = sum(not c.passed for c in cases)
    lines.append(f"{len(cases) - bad}/{len(cases)} passed")
    return "\n".join(lines) + "\n"


def _json_default(x):
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(type(x).__name__)
