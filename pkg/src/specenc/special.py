"""Complex Gamma, Macdonald functions and free resolvent kernels.

The Macdonald function ``K_nu(w)`` (real order, ``Re w > 0``) is evaluated
by three routes:

* ``|w| <= 2``: Temme's ascending series for ``K_mu, K_{mu+1}`` with
  ``|mu| <= 1/2``, which reduces to the logarithmic series at integer order,
  followed by forward recurrence in the order;
* ``2 < |w| < 25``: Steed's continued fraction (Temme's CF2);
* ``|w| >= 25``: the Hankel asymptotic expansion.

Every route also returns the exponentially scaled value ``e^w K_nu(w)`` so
that kernels can be sampled far out on a ray without underflow.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import SpectralPoint, sqrt_branch

__all__ = [
    "gamma_complex",
    "macdonald_k",
    "free_green",
    "resolvent_power_kernel",
    "paper_kernel",
    "kernel_ratio_constant",
    "DegenerateKernelError",
    "SlopeReport",
    "kernel_bound_report",
    "kernel_values",
    "BoundCheck",
    "bessel_decay_check",
    "bessel_small_check",
    "SWITCH_RADIUS",
    "ASYMPTOTIC_RADIUS",
]

SWITCH_RADIUS = 2.0
ASYMPTOTIC_RADIUS = 25.0
MAX_ORDER = 3.0
_EPS = 1e-17

# Taylor coefficients of 1/Gamma(1+x) about 0.
_RGAMMA1P = np.array([
    1.0, 0.57721566490153286061, -0.65587807152025388108, -0.042002635034095235529,
    0.1665386113822914895, -0.042197734555544336748, -0.0096219715278769735621,
    0.0072189432466630995424, -0.0011651675918590651121, -0.00021524167411495097282,
    0.00012805028238811618615, -0.000020134854780788238656, -1.2504934821426706573e-6,
    1.1330272319816958824e-6, -2.0563384169776071035e-7, 6.1160951044814158179e-9,
    5.0020076444692229301e-9, -1.1812745704870201446e-9, 1.0434267116911005105e-10,
    7.782263439905071254e-12, -3.6968056186422057082e-12, 5.100370287454475979e-13,
    -2.0583260535665067832e-14, -5.3481225394230179824e-15, 1.2267786282382607902e-15,
])

# B_{2k} / (2k (2k-1)) for the Stirling series.
_STIRLING = [
    1 / 12, -1 / 360, 1 / 1260, -1 / 1680, 1 / 1188, -691 / 360360, 1 / 156,
    -3617 / 122400, 43867 / 244188, -174611 / 125400,
]


def _loggamma_stirling(z: complex) -> complex:
    z2 = z * z
    acc = 0j
    zp = z
    for c in _STIRLING:
        acc += c / zp
        zp *= z2
    return (z - 0.5) * cmath.log(z) - z + 0.5 * math.log(2 * math.pi) + acc


def gamma_complex(z: complex) -> complex:
    """Gamma function of a complex argument.

    Uses the reflection formula for ``Re z < 1/2`` and the Stirling series
    after shifting the argument to ``Re z >= 16``.
    """
    z = complex(z)
    if z.imag == 0.0 and z.real <= 0.0 and z.real == math.floor(z.real):
        raise ValueError(f"Gamma has a pole at {z.real:g}")
    if z.real < 0.5:
        return math.pi / (cmath.sin(math.pi * z) * gamma_complex(1.0 - z))
    shift = 1.0 + 0j
    while z.real < 16.0:
        shift *= z
        z += 1.0
    return cmath.exp(_loggamma_stirling(z)) / shift


def _temme_gammas(mu: float):
    """``gam1, gam2, 1/Gamma(1+mu), 1/Gamma(1-mu)`` for ``|mu| <= 1/2``."""
    k = np.arange(_RGAMMA1P.size)
    gampl = float(np.sum(_RGAMMA1P * mu**k))
    gammi = float(np.sum(_RGAMMA1P * (-mu) ** k))
    odd = k[1::2]
    even = k[0::2]
    gam1 = -float(np.sum(_RGAMMA1P[1::2] * mu ** (odd - 1)))
    gam2 = float(np.sum(_RGAMMA1P[0::2] * mu**even))
    return gam1, gam2, gampl, gammi


def _k_series(mu: float, x: np.ndarray):
    """Temme's series: ``(K_mu(x), K_{mu+1}(x))`` for ``|x| <= 2``."""
    gam1, gam2, gampl, gammi = _temme_gammas(mu)
    x2 = 0.5 * x
    pimu = math.pi * mu
    fact = 1.0 if abs(pimu) < 1e-15 else pimu / math.sin(pimu)
    d = -np.log(x2)
    e = mu * d
    small = np.abs(e) < 1e-8
    e_safe = np.where(small, 1.0, e)
    fact2 = np.where(small, 1.0 + e * e / 6.0, np.sinh(e_safe) / e_safe)
    ff = fact * (gam1 * np.cosh(e) + gam2 * fact2 * d)
    total = ff.copy()
    ee = np.exp(e)
    p = 0.5 * ee / gampl
    q = 0.5 / (ee * gammi)
    c = np.ones_like(x)
    dd = x2 * x2
    total1 = p.copy()
    for i in range(1, 200):
        ff = (i * ff + p + q) / (i * i - mu * mu)
        c = c * dd / i
        p = p / (i - mu)
        q = q / (i + mu)
        delta = c * ff
        total = total + delta
        total1 = total1 + c * (p - i * ff)
        if np.all(np.abs(delta) <= np.abs(total) * _EPS):
            break
    return total, total1 * (2.0 / x)


def _k_cf2(mu: float, x: np.ndarray, scaled: bool):
    """Steed's continued fraction: ``(K_mu(x), K_{mu+1}(x))`` for ``|x| >= 2``."""
    b = 2.0 * (1.0 + x)
    d = 1.0 / b
    h = d.copy()
    delh = d.copy()
    q1 = np.zeros_like(x)
    q2 = np.ones_like(x)
    a1 = 0.25 - mu * mu
    q = np.full_like(x, a1)
    c = a1
    a = -a1
    s = 1.0 + q * delh
    for i in range(2, 20000):
        a -= 2 * (i - 1)
        c = -a * c / i
        qnew = (q1 - b * q2) / a
        q1, q2 = q2, qnew
        q = q + c * qnew
        b = b + 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        h = h + delh
        dels = q * delh
        s = s + dels
        if np.all(np.abs(dels) <= np.abs(s) * _EPS):
            break
    else:
        raise ArithmeticError("continued fraction for K_nu did not converge")
    h = a1 * h
    kmu = np.sqrt(np.pi / (2.0 * x)) / s
    if not scaled:
        kmu = kmu * np.exp(-x)
    k1 = kmu * (mu + x + 0.5 - h) / x
    return kmu, k1


def _k_asymptotic(nu: float, x: np.ndarray, scaled: bool):
    four_nu2 = 4.0 * nu * nu
    term = np.ones_like(x)
    total = term.copy()
    for k in range(1, 60):
        term = term * (four_nu2 - (2 * k - 1) ** 2) / (8.0 * k * x)
        total = total + term
        if k >= 10 and np.all(np.abs(term) <= np.abs(total) * _EPS):
            break
    out = np.sqrt(np.pi / (2.0 * x)) * total
    return out if scaled else out * np.exp(-x)


def _recur(mu, nl, kmu, k1, x):
    for i in range(1, nl + 1):
        kmu, k1 = k1, (mu + i) * (2.0 / x) * k1 + kmu
    return kmu


def macdonald_k(nu: float, w, scaled: bool = False, method: str = "auto"):
    """Macdonald function ``K_nu(w)`` for real order and ``Re w > 0``.

    Parameters
    ----------
    nu : float
        Real order, ``|nu| <= 3`` (``K_{-nu} = K_nu``).
    w : complex or array_like
        Argument(s) with positive real part.
    scaled : bool
        Return ``exp(w) * K_nu(w)`` instead.
    method : {"auto", "series", "cf", "asymptotic", "closed"}
        Force one evaluation route; "closed" is only valid for ``nu = 1/2``.
    """
    nu = abs(float(nu))
    if nu > MAX_ORDER:
        raise ValueError(f"order {nu} outside the supported range [0, {MAX_ORDER}]")
    scalar = np.ndim(w) == 0
    x = np.atleast_1d(np.asarray(w, dtype=complex)).astype(complex)
    if np.any(x.real <= 0.0):
        raise ValueError("Macdonald function requires Re w > 0")
    shape = x.shape
    x = x.ravel()
    out = np.empty_like(x)

    if method == "closed" or (method == "auto" and nu == 0.5):
        if nu != 0.5:
            raise ValueError("closed form is only available for nu = 1/2")
        out = np.sqrt(np.pi / (2.0 * x))
        if not scaled:
            out = out * np.exp(-x)
        out = out.reshape(shape)
        return complex(out[0]) if scalar else out

    nl = int(nu + 0.5)
    mu = nu - nl
    ax = np.abs(x)
    if method == "auto":
        routes = {
            "series": ax <= SWITCH_RADIUS,
            "cf": (ax > SWITCH_RADIUS) & (ax < ASYMPTOTIC_RADIUS),
            "asymptotic": ax >= ASYMPTOTIC_RADIUS,
        }
    elif method in ("series", "cf", "asymptotic"):
        routes = {method: np.ones(x.shape, dtype=bool)}
    else:
        raise ValueError(f"unknown method {method!r}")

    for route, mask in routes.items():
        if not mask.any():
            continue
        xm = x[mask]
        if route == "series":
            kmu, k1 = _k_series(mu, xm)
            val = _recur(mu, nl, kmu, k1, xm)
            if scaled:
                val = val * np.exp(xm)
        elif route == "cf":
            kmu, k1 = _k_cf2(mu, xm, scaled)
            val = _recur(mu, nl, kmu, k1, xm)
        else:
            val = _k_asymptotic(nu, xm, scaled)
        out[mask] = val
    out = out.reshape(shape)
    return complex(out[0]) if scalar else out


def _as_point(lam) -> SpectralPoint:
    return lam if isinstance(lam, SpectralPoint) else sqrt_branch(lam)


def free_green(d: int, lam, r):
    """Kernel of ``(-Delta - lam)^{-1}`` in ``R^d`` at distance ``r > 0``."""
    pt = _as_point(lam)
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr <= 0):
        raise ValueError("free_green needs r > 0")
    s = pt.s
    if d == 1:
        out = np.exp(-s * r_arr) / (2 * s)
    elif d == 2:
        out = macdonald_k(0.0, s * r_arr) / (2 * np.pi)
    elif d == 3:
        out = np.exp(-s * r_arr) / (4 * np.pi * r_arr)
    else:
        raise ValueError(f"unsupported dimension {d}")
    return complex(out) if np.ndim(out) == 0 else out


def _check_strip(zeta: complex, d: int) -> float:
    zeta = complex(zeta)
    if zeta.imag != 0.0:
        raise NotImplementedError("complex order is not supported; use real zeta")
    z = zeta.real
    if not (d - 1) / 2 <= z <= (d + 1) / 2:
        raise ValueError(f"zeta={z} outside the strip [{(d - 1) / 2}, {(d + 1) / 2}]")
    return z


def resolvent_power_kernel(zeta: float, lam, r, d: int, scaled: bool = False):
    """Classical kernel of ``(-Delta - lam)^{-zeta}`` with ``s = sqrt(-lam)``.

    ``2^{1-zeta} (2 pi)^{-d/2} / Gamma(zeta) * (s/r)^{d/2-zeta} K_{d/2-zeta}(s r)``;
    with ``scaled=True`` the factor ``exp(s r)`` is applied.
    """
    pt = _as_point(lam)
    zeta = float(zeta)
    r_arr = np.asarray(r, dtype=float)
    nu = d / 2 - zeta
    pref = 2.0 ** (1 - zeta) / ((2 * np.pi) ** (d / 2) * gamma_complex(zeta))
    w = pt.s * r_arr
    out = pref * np.exp(nu * np.log(pt.s / r_arr)) * macdonald_k(nu, w, scaled=scaled)
    return complex(out) if np.ndim(out) == 0 else out


class DegenerateKernelError(ValueError):
    pass


def paper_kernel(zeta, lam, r, d: int, branch: str = "auto", scaled: bool = False):
    """Bessel-kernel formula for ``(-Delta - lam)^{-zeta}`` with ``|lam| = 1``.

    Evaluates ``e^{zeta^2} 2^{1-zeta} / ((2 pi)^{d/2} Gamma(zeta) Gamma(d/2-zeta))
    * (lam/r^2)^{(d/2-zeta)/2} * K_{d/2-zeta}(sqrt(lam r^2))``.

    ``branch="printed"`` takes the argument ``sqrt(lam) r``; ``"standard"``
    replaces ``lam`` by ``-lam`` inside the power and the argument so the
    kernel decays for every admitted ``lam``.  ``"auto"`` uses the printed
    branch off the real axis and the standard one for ``lam < 0``, where the
    printed branch would put the argument on the imaginary axis.
    ``scaled=True`` multiplies by ``exp(Re w)`` of the Bessel argument.
    """
    pt = _as_point(lam)
    z = _check_strip(zeta, d)
    nu = d / 2 - z
    if nu <= 0 and nu == math.floor(nu):
        raise DegenerateKernelError(
            f"formula degenerate at zeta={z}, d={d} (Gamma pole); use free_green"
        )
    if z <= 0 and z == math.floor(z):
        raise DegenerateKernelError(f"formula degenerate at zeta={z} (Gamma pole)")
    if branch == "auto":
        branch = "standard" if pt.is_real else "printed"
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr <= 0):
        raise ValueError("paper_kernel needs r > 0")
    if branch == "printed":
        if pt.is_real:
            raise ValueError("printed branch needs lam off the real axis")
        w = pt.w_dir * r_arr
        base = pt.lam
    elif branch == "standard":
        w = pt.s * r_arr
        base = -pt.lam
    else:
        raise ValueError(f"unknown branch {branch!r}")
    pref = (
        cmath.exp(z * z) * 2.0 ** (1 - z)
        / ((2 * np.pi) ** (d / 2) * gamma_complex(z) * gamma_complex(nu))
    )
    power = np.exp(0.5 * nu * np.log(base / r_arr**2))
    bessel = macdonald_k(nu, w, scaled=scaled)
    if scaled:
        # macdonald_k scales by exp(w); keep only the modulus part exp(Re w)
        bessel = bessel * np.exp(-1j * np.imag(w))
    out = pref * power * bessel
    return complex(out) if np.ndim(out) == 0 else out


def kernel_ratio_constant(zeta: float, d: int) -> float:
    """``e^{zeta^2} / Gamma(d/2 - zeta)``: printed kernel over classical kernel."""
    return math.exp(zeta * zeta) / gamma_complex(d / 2 - zeta).real


@dataclass
class SlopeReport:
    fitted: float
    residual: float
    r_lo: float
    r_hi: float
    predicted: float
    passed: bool
    tolerance: float
    regime: str
    d: int
    zeta: float
    lam: complex
    source: str
    unified_predicted: float
    unified_ok: bool
    r: np.ndarray = field(repr=False, default=None)
    values: np.ndarray = field(repr=False, default=None)

    def to_json(self) -> dict:
        out = asdict(self)
        out.pop("r")
        out.pop("values")
        out["lam"] = [self.lam.real, self.lam.imag]
        return out


def _loglog_fit(r, g):
    lr = np.log(r)
    lg = np.log(g)
    slope, icpt = np.polyfit(lr, lg, 1)
    resid = float(np.sqrt(np.mean((lg - (slope * lr + icpt)) ** 2)))
    return float(slope), resid


def kernel_values(zeta: float, lam, r, d: int, scaled: bool = False):
    """Kernel of ``(-Delta - lam)^{-zeta}`` on ``r`` and the formula used.

    The Bessel-kernel formula is used where it is defined; at its Gamma
    poles ``free_green`` (``zeta = 1``) or ``resolvent_power_kernel`` take
    over.  ``scaled=True`` multiplies by ``exp(Re w)`` of the Bessel argument.
    """
    pt = _as_point(lam)
    r = np.asarray(r, dtype=float)
    try:
        return paper_kernel(zeta, pt, r, d, scaled=scaled), "paper_kernel"
    except DegenerateKernelError:
        pass
    if zeta == 1.0:
        vals = free_green(d, pt, r)
        if scaled:
            vals = vals * np.exp(pt.s.real * r)
        return vals, "free_green"
    vals = resolvent_power_kernel(zeta, pt, r, d, scaled=scaled)
    if scaled:
        vals = vals * np.exp(-1j * (pt.s * r).imag)
    return vals, "resolvent_power_kernel"


_DEFAULT_LADDERS = {"small_r": (1e-6, 1e-2), "large_r": (5.0, 500.0)}


def kernel_bound_report(
    zeta: float,
    lam,
    d: int,
    regime: str,
    r_range: tuple[float, float] | None = None,
    n: int = 41,
    tol: float = 0.05,
) -> SlopeReport:
    """Fit the log-log slope of the resolvent-power kernel on an r-ladder.

    ``large_r`` fits ``|K(r)| e^{Re w(r)}`` against ``Re zeta - (d+1)/2``;
    ``small_r`` fits ``|K(r)|`` against ``-d/2 + Re zeta - |d/2 - Re zeta|``
    and also checks the unified exponent ``Re zeta - (d+1)/2``.
    """
    pt = _as_point(lam)
    if abs(abs(pt.lam) - 1.0) > 1e-12:
        raise ValueError("kernel bounds are stated for |lam| = 1")
    z = _check_strip(zeta, d)
    if regime not in _DEFAULT_LADDERS:
        raise ValueError(f"unknown regime {regime!r}")
    r_lo, r_hi = r_range or _DEFAULT_LADDERS[regime]
    if regime == "small_r" and r_hi > 1.0:
        raise ValueError("small_r ladder must lie in r <= 1")
    if regime == "large_r" and r_lo < 1.0:
        raise ValueError("large_r ladder must lie in r >= 1")
    r = np.geomspace(r_lo, r_hi, n)
    vals, source = kernel_values(z, pt, r, d, scaled=regime == "large_r")
    g = np.abs(vals)
    fitted, resid = _loglog_fit(r, g)
    unified = z - (d + 1) / 2
    if regime == "large_r":
        predicted = unified
    else:
        predicted = -d / 2 + z - abs(d / 2 - z)
    return SlopeReport(
        fitted=fitted, residual=resid, r_lo=float(r_lo), r_hi=float(r_hi),
        predicted=predicted, passed=abs(fitted - predicted) <= tol, tolerance=tol,
        regime=regime, d=d, zeta=z, lam=pt.lam, source=source,
        unified_predicted=unified,
        unified_ok=(fitted >= unified - tol) if regime == "small_r" else (fitted <= unified + tol),
        r=r, values=vals,
    )


@dataclass
class BoundCheck:
    nu: float
    ray_angle: float
    slope: float
    max_ratio: float
    passed: bool


def _ray(angle, lo, hi, n):
    t = np.geomspace(lo, hi, n)
    return t, t * cmath.exp(1j * angle)


def bessel_decay_check(nu, angles=(0.0, np.pi / 4, -np.pi / 4), r_range=(1.0, 100.0),
                       n=60, tol=0.05) -> list[BoundCheck]:
    """``|K_nu(w)| e^{Re w} |w|^{1/2}`` must not grow along rays as ``|w|`` grows."""
    out = []
    for ang in angles:
        t, w = _ray(ang, *r_range, n)
        g = np.abs(macdonald_k(nu, w, scaled=True)) * np.sqrt(t)
        slope, _ = _loglog_fit(t, g)
        out.append(BoundCheck(nu, float(ang), slope, float(g.max() / g[-1]), slope <= tol))
    return out


def bessel_small_check(nu, angles=(0.0, np.pi / 4, -np.pi / 4), r_range=(1e-3, 1.0),
                       n=60, tol=0.05) -> list[BoundCheck]:
    """``|K_nu(w)| |w|^nu`` must stay bounded as ``|w|`` shrinks to 0.

    The slope is fitted on the lowest decade of the ladder: a bounded
    function flattens there, while a divergence ``|w|^-c`` keeps slope
    ``-c``.  Over the whole ladder the slow ``|w|^{2 nu}`` correction of
    small orders would mask the distinction.
    """
    out = []
    for ang in angles:
        t, w = _ray(ang, *r_range, n)
        g = np.abs(macdonald_k(nu, w)) * t**nu
        tail = t <= 10 * t[0]
        slope, _ = _loglog_fit(t[tail], g[tail])
        out.append(BoundCheck(nu, float(ang), slope, float(g.max() / g[0]), slope >= -tol))
    return out
