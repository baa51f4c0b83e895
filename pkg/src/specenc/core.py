"""Shared domain types: spectral points, grids, dyadic cubes and potentials.

All square roots of the spectral parameter use the principal branch,
``arg`` in ``(-pi, pi]``.  Two roots are carried around:

* ``s = sqrt(-lam)``, the decay rate of the free resolvent kernel
  (``Re s > 0`` for every admitted ``lam``);
* ``w_dir = sqrt(lam)``, the direction used by the Bessel-kernel formula
  for fractional powers of the resolvent.
"""

from __future__ import annotations

import cmath
import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = [
    "SpectralPoint",
    "sqrt_branch",
    "Grid",
    "DyadicCube",
    "PotentialSpec",
    "sample_potential",
    "load_potential",
    "dump_potential",
]


def _clean(z: complex) -> complex:
    # strip negative zeros so that principal roots do not flip across the cut
    z = complex(z)
    return complex(z.real + 0.0, z.imag + 0.0)


@dataclass(frozen=True)
class SpectralPoint:
    lam: complex
    s: complex
    w_dir: complex

    @property
    def is_real(self) -> bool:
        return self.lam.imag == 0.0


def sqrt_branch(lam: complex) -> SpectralPoint:
    """Resolve the branch roots of a spectral parameter off ``[0, inf)``."""
    lam = _clean(lam)
    if lam.imag == 0.0 and lam.real >= 0.0:
        raise ValueError(f"lambda={lam} lies on the excluded half-axis [0, inf)")
    s = cmath.sqrt(_clean(-lam))
    if s.real == 0.0:
        # Im lam so small that the decay rate underflows: on the cut to working precision
        raise ValueError(f"lambda={lam} lies on [0, inf) to double precision")
    w_dir = cmath.sqrt(lam)
    return SpectralPoint(lam=lam, s=s, w_dir=w_dir)


@dataclass(frozen=True)
class Grid:
    """Uniform cell-centred grid on an axis-aligned box.

    Nodes are stored in C order (last axis fastest); ``weights`` are the
    uniform cell volumes.
    """

    lo: tuple[float, ...]
    hi: tuple[float, ...]
    shape: tuple[int, ...]

    def __post_init__(self):
        if not (len(self.lo) == len(self.hi) == len(self.shape)):
            raise ValueError("lo, hi and shape must have the same length")
        if any(h <= l for l, h in zip(self.lo, self.hi)):
            raise ValueError("degenerate grid box")
        if any(n < 1 for n in self.shape):
            raise ValueError("pointsPerAxis must be positive")
        object.__setattr__(self, "lo", tuple(float(v) for v in self.lo))
        object.__setattr__(self, "hi", tuple(float(v) for v in self.hi))
        object.__setattr__(self, "shape", tuple(int(n) for n in self.shape))

    @classmethod
    def cubic(cls, lo: Sequence[float], h: float, shape: Sequence[int]) -> "Grid":
        lo = tuple(float(v) for v in lo)
        return cls(lo, tuple(l + h * n for l, n in zip(lo, shape)), tuple(shape))

    @property
    def d(self) -> int:
        return len(self.shape)

    @property
    def spacing(self) -> np.ndarray:
        return (np.array(self.hi) - np.array(self.lo)) / np.array(self.shape)

    @property
    def h(self) -> float:
        """Common cell side; raises for non-cubic cells."""
        sp = self.spacing
        if not np.allclose(sp, sp[0], rtol=1e-12, atol=0.0):
            raise ValueError(f"grid cells are not cubic: spacing {sp}")
        return float(sp[0])

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def volume(self) -> float:
        return float(np.prod(np.array(self.hi) - np.array(self.lo)))

    def axes(self) -> list[np.ndarray]:
        sp = self.spacing
        return [self.lo[i] + (np.arange(n) + 0.5) * sp[i] for i, n in enumerate(self.shape)]

    @property
    def nodes(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    @property
    def weights(self) -> np.ndarray:
        return np.full(self.size, self.cell_volume)

    def scaled(self, factor: float) -> "Grid":
        """The grid of ``x -> x * factor``."""
        return Grid(
            tuple(v * factor for v in self.lo), tuple(v * factor for v in self.hi), self.shape
        )

    def contains_box(self, lo, hi, tol: float = 1e-12) -> bool:
        return all(
            gl <= l + tol and h <= gh + tol for gl, gh, l, h in zip(self.lo, self.hi, lo, hi)
        )

    def to_json(self) -> dict:
        return {"lo": list(self.lo), "hi": list(self.hi), "n": list(self.shape)}

    @classmethod
    def from_json(cls, obj: dict) -> "Grid":
        return cls(tuple(obj["lo"]), tuple(obj["hi"]), tuple(obj["n"]))


@dataclass(frozen=True)
class DyadicCube:
    """The cube ``2**-k * ([0,1)^d + m)``."""

    k: int
    m: tuple[int, ...]

    @property
    def side(self) -> float:
        return math.ldexp(1.0, -self.k)

    @property
    def lo(self) -> np.ndarray:
        return np.array(self.m, dtype=float) * self.side

    @property
    def hi(self) -> np.ndarray:
        return self.lo + self.side

    def parent(self) -> "DyadicCube":
        return DyadicCube(self.k - 1, tuple(c // 2 for c in self.m))

    def children(self) -> list["DyadicCube"]:
        return [
            DyadicCube(self.k + 1, tuple(2 * c + b for c, b in zip(self.m, bits)))
            for bits in itertools.product((0, 1), repeat=len(self.m))
        ]

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(self.lo <= x) and np.all(x < self.hi))

    def contains_cube(self, other: "DyadicCube") -> bool:
        if other.k < self.k:
            return False
        shift = other.k - self.k
        return tuple(c >> shift for c in other.m) == tuple(self.m)

    @classmethod
    def covering(cls, k: int, lo, hi) -> list["DyadicCube"]:
        """Generation-``k`` cubes meeting the open box ``(lo, hi)``."""
        side = math.ldexp(1.0, -k)
        ranges = [
            range(math.floor(l / side), math.ceil(h / side)) for l, h in zip(lo, hi)
        ]
        return [cls(k, m) for m in itertools.product(*ranges)]


_VARIANTS = ("squareWell", "gaussian", "inverseSquare", "sampled")


@dataclass(frozen=True)
class PotentialSpec:
    """A potential on R^d given in closed form or as samples on a grid.

    ``squareWell`` is the indicator of the axis-aligned cube
    ``|x_i - center_i| < halfWidth`` times ``depth``; ``gaussian`` is
    ``amplitude * exp(-|x - center|^2 / width^2)``; ``inverseSquare`` is
    ``strength / |x|^exponent`` on ``innerCutoff <= |x| <= outerCutoff``.
    """

    d: int
    variant: str
    params: dict = field(default_factory=dict)
    box_lo: tuple[float, ...] | None = None
    box_hi: tuple[float, ...] | None = None
    grid: Grid | None = None
    samples: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise ValueError(f"dimension must be 1, 2 or 3, got {self.d}")
        if self.variant not in _VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.variant == "sampled":
            if self.grid is None or self.samples is None:
                raise ValueError("sampled potential needs a grid and samples")
            samples = np.asarray(self.samples, dtype=complex).ravel()
            if samples.size != self.grid.size:
                raise ValueError(
                    f"sample count {samples.size} != grid point count {self.grid.size}"
                )
            object.__setattr__(self, "samples", samples)
        if self.variant == "inverseSquare":
            p = self.params
            if not 0 < p["exponent"] <= 2:
                raise ValueError("inverseSquare exponent must lie in (0, 2]")
            if not p["outerCutoff"] > p["innerCutoff"] >= 0:
                raise ValueError("inverseSquare needs outerCutoff > innerCutoff >= 0")
        if self.box_lo is None or self.box_hi is None:
            lo, hi = self._default_box()
            object.__setattr__(self, "box_lo", lo)
            object.__setattr__(self, "box_hi", hi)
        object.__setattr__(self, "box_lo", tuple(float(v) for v in self.box_lo))
        object.__setattr__(self, "box_hi", tuple(float(v) for v in self.box_hi))
        if len(self.box_lo) != self.d or any(
            h <= l for l, h in zip(self.box_lo, self.box_hi)
        ):
            raise ValueError("support box must be non-degenerate and match d")

    # constructors -----------------------------------------------------------

    @classmethod
    def square_well(cls, d, depth, half_width, center=None, **kw):
        center = tuple(center) if center is not None else (0.0,) * d
        return cls(d, "squareWell", {"depth": complex(depth), "halfWidth": float(half_width),
                                     "center": tuple(float(c) for c in center)}, **kw)

    @classmethod
    def gaussian(cls, d, amplitude, width, center=None, **kw):
        center = tuple(center) if center is not None else (0.0,) * d
        return cls(d, "gaussian", {"amplitude": complex(amplitude), "width": float(width),
                                   "center": tuple(float(c) for c in center)}, **kw)

    @classmethod
    def inverse_square(cls, d, strength, exponent=2.0, inner=0.0, outer=1.0, **kw):
        return cls(d, "inverseSquare", {"strength": float(strength), "exponent": float(exponent),
                                        "innerCutoff": float(inner), "outerCutoff": float(outer)},
                   **kw)

    @classmethod
    def sampled(cls, grid: Grid, samples) -> "PotentialSpec":
        return cls(grid.d, "sampled", {}, grid.lo, grid.hi, grid=grid,
                   samples=np.asarray(samples, dtype=complex))

    def _default_box(self):
        p = self.params
        if self.variant == "squareWell":
            c = np.array(p["center"])
            return tuple(c - p["halfWidth"]), tuple(c + p["halfWidth"])
        if self.variant == "gaussian":
            c = np.array(p["center"])
            # exp(-36) is below double-precision resolution of the peak
            return tuple(c - 6 * p["width"]), tuple(c + 6 * p["width"])
        if self.variant == "inverseSquare":
            R = p["outerCutoff"]
            return (-R,) * self.d, (R,) * self.d
        return self.grid.lo, self.grid.hi

    # transforms -------------------------------------------------------------

    def dilate(self, t: float) -> "PotentialSpec":
        """Return the potential ``x -> V(t x)``."""
        lo = tuple(v / t for v in self.box_lo)
        hi = tuple(v / t for v in self.box_hi)
        p = dict(self.params)
        if self.variant == "squareWell":
            p["halfWidth"] /= t
            p["center"] = tuple(c / t for c in p["center"])
        elif self.variant == "gaussian":
            p["width"] /= t
            p["center"] = tuple(c / t for c in p["center"])
        elif self.variant == "inverseSquare":
            p["strength"] *= t ** (-p["exponent"])
            p["innerCutoff"] /= t
            p["outerCutoff"] /= t
        else:
            return PotentialSpec.sampled(self.grid.scaled(1.0 / t), self.samples)
        return PotentialSpec(self.d, self.variant, p, lo, hi)

    def scale(self, c: complex) -> "PotentialSpec":
        """Return ``c * V``."""
        p = dict(self.params)
        if self.variant == "squareWell":
            p["depth"] *= c
        elif self.variant == "gaussian":
            p["amplitude"] *= c
        elif self.variant == "inverseSquare":
            if c.imag != 0 or c.real < 0:
                raise ValueError("inverseSquare strength must stay positive")
            p["strength"] *= c.real
        else:
            return PotentialSpec.sampled(self.grid, c * self.samples)
        return PotentialSpec(self.d, self.variant, p, self.box_lo, self.box_hi)

    def with_box(self, lo, hi) -> "PotentialSpec":
        return PotentialSpec(self.d, self.variant, self.params, tuple(lo), tuple(hi),
                             self.grid, self.samples)

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        """Closed-form evaluation at points ``x`` of shape ``(n, d)``."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.d:
            raise ValueError(f"points have dimension {x.shape[1]}, potential has {self.d}")
        p = self.params
        if self.variant == "squareWell":
            inside = np.all(np.abs(x - np.array(p["center"])) < p["halfWidth"], axis=1)
            return np.where(inside, p["depth"], 0.0).astype(complex)
        if self.variant == "gaussian":
            r2 = np.sum((x - np.array(p["center"])) ** 2, axis=1)
            return p["amplitude"] * np.exp(-r2 / p["width"] ** 2)
        if self.variant == "inverseSquare":
            r = np.linalg.norm(x, axis=1)
            keep = (r >= p["innerCutoff"]) & (r <= p["outerCutoff"]) & (r > 0)
            out = np.zeros(len(x), dtype=complex)
            out[keep] = p["strength"] / r[keep] ** p["exponent"]
            return out
        raise ValueError("sampled potentials have no closed form; use sample_potential")

    # serialization ----------------------------------------------------------

    def to_json(self, data_path: str | None = None) -> dict:
        obj: dict = {"d": self.d, "variant": self.variant}
        p = self.params
        if self.variant == "squareWell":
            obj.update(depth=[p["depth"].real, p["depth"].imag], halfWidth=p["halfWidth"],
                       center=list(p["center"]))
        elif self.variant == "gaussian":
            obj.update(amplitude=[p["amplitude"].real, p["amplitude"].imag],
                       width=p["width"], center=list(p["center"]))
        elif self.variant == "inverseSquare":
            obj.update(strength=p["strength"], exponent=p["exponent"],
                       innerCutoff=p["innerCutoff"], outerCutoff=p["outerCutoff"])
        else:
            if data_path is None:
                raise ValueError("sampled potentials need a data file path")
            obj.update(grid=self.grid.to_json(), data=str(data_path))
        obj["box"] = {"lo": list(self.box_lo), "hi": list(self.box_hi)}
        return obj

    @classmethod
    def from_json(cls, obj: dict, base_dir: str | Path = ".") -> "PotentialSpec":
        d = int(obj["d"])
        box = obj.get("box")
        kw = {}
        if box is not None:
            kw = {"box_lo": tuple(box["lo"]), "box_hi": tuple(box["hi"])}
        variant = obj["variant"]
        if variant == "squareWell":
            return cls.square_well(d, complex(*obj["depth"]), obj["halfWidth"],
                                   obj.get("center"), **kw)
        if variant == "gaussian":
            return cls.gaussian(d, complex(*obj["amplitude"]), obj["width"],
                                obj.get("center"), **kw)
        if variant == "inverseSquare":
            return cls.inverse_square(d, obj["strength"], obj.get("exponent", 2.0),
                                      obj.get("innerCutoff", 0.0), obj["outerCutoff"], **kw)
        if variant == "sampled":
            grid = Grid.from_json(obj["grid"])
            path = Path(base_dir) / obj["data"]
            raw = np.fromfile(path, dtype="<f8")
            if raw.size != 2 * grid.size:
                raise ValueError(f"{path}: expected {2 * grid.size} floats, found {raw.size}")
            return cls.sampled(grid, raw[0::2] + 1j * raw[1::2])
        raise ValueError(f"unknown variant {variant!r}")


def sample_potential(spec: PotentialSpec, grid: Grid) -> np.ndarray:
    """Values of ``spec`` at the nodes of ``grid`` (complex, C order)."""
    if spec.d != grid.d:
        raise ValueError(f"dimension mismatch: potential d={spec.d}, grid d={grid.d}")
    if spec.variant == "sampled":
        if spec.grid != grid:
            raise ValueError("sampled potential must be evaluated on its own grid")
        return spec.samples.copy()
    return spec.evaluate(grid.nodes)


def load_potential(path: str | Path) -> PotentialSpec:
    path = Path(path)
    with open(path) as fh:
        obj = json.load(fh)
    return PotentialSpec.from_json(obj, base_dir=path.parent)


def dump_potential(spec: PotentialSpec, path: str | Path) -> None:
    """Write ``spec`` as JSON; sampled data goes to ``<stem>.bin`` next to it."""
    path = Path(path)
    data_name = None
    if spec.variant == "sampled":
        data_name = path.with_suffix(".bin").name
        inter = np.empty(2 * spec.samples.size, dtype="<f8")
        inter[0::2] = spec.samples.real
        inter[1::2] = spec.samples.imag
        inter.tofile(path.parent / data_name)
    with open(path, "w") as fh:
        json.dump(spec.to_json(data_name), fh, indent=2)
