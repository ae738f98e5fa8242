"""Concentric-sphere head model, spiral point sets and fictitious boundaries."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryError, InvalidArgument

__all__ = [
    "HeadModel",
    "ThetaVector",
    "ThetaBounds",
    "PointSet",
    "DEFAULT_HEAD",
    "DEFAULT_COUNTS",
    "THETA_NAMES",
    "spiral_points",
    "fictitious_radii",
    "build_center_sets",
    "scaled_counts",
]

THETA_NAMES = ("t1i", "t1d", "t2i", "t2d", "t3i")
#: center counts for (1,i), (1,d), (2,i), (2,d), (3,i)
DEFAULT_COUNTS = (180, 90, 90, 90, 90)
EPS_GEOM = 1e-4


@dataclass(frozen=True)
class HeadModel:
    """Three concentric shells; index 1 is the scalp, 3 is the brain."""

    r_scalp: float = 0.1
    r_skull: float = 0.092
    r_brain: float = 0.087
    sigma_scalp: float = 0.33
    sigma_skull: float = 0.0125
    sigma_brain: float = 0.33

    def __post_init__(self):
        if not (self.r_scalp > self.r_skull > self.r_brain > 0):
            raise GeometryError(
                f"radii must satisfy r_scalp > r_skull > r_brain > 0, got "
                f"{self.r_scalp}, {self.r_skull}, {self.r_brain}"
            )
        if min(self.sigma_scalp, self.sigma_skull, self.sigma_brain) <= 0:
            raise GeometryError("conductivities must be positive")

    @property
    def radii(self) -> tuple[float, float, float]:
        return (self.r_scalp, self.r_skull, self.r_brain)

    @property
    def sigmas(self) -> tuple[float, float, float]:
        return (self.sigma_scalp, self.sigma_skull, self.sigma_brain)

    def with_uniform_conductivity(self, sigma: float) -> "HeadModel":
        return HeadModel(self.r_scalp, self.r_skull, self.r_brain, sigma, sigma, sigma)


DEFAULT_HEAD = HeadModel()


@dataclass(frozen=True)
class ThetaVector:
    """Inflation (``*i``) and deflation (``*d``) factors of the five fictitious spheres."""

    t1i: float
    t1d: float
    t2i: float
    t2d: float
    t3i: float

    @classmethod
    def from_array(cls, values) -> "ThetaVector":
        values = np.asarray(values, dtype=float).ravel()
        if values.size != 5:
            raise InvalidArgument(f"theta needs 5 components, got {values.size}")
        return cls(*(float(v) for v in values))

    def as_array(self) -> np.ndarray:
        return np.array([self.t1i, self.t1d, self.t2i, self.t2d, self.t3i])


@dataclass(frozen=True)
class ThetaBounds:
    """Box over the five factors, in the order of ``THETA_NAMES``."""

    lower: tuple[float, ...] = (1.05, 0.2, 1.05, 0.2, 1.05)
    upper: tuple[float, ...] = (2.5, 0.95, 2.5, 0.95, 2.5)

    def __post_init__(self):
        lo, hi = np.asarray(self.lower, float), np.asarray(self.upper, float)
        if lo.shape != (5,) or hi.shape != (5,):
            raise InvalidArgument("bounds need 5 lower and 5 upper values")
        if np.any(lo >= hi):
            raise InvalidArgument("every lower bound must be below its upper bound")
        for k in (0, 2, 4):
            if lo[k] <= 1.0:
                raise InvalidArgument(f"{THETA_NAMES[k]} is an inflation factor; bound must exceed 1")
        for k in (1, 3):
            if lo[k] <= 0.0 or hi[k] >= 1.0:
                raise InvalidArgument(f"{THETA_NAMES[k]} is a deflation factor; bounds must lie in (0, 1)")

    @property
    def lo(self) -> np.ndarray:
        return np.asarray(self.lower, dtype=float)

    @property
    def hi(self) -> np.ndarray:
        return np.asarray(self.upper, dtype=float)

    def contains(self, theta: ThetaVector) -> bool:
        x = theta.as_array()
        return bool(np.all(x >= self.lo) and np.all(x <= self.hi))

    def normalize(self, x) -> np.ndarray:
        x = x.as_array() if isinstance(x, ThetaVector) else np.asarray(x, dtype=float)
        return (x - self.lo) / (self.hi - self.lo)

    def denormalize(self, u) -> np.ndarray:
        return self.lo + np.asarray(u, dtype=float) * (self.hi - self.lo)


@dataclass(frozen=True)
class PointSet:
    points: np.ndarray = field(repr=False)
    radius: float

    @property
    def count(self) -> int:
        return len(self.points)

    @property
    def normals(self) -> np.ndarray:
        return self.points / self.radius


def spiral_points(n: int, radius: float) -> PointSet:
    """Generalized spiral set of ``n`` nearly uniform points on a sphere.

    Heights are equally spaced in ``[-1, 1]``; the azimuth advances by
    ``3.6 / sqrt(n (1 - h^2))`` between consecutive interior points and is
    zero at both poles.
    """
    if int(n) != n or n < 2:
        raise InvalidArgument(f"spiral needs at least 2 points, got {n}")
    if not radius > 0:
        raise InvalidArgument(f"radius must be positive, got {radius}")
    n = int(n)
    h = -1.0 + 2.0 * np.arange(n) / (n - 1)
    h[0], h[-1] = -1.0, 1.0
    polar = np.arccos(h)
    azimuth = np.zeros(n)
    for k in range(1, n - 1):
        azimuth[k] = (azimuth[k - 1] + 3.6 / np.sqrt(n * (1.0 - h[k] ** 2))) % (2 * np.pi)
    s = np.sin(polar)
    pts = radius * np.column_stack((s * np.cos(azimuth), s * np.sin(azimuth), h))
    return PointSet(pts, float(radius))


def _single_point(radius: float) -> PointSet:
    # k = 1 position of the spiral: the south pole
    return PointSet(np.array([[0.0, 0.0, -radius]]), float(radius))


def fictitious_radii(theta: ThetaVector, head: HeadModel = DEFAULT_HEAD, eps: float = EPS_GEOM) -> np.ndarray:
    """Radii of the fictitious spheres (1,i), (1,d), (2,i), (2,d), (3,i).

    Each sphere is the physical boundary it shadows scaled by its factor.
    Raises ``GeometryError`` if a center sphere falls inside the closure of
    its own layer or within ``eps`` of any physical sphere.
    """
    rho = np.array([
        theta.t1i * head.r_scalp,
        theta.t1d * head.r_skull,
        theta.t2i * head.r_skull,
        theta.t2d * head.r_brain,
        theta.t3i * head.r_brain,
    ])
    physical = np.array(head.radii)
    gaps = np.abs(rho[:, None] - physical[None, :])
    if np.any(gaps < eps):
        k, _ = np.unravel_index(np.argmin(gaps), gaps.shape)
        raise GeometryError(
            f"fictitious sphere {THETA_NAMES[k]} (radius {rho[k]:.6g} m) is within "
            f"{eps:g} m of a physical interface"
        )
    # inflated spheres outside the layer, deflated ones inside its inner surface
    outside = (rho[0] > head.r_scalp, rho[1] < head.r_skull, rho[2] > head.r_skull,
               rho[3] < head.r_brain, rho[4] > head.r_brain)
    if not all(outside):
        k = outside.index(False)
        raise GeometryError(f"fictitious sphere {THETA_NAMES[k]} lies inside its own layer")
    return rho


def build_center_sets(theta: ThetaVector, head: HeadModel = DEFAULT_HEAD,
                      counts=DEFAULT_COUNTS, eps: float = EPS_GEOM) -> list[PointSet]:
    counts = tuple(int(c) for c in counts)
    if len(counts) != 5 or min(counts) < 1:
        raise InvalidArgument(f"need five positive center counts, got {counts}")
    rho = fictitious_radii(theta, head, eps)
    return [spiral_points(c, r) if c >= 2 else _single_point(r) for c, r in zip(counts, rho)]


def scaled_counts(n_colloc: int, counts=DEFAULT_COUNTS, reference_colloc: int = 300) -> tuple[int, ...]:
    """Center counts scaled with the collocation density.

    Keeps the ratio of collocation rows to unknowns fixed so a coarser
    collocation set does not make the system underdetermined.
    """
    if n_colloc < 1:
        raise InvalidArgument("n_colloc must be positive")
    return tuple(max(1, round(c * n_colloc / reference_colloc)) for c in counts)
