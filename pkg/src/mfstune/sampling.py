"""Random dipoles over brain regions, driven by reproducible RNG streams."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import InvalidArgument, RegionInfeasible
from .geometry import DEFAULT_HEAD, HeadModel
from .oracle import Dipole

__all__ = ["RngStream", "DipoleRegion", "sample_dipole", "region_catalog", "EPS_DEPTH"]

EPS_DEPTH = 0.005
MAX_ATTEMPTS = 100_000
MIN_ACCEPTANCE = 1e-4


@dataclass(frozen=True)
class RngStream:
    """A numpy generator keyed by ``(seed, stream)``.

    ``spawn`` derives independent child streams, e.g. one per ledger entry,
    so any part of a run can be regenerated without replaying the rest.
    """

    seed: int
    stream: tuple[int, ...] = (0,)
    generator: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        stream = (self.stream,) if isinstance(self.stream, int) else tuple(int(s) for s in self.stream)
        object.__setattr__(self, "stream", stream)
        seq = np.random.SeedSequence(int(self.seed) % 2 ** 64, spawn_key=stream)
        object.__setattr__(self, "generator", np.random.Generator(np.random.PCG64(seq)))

    def spawn(self, *key: int) -> "RngStream":
        return RngStream(self.seed, self.stream + tuple(int(k) for k in key))


@dataclass(frozen=True)
class DipoleRegion:
    """Part of the brain where dipoles are drawn.

    ``ball`` uses ``center`` and ``radius``; ``shell-sector`` uses the radial
    band ``[r_min, r_max]`` and the polar/azimuth intervals (radians);
    ``whole-brain`` is every admissible position. All kinds are clipped to
    ``|x| <= r_brain - depth_margin``.
    """

    kind: str = "whole-brain"
    center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    radius: float = 0.0
    r_min: float = 0.0
    r_max: float = 0.0
    polar: tuple[float, float] = (0.0, np.pi)
    azimuth: tuple[float, float] = (-np.pi, np.pi)
    depth_margin: float = EPS_DEPTH
    name: str = ""
    index: int = 0

    def __post_init__(self):
        if self.kind not in ("ball", "shell-sector", "whole-brain"):
            raise InvalidArgument(f"unknown region kind {self.kind!r}")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "polar", tuple(float(c) for c in self.polar))
        object.__setattr__(self, "azimuth", tuple(float(c) for c in self.azimuth))
        if self.radius < 0 or self.r_min < 0 or self.depth_margin < 0:
            raise InvalidArgument("region lengths must be nonnegative")
        if self.kind == "shell-sector" and not (self.r_max > self.r_min):
            raise InvalidArgument("shell-sector needs r_max > r_min")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "DipoleRegion":
        return cls(**data)

    def admissible_radius(self, head: HeadModel) -> float:
        return head.r_brain - self.depth_margin

    def bounding_box(self, head: HeadModel) -> tuple[np.ndarray, np.ndarray]:
        limit = self.admissible_radius(head)
        if self.kind == "ball":
            c = np.asarray(self.center)
            return c - self.radius, c + self.radius
        reach = min(self.r_max, limit) if self.kind == "shell-sector" else limit
        return np.full(3, -reach), np.full(3, reach)

    def contains(self, x: np.ndarray, head: HeadModel) -> bool:
        r = float(np.linalg.norm(x))
        if r > self.admissible_radius(head):
            return False
        if self.kind == "ball":
            return float(np.linalg.norm(x - np.asarray(self.center))) <= self.radius
        if self.kind == "shell-sector":
            if not (self.r_min <= r <= self.r_max):
                return False
            polar = np.arccos(np.clip(x[2] / r, -1.0, 1.0)) if r > 0 else 0.0
            az = np.arctan2(x[1], x[0])
            return (self.polar[0] <= polar <= self.polar[1]) and (self.azimuth[0] <= az <= self.azimuth[1])
        return True


def _orientation(gen: np.random.Generator) -> np.ndarray:
    while True:
        v = gen.standard_normal(3)
        n = np.linalg.norm(v)
        if n > 1e-12:
            return v / n


def sample_dipole(region: DipoleRegion, head: HeadModel = DEFAULT_HEAD, rng: RngStream | np.random.Generator = None,
                  magnitude: float = 1.0, max_attempts: int = MAX_ATTEMPTS) -> Dipole:
    """Uniform position in the region with an isotropic unit-magnitude moment."""
    gen = rng.generator if isinstance(rng, RngStream) else rng
    if gen is None:
        raise InvalidArgument("sample_dipole needs an RngStream")
    lo, hi = region.bounding_box(head)
    for attempt in range(1, max_attempts + 1):
        x = lo + (hi - lo) * gen.random(3)
        if region.contains(x, head):
            return Dipole(x, magnitude * _orientation(gen))
    raise RegionInfeasible(
        f"region {region.name or region.kind!r}: acceptance rate below {1 / max_attempts:g} "
        f"after {max_attempts} attempts"
    )


def region_catalog(head: HeadModel = DEFAULT_HEAD, depth_margin: float = EPS_DEPTH) -> list[DipoleRegion]:
    """Six regions ordered from easy (deep, central) to hard (shallow, small).

    Eccentricity grows and volume shrinks with the index.
    """
    rb = head.r_brain
    shallow_top = 0.9 * (1 - depth_margin / rb) * rb
    return [
        DipoleRegion("ball", radius=0.3 * rb, depth_margin=depth_margin, name="deep-central", index=1),
        DipoleRegion("ball", center=(0.0, 0.0, 0.25 * rb), radius=0.2 * rb, depth_margin=depth_margin,
                     name="deep-superior", index=2),
        DipoleRegion("shell-sector", r_min=0.3 * rb, r_max=0.5 * rb, depth_margin=depth_margin,
                     name="mid-shell", index=3),
        DipoleRegion("shell-sector", r_min=0.5 * rb, r_max=0.7 * rb, polar=(0.0, np.pi / 2),
                     depth_margin=depth_margin, name="upper-hemisphere", index=4),
        DipoleRegion("shell-sector", r_min=0.7 * rb, r_max=0.8 * rb, polar=(np.pi / 3, 2 * np.pi / 3),
                     azimuth=(0.0, np.pi), depth_margin=depth_margin, name="lateral-band", index=5),
        DipoleRegion("shell-sector", r_min=0.8 * rb, r_max=shallow_top, polar=(0.0, np.pi / 4),
                     depth_margin=depth_margin, name="shallow-vertex", index=6),
    ]
