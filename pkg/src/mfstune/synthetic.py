"""Cheap stand-in objectives with the same ``(theta, dipole) -> Q`` signature."""

from __future__ import annotations

import math

import numpy as np

from .errors import RankFailure
from .geometry import ThetaBounds, ThetaVector
from .oracle import Dipole

__all__ = ["PeakObjective", "DecreasingAdversary", "IncreasingSequence"]


class PeakObjective:
    """Smooth single-peak mean response plus dipole-driven noise.

    The noise term is ``noise_sd * sqrt(3) * q_z / |q|``: for isotropic
    moments ``q_z / |q|`` is uniform on [-1, 1], so the noise has standard
    deviation ``noise_sd`` and is a deterministic function of the dipole.
    """

    def __init__(self, bounds: ThetaBounds = ThetaBounds(), peak=(0.3, 0.6, 0.4, 0.7, 0.55), width: float = 0.3,
                 height: float = 4.0, floor: float = 0.0, noise_sd: float = 0.5, fail_radius: float = 0.0,
                 fail_center=None):
        self.bounds = bounds
        self.peak = np.asarray(peak, dtype=float)
        self.width = width
        self.height = height
        self.floor = floor
        self.noise_sd = noise_sd
        self.fail_radius = fail_radius
        self.fail_center = None if fail_center is None else np.asarray(fail_center, dtype=float)

    def mean(self, theta: ThetaVector) -> float:
        u = self.bounds.normalize(theta)
        return self.floor + self.height * math.exp(-0.5 * float(np.sum((u - self.peak) ** 2)) / self.width ** 2)

    def check(self, theta: ThetaVector) -> None:
        if self.fail_radius > 0:
            u = self.bounds.normalize(theta)
            if np.linalg.norm(u - self.fail_center) < self.fail_radius:
                raise RankFailure(0, 1)

    def __call__(self, theta: ThetaVector, dipole: Dipole) -> float:
        self.check(theta)
        q = dipole.moment
        noise = self.noise_sd * math.sqrt(3.0) * q[2] / np.linalg.norm(q)
        return self.mean(theta) + noise


class DecreasingAdversary:
    """Every new theta scores strictly below all earlier ones."""

    def __init__(self):
        self._seen: dict = {}

    def __call__(self, theta: ThetaVector, dipole: Dipole) -> float:
        return -float(self._seen.setdefault(theta, len(self._seen)))


class IncreasingSequence:
    """Every new theta scores strictly above all earlier ones."""

    def __init__(self):
        self._seen: dict = {}

    def __call__(self, theta: ThetaVector, dipole: Dipole) -> float:
        return float(self._seen.setdefault(theta, len(self._seen)))
