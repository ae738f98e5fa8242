"""Self-consistency checks of the oracle and a coarse theta grid search."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import MfsTuneError
from ..geometry import HeadModel, PointSet, ThetaBounds, ThetaVector, spiral_points
from ..mfs import ForwardModel
from ..oracle import DEFAULT_TOL, Dipole, homogeneous_reference, layered_potential
from ..sampling import RngStream

__all__ = ["CheckResult", "oracle_checks", "grid_search", "random_dipoles"]


@dataclass(frozen=True)
class CheckResult:
    name: str
    value: float
    threshold: float

    @property
    def passed(self) -> bool:
        return bool(self.value <= self.threshold)

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"{mark}  {self.name:<24s} {self.value:.3e} (limit {self.threshold:.1e})"


def random_dipoles(count: int, r_max: float, rng: RngStream, magnitude: float = 1.0) -> list[Dipole]:
    """Dipoles uniform in the ball of radius ``r_max`` with isotropic moments."""
    gen = rng.generator
    out = []
    for _ in range(count):
        while True:
            x = gen.uniform(-r_max, r_max, 3)
            if np.linalg.norm(x) <= r_max:
                break
        q = gen.standard_normal(3)
        out.append(Dipole(x, magnitude * q / np.linalg.norm(q)))
    return out


def _rel(a, b) -> float:
    scale = np.max(np.abs(b))
    return float(np.max(np.abs(a - b)) / scale) if scale > 0 else float(np.max(np.abs(a)))


def oracle_checks(head: HeadModel, tol: float = DEFAULT_TOL, stability_tol: float = 1e-10, n_points: int = 200,
                  n_dipoles: int = 20, eccentricity: float = 0.8, seed: int = 0) -> list[CheckResult]:
    """Homogeneous reduction, linearity, axisymmetry and truncation stability."""
    rng = RngStream(seed, (99,))
    scalp = spiral_points(n_points, head.r_scalp)
    dipoles = random_dipoles(n_dipoles, eccentricity * head.r_brain, rng)
    results = []

    uniform = head.with_uniform_conductivity(head.sigma_brain)
    worst = max(_rel(layered_potential(uniform, d, scalp, tol).values,
                     homogeneous_reference(head.sigma_brain, head.r_scalp, d, scalp).values) for d in dipoles)
    results.append(CheckResult("homogeneous reduction", worst, 1e-8))

    d1, d2 = dipoles[0], dipoles[1]
    pos = d1.position
    combo = Dipole(pos, 2.0 * d1.moment - 0.5 * d2.moment)
    lhs = layered_potential(head, combo, scalp, tol).values
    rhs = (2.0 * layered_potential(head, Dipole(pos, d1.moment), scalp, tol).values
           - 0.5 * layered_potential(head, Dipole(pos, d2.moment), scalp, tol).values)
    results.append(CheckResult("linearity", _rel(lhs, rhs), 10 * max(tol, 1e-13)))

    polar = 0.7
    az = np.linspace(0, 2 * np.pi, 16, endpoint=False)
    ring = head.r_scalp * np.column_stack([np.sin(polar) * np.cos(az), np.sin(polar) * np.sin(az),
                                           np.full(az.shape, np.cos(polar))])
    axial = Dipole([0.0, 0.0, 0.6 * head.r_brain], [0.0, 0.0, 1.0])
    ring_vals = layered_potential(head, axial, PointSet(ring, head.r_scalp), tol).values
    results.append(CheckResult("axisymmetry", float(np.ptp(ring_vals) / np.max(np.abs(ring_vals))),
                               10 * max(tol, 1e-13)))

    worst = 0.0
    for d in dipoles:
        coarse = layered_potential(head, d, scalp, tol)
        fine = layered_potential(head, d, scalp, tol, degree=2 * (coarse.degree or 1))
        worst = max(worst, _rel(coarse.values, fine.values))
    results.append(CheckResult("truncation stability", worst, stability_tol))

    dense = spiral_points(4000, head.r_scalp)
    mean_ratio = max(abs(float(np.mean(v))) / float(np.max(np.abs(v)))
                     for v in (layered_potential(head, d, dense, tol).values for d in dipoles[:5]))
    results.append(CheckResult("zero scalp mean", mean_ratio, 1e-3))
    return results


@dataclass
class GridResult:
    theta: ThetaVector
    median_q: float
    table: list


def grid_search(model: ForwardModel, dipoles: Sequence[Dipole], bounds: ThetaBounds = ThetaBounds(),
                active: Sequence[int] = (0, 2, 4), base: ThetaVector | None = None, points: int = 11) -> GridResult:
    """Median Q over ``dipoles`` on a regular grid of the ``active`` factors.

    Inactive factors stay at ``base`` (box centre by default). Thetas whose
    system is degenerate or rank deficient are skipped.
    """
    base_arr = (base.as_array() if base is not None else 0.5 * (bounds.lo + bounds.hi)).copy()
    axes = [np.linspace(bounds.lo[k], bounds.hi[k], points) for k in active]
    table = []
    best = None
    for values in itertools.product(*axes):
        arr = base_arr.copy()
        arr[list(active)] = values
        theta = ThetaVector.from_array(arr)
        try:
            q = float(np.median([model(theta, d) for d in dipoles]))
        except MfsTuneError:
            continue
        table.append((theta, q))
        if best is None or q > best[1]:
            best = (theta, q)
    if best is None:
        raise MfsTuneError("every grid point failed")
    return GridResult(best[0], best[1], table)
