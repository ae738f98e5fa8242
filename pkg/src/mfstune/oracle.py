"""Analytic scalp potentials for a current dipole in concentric spheres.

The layered solution expands the dipole field in Legendre polynomials. For
harmonic degree ``n`` the radial dependence inside each shell is
``A r^n + B r^-(n+1)``; continuity of potential and of normal current at the
two interfaces plus an insulated scalp fix the shell coefficients. Radii are
scaled by the scalp radius so every power stays bounded for the degrees used.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, DomainError, InvalidArgument
from .geometry import HeadModel, PointSet

__all__ = [
    "Dipole",
    "ScalpField",
    "layered_potential",
    "homogeneous_reference",
    "transfer_gains",
    "DEFAULT_TOL",
    "MAX_DEGREE",
]

DEFAULT_TOL = 1e-10
MAX_DEGREE = 400


@dataclass(frozen=True)
class Dipole:
    position: np.ndarray
    moment: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float).reshape(3))
        object.__setattr__(self, "moment", np.asarray(self.moment, dtype=float).reshape(3))

    @property
    def eccentricity_radius(self) -> float:
        return float(np.linalg.norm(self.position))


@dataclass(frozen=True)
class ScalpField:
    values: np.ndarray = field(repr=False)
    degree: int | None = None  # truncation degree of the series, when one was used

    def __len__(self):
        return len(self.values)


def transfer_gains(head: HeadModel, degrees: np.ndarray) -> np.ndarray:
    """Scalp gain ``g_n`` of each harmonic degree relative to a free-space source.

    Starts from the insulated-scalp solution ``A = (n+1)/n, B = 1`` at the
    scalp and carries it inward across both interfaces; the brain's singular
    coefficient then normalizes the degree to the unit source. Only
    nonnegative powers of the radius ratios appear, so nothing overflows.
    For equal conductivities every gain equals ``(2n+1)/n``.
    """
    n = np.asarray(degrees, dtype=float)
    rho2 = head.r_skull / head.r_scalp
    rho3 = head.r_brain / head.r_scalp
    s1, s2, s3 = head.sigmas
    a = (n + 1.0) / n
    b = np.ones_like(n)
    for rho, s in ((rho2, s1 / s2), (rho3, s2 / s3)):
        # inner coefficients from outer ones at scaled radius rho, s = sigma_out / sigma_in
        p = rho ** (2 * n + 1)
        a_in = (a * ((n + 1) + s * n) + (n + 1) * (1 - s) * b / p) / (2 * n + 1)
        b_in = (n * (1 - s) * a * p + (n + s * (n + 1)) * b) / (2 * n + 1)
        a, b = a_in, b_in
    return (2 * n + 1) / (n * b)


def _legendre_terms(cosg: np.ndarray, nmax: int):
    """Yield ``(n, P_n, P_n')`` for n = 1..nmax on the array ``cosg``."""
    p_prev, p = np.ones_like(cosg), cosg.copy()
    dp_prev, dp = np.zeros_like(cosg), np.ones_like(cosg)
    for n in range(1, nmax + 1):
        yield n, p, dp
        p_next = ((2 * n + 1) * cosg * p - n * p_prev) / (n + 1)
        dp_next = dp_prev + (2 * n + 1) * p
        p_prev, p = p, p_next
        dp_prev, dp = dp, dp_next


def _check_inside(dipole: Dipole, radius: float):
    if not np.linalg.norm(dipole.position) < radius:
        raise DomainError(
            f"dipole at |r0| = {np.linalg.norm(dipole.position):.6g} m is not inside radius {radius:.6g} m"
        )


def _series(gains, rho0, r0_hat, q, unit, nmax):
    cosg = np.clip(unit @ r0_hat, -1.0, 1.0)
    q_r0 = float(q @ r0_hat)
    tangential = unit @ q - cosg * q_r0
    total = np.zeros(len(unit))
    for n, p, dp in _legendre_terms(cosg, nmax):
        weight = gains[n - 1] * rho0 ** (n - 1)
        if weight == 0.0:
            break
        total += weight * (n * p * q_r0 + dp * tangential)
    return total


def layered_potential(head: HeadModel, dipole: Dipole, eval: PointSet, tol: float = DEFAULT_TOL,
                      max_degree: int = MAX_DEGREE, degree: int | None = None) -> ScalpField:
    """Scalp potential (V) of a dipole in the three-shell model.

    The truncation degree is the smallest one whose tail bound, relative to
    the largest potential magnitude, drops below ``tol``. Pass ``degree`` to
    force a fixed truncation instead.
    """
    _check_inside(dipole, head.r_brain)
    if not tol > 0:
        raise InvalidArgument("tol must be positive")
    pts = np.asarray(eval.points, dtype=float)
    radius = np.linalg.norm(pts, axis=1)
    if np.any(np.abs(radius - head.r_scalp) > 1e-9 * head.r_scalp):
        raise DomainError("evaluation points must lie on the scalp sphere")
    unit = pts / radius[:, None]
    q = dipole.moment
    qnorm = float(np.linalg.norm(q))
    prefactor = 1.0 / (4 * np.pi * head.sigma_brain * head.r_scalp ** 2)
    if qnorm == 0.0:
        return ScalpField(np.zeros(len(pts)))

    r0 = float(np.linalg.norm(dipole.position))
    r0_hat = dipole.position / r0 if r0 > 0 else np.array([0.0, 0.0, 1.0])
    rho0 = r0 / head.r_scalp

    cap = max(max_degree, degree or 0)
    gains = transfer_gains(head, np.arange(1, cap + 2))
    if degree is not None:
        nmax = int(degree)
    elif rho0 == 0.0:
        nmax = 1
    else:
        n = np.arange(1, cap + 2, dtype=float)
        bound = qnorm * gains * rho0 ** (n - 1) * (n + n * (n + 1) / 2)
        # bound[k] covers degree k+1; the last entry only seeds the geometric remainder
        ratio = rho0 * (1.0 + 1.0 / cap) ** 3
        remainder = bound[-1] / (1.0 - ratio) if ratio < 1 else np.inf
        tail = np.append(np.cumsum(bound[:-1][::-1])[::-1][1:], 0.0) + remainder

        def first_degree(threshold):
            ok = np.nonzero(tail <= threshold)[0]
            return int(ok[0]) + 1 if ok.size else None

        nmax = first_degree(tol * bound[0])
        if nmax is not None:
            scale = np.max(np.abs(_series(gains, rho0, r0_hat, q, unit, nmax)))
            nmax = first_degree(tol * scale) if scale > 0 else nmax
        if nmax is None or nmax > max_degree:
            raise ConvergenceError(
                f"series needs more than {max_degree} degrees at |r0|/r_brain = {r0 / head.r_brain:.4f}"
            )
    return ScalpField(prefactor * _series(gains, rho0, r0_hat, q, unit, nmax), nmax)


def homogeneous_reference(sigma: float, R: float, dipole: Dipole, eval: PointSet) -> ScalpField:
    """Closed-form surface potential of a dipole in an insulated homogeneous ball.

    Obtained from the Neumann function of the ball,
    ``2/d + log(2R^2 / (R^2 - r.r0 + R d)) / R`` on the surface, by
    differentiating with respect to the source position.
    """
    _check_inside(dipole, R)
    pts = np.asarray(eval.points, dtype=float)
    d_vec = pts - dipole.position
    d = np.linalg.norm(d_vec, axis=1)
    big_f = R ** 2 - pts @ dipole.position + R * d
    grad = 2 * d_vec / d[:, None] ** 3 + (pts / R + d_vec / d[:, None]) / big_f[:, None]
    return ScalpField(grad @ dipole.moment / (4 * np.pi * sigma))
