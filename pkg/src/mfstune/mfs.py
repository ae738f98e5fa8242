"""Coupled three-domain MFS forward solver and the scalp quality metric."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import InvalidArgument, RankFailure, SingularityError, UndefinedMetric
from .geometry import DEFAULT_COUNTS, DEFAULT_HEAD, HeadModel, PointSet, ThetaVector, build_center_sets, spiral_points
from .oracle import DEFAULT_TOL, Dipole, ScalpField, layered_potential

__all__ = [
    "MfsSystem",
    "MfsSolution",
    "QualityScore",
    "MetricOptions",
    "kernel",
    "kernel_normal_derivative",
    "dipole_primary",
    "assemble",
    "solve",
    "evaluate_scalp",
    "quality_q",
    "forward_quality",
    "ForwardModel",
    "TAU_SVD",
    "Q_CAP",
]

TAU_SVD = 1e-12
Q_CAP = 40.0
# relative distance below which a point is treated as sitting on a center
_COINCIDENT = 1e-12


def _distances(p: np.ndarray, xi: np.ndarray):
    diff = p[:, None, :] - xi[None, :, :]
    dist = np.linalg.norm(diff, axis=2)
    scale = max(np.max(np.abs(p)), np.max(np.abs(xi)), 1.0e-300)
    if np.any(dist <= _COINCIDENT * scale):
        raise SingularityError("evaluation point coincides with a kernel center")
    return diff, dist


def kernel(p, xi):
    """Free-space Laplace kernel ``1/|p - xi|``; broadcasts over point arrays."""
    p2, x2 = np.atleast_2d(p).astype(float), np.atleast_2d(xi).astype(float)
    _, dist = _distances(p2, x2)
    out = 1.0 / dist
    return float(out[0, 0]) if np.ndim(p) == 1 and np.ndim(xi) == 1 else out


def kernel_normal_derivative(p, xi, n):
    """Derivative of the kernel with respect to ``p`` along the unit vector ``n``."""
    p2, x2 = np.atleast_2d(p).astype(float), np.atleast_2d(xi).astype(float)
    n2 = np.atleast_2d(n).astype(float)
    diff, dist = _distances(p2, x2)
    out = -np.einsum("ijk,ik->ij", diff, np.broadcast_to(n2, p2.shape)) / dist ** 3
    return float(out[0, 0]) if np.ndim(p) == 1 and np.ndim(xi) == 1 else out


def dipole_primary(head: HeadModel, dipole: Dipole, p):
    """Free-space dipole potential in the brain conductivity and its gradient.

    Returns ``(u, grad)``; with an ``(m, 3)`` array of points, ``u`` has
    shape ``(m,)`` and ``grad`` shape ``(m, 3)``.
    """
    pts = np.atleast_2d(np.asarray(p, dtype=float))
    d = pts - dipole.position
    r = np.linalg.norm(d, axis=1)
    if np.any(r <= _COINCIDENT * max(np.max(np.abs(pts)), 1e-300)):
        raise SingularityError("potential evaluated at the dipole position")
    q = dipole.moment
    c = 1.0 / (4 * np.pi * head.sigma_brain)
    qd = d @ q
    u = c * qd / r ** 3
    grad = c * (q[None, :] / r[:, None] ** 3 - 3 * qd[:, None] * d / r[:, None] ** 5)
    if np.ndim(p) == 1:
        return float(u[0]), grad[0]
    return u, grad


@dataclass(frozen=True)
class MetricOptions:
    log_base: str = "e"  # "e" or "10"
    reference: str = "raw"  # "raw" or "average"
    q_cap: float = Q_CAP

    def __post_init__(self):
        if self.log_base not in ("e", "10"):
            raise InvalidArgument("log_base must be 'e' or '10'")
        if self.reference not in ("raw", "average"):
            raise InvalidArgument("reference must be 'raw' or 'average'")


@dataclass(frozen=True)
class QualityScore:
    q: float
    capped: bool = False


@dataclass(eq=False)
class MfsSystem:
    """Collocation matrix of the coupled problem and its block layout.

    Row blocks, in order: scalp flux, skull/scalp potential, skull/scalp flux,
    brain/skull potential, brain/skull flux. Column blocks follow the center
    sets (1,i), (1,d), (2,i), (2,d), (3,i).
    """

    matrix: np.ndarray = field(repr=False)
    row_blocks: dict
    col_blocks: dict
    centers: list = field(repr=False)
    colloc: list = field(repr=False)
    head: HeadModel
    flux_scale: float = 1.0

    @property
    def shape(self):
        return self.matrix.shape

    @cached_property
    def svd(self):
        return np.linalg.svd(self.matrix, full_matrices=False)

    def numerical_rank(self, tau_rank: float | None = None) -> int:
        s = self.svd[1]
        if tau_rank is None:
            tau_rank = np.finfo(float).eps * max(self.matrix.shape)
        return int(np.sum(s > tau_rank * s[0])) if s[0] > 0 else 0

    def check_rank(self, tau_rank: float | None = None) -> int:
        rank = self.numerical_rank(tau_rank)
        if rank < self.matrix.shape[1]:
            raise RankFailure(rank, self.matrix.shape[1])
        return rank

    def rhs(self, dipole: Dipole) -> np.ndarray:
        """Right-hand side carrying the dipole's free-space field on the brain interface."""
        pts = self.colloc[2].points
        u, grad = dipole_primary(self.head, dipole, pts)
        dn = np.einsum("ij,ij->i", grad, self.colloc[2].normals)
        b = np.zeros(self.matrix.shape[0])
        b[self.row_blocks["brain_potential"]] = u
        b[self.row_blocks["brain_flux"]] = self.flux_scale * self.head.sigma_brain * dn
        return b


@dataclass(eq=False)
class MfsSolution:
    coefficients: np.ndarray = field(repr=False)
    system: MfsSystem = field(repr=False)
    rank: int
    singular_values: tuple[float, float]
    residual: float
    rhs_norm: float


def assemble(theta: ThetaVector, head: HeadModel = DEFAULT_HEAD, counts=DEFAULT_COUNTS, n_colloc: int = 300,
             balance: bool = True) -> MfsSystem:
    """Collocation matrix for the fictitious spheres defined by ``theta``.

    The matrix depends on geometry only; the dipole enters through
    :meth:`MfsSystem.rhs`. With ``balance`` the flux rows are multiplied by
    the scalp radius so they are on the scale of the potential rows.
    """
    if n_colloc < 1:
        raise InvalidArgument("n_colloc must be positive")
    centers = build_center_sets(theta, head, counts)
    colloc = [spiral_points(n_colloc, r) if n_colloc >= 2 else PointSet(np.array([[0.0, 0.0, -r]]), r)
              for r in head.radii]
    s1, s2, s3 = head.sigmas
    fs = head.r_scalp if balance else 1.0

    col_sizes = [c.count for c in centers]
    col_edges = np.concatenate([[0], np.cumsum(col_sizes)])
    col_names = ("1i", "1d", "2i", "2d", "3i")
    col_blocks = {k: slice(int(a), int(b)) for k, a, b in zip(col_names, col_edges[:-1], col_edges[1:])}
    layer_cols = {1: ("1i", "1d"), 2: ("2i", "2d"), 3: ("3i",)}

    row_names = ("scalp_flux", "skull_potential", "skull_flux", "brain_potential", "brain_flux")
    m = n_colloc
    row_blocks = {k: slice(i * m, (i + 1) * m) for i, k in enumerate(row_names)}
    A = np.zeros((5 * m, int(col_edges[-1])))

    def put(row, layer, pts, weight, flux):
        for name in layer_cols[layer]:
            xi = centers[col_names.index(name)].points
            if flux:
                block = kernel_normal_derivative(pts.points, xi, pts.normals)
            else:
                block = kernel(pts.points, xi)
            A[row_blocks[row], col_blocks[name]] = weight * np.atleast_2d(block)

    scalp, skull, brain = colloc
    put("scalp_flux", 1, scalp, fs * s1, True)
    put("skull_potential", 1, skull, 1.0, False)
    put("skull_potential", 2, skull, -1.0, False)
    put("skull_flux", 1, skull, fs * s1, True)
    put("skull_flux", 2, skull, -fs * s2, True)
    put("brain_potential", 2, brain, 1.0, False)
    put("brain_potential", 3, brain, -1.0, False)
    put("brain_flux", 2, brain, fs * s2, True)
    put("brain_flux", 3, brain, -fs * s3, True)
    return MfsSystem(A, row_blocks, col_blocks, centers, colloc, head, fs)


def solve(system: MfsSystem, dipole: Dipole, tau_svd: float = TAU_SVD, tau_rank: float | None = None) -> MfsSolution:
    """Minimum-norm truncated-SVD least-squares solve for one dipole.

    Raises ``RankFailure`` when the matrix is numerically rank deficient.
    """
    rank = system.check_rank(tau_rank)
    u, s, vt = system.svd
    b = system.rhs(dipole)
    keep = s > tau_svd * s[0]
    coef = vt[keep].T @ ((u[:, keep].T @ b) / s[keep])
    residual = float(np.linalg.norm(system.matrix @ coef - b))
    return MfsSolution(coef, system, rank, (float(s[0]), float(s[-1])), residual, float(np.linalg.norm(b)))


def evaluate_scalp(solution: MfsSolution, test: PointSet) -> ScalpField:
    system = solution.system
    values = np.zeros(test.count)
    for name in ("1i", "1d"):
        sl = system.col_blocks[name]
        xi = system.centers[list(system.col_blocks).index(name)].points
        values += np.atleast_2d(kernel(test.points, xi)) @ solution.coefficients[sl]
    return ScalpField(values)


def quality_q(u_mfs: ScalpField, u_true: ScalpField, options: MetricOptions = MetricOptions()) -> QualityScore:
    """Negative log of the relative squared scalp error, capped at ``options.q_cap``."""
    a = np.asarray(getattr(u_mfs, "values", u_mfs), dtype=float)
    b = np.asarray(getattr(u_true, "values", u_true), dtype=float)
    if a.shape != b.shape:
        raise InvalidArgument(f"field lengths differ: {a.shape} vs {b.shape}")
    if options.reference == "average":
        a, b = a - a.mean(), b - b.mean()
    den = float(np.sum(b ** 2))
    if not den > 0:
        raise UndefinedMetric("reference field is identically zero")
    num = float(np.sum((a - b) ** 2))
    if num == 0.0:
        return QualityScore(options.q_cap, capped=True)
    log = math.log if options.log_base == "e" else math.log10
    q = -log(num / den)
    if q >= options.q_cap:
        return QualityScore(options.q_cap, capped=True)
    return QualityScore(q)


class ForwardModel:
    """``(theta, dipole) -> Q`` black box backed by the MFS solver and the oracle.

    The assembled system of the most recent theta is cached, so consecutive
    dipoles at the same theta reuse one factorization.
    """

    def __init__(self, head: HeadModel = DEFAULT_HEAD, counts=DEFAULT_COUNTS, n_colloc: int = 300, k_test: int = 1000,
                 tol: float = DEFAULT_TOL, metric: MetricOptions = MetricOptions(), balance: bool = True,
                 tau_svd: float = TAU_SVD, tau_rank: float | None = None):
        self.head = head
        self.counts = tuple(counts)
        self.n_colloc = n_colloc
        self.test = spiral_points(k_test, head.r_scalp)
        self.tol = tol
        self.metric = metric
        self.balance = balance
        self.tau_svd = tau_svd
        self.tau_rank = tau_rank
        self._cached: tuple[ThetaVector, MfsSystem] | None = None

    def system(self, theta: ThetaVector) -> MfsSystem:
        if self._cached is None or self._cached[0] != theta:
            self._cached = (theta, assemble(theta, self.head, self.counts, self.n_colloc, self.balance))
        return self._cached[1]

    def check(self, theta: ThetaVector) -> int:
        """Numerical rank of the system at ``theta``; raises ``RankFailure``."""
        return self.system(theta).check_rank(self.tau_rank)

    def solve(self, theta: ThetaVector, dipole: Dipole) -> MfsSolution:
        return solve(self.system(theta), dipole, self.tau_svd, self.tau_rank)

    def fields(self, theta: ThetaVector, dipole: Dipole) -> tuple[ScalpField, ScalpField]:
        u_mfs = evaluate_scalp(self.solve(theta, dipole), self.test)
        u_true = layered_potential(self.head, dipole, self.test, self.tol)
        return u_mfs, u_true

    def __call__(self, theta: ThetaVector, dipole: Dipole) -> float:
        return quality_q(*self.fields(theta, dipole), self.metric).q


def forward_quality(theta: ThetaVector, head: HeadModel, counts, n_colloc: int, dipole: Dipole, test: PointSet,
                    tol: float = DEFAULT_TOL, metric: MetricOptions = MetricOptions(),
                    system: MfsSystem | None = None) -> QualityScore:
    """One forward solve scored against the analytic potential.

    Pass a previously assembled ``system`` to reuse its factorization across
    dipoles at the same theta.
    """
    if system is None:
        system = assemble(theta, head, counts, n_colloc)
    u_mfs = evaluate_scalp(solve(system, dipole), test)
    u_true = layered_potential(head, dipole, test, tol)
    return quality_q(u_mfs, u_true, metric)
