"""Node deployments, the disk connectivity graph, and its Laplacian spectrum.

Edges follow the disk rule: (i, j) is an edge iff the Euclidean (or torus)
distance is <= the communication range r, boundary inclusive.  Eigenvalues
come from a cyclic Jacobi sweep on the dense symmetric Laplacian, which is
deterministic and accurate to ~1e-9 at desk scale (n up to a few hundred).
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidInputError, InvariantViolation

CONNECTIVITY_EPS = 1e-9  # lambda2 above this counts as connected


@dataclass(frozen=True)
class Deployment:
    positions: np.ndarray  # (n, 2) meters
    width_m: float
    height_m: float
    range_r_m: float
    torus: bool = False

    def __post_init__(self) -> None:
        pos = np.asarray(self.positions, dtype=np.float64)
        object.__setattr__(self, "positions", pos)
        if pos.ndim != 2 or pos.shape[1] != 2:
            raise InvalidInputError("positions must be an (n, 2) array")
        if self.width_m <= 0 or self.height_m <= 0:
            raise InvalidInputError("area dimensions must be positive")
        if self.range_r_m <= 0:
            raise InvalidInputError("communication range must be positive")
        if pos.size and (
            pos[:, 0].min() < 0
            or pos[:, 1].min() < 0
            or pos[:, 0].max() > self.width_m
            or pos[:, 1].max() > self.height_m
        ):
            raise InvalidInputError("positions must lie inside the area")

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    @property
    def density(self) -> float:
        return self.n / (self.width_m * self.height_m)


def uniform_deployment(
    n: int,
    width_m: float,
    height_m: float,
    range_r_m: float,
    rng: np.random.Generator,
    torus: bool = False,
) -> Deployment:
    pos = np.column_stack([rng.uniform(0, width_m, n), rng.uniform(0, height_m, n)])
    return Deployment(pos, width_m, height_m, range_r_m, torus)


def pairwise_distances(dep: Deployment) -> np.ndarray:
    delta = np.abs(dep.positions[:, None, :] - dep.positions[None, :, :])
    if dep.torus:
        span = np.array([dep.width_m, dep.height_m])
        delta = np.minimum(delta, span - delta)
    return np.sqrt((delta**2).sum(axis=2))


@dataclass(frozen=True)
class ConnectivityGraph:
    n: int
    adjacency: np.ndarray  # (n, n) int8, symmetric, zero diagonal

    @property
    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)

    @property
    def edges(self) -> list[tuple[int, int]]:
        ii, jj = np.nonzero(np.triu(self.adjacency, 1))
        return list(zip(ii.tolist(), jj.tolist()))

    @property
    def edge_count(self) -> int:
        return int(self.adjacency.sum()) // 2

    def laplacian(self) -> np.ndarray:
        a = self.adjacency.astype(np.float64)
        return np.diag(a.sum(axis=1)) - a

    def neighbors(self, i: int) -> np.ndarray:
        return np.nonzero(self.adjacency[i])[0]


def build_graph(dep: Deployment) -> ConnectivityGraph:
    """Exact disk graph; distance exactly r is an edge (boundary inclusive)."""
    if dep.n < 1:
        raise InvalidInputError("need at least one node")
    dist = pairwise_distances(dep)
    adj = (dist <= dep.range_r_m).astype(np.int8)
    np.fill_diagonal(adj, 0)
    return ConnectivityGraph(n=dep.n, adjacency=adj)


def graph_from_adjacency(adjacency: np.ndarray) -> ConnectivityGraph:
    adj = np.asarray(adjacency)
    if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
        raise InvalidInputError("adjacency must be square")
    if not np.array_equal(adj, adj.T) or np.any(np.diag(adj)):
        raise InvalidInputError("adjacency must be symmetric with zero diagonal")
    return ConnectivityGraph(n=adj.shape[0], adjacency=adj.astype(np.int8))


def mean_degree(g: ConnectivityGraph) -> float:
    """2|E| / n; approximately pi r^2 rho for boundary-free uniform deployments."""
    if g.n < 1:
        raise InvalidInputError("need at least one node")
    return 2.0 * g.edge_count / g.n


def jacobi_eigenvalues(matrix: np.ndarray, tol: float = 1e-10, max_sweeps: int = 100) -> np.ndarray:
    """Eigenvalues of a symmetric matrix via cyclic Jacobi rotations.

    Sweeps until the off-diagonal Frobenius norm falls below tol.
    """
    a = np.array(matrix, dtype=np.float64)
    n = a.shape[0]
    if a.ndim != 2 or a.shape[1] != n:
        raise InvalidInputError("matrix must be square")
    if n == 1:
        return a[0, :1].copy()
    for _ in range(max_sweeps):
        off = np.sqrt(2.0 * np.sum(np.triu(a, 1) ** 2))
        if off <= tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) < 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rp, rq = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                cp, cq = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * cp - s * cq
                a[:, q] = s * cp + c * cq
    else:
        raise InvariantViolation("Jacobi eigensolver did not converge")
    return np.sort(np.diag(a))


@dataclass(frozen=True)
class SpectralSummary:
    lambda2: float
    lambda_max: float
    is_connected: bool
    lambda1_residual: float  # |smallest eigenvalue|; theoretically exactly 0


def laplacian_spectrum(g: ConnectivityGraph, tol: float = 1e-10) -> SpectralSummary:
    """Laplacian eigen summary; lambda2 > 1e-9 iff connected."""
    if g.n < 2:
        raise InvalidInputError("spectrum needs at least two nodes")
    eigs = jacobi_eigenvalues(g.laplacian(), tol=tol)
    residual = abs(float(eigs[0]))
    if residual > 1e-6 * max(1.0, float(eigs[-1])):
        raise InvariantViolation(f"Laplacian lambda1 residual too large: {residual}")
    lambda2 = max(0.0, float(eigs[1]))
    return SpectralSummary(
        lambda2=lambda2,
        lambda_max=max(0.0, float(eigs[-1])),
        is_connected=lambda2 > CONNECTIVITY_EPS,
        lambda1_residual=residual,
    )


# --- mobility -----------------------------------------------------------------


class StaticMobility:
    """Positions never change."""

    def step(self, dep: Deployment, dt: float, rng: np.random.Generator | None = None) -> Deployment:
        return dep


class ConstantVelocityMobility:
    """Fixed per-node velocity with torus wrap or wall reflection."""

    def __init__(self, velocities: np.ndarray, boundary: str = "wrap") -> None:
        self.velocities = np.asarray(velocities, dtype=np.float64)
        if boundary not in ("wrap", "reflect"):
            raise InvalidInputError(f"unknown boundary rule {boundary!r}")
        self.boundary = boundary

    def step(self, dep: Deployment, dt: float, rng: np.random.Generator | None = None) -> Deployment:
        if self.velocities.shape != dep.positions.shape:
            raise InvalidInputError("velocity array must match positions")
        pos = dep.positions + self.velocities * dt
        span = np.array([dep.width_m, dep.height_m])
        if self.boundary == "wrap":
            pos = np.mod(pos, span)
        else:
            for axis in (0, 1):
                over = pos[:, axis] > span[axis]
                under = pos[:, axis] < 0
                pos[over, axis] = 2 * span[axis] - pos[over, axis]
                pos[under, axis] = -pos[under, axis]
                self.velocities[over | under, axis] *= -1
            pos = np.clip(pos, 0, span)
        return replace(dep, positions=pos)


class RandomWaypointMobility:
    """Pick a uniform target, travel at a uniform speed, repeat."""

    def __init__(self, speed_min: float, speed_max: float) -> None:
        if not 0 < speed_min <= speed_max:
            raise InvalidInputError("need 0 < speed_min <= speed_max")
        self.speed_min = speed_min
        self.speed_max = speed_max
        self._targets: np.ndarray | None = None
        self._speeds: np.ndarray | None = None

    def _ensure_state(self, dep: Deployment, rng: np.random.Generator) -> None:
        if self._targets is None:
            self._targets = np.column_stack(
                [rng.uniform(0, dep.width_m, dep.n), rng.uniform(0, dep.height_m, dep.n)]
            )
            self._speeds = rng.uniform(self.speed_min, self.speed_max, dep.n)

    def step(self, dep: Deployment, dt: float, rng: np.random.Generator | None = None) -> Deployment:
        if rng is None:
            raise InvalidInputError("random waypoint mobility needs an rng stream")
        self._ensure_state(dep, rng)
        pos = dep.positions.copy()
        for i in range(dep.n):
            remaining = dt
            while remaining > 1e-12:
                to_target = self._targets[i] - pos[i]
                dist = float(np.hypot(*to_target))
                step_len = self._speeds[i] * remaining
                if step_len < dist:
                    pos[i] += to_target * (step_len / dist)
                    break
                pos[i] = self._targets[i]
                remaining -= dist / self._speeds[i] if self._speeds[i] > 0 else remaining
                self._targets[i] = np.array(
                    [rng.uniform(0, dep.width_m), rng.uniform(0, dep.height_m)]
                )
                self._speeds[i] = rng.uniform(self.speed_min, self.speed_max)
        return replace(dep, positions=pos)


MobilityModel = StaticMobility | ConstantVelocityMobility | RandomWaypointMobility


def step_mobility(
    dep: Deployment,
    dt: float,
    model: MobilityModel,
    rng: np.random.Generator | None = None,
) -> Deployment:
    """Advance positions by dt under the given model; area membership preserved."""
    if dt <= 0:
        raise InvalidInputError("dt must be positive")
    return model.step(dep, dt, rng)
