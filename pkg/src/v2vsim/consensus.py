"""Distributed averaging over the connectivity graph.

Each synchronous round moves every node toward its neighbors:
x_i(t+1) = x_i(t) + sum_j w_ij (x_j(t) - x_i(t)), with w_ij >= 0 and
per-node weight sums <= 1.  Symmetric schemes preserve the mean, keep all
states inside the per-coordinate box of the initial states, and contract
the disagreement at a rate set by the Laplacian spectrum.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DisconnectedGraphError, InvalidInputError
from .topology import ConnectivityGraph, SpectralSummary, laplacian_spectrum


@dataclass(frozen=True)
class ConstantWeights:
    """Uniform edge weight epsilon; requires 0 < epsilon <= 1/max_degree."""

    epsilon: float


@dataclass(frozen=True)
class MetropolisWeights:
    """w_ij = 1 / (1 + max(deg_i, deg_j)); symmetric and degree-adaptive."""


WeightScheme = ConstantWeights | MetropolisWeights


def edge_weights(scheme: WeightScheme, g: ConnectivityGraph) -> np.ndarray:
    """Dense (n, n) weight matrix for i != j pairs; validates the scheme."""
    adj = g.adjacency.astype(np.float64)
    degrees = g.degrees
    if isinstance(scheme, ConstantWeights):
        max_deg = int(degrees.max()) if g.n else 0
        if scheme.epsilon <= 0:
            raise ConfigError("epsilon must be positive")
        if max_deg > 0 and scheme.epsilon > 1.0 / max_deg + 1e-15:
            raise ConfigError(
                f"epsilon {scheme.epsilon} exceeds 1/max_degree = {1.0 / max_deg}"
            )
        w = adj * scheme.epsilon
    elif isinstance(scheme, MetropolisWeights):
        pairmax = np.maximum(degrees[:, None], degrees[None, :])
        w = adj / (1.0 + pairmax)
    else:
        raise ConfigError(f"unknown weight scheme {scheme!r}")
    sums = w.sum(axis=1)
    if np.any(w < 0) or np.any(sums > 1.0 + 1e-12):
        raise ConfigError("weights must be nonnegative with per-node sums <= 1")
    return w


def consensus_step(
    states: np.ndarray,
    g: ConnectivityGraph,
    scheme: WeightScheme,
    received: np.ndarray | None = None,
) -> np.ndarray:
    """One synchronous averaging round.

    `received` is an optional (n, n) boolean mask of which neighbor states
    actually arrived this round; a missing state zeroes that weight (the
    self-weight absorbs it), keeping per-node weight sums <= 1.
    """
    x = np.asarray(states, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != g.n:
        raise InvalidInputError("states must be an (n, d) array")
    w = edge_weights(scheme, g)
    if received is not None:
        w = w * np.asarray(received, dtype=bool)
    out = x.copy()
    for i in range(g.n):
        nbrs = np.nonzero(w[i])[0]
        if nbrs.size:
            out[i] = x[i] + w[i, nbrs] @ (x[nbrs] - x[i])
    return out


def disagreement_norm(states: np.ndarray) -> float:
    """Frobenius distance from the all-equal consensus subspace."""
    x = np.asarray(states, dtype=np.float64)
    return float(np.linalg.norm(x - x.mean(axis=0)))


def max_pairwise_distance(states: np.ndarray) -> float:
    """max_{i,j} ||x_i - x_j||_inf, computed coordinate-wise."""
    x = np.asarray(states, dtype=np.float64)
    return float(np.max(x.max(axis=0) - x.min(axis=0)))


def check_convex_hull(states_t: np.ndarray, states_0: np.ndarray) -> bool:
    """Per-coordinate box containment of states_t in the hull of states_0.

    The box is a relaxation of true hull containment (exact for d = 1 and a
    sound necessary condition above); see check_convex_hull_exact_2d for the
    exact planar test.
    """
    x_t = np.asarray(states_t, dtype=np.float64)
    x_0 = np.asarray(states_0, dtype=np.float64)
    if x_t.shape != x_0.shape:
        raise InvalidInputError("state arrays must have matching shapes")
    lo = x_0.min(axis=0) - 1e-12
    hi = x_0.max(axis=0) + 1e-12
    return bool(np.all(x_t >= lo) and np.all(x_t <= hi))


def check_convex_hull_exact_2d(states_t: np.ndarray, states_0: np.ndarray, tol: float = 1e-9) -> bool:
    """Exact convex-hull containment for d = 2 (monotone-chain hull)."""
    x_t = np.asarray(states_t, dtype=np.float64)
    x_0 = np.asarray(states_0, dtype=np.float64)
    if x_t.shape[1] != 2 or x_0.shape[1] != 2:
        raise InvalidInputError("exact hull check requires 2-d states")
    hull = _convex_hull_2d(x_0)
    if len(hull) == 1:
        return bool(np.all(np.abs(x_t - hull[0]) <= tol))
    for pt in x_t:
        for a, b in zip(hull, hull[1:] + hull[:1]):
            cross = (b[0] - a[0]) * (pt[1] - a[1]) - (b[1] - a[1]) * (pt[0] - a[0])
            if cross < -tol * max(1.0, np.abs(b - a).max()):
                return False
    return True


def _convex_hull_2d(points: np.ndarray) -> list[np.ndarray]:
    pts = sorted({(float(p[0]), float(p[1])) for p in points})
    if len(pts) <= 2:
        return [np.array(p) for p in pts]

    def half(seq):
        out: list[tuple[float, float]] = []
        for p in seq:
            while len(out) >= 2:
                o, a = out[-2], out[-1]
                if (a[0] - o[0]) * (p[1] - o[1]) - (a[1] - o[1]) * (p[0] - o[0]) <= 0:
                    out.pop()
                else:
                    break
            out.append(p)
        return out

    lower = half(pts)
    upper = half(reversed(pts))
    return [np.array(p) for p in lower[:-1] + upper[:-1]]


@dataclass
class ConvergenceResult:
    x_star: np.ndarray
    iterations: int
    disagreement_trace: list[float] = field(default_factory=list)


def run_to_convergence(
    states: np.ndarray,
    g: ConnectivityGraph,
    scheme: WeightScheme,
    tol: float,
    max_iterations: int = 100_000,
    keep_trace: bool = False,
) -> ConvergenceResult:
    """Iterate until the max pairwise state distance drops to tol.

    Refuses disconnected graphs (convergence to a common value is not
    guaranteed there).  With symmetric weights the returned consensus value
    equals the arithmetic mean of the initial states.
    """
    if tol <= 0:
        raise InvalidInputError("tol must be positive")
    spectrum = laplacian_spectrum(g)
    if not spectrum.is_connected:
        raise DisconnectedGraphError("consensus requires a connected graph")
    x = np.asarray(states, dtype=np.float64).copy()
    trace = [disagreement_norm(x)] if keep_trace else []
    iterations = 0
    while max_pairwise_distance(x) > tol:
        if iterations >= max_iterations:
            raise InvalidInputError(
                f"no convergence to tol={tol} within {max_iterations} iterations"
            )
        x = consensus_step(x, g, scheme)
        iterations += 1
        if keep_trace:
            trace.append(disagreement_norm(x))
    return ConvergenceResult(
        x_star=x.mean(axis=0), iterations=iterations, disagreement_trace=trace
    )


def convergence_rate_estimate(
    g: ConnectivityGraph, scheme: WeightScheme, spectrum: SpectralSummary | None = None
) -> float:
    """Spectral contraction factor max(|1 - eps*lambda2|, |1 - eps*lambda_max|)."""
    if not isinstance(scheme, ConstantWeights):
        raise InvalidInputError("rate estimate is defined for the constant-weight scheme")
    edge_weights(scheme, g)  # validate epsilon against the graph
    spectrum = spectrum or laplacian_spectrum(g)
    if not spectrum.is_connected:
        raise DisconnectedGraphError("rate estimate requires a connected graph")
    eps = scheme.epsilon
    return max(abs(1.0 - eps * spectrum.lambda2), abs(1.0 - eps * spectrum.lambda_max))
