"""Independent numerical verification of the closed-form equilibrium.

Three instruments, none of which share code with the production evaluator:

* composite-Simpson quadrature of each agent's cost integral, with a
  half-grid refinement check;
* a deterministic perturbation family that certifies the Nash property
  (no unilateral control deviation lowers the perturbing agent's cost);
* trapezoidal collocation of the linear state-costate boundary problem
  x' = -p, p' = -Qx + Wb, x(0) = b, p(T) = 0, solved as one sparse linear
  system (second-order accurate; shooting would be ill conditioned because
  the system has symmetric growth/decay modes).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

from .game import GameSpec, NashSolution, QAssembly, TrajectorySample, assemble

REFINEMENT_RTOL = 1e-6


class GridTooCoarseError(ValueError):
    """Quadrature grid does not meet the resolution contract."""


class CollocationSingularError(RuntimeError):
    """The collocation system is numerically singular (horizon near-critical)."""


@dataclass(frozen=True)
class CostReport:
    """One agent's realized cost, split into its three integrand terms."""

    agent: int
    value: float
    components: tuple  # (influence, stubbornness, control effort)
    converged: bool
    refinement_delta: float


def _simpson_weights(m: int, dt: float) -> np.ndarray:
    """Composite Simpson weights for m intervals (m even) of width dt."""
    w = np.ones(m + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * (dt / 3.0)


def _agent_cost_curve(spec: GameSpec, states: np.ndarray, controls_i: np.ndarray,
                      agent: int) -> np.ndarray:
    """Integrand samples (influence, stubbornness, control) per grid node."""
    d = spec.d
    x_i = states[:, agent * d:(agent + 1) * d]
    infl = np.zeros(len(states))
    for j in spec.neighbors(agent):
        diff = x_i - states[:, j * d:(j + 1) * d]
        infl += np.einsum("km,mn,kn->k", diff, spec.influence[(agent, j)], diff)
    dev = x_i - spec.biases[agent][None, :]
    stub = np.einsum("km,mn,kn->k", dev, spec.stubbornness[agent], dev)
    ctrl = np.einsum("km,km->k", controls_i, controls_i)
    return np.vstack([infl, stub, ctrl])


def cost_quadrature(spec: GameSpec, trajectory: TrajectorySample, agent: int) -> CostReport:
    """Composite-Simpson cost of `agent` along a sampled trajectory.

    The grid must be uniform with at least 64 intervals and a multiple of 4
    of them, so the value can be recomputed on the stride-2 subgrid; the
    report is flagged unconverged when the two differ by more than
    ``REFINEMENT_RTOL`` relative.
    """
    grid = trajectory.grid
    m = len(grid) - 1
    if m < 64 or m % 4 != 0:
        raise GridTooCoarseError(
            f"need at least 64 intervals with a multiple of 4 (got {m})"
        )
    dt = grid[1] - grid[0]
    if not np.allclose(np.diff(grid), dt, rtol=1e-9, atol=0):
        raise GridTooCoarseError("quadrature grid must be uniform")
    d = spec.d
    controls_i = trajectory.controls[:, agent * d:(agent + 1) * d]
    curves = _agent_cost_curve(spec, trajectory.states, controls_i, agent)

    w_full = _simpson_weights(m, dt)
    components = 0.5 * curves @ w_full
    value = float(components.sum())

    w_half = _simpson_weights(m // 2, 2.0 * dt)
    coarse = float((0.5 * curves[:, ::2] @ w_half).sum())
    delta = abs(value - coarse)
    converged = delta <= REFINEMENT_RTOL * (1.0 + abs(value))
    return CostReport(agent=agent, value=value, components=tuple(float(c) for c in components),
                      converged=converged, refinement_delta=delta)


def _bump(centers_t: np.ndarray, center: float, width: float) -> np.ndarray:
    """cos^2 bump of unit amplitude supported on [center - width/2, center + width/2]."""
    u = (centers_t - center) / width
    phi = np.where(np.abs(u) <= 0.5, np.cos(np.pi * u) ** 2, 0.0)
    return phi


def _bump_antiderivative(ts: np.ndarray, center: float, width: float) -> np.ndarray:
    """Exact running integral of the cos^2 bump from 0 to each t."""
    lo = center - 0.5 * width
    u = np.clip((ts - center) / width, -0.5, 0.5)
    inner = 0.5 * width * (u + 0.5) + (width / (4.0 * np.pi)) * np.sin(2.0 * np.pi * u)
    return np.where(ts <= lo, 0.0, inner)


def perturbation_family(T: float, grid: np.ndarray):
    """The deterministic scalar profiles used by the Nash certificate.

    Seven cos^2 bumps centered at m T/8 with width T/4, a constant profile
    and a linear-in-t profile, each of unit amplitude and in both signs
    (a one-sided family could miss descent directions away from the
    optimum); returned as (name, values-on-grid, running-integral) triples.
    """
    base = []
    width = T / 4.0
    for m in range(1, 8):
        center = m * T / 8.0
        base.append((f"bump{m}", _bump(grid, center, width),
                     _bump_antiderivative(grid, center, width)))
    base.append(("constant", np.ones_like(grid), grid.copy()))
    base.append(("linear", grid / T, grid ** 2 / (2.0 * T)))
    out = []
    for name, phi, Phi in base:
        out.append((f"{name}+", phi, Phi))
        out.append((f"{name}-", -phi, -Phi))
    return out


@dataclass(frozen=True)
class PerturbationReport:
    """Cost increases J_i(u* + delta) - J_i(u*) over the deviation family."""

    agent: int
    epsilon: float
    base_cost: float
    differences: Dict[str, float]
    min_difference: float
    tolerance: float
    passed: bool


def nash_perturbation_test(spec: GameSpec, sol: NashSolution, agent: int,
                           epsilon: float = 1e-3, family=None,
                           intervals: int = 512,
                           tol_scale: float = 1e-8) -> PerturbationReport:
    """Certify that no deviation in the family lowers `agent`'s cost.

    Each scalar profile is applied along every issue axis of the agent's
    control; the perturbed trajectory is the exact integral of the perturbed
    control, and both costs are evaluated with the same Simpson rule so the
    difference is unbiased.  PASS iff the minimum difference is at least
    -tol_scale * (1 + J_i(u*)).  ``family`` may replace the default profile
    set with a callable (T, grid) -> [(name, values, running integral), ...].
    """
    if intervals < 64 or intervals % 4 != 0:
        raise GridTooCoarseError("need at least 64 intervals, a multiple of 4")
    T = sol.T
    sample = sol.sample(intervals + 1)
    grid = sample.grid
    d = spec.d
    m = intervals
    w = _simpson_weights(m, grid[1] - grid[0])

    def cost_of(states, controls_i):
        curves = _agent_cost_curve(spec, states, controls_i, agent)
        return float((0.5 * curves @ w).sum())

    controls_i = sample.controls[:, agent * d:(agent + 1) * d]
    base_cost = cost_of(sample.states, controls_i)

    profiles = (family or perturbation_family)(T, grid)
    diffs = {}
    for name, phi, Phi in profiles:
        for axis in range(d):
            states_p = sample.states.copy()
            states_p[:, agent * d + axis] += epsilon * Phi
            controls_p = controls_i.copy()
            controls_p[:, axis] += epsilon * phi
            diffs[f"{name}/issue{axis}"] = cost_of(states_p, controls_p) - base_cost
    min_diff = min(diffs.values())
    tol = tol_scale * (1.0 + base_cost)
    return PerturbationReport(agent=agent, epsilon=epsilon, base_cost=base_cost,
                              differences=diffs, min_difference=min_diff,
                              tolerance=tol, passed=min_diff >= -tol)


@dataclass(eq=False)
class BVPSolution:
    """Collocation solution of the state-costate boundary problem."""

    grid: np.ndarray
    x: np.ndarray  # (N+1, nd)
    p: np.ndarray  # (N+1, nd)


def bvp_solve(spec: GameSpec, intervals: int, assembly: Optional[QAssembly] = None) -> BVPSolution:
    """Trapezoidal collocation of x' = -p, p' = -Qx + Wb on a uniform grid.

    Assembles one sparse linear system over the stacked node unknowns
    [x_0..x_N, p_0..p_N] and solves it directly; the solution converges to
    the closed form at rate O(N^-2).
    """
    if intervals < 2:
        raise ValueError("need at least 2 intervals")
    if assembly is None:
        assembly = assemble(spec)
    Q, Wb, b = assembly.Q, assembly.Wblock, assembly.b
    nd = len(b)
    N = intervals
    T = spec.T
    dt = T / N
    grid = np.linspace(0.0, T, N + 1)

    Im = scipy.sparse.identity(nd, format="csr")
    D = scipy.sparse.diags([-np.ones(N), np.ones(N)], [0, 1],
                           shape=(N, N + 1), format="csr") / dt
    S = scipy.sparse.diags([0.5 * np.ones(N), 0.5 * np.ones(N)], [0, 1],
                           shape=(N, N + 1), format="csr")
    e0 = scipy.sparse.csr_matrix(([1.0], ([0], [0])), shape=(1, N + 1))
    eN = scipy.sparse.csr_matrix(([1.0], ([0], [N])), shape=(1, N + 1))

    A = scipy.sparse.bmat([
        [scipy.sparse.kron(e0, Im), None],
        [scipy.sparse.kron(D, Im), scipy.sparse.kron(S, Im)],
        [scipy.sparse.kron(S, scipy.sparse.csr_matrix(Q)), scipy.sparse.kron(D, Im)],
        [None, scipy.sparse.kron(eN, Im)],
    ], format="csc")
    rhs = np.concatenate([b, np.zeros(N * nd), np.tile(Wb @ b, N), np.zeros(nd)])

    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("error", scipy.sparse.linalg.MatrixRankWarning)
        try:
            z = scipy.sparse.linalg.spsolve(A, rhs)
        except scipy.sparse.linalg.MatrixRankWarning as exc:
            raise CollocationSingularError(
                "collocation matrix is numerically singular"
            ) from exc
    if not np.all(np.isfinite(z)):
        raise CollocationSingularError("collocation solve produced non-finite values")
    amplification = np.linalg.norm(z) / (1.0 + np.linalg.norm(rhs))
    if amplification > 1e12:
        raise CollocationSingularError(
            f"collocation system numerically singular (solution amplified "
            f"{amplification:.3g}x); horizon is at or near a critical time"
        )
    residual = np.linalg.norm(A @ z - rhs)
    if residual > 1e-6 * (1.0 + np.linalg.norm(rhs) + np.linalg.norm(z)):
        raise CollocationSingularError(
            f"collocation residual {residual:.3g} too large; horizon likely near-critical"
        )
    x = z[: (N + 1) * nd].reshape(N + 1, nd)
    p = z[(N + 1) * nd:].reshape(N + 1, nd)
    # the endpoints are prescribed data, not unknowns; pin them exactly
    x[0] = b
    p[N] = 0.0
    return BVPSolution(grid=grid, x=x, p=p)
