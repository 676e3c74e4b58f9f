"""Game assembly, Nash-existence test and equilibrium trajectory evaluation.

The quadratic game couples the agents only through the nd x nd matrix

    Q = blocks[i][j],  Q_ii = W_ii + sum_{j in N_i} W_ij,  Q_ij = -W_ij,

with W the block diagonal of stubbornness matrices.  A unique open-loop
Nash equilibrium exists on [0, T] iff f(QT) is nonsingular; the state and
controls then follow from the state-costate two-point boundary problem

    x'' = Q x - W b,   x(0) = b,   x'(T) = 0,

whose solution is

    x*(t) = b + [h(Qt) f(QT) - g(Qt) g(QT)] f(QT)^{-1} (Q - W) b,
    u*(t) = [g(Qt) f(QT) - f(Qt) g(QT)] f(QT)^{-1} (Q - W) b = x*'(t),

valid for singular Q as well.  When Q is nonsingular this equals the
cosh-ratio form Q^{-1}W b + f(Q(T-t)) f(QT)^{-1} (I - Q^{-1}W) b, which is
kept as an independent cross-check path.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np
import scipy.linalg

from . import matfun, weights
from .matfun import CriticalTimes, SingularMatrixError, _eig_with_basis

NEAR_CRITICAL_COND = 1e8


class InadmissibleWeightsError(ValueError):
    """Weight matrices violate the admissibility assumption."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(v.describe() for v in self.violations))


class NoNashEquilibriumError(ValueError):
    """f(QT) is singular at the requested horizon: no Nash equilibrium."""

    def __init__(self, verdict: "ExistenceVerdict"):
        self.verdict = verdict
        times = ", ".join(f"{t:.6g}" for t in verdict.critical_horizons.all_times())
        super().__init__(
            f"no Nash equilibrium at this horizon; critical horizons: {times or 'n/a'}"
        )


class NearCriticalHorizonWarning(UserWarning):
    """The horizon is close to a critical time; results may lose accuracy."""


@dataclass(eq=False)
class GameSpec:
    """Complete one-stage game.

    stubbornness maps agent -> d x d SPD matrix W_ii; influence maps ordered
    pairs (i, j), i != j, to d x d symmetric PSD matrices W_ij (absent or
    exactly-zero entries mean agent-j is not a neighbor of agent-i); biases
    maps every agent to its initial opinion d-vector.
    """

    n: int
    d: int
    T: float
    stubbornness: Dict[int, np.ndarray]
    influence: Dict[Tuple[int, int], np.ndarray]
    biases: Dict[int, np.ndarray]
    validate: bool = True

    def __post_init__(self):
        if self.n < 1 or self.d < 1:
            raise ValueError("need n >= 1 agents and d >= 1 issues")
        if not (self.T > 0) or not np.isfinite(self.T):
            raise ValueError("horizon T must be positive and finite")
        self.stubbornness = {
            int(i): matfun.as_square_matrix(W) for i, W in self.stubbornness.items()
        }
        kept = {}
        for (i, j), W in self.influence.items():
            i, j = int(i), int(j)
            if i == j:
                raise ValueError(f"influence key ({i}, {j}) must pair distinct agents")
            W = matfun.as_square_matrix(W)
            if np.any(W != 0.0):
                kept[(i, j)] = W
        self.influence = kept
        self.biases = {int(i): np.asarray(b, float).reshape(self.d) for i, b in self.biases.items()}
        if sorted(self.stubbornness) != list(range(self.n)):
            raise ValueError("stubbornness must be given for every agent 0..n-1")
        if sorted(self.biases) != list(range(self.n)):
            raise ValueError("biases must be given for every agent 0..n-1")
        for i, W in self.stubbornness.items():
            if W.shape != (self.d, self.d):
                raise ValueError(f"stubbornness matrix of agent {i} must be {self.d}x{self.d}")
        for (i, j), W in self.influence.items():
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ValueError(f"influence pair ({i}, {j}) out of range")
            if W.shape != (self.d, self.d):
                raise ValueError(f"influence matrix ({i}, {j}) must be {self.d}x{self.d}")
        for i, b in self.biases.items():
            if not np.all(np.isfinite(b)):
                raise ValueError(f"bias of agent {i} must be finite")
        if self.validate:
            violations = weights.validate_weights(self)
            if violations:
                raise InadmissibleWeightsError(violations)

    def neighbors(self, i: int) -> list:
        return sorted(j for (a, j) in self.influence if a == i)

    def stacked_biases(self) -> np.ndarray:
        return np.concatenate([self.biases[i] for i in range(self.n)])


@dataclass(eq=False)
class QAssembly:
    """The game matrix Q, the block-diagonal stubbornness W and stacked biases."""

    Q: np.ndarray
    Wblock: np.ndarray
    b: np.ndarray
    n: int
    d: int


def assemble(spec: GameSpec) -> QAssembly:
    """Build Q and the block diagonal W from a validated game spec."""
    n, d = spec.n, spec.d
    Q = np.zeros((n * d, n * d))
    Wb = np.zeros((n * d, n * d))
    for i in range(n):
        sl = slice(i * d, (i + 1) * d)
        M = spec.stubbornness[i].copy()
        for j in spec.neighbors(i):
            M += spec.influence[(i, j)]
        Q[sl, sl] = M
        Wb[sl, sl] = spec.stubbornness[i]
    for (i, j), W in spec.influence.items():
        Q[i * d:(i + 1) * d, j * d:(j + 1) * d] = -W
    return QAssembly(Q=Q, Wblock=Wb, b=spec.stacked_biases(), n=n, d=d)


@dataclass(frozen=True)
class ExistenceVerdict:
    """Nash-existence outcome plus critical-horizon diagnostics (all below 2T)."""

    unique_equilibrium: bool
    matches: tuple
    critical_horizons: CriticalTimes
    condition_estimate: float


def check_existence(assembly: QAssembly, T: float,
                    tol: float = matfun.CRITICAL_TIME_RTOL) -> ExistenceVerdict:
    """Unique equilibrium iff f(QT) is nonsingular (T off every critical time)."""
    verdict = matfun.f_singularity(assembly.Q, T, tol=tol)
    return ExistenceVerdict(
        unique_equilibrium=verdict.nonsingular,
        matches=verdict.matches,
        critical_horizons=verdict.critical_times,
        condition_estimate=verdict.condition_estimate,
    )


@dataclass(eq=False)
class TrajectorySample:
    """States and controls on an ascending time grid over [0, T]."""

    grid: np.ndarray
    states: np.ndarray   # (len(grid), nd)
    controls: np.ndarray  # (len(grid), nd)


def _ratio_kernels(lam: np.ndarray, T: float, t: float):
    """Per-eigenchannel trajectory kernels, overflow- and cancellation-safe.

    k_x(lam) = [cosh(mu(T-t))/cosh(mu T) - 1] / lam
    k_u(lam) = -sinh(mu(T-t)) / (mu cosh(mu T))

    with mu the principal square root of lam.  These are the eigenvalues of
    [h(Qt)f(QT) - g(Qt)g(QT)] f(QT)^{-1} and of its time derivative: the
    naive matrix products cancel e^{mu t}-sized terms and lose all accuracy
    for mu T beyond ~20, so the cancellation is done here in closed form.
    Removable singularities at lam = 0 are handled by a Taylor branch.
    """
    lam = lam.astype(complex)
    s = T - t
    mu = np.sqrt(lam)
    small = np.abs(lam) * T * T < 1e-4
    lam_safe = np.where(small, 1.0, lam)
    mu_safe = np.where(small, 1.0, mu)
    emt = np.exp(-mu_safe * t)
    e2s = np.exp(-2.0 * mu_safe * s)
    e2T = np.exp(-2.0 * mu_safe * T)
    denom = 1.0 + e2T
    ratio = emt * (1.0 + e2s) / denom
    k_x = np.where(small,
                   0.5 * (s * s - T * T)
                   + lam * (s ** 4 / 24.0 + 5.0 * T ** 4 / 24.0 - s * s * T * T / 4.0),
                   (ratio - 1.0) / lam_safe)
    k_u = np.where(small,
                   -s * (1.0 + lam * (s * s / 6.0 - T * T / 2.0)),
                   -emt * (1.0 - e2s) / (mu_safe * denom))
    return k_x, k_u


class NashSolution:
    """Evaluator for the equilibrium opinion profile and controls.

    Constructed only for horizons where the equilibrium exists; flags (and
    warns) when f(QT) is ill conditioned, which happens near critical
    horizons but also under strong coupling over long horizons.
    """

    def __init__(self, assembly: QAssembly, T: float, existence: ExistenceVerdict):
        if not existence.unique_equilibrium:
            raise NoNashEquilibriumError(existence)
        self.assembly = assembly
        self.T = float(T)
        self.existence = existence
        self.near_critical = existence.condition_estimate > NEAR_CRITICAL_COND
        if self.near_critical:
            warnings.warn(
                f"f(QT) condition estimate {existence.condition_estimate:.3g} exceeds "
                f"{NEAR_CRITICAL_COND:.0e} (near-critical horizon, or strong coupling "
                "over a long horizon); the cached factor may lose accuracy",
                NearCriticalHorizonWarning,
            )

        Q, b = assembly.Q, assembly.b
        self._r0 = (Q - assembly.Wblock) @ b

        lam, V, Vinv, cond = _eig_with_basis(Q)
        if Vinv is not None and cond < matfun.EIG_BASIS_COND_MAX:
            self._lam = lam
            self._V = V
            self._y0 = Vinv @ self._r0
            fv, gv, _ = matfun._scalar_kernels(lam, self.T)
            fT = ((V * fv) @ Vinv).real
            gT = ((V * gv) @ Vinv).real
        else:
            self._lam = None
            fT, gT, _ = matfun._fgh(Q, self.T)
        c0 = np.linalg.solve(fT, self._r0)
        self.factor = c0
        self._v2 = gT @ c0

        self._cosh_cache = None

    @property
    def b(self) -> np.ndarray:
        return self.assembly.b

    def _check_time(self, t: float) -> float:
        t = float(t)
        if not (0.0 <= t <= self.T * (1 + 1e-12)):
            raise ValueError(f"t={t} outside [0, {self.T}]")
        return min(t, self.T)

    def _xu_increments(self, t: float):
        """(x(t) - b, u(t)) evaluated by the most accurate available path."""
        if self._lam is not None:
            k_x, k_u = _ratio_kernels(self._lam, self.T, t)
            V = self._V
            dx = (V @ (k_x * self._y0)).real
            u = (V @ (k_u * self._y0)).real
            return dx, u
        # poorly conditioned eigenbasis: fall back to the cosh-structure path
        # for nonsingular Q, else to the raw series combination (accurate only
        # while spectral-radius * T^2 stays moderate).
        try:
            xinf, w = self._cosh_data()
        except SingularMatrixError:
            f, g, h = matfun._fgh(self.assembly.Q, t)
            return h @ self._r0 - g @ self._v2, g @ self._r0 - f @ self._v2
        Q = self.assembly.Q
        dx = xinf + matfun.series_f(Q, self.T - t) @ w - self.b
        u = -Q @ (matfun.series_g(Q, self.T - t) @ w)
        return dx, u

    def state_at(self, t: float) -> np.ndarray:
        """Equilibrium opinion profile x*(t); exactly b at t = 0."""
        t = self._check_time(t)
        if t == 0.0:
            return self.b.copy()
        dx, _ = self._xu_increments(t)
        return self.b + dx

    def control_at(self, t: float) -> np.ndarray:
        """Equilibrium control u*(t) = d/dt x*(t); vanishes at t = T."""
        t = self._check_time(t)
        _, u = self._xu_increments(t)
        return u

    def _cosh_data(self):
        if self._cosh_cache is None:
            Q, Wb, b = self.assembly.Q, self.assembly.Wblock, self.b
            info = matfun.spectral(Q)
            scale = 1.0 + float(np.max(np.abs(info.eigenvalues)))
            if np.any(np.abs(info.eigenvalues) <= 1e-12 * scale):
                raise SingularMatrixError("cosh-form evaluation requires nonsingular Q")
            xinf = np.linalg.solve(Q, Wb @ b)
            fT = matfun.series_f(Q, self.T)
            w = np.linalg.solve(fT, b - xinf)
            self._cosh_cache = (xinf, w)
        return self._cosh_cache

    def state_at_cosh(self, t: float) -> np.ndarray:
        """Cross-check path: Q^{-1}W b + cosh(H(T-t)) cosh(HT)^{-1} (I - Q^{-1}W) b.

        Evaluated as f(Q(T-t)) applied to the presolved boundary vector, so it
        shares no intermediate with `state_at`.  Requires nonsingular Q.
        """
        t = self._check_time(t)
        xinf, w = self._cosh_data()
        return xinf + matfun.series_f(self.assembly.Q, self.T - t) @ w

    def control_at_cosh(self, t: float) -> np.ndarray:
        """Cross-check path for the control: -Q g(Q(T-t)) applied to the boundary vector."""
        t = self._check_time(t)
        _, w = self._cosh_data()
        return -self.assembly.Q @ (matfun.series_g(self.assembly.Q, self.T - t) @ w)

    def sample(self, grid_points: int) -> TrajectorySample:
        """States and controls on a uniform grid over [0, T]."""
        if grid_points < 2:
            raise ValueError("need at least 2 grid points")
        grid = np.linspace(0.0, self.T, grid_points)
        nd = len(self.b)
        states = np.empty((grid_points, nd))
        controls = np.empty((grid_points, nd))
        for k, t in enumerate(grid):
            if t == 0.0:
                dx, u = self._xu_increments(0.0)
                states[k] = self.b
                controls[k] = u
            else:
                dx, u = self._xu_increments(float(t))
                states[k] = self.b + dx
                controls[k] = u
        return TrajectorySample(grid=grid, states=states, controls=controls)


def solve(spec: GameSpec, tol_critical: float = matfun.CRITICAL_TIME_RTOL) -> NashSolution:
    """Assemble the game and build the equilibrium evaluator for spec.T."""
    assembly = assemble(spec)
    verdict = check_existence(assembly, spec.T, tol=tol_critical)
    return NashSolution(assembly, spec.T, verdict)


def long_run_limit(assembly: QAssembly) -> np.ndarray:
    """Weighted average opinion Q^{-1} W b the profile converges to (t, T -> inf)."""
    info = matfun.spectral(assembly.Q)
    scale = 1.0 + float(np.max(np.abs(info.eigenvalues)))
    if np.any(np.abs(info.eigenvalues) <= 1e-12 * scale):
        raise SingularMatrixError("long-run limit undefined: Q is singular")
    return np.linalg.solve(assembly.Q, assembly.Wblock @ assembly.b)


def infinite_horizon_state(assembly: QAssembly, t: float) -> np.ndarray:
    """Infinite-horizon profile [Q^{-1}W + exp(-H_p t)(I - Q^{-1}W)] b.

    H_p is the square root of Q with eigenvalues in the open right
    half-plane, so Q must be nonsingular with no real negative eigenvalue.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    Hp = matfun.sqrt_positive_real(assembly.Q)
    xinf = long_run_limit(assembly)
    return xinf + scipy.linalg.expm(-Hp * t) @ (assembly.b - xinf)
