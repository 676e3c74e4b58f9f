"""Weight-matrix construction from agent attributes and bounded confidence.

Influence and stubbornness weights are built as squares W = V^2 of symmetric
seed matrices V, which makes them symmetric nonnegative definite by
construction.  The diagonal of an influence seed V_ij is gated by agent-i's
bounded confidence (|b_ik - b_jk| <= eps_i, boundary inclusive); the
off-diagonal entries carry agent-i's issue-correlation conceptions c_i * r_kl
whenever either of the two gated diagonal entries is nonzero.  Gates compare
against exact zeros: the rule is combinatorial, not numeric.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

STRICT_POSITIVE_EIG = 1e-10   # min eigenvalue for "positive definite"
NONNEGATIVE_EIG = -1e-10      # min eigenvalue for "nonnegative definite"
SYMMETRY_ATOL = 1e-10


class StubbornnessNotPositiveDefiniteError(ValueError):
    """The squared stubbornness seed is not positive definite (singular V)."""


@dataclass(frozen=True)
class AgentProfile:
    """Raw material for one agent's weight matrices.

    attributes: attribute vector (e.g. social status in {0, 1});
    epsilon: bounded-confidence threshold (opinion units, >= 0);
    correlations: symmetric d x d issue-correlation conceptions in [-1, 1]
    (only off-diagonal entries are used);
    c: proportionality constant scaling the correlation entries;
    stubborn_diag: strictly positive diagonal seed of the stubbornness matrix.
    """

    attributes: np.ndarray
    epsilon: float
    correlations: np.ndarray
    c: float
    stubborn_diag: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "attributes", np.asarray(self.attributes, float))
        object.__setattr__(self, "correlations", np.asarray(self.correlations, float))
        object.__setattr__(self, "stubborn_diag", np.asarray(self.stubborn_diag, float))
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if self.c < 0:
            raise ValueError("c must be >= 0")
        r = self.correlations
        if r.ndim != 2 or r.shape[0] != r.shape[1]:
            raise ValueError("correlations must be a square d x d array")
        if not np.allclose(r, r.T, rtol=0, atol=1e-12):
            raise ValueError("correlations must be symmetric")
        off = r[~np.eye(r.shape[0], dtype=bool)]
        if np.any(np.abs(off) > 1.0 + 1e-12):
            raise ValueError("correlation coefficients must lie in [-1, 1]")
        if np.any(self.stubborn_diag <= 0):
            raise ValueError("stubborn_diag entries must be strictly positive")
        if len(self.stubborn_diag) != r.shape[0]:
            raise ValueError("stubborn_diag length must match correlations order")

    @property
    def d(self) -> int:
        return len(self.stubborn_diag)


@dataclass(frozen=True)
class ConstantGain:
    """Diagonal influence gain: the same value for every pair and issue."""

    value: float

    def gains(self, profile_i: AgentProfile, profile_j: AgentProfile, d: int) -> np.ndarray:
        if self.value < 0:
            raise ValueError("gain must be nonnegative")
        return np.full(d, float(self.value))


@dataclass(frozen=True)
class StatusAffineGain:
    """Diagonal gain affine in the target agent's first attribute: alpha * a_j + beta."""

    alpha: float
    beta: float

    def gains(self, profile_i: AgentProfile, profile_j: AgentProfile, d: int) -> np.ndarray:
        value = self.alpha * float(profile_j.attributes[0]) + self.beta
        if value < 0:
            raise ValueError("gain rule produced a negative value")
        return np.full(d, value)


@dataclass(frozen=True)
class PairTableGain:
    """Explicit per-ordered-pair gain vectors; pairs absent from the table get zero."""

    table: dict
    pair: Optional[tuple] = None

    def for_pair(self, i: int, j: int) -> "PairTableGain":
        return PairTableGain(table=self.table, pair=(i, j))

    def gains(self, profile_i: AgentProfile, profile_j: AgentProfile, d: int) -> np.ndarray:
        if self.pair is None:
            raise ValueError("table rule must be bound to an ordered pair first")
        vec = np.asarray(self.table.get(self.pair, np.zeros(d)), float)
        if vec.shape != (d,):
            raise ValueError(f"gain vector for pair {self.pair} must have length {d}")
        if np.any(vec < 0):
            raise ValueError("gain entries must be nonnegative")
        return vec


def build_influence_root(profile_i: AgentProfile, profile_j: AgentProfile,
                         b_i, b_j, rule) -> np.ndarray:
    """Influence seed V_ij from the confidence gate and correlation rule.

    Diagonal entry k is rule gain when |b_ik - b_jk| <= eps_i (inclusive),
    else exactly 0.  Off-diagonal (k, l) is c_i * r_i[k, l] when either
    gated diagonal entry k or l is nonzero, else 0.  Result is symmetric.
    """
    b_i = np.asarray(b_i, float)
    b_j = np.asarray(b_j, float)
    d = profile_i.d
    if b_i.shape != (d,) or b_j.shape != (d,):
        raise ValueError("bias vectors must have length d")
    if not (np.all(np.isfinite(b_i)) and np.all(np.isfinite(b_j))):
        raise ValueError("bias vectors must be finite")
    gains = rule.gains(profile_i, profile_j, d)
    gate = np.abs(b_i - b_j) <= profile_i.epsilon
    diag = np.where(gate, gains, 0.0)
    V = np.diag(diag)
    for k in range(d):
        for l in range(k + 1, d):
            if diag[k] != 0.0 or diag[l] != 0.0:
                V[k, l] = V[l, k] = profile_i.c * profile_i.correlations[k, l]
    return V


def square_to_weight(V) -> np.ndarray:
    """W = V^2 for symmetric V; symmetric nonnegative definite by construction."""
    V = np.asarray(V, float)
    if V.ndim != 2 or V.shape[0] != V.shape[1]:
        raise ValueError("V must be square")
    scale = abs(V).max() if V.size else 0.0
    if abs(V - V.T).max() > 1e-12 * max(1.0, scale):
        raise ValueError("V must be symmetric")
    W = V @ V
    return 0.5 * (W + W.T)


def build_stubbornness(profile: AgentProfile) -> np.ndarray:
    """W_ii from the stubbornness seed: diagonal stubborn_diag, off-diagonals c*r.

    Raises when the correlation off-diagonals make the seed singular, since
    the squared weight must be positive definite.
    """
    d = profile.d
    V = np.diag(profile.stubborn_diag.astype(float))
    for k in range(d):
        for l in range(k + 1, d):
            V[k, l] = V[l, k] = profile.c * profile.correlations[k, l]
    W = square_to_weight(V)
    min_eig = float(np.linalg.eigvalsh(W).min())
    if min_eig <= STRICT_POSITIVE_EIG:
        raise StubbornnessNotPositiveDefiniteError(
            f"stubbornness seed is singular (min eigenvalue of square {min_eig:.3g}); "
            "choose a smaller correlation scale or different diagonal"
        )
    return W


@dataclass(frozen=True)
class Violation:
    """One admissibility failure: which matrix, which agents, what went wrong."""

    kind: str
    agent_i: int
    agent_j: Optional[int] = None
    min_eigenvalue: Optional[float] = None

    def describe(self) -> str:
        where = (f"W_{self.agent_i}{self.agent_i}" if self.agent_j is None
                 else f"W_{self.agent_i}{self.agent_j}")
        msg = f"{where}: {self.kind}"
        if self.min_eigenvalue is not None:
            msg += f" (min eigenvalue {self.min_eigenvalue:.6g})"
        return msg


def _symmetric(W: np.ndarray) -> bool:
    scale = max(1.0, float(np.max(np.abs(W)))) if W.size else 1.0
    return bool(np.max(np.abs(W - W.T)) <= SYMMETRY_ATOL * scale)


def _min_eigs_stacked(mats: list) -> np.ndarray:
    """Minimum eigenvalue of each symmetric d x d matrix, one batched call."""
    stack = np.stack([0.5 * (W + W.T) for W in mats])
    return np.linalg.eigvalsh(stack)[:, 0]


def validate_weights(spec) -> list:
    """Check every stubbornness matrix SPD and every influence matrix sym-PSD.

    Accepts anything exposing ``stubbornness`` (agent -> matrix) and
    ``influence`` ((i, j) -> matrix) maps; returns a list of Violation
    records, empty when the weight family is admissible.
    """
    violations = []
    stub_ok = []
    for i, W in spec.stubbornness.items():
        W = np.asarray(W, float)
        if not _symmetric(W):
            violations.append(Violation("not symmetric", i))
        else:
            stub_ok.append((i, W))
    if stub_ok:
        for (i, _), min_eig in zip(stub_ok, _min_eigs_stacked([W for _, W in stub_ok])):
            if min_eig <= STRICT_POSITIVE_EIG:
                violations.append(Violation("not positive definite", i,
                                            min_eigenvalue=float(min_eig)))
    infl_ok = []
    for (i, j), W in spec.influence.items():
        W = np.asarray(W, float)
        if not _symmetric(W):
            violations.append(Violation("not symmetric", i, j))
        else:
            infl_ok.append((i, j, W))
    if infl_ok:
        for (i, j, _), min_eig in zip(infl_ok, _min_eigs_stacked([W for _, _, W in infl_ok])):
            if min_eig < NONNEGATIVE_EIG:
                violations.append(Violation("not nonnegative definite", i, j,
                                            min_eigenvalue=float(min_eig)))
    return violations
