"""Closed-form equilibrium trajectories for two special network structures.

Uniform weights (every agent uses stubbornness F and influence G):

    x_i(t) = avg + (F+nG)^{-1} { F + cosh[Hh(T-t)] cosh(Hh T)^{-1} nG } (b_i - avg)

with Hh the symmetric positive definite square root of F + nG and avg the
mean initial opinion.  One-leader networks (every follower influenced only
by the fixed agent 0):

    x_i(t) = (W_ii+W_i1)^{-1} { W_ii b_i + W_i1 b_1
             + cosh[Hh_i(T-t)] cosh(Hh_i T)^{-1} W_i1 (b_i - b_1) }

with Hh_i = (W_ii + W_i1)^{1/2}.  Both are evaluated per d x d block in the
eigenbasis of the relevant SPD matrix, with the cosh ratio computed in the
overflow-safe form exp(-mu t)(1+exp(-2 mu (T-t)))/(1+exp(-2 mu T)) per
eigenchannel.  The Sylvester solver supports the block-triangularizing
similarity that underlies the leader decomposition.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Dict

import numpy as np
import scipy.linalg

from .game import GameSpec, assemble
from .matfun import REAL_EIG_RTOL, as_square_matrix

SPD_MIN_EIG = 1e-10


class SharedEigenvalueError(ValueError):
    """Sylvester equation unsolvable: coefficient matrices share an eigenvalue."""


class EigenvalueOverlapWarning(UserWarning):
    """Leader hypothesis violated: W_11 shares an eigenvalue with some W_ii + W_i1."""


def _check_spd(name: str, M: np.ndarray, strict: bool = True):
    if not np.allclose(M, M.T, rtol=0, atol=1e-10 * max(1.0, np.max(np.abs(M)))):
        raise ValueError(f"{name} must be symmetric")
    min_eig = float(np.linalg.eigvalsh(0.5 * (M + M.T)).min())
    if strict and min_eig <= SPD_MIN_EIG:
        raise ValueError(f"{name} must be positive definite (min eigenvalue {min_eig:.3g})")
    if not strict and min_eig < -SPD_MIN_EIG:
        raise ValueError(f"{name} must be nonnegative definite (min eigenvalue {min_eig:.3g})")


def _cosh_ratio(mu: np.ndarray, T: float, t: float) -> np.ndarray:
    """cosh(mu (T-t)) / cosh(mu T) per channel without evaluating cosh itself."""
    mu = np.asarray(mu, float)
    return np.exp(-mu * t) * (1.0 + np.exp(-2.0 * mu * (T - t))) / (1.0 + np.exp(-2.0 * mu * T))


@dataclass(eq=False)
class UniformSpec:
    """All agents share the stubbornness F and the pairwise influence G."""

    n: int
    F: np.ndarray
    G: np.ndarray
    T: float
    biases: np.ndarray  # (n, d)

    def __post_init__(self):
        self.F = as_square_matrix(self.F)
        self.G = as_square_matrix(self.G)
        self.biases = np.asarray(self.biases, float)
        if self.n < 2:
            raise ValueError("uniform games need n >= 2")
        d = self.F.shape[0]
        if self.G.shape != (d, d):
            raise ValueError("F and G must have the same order")
        if self.biases.shape != (self.n, d):
            raise ValueError(f"biases must be an (n, d) = ({self.n}, {d}) array")
        if not (self.T > 0):
            raise ValueError("T must be positive")
        _check_spd("F", self.F, strict=True)
        _check_spd("G", self.G, strict=False)

    @property
    def d(self) -> int:
        return self.F.shape[0]

    def as_game_spec(self) -> GameSpec:
        influence = {}
        for i in range(self.n):
            for j in range(self.n):
                if i != j:
                    influence[(i, j)] = self.G.copy()
        return GameSpec(
            n=self.n, d=self.d, T=self.T,
            stubbornness={i: self.F.copy() for i in range(self.n)},
            influence=influence,
            biases={i: self.biases[i].copy() for i in range(self.n)},
        )


def _uniform_eigen(spec: UniformSpec):
    M = spec.F + spec.n * spec.G
    M = 0.5 * (M + M.T)
    lam, U = np.linalg.eigh(M)
    if lam.min() <= SPD_MIN_EIG:
        raise ValueError("F + nG must be positive definite")
    return M, np.sqrt(lam), U


def uniform_sqrt(spec: UniformSpec) -> np.ndarray:
    """The symmetric positive definite square root of F + nG."""
    _, mu, U = _uniform_eigen(spec)
    return (U * mu) @ U.T


def uniform_state(spec: UniformSpec, i: int, t: float) -> np.ndarray:
    """Equilibrium opinion of agent i at time t under uniform weights."""
    if not (0.0 <= t <= spec.T * (1 + 1e-12)):
        raise ValueError(f"t={t} outside [0, {spec.T}]")
    M, mu, U = _uniform_eigen(spec)
    avg = spec.biases.mean(axis=0)
    delta = spec.biases[i] - avg
    w = spec.n * (spec.G @ delta)
    ratio_w = U @ (_cosh_ratio(mu, spec.T, t) * (U.T @ w))
    return avg + np.linalg.solve(M, spec.F @ delta + ratio_w)


def uniform_infinite_state(spec: UniformSpec, i: int, t: float) -> np.ndarray:
    """Infinite-horizon opinion of agent i: exp(-Hh t) replaces the cosh ratio."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    M, mu, U = _uniform_eigen(spec)
    avg = spec.biases.mean(axis=0)
    delta = spec.biases[i] - avg
    w = spec.n * (spec.G @ delta)
    decayed = U @ (np.exp(-mu * t) * (U.T @ w))
    return avg + np.linalg.solve(M, spec.F @ delta + decayed)


def uniform_long_run(spec: UniformSpec, i: int) -> np.ndarray:
    """(F+nG)^{-1} (F b_i + G sum_j b_j): the convex-combination limit."""
    M = spec.F + spec.n * spec.G
    return np.linalg.solve(M, spec.F @ spec.biases[i] + spec.G @ spec.biases.sum(axis=0))


def uniform_difference(spec: UniformSpec, i: int, j: int, t: float) -> np.ndarray:
    """Opinion difference x_i(t) - x_j(t); depends on b_i - b_j only."""
    if i == j:
        raise ValueError("need two distinct agents")
    if not (0.0 <= t <= spec.T * (1 + 1e-12)):
        raise ValueError(f"t={t} outside [0, {spec.T}]")
    M, mu, U = _uniform_eigen(spec)
    delta = spec.biases[i] - spec.biases[j]
    w = spec.n * (spec.G @ delta)
    ratio_w = U @ (_cosh_ratio(mu, spec.T, t) * (U.T @ w))
    return np.linalg.solve(M, spec.F @ delta + ratio_w)


def scalar_uniform_state(f: float, g: float, n: int, biases, i: int,
                         T: float, t: float) -> float:
    """Single-issue uniform game: f, g scalars, biases a length-n sequence."""
    if f <= 0 or g < 0:
        raise ValueError("need f > 0 and g >= 0")
    biases = np.asarray(biases, float)
    lam = f + n * g
    mu = math.sqrt(lam)
    avg = float(biases.mean())
    ratio = float(_cosh_ratio(np.array([mu]), T, t)[0])
    return avg + (f + n * g * ratio) / lam * (float(biases[i]) - avg)


@dataclass(eq=False)
class LeaderSpec:
    """One-leader network: agent 0 is fixed; follower i is influenced only by it.

    ``stubbornness[i]`` and ``influence[i]`` hold W_ii and W_i1 for followers
    i = 1..n-1; ``leader_stubbornness`` is W_11, which enters the existence
    hypothesis but cancels from the follower trajectories.
    """

    n: int
    leader_stubbornness: np.ndarray
    stubbornness: Dict[int, np.ndarray]
    influence: Dict[int, np.ndarray]
    T: float
    biases: np.ndarray  # (n, d)

    def __post_init__(self):
        self.leader_stubbornness = as_square_matrix(self.leader_stubbornness)
        self.stubbornness = {int(i): as_square_matrix(W) for i, W in self.stubbornness.items()}
        self.influence = {int(i): as_square_matrix(W) for i, W in self.influence.items()}
        self.biases = np.asarray(self.biases, float)
        if self.n < 2:
            raise ValueError("leader games need n >= 2")
        d = self.leader_stubbornness.shape[0]
        followers = list(range(1, self.n))
        if sorted(self.stubbornness) != followers or sorted(self.influence) != followers:
            raise ValueError("stubbornness and influence must cover followers 1..n-1")
        if self.biases.shape != (self.n, d):
            raise ValueError(f"biases must be an (n, d) = ({self.n}, {d}) array")
        if not (self.T > 0):
            raise ValueError("T must be positive")
        _check_spd("leader stubbornness", self.leader_stubbornness, strict=True)
        for i in followers:
            _check_spd(f"W_{i}{i}", self.stubbornness[i], strict=True)
            _check_spd(f"W_{i}1", self.influence[i], strict=False)

    @property
    def d(self) -> int:
        return self.leader_stubbornness.shape[0]

    def as_game_spec(self) -> GameSpec:
        stub = {0: self.leader_stubbornness.copy()}
        stub.update({i: W.copy() for i, W in self.stubbornness.items()})
        influence = {(i, 0): W.copy() for i, W in self.influence.items()}
        return GameSpec(
            n=self.n, d=self.d, T=self.T,
            stubbornness=stub, influence=influence,
            biases={i: self.biases[i].copy() for i in range(self.n)},
        )


def _leader_hypothesis_ok(spec: LeaderSpec) -> bool:
    lead = np.linalg.eigvalsh(spec.leader_stubbornness)
    for i in range(1, spec.n):
        A = spec.stubbornness[i] + spec.influence[i]
        lam = np.linalg.eigvalsh(0.5 * (A + A.T))
        gap = np.abs(lead[:, None] - lam[None, :])
        tol = REAL_EIG_RTOL * (1.0 + np.maximum(np.abs(lead)[:, None], np.abs(lam)[None, :]))
        if np.any(gap <= tol):
            return False
    return True


def leader_state(spec: LeaderSpec, i: int, t: float) -> np.ndarray:
    """Equilibrium opinion of agent i in a one-leader network; b_1 for the leader.

    Warns (but still evaluates) when W_11 shares an eigenvalue with some
    W_ii + W_i1: the decomposition hypothesis fails, yet the formula itself
    contains no W_11.
    """
    if not (0.0 <= t <= spec.T * (1 + 1e-12)):
        raise ValueError(f"t={t} outside [0, {spec.T}]")
    if i == 0:
        return spec.biases[0].copy()
    if not _leader_hypothesis_ok(spec):
        warnings.warn(
            "leader stubbornness shares an eigenvalue with a follower's W_ii + W_i1; "
            "evaluating the closed form regardless",
            EigenvalueOverlapWarning,
        )
    A = spec.stubbornness[i] + spec.influence[i]
    A = 0.5 * (A + A.T)
    lam, U = np.linalg.eigh(A)
    if lam.min() <= SPD_MIN_EIG:
        raise ValueError("W_ii + W_i1 must be positive definite")
    mu = np.sqrt(lam)
    b_i, b_1 = spec.biases[i], spec.biases[0]
    w = spec.influence[i] @ (b_i - b_1)
    ratio_w = U @ (_cosh_ratio(mu, spec.T, t) * (U.T @ w))
    return np.linalg.solve(A, spec.stubbornness[i] @ b_i + spec.influence[i] @ b_1 + ratio_w)


def leader_long_run(spec: LeaderSpec, i: int) -> np.ndarray:
    """(W_ii+W_i1)^{-1}(W_ii b_i + W_i1 b_1); b_1 for the leader itself."""
    if i == 0:
        return spec.biases[0].copy()
    A = spec.stubbornness[i] + spec.influence[i]
    return np.linalg.solve(A, spec.stubbornness[i] @ spec.biases[i]
                           + spec.influence[i] @ spec.biases[0])


def scalar_leader_state(w_ii: float, w_i1: float, b_i: float, b_1: float,
                        T: float, t: float) -> float:
    """Single-issue follower trajectory in a one-leader network."""
    if w_ii <= 0 or w_i1 < 0:
        raise ValueError("need w_ii > 0 and w_i1 >= 0")
    lam = w_ii + w_i1
    mu = math.sqrt(lam)
    ratio = float(_cosh_ratio(np.array([mu]), T, t)[0])
    return (w_ii * b_i + w_i1 * b_1) / lam + (w_i1 / lam) * ratio * (b_i - b_1)


@dataclass(eq=False)
class SylvesterProblem:
    """Solve X A - B X = C; solvable iff A and B share no eigenvalue."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        self.A = as_square_matrix(self.A)
        self.B = as_square_matrix(self.B)
        self.C = np.asarray(self.C, float)
        if self.C.shape != (self.B.shape[0], self.A.shape[0]):
            raise ValueError(
                f"C must have shape ({self.B.shape[0]}, {self.A.shape[0]}), got {self.C.shape}"
            )


def sylvester_solve(problem: SylvesterProblem) -> np.ndarray:
    """X with X A - B X = C, via the continuous Sylvester form (-B) X + X A = C."""
    eig_a = np.linalg.eigvals(problem.A)
    eig_b = np.linalg.eigvals(problem.B)
    gap = np.abs(eig_a[:, None] - eig_b[None, :])
    tol = REAL_EIG_RTOL * (1.0 + np.maximum(np.abs(eig_a)[:, None], np.abs(eig_b)[None, :]))
    if np.any(gap <= tol):
        raise SharedEigenvalueError(
            "A and B share an eigenvalue within tolerance; Sylvester equation unsolvable"
        )
    X = scipy.linalg.solve_sylvester(-problem.B, problem.A, problem.C)
    residual = np.linalg.norm(X @ problem.A - problem.B @ X - problem.C)
    bound = 1e-9 * (np.linalg.norm(problem.A) + np.linalg.norm(problem.B)) * \
        max(1.0, np.linalg.norm(X)) + 1e-12
    if residual > max(bound, 1e-12):
        raise RuntimeError(f"Sylvester residual {residual:.3g} exceeds bound {bound:.3g}")
    return X


@dataclass(frozen=True)
class PsdVerdict:
    """Outcome of the symmetric-weights positive-definiteness check on Q."""

    positive_definite: bool
    min_eigenvalue: float


def pairwise_symmetric_psd_check(spec: GameSpec) -> PsdVerdict:
    """For pairwise-symmetric weights (W_ij = W_ji), confirm Q is positive definite."""
    for (i, j), W in spec.influence.items():
        Wji = spec.influence.get((j, i))
        if Wji is None or not np.allclose(W, Wji, rtol=0, atol=1e-10):
            raise ValueError(f"weights are not pairwise symmetric at ({i}, {j})")
    assembly = assemble(spec)
    Qs = 0.5 * (assembly.Q + assembly.Q.T)
    min_eig = float(np.linalg.eigvalsh(Qs).min())
    return PsdVerdict(positive_definite=min_eig > 0.0, min_eigenvalue=min_eig)
