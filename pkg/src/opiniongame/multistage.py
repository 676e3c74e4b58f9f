"""Multi-stage hybrid games over randomly sampled interaction networks.

Each stage draws a directed network (ordered pair (i, j) present with
probability rho_ij, meaning agent-i is influenced by agent-j), builds the
stage weights from the agent profiles gated by the stage-initial biases,
solves the one-stage game, and feeds the final opinions forward as the next
stage's biases.

Randomness is fully determined by the scenario seed through a documented
stream-splitting scheme: the root ``SeedSequence(seed)`` spawns one child
per stage plus one for the initial-bias draw; within a stage the generator
first yields the interaction-probability matrix (row-major, only for
interval rules), then the edge uniforms (row-major, diagonal discarded).
Bias draws run agent-major, issue-minor.  The generator is PCG64.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from .game import (ExistenceVerdict, GameSpec, NashSolution,
                   NearCriticalHorizonWarning, TrajectorySample, assemble,
                   check_existence)
from .weights import (AgentProfile, ConstantGain, PairTableGain,
                      StatusAffineGain, build_influence_root,
                      build_stubbornness, square_to_weight)

_OPEN_INTERVAL_SHRINK = 1e-9  # open bias intervals realized as closed, shrunk by this


@dataclass(frozen=True)
class ConstantRho:
    """Same interaction probability for every ordered pair."""

    value: float

    def __post_init__(self):
        if not (0.0 <= self.value <= 1.0):
            raise ValueError("interaction probability must lie in [0, 1]")

    def resolve(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return np.full((n, n), self.value)


@dataclass(frozen=True)
class MatrixRho:
    """Explicit per-ordered-pair interaction probabilities."""

    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", np.asarray(self.matrix, float))
        if self.matrix.ndim != 2 or self.matrix.shape[0] != self.matrix.shape[1]:
            raise ValueError("probability matrix must be square")
        if np.any(self.matrix < 0) or np.any(self.matrix > 1):
            raise ValueError("interaction probabilities must lie in [0, 1]")

    def resolve(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if self.matrix.shape != (n, n):
            raise ValueError(f"probability matrix must be {n}x{n}")
        return self.matrix.copy()


@dataclass(frozen=True)
class IntervalRho:
    """Per-pair probabilities redrawn uniformly from [low, high] at every stage."""

    low: float
    high: float
    symmetric: bool = False

    def __post_init__(self):
        if not (0.0 <= self.low <= self.high <= 1.0):
            raise ValueError("interval must satisfy 0 <= low <= high <= 1")

    def resolve(self, n: int, rng: np.random.Generator) -> np.ndarray:
        P = rng.uniform(self.low, self.high, size=(n, n))
        if self.symmetric:
            P = np.triu(P, 1)
            P = P + P.T
        return P


@dataclass(frozen=True)
class RhoOverride:
    """Force rho_ij = value for i in source group, j in target group."""

    source_group: str
    target_group: str
    value: float

    def __post_init__(self):
        if not (0.0 <= self.value <= 1.0):
            raise ValueError("override probability must lie in [0, 1]")


@dataclass(frozen=True)
class FixedBias:
    vector: tuple

    def draw(self, d: int, rng: np.random.Generator) -> np.ndarray:
        v = np.asarray(self.vector, float)
        if v.shape != (d,):
            raise ValueError(f"fixed bias must have length {d}")
        return v.copy()


@dataclass(frozen=True)
class UniformBias:
    """Biases drawn uniformly per issue from [low, high]; set ``open_interval``
    to shrink both endpoints by 1e-9 (used for open-interval group definitions)."""

    low: float
    high: float
    open_interval: bool = False

    def draw(self, d: int, rng: np.random.Generator) -> np.ndarray:
        lo, hi = self.low, self.high
        if self.open_interval:
            lo, hi = lo + _OPEN_INTERVAL_SHRINK, hi - _OPEN_INTERVAL_SHRINK
        return rng.uniform(lo, hi, size=d)


@dataclass(eq=False)
class ScenarioSpec:
    """A reproducible multi-stage experiment over a profiled population."""

    d: int
    profiles: List[AgentProfile]
    group_of: Tuple[str, ...]
    bias_init: Dict[str, object]
    stage_count: int
    T_stage: float
    rho: object
    gamma: object
    seed: int
    overrides: Tuple[RhoOverride, ...] = ()

    def __post_init__(self):
        if self.stage_count < 1:
            raise ValueError("need at least one stage")
        if not (self.T_stage > 0):
            raise ValueError("stage horizon must be positive")
        if len(self.group_of) != len(self.profiles):
            raise ValueError("group_of must label every agent")
        for name in self.group_of:
            if name not in self.bias_init:
                raise ValueError(f"no bias initialization for group '{name}'")
        for p in self.profiles:
            if p.d != self.d:
                raise ValueError("profile issue count must match scenario d")

    @property
    def n(self) -> int:
        return len(self.profiles)

    def groups(self) -> Dict[str, list]:
        out: Dict[str, list] = {}
        for idx, name in enumerate(self.group_of):
            out.setdefault(name, []).append(idx)
        return out


@dataclass(eq=False)
class StageRecord:
    """One solved stage: sampled network, endpoints, verdict and trajectory."""

    stage: int
    network: np.ndarray          # bool (n, n); [i, j] True: i influenced by j
    initial_biases: np.ndarray   # stacked nd vector
    final_opinions: np.ndarray   # stacked nd vector
    existence: ExistenceVerdict
    trajectory: TrajectorySample


class StageNonexistenceError(RuntimeError):
    """A stage horizon hit a critical time; the scenario cannot continue."""

    def __init__(self, stage: int, verdict: ExistenceVerdict):
        self.stage = stage
        self.verdict = verdict
        times = ", ".join(f"{t:.6g}" for t in verdict.critical_horizons.all_times())
        super().__init__(
            f"stage {stage}: no Nash equilibrium at this horizon "
            f"(critical horizons: {times or 'n/a'})"
        )


def sample_network(n: int, rho, rng: np.random.Generator,
                   overrides: Tuple[RhoOverride, ...] = (),
                   groups: Optional[Dict[str, list]] = None) -> np.ndarray:
    """Draw a directed network: ordered pair (i, j), i != j, kept with prob rho_ij.

    The probability matrix is resolved first (consuming the stream for
    interval rules), overrides are applied, then one uniform per ordered
    pair decides the edges; the diagonal is drawn but discarded.
    """
    P = rho.resolve(n, rng)
    for ov in overrides:
        if groups is None:
            raise ValueError("overrides require group membership")
        src = groups.get(ov.source_group, [])
        tgt = groups.get(ov.target_group, [])
        P[np.ix_(src, tgt)] = ov.value
    U = rng.random((n, n))
    adj = U < P
    np.fill_diagonal(adj, False)
    return adj


def _gamma_for_pair(gamma, i: int, j: int):
    if isinstance(gamma, PairTableGain):
        return gamma.for_pair(i, j)
    return gamma


def build_stage(spec: ScenarioSpec, network: np.ndarray, biases: np.ndarray) -> GameSpec:
    """One-stage game from the sampled network and the stage-initial biases.

    The confidence gates use these initial biases and the weights stay fixed
    for the whole stage.
    """
    n, d = spec.n, spec.d
    biases = np.asarray(biases, float).reshape(n, d)
    stubbornness = {i: build_stubbornness(spec.profiles[i]) for i in range(n)}
    # edges whose confidence gates are all closed yield V = 0 and can be
    # skipped outright; the vectorized mask mirrors the per-issue gate rule
    eps = np.array([p.epsilon for p in spec.profiles])
    gate_any = (np.abs(biases[:, None, :] - biases[None, :, :])
                <= eps[:, None, None]).any(axis=2)
    influence = {}
    for i in range(n):
        for j in range(n):
            if i == j or not network[i, j] or not gate_any[i, j]:
                continue
            V = build_influence_root(spec.profiles[i], spec.profiles[j],
                                     biases[i], biases[j],
                                     _gamma_for_pair(spec.gamma, i, j))
            W = square_to_weight(V)
            if np.any(W != 0.0):
                influence[(i, j)] = W
    return GameSpec(n=n, d=d, T=spec.T_stage,
                    stubbornness=stubbornness, influence=influence,
                    biases={i: biases[i] for i in range(n)})


def initial_biases(spec: ScenarioSpec, rng: np.random.Generator) -> np.ndarray:
    """Stage-1 biases per group rule, drawn agent-major then issue-minor."""
    out = np.empty((spec.n, spec.d))
    for i in range(spec.n):
        out[i] = spec.bias_init[spec.group_of[i]].draw(spec.d, rng)
    return out


def run_scenario(spec: ScenarioSpec, grid_points: int = 101,
                 tol_critical: float = 1e-6) -> List[StageRecord]:
    """Play the game stage_count times, chaining final opinions into biases.

    Aborts with StageNonexistenceError (naming the critical horizons) if any
    stage's horizon falls on a critical time.
    """
    root = np.random.SeedSequence(spec.seed)
    children = root.spawn(spec.stage_count + 1)
    bias_rng = np.random.Generator(np.random.PCG64(children[0]))
    biases = initial_biases(spec, bias_rng)
    groups = spec.groups()

    records: List[StageRecord] = []
    for k in range(spec.stage_count):
        rng = np.random.Generator(np.random.PCG64(children[k + 1]))
        network = sample_network(spec.n, spec.rho, rng, spec.overrides, groups)
        stage_game = build_stage(spec, network, biases)
        assembly = assemble(stage_game)
        verdict = check_existence(assembly, spec.T_stage, tol=tol_critical)
        if not verdict.unique_equilibrium:
            raise StageNonexistenceError(k, verdict)
        # large populations over T = 5 make cosh(mu T) huge, so the global
        # condition estimate trips generically; the verdict keeps the number
        # and criticality itself already aborted above, so don't warn per stage
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NearCriticalHorizonWarning)
            sol = NashSolution(assembly, spec.T_stage, verdict)
        trajectory = sol.sample(grid_points)
        final = trajectory.states[-1]
        records.append(StageRecord(
            stage=k, network=network,
            initial_biases=biases.reshape(-1).copy(),
            final_opinions=final.copy(),
            existence=verdict, trajectory=trajectory,
        ))
        biases = final.reshape(spec.n, spec.d)
    return records


def _correlation_matrix(d: int, r: float) -> np.ndarray:
    R = np.full((d, d), r)
    np.fill_diagonal(R, 0.0)
    return R


def preset_parties(seed: int, stages: int = 5,
                   reciprocal_propaganda: bool = False) -> ScenarioSpec:
    """Two party leaders, 25 supporters each, 50 neutrals; propaganda from one party.

    Leaders are maximally stubborn status-1 agents with fixed opposite biases
    (-1, -1) and (1, 1); supporters start uniformly in [-1.5, -0.5] resp.
    [0.5, 1.5], neutrals in the open interval (-0.5, 0.5).  Everyone sees the
    two issues as positively correlated (r = 0.5).  The base interaction
    probability is 0.2; propaganda forces every neutral to observe every
    first-party supporter (one-way unless ``reciprocal_propaganda``).
    """
    d = 2
    R = _correlation_matrix(d, 0.5)

    def leader_profile():
        return AgentProfile(attributes=np.array([1.0]), epsilon=0.1,
                            correlations=R, c=1.0, stubborn_diag=np.array([1.1, 1.1]))

    def member_profile():
        return AgentProfile(attributes=np.array([0.0]), epsilon=0.5,
                            correlations=R, c=1.0, stubborn_diag=np.array([0.1, 0.1]))

    profiles = [leader_profile(), leader_profile()]
    group_of = ["leader_a", "leader_b"]
    for _ in range(25):
        profiles.append(member_profile())
        group_of.append("party_a")
    for _ in range(25):
        profiles.append(member_profile())
        group_of.append("party_b")
    for _ in range(50):
        profiles.append(member_profile())
        group_of.append("neutral")

    overrides = [RhoOverride("neutral", "party_a", 1.0)]
    if reciprocal_propaganda:
        overrides.append(RhoOverride("party_a", "neutral", 1.0))

    return ScenarioSpec(
        d=d, profiles=profiles, group_of=tuple(group_of),
        bias_init={
            "leader_a": FixedBias((-1.0, -1.0)),
            "leader_b": FixedBias((1.0, 1.0)),
            "party_a": UniformBias(-1.5, -0.5),
            "party_b": UniformBias(0.5, 1.5),
            "neutral": UniformBias(-0.5, 0.5, open_interval=True),
        },
        stage_count=stages, T_stage=5.0,
        rho=ConstantRho(0.2),
        gamma=StatusAffineGain(2.0, 0.5),
        seed=seed, overrides=tuple(overrides),
    )


def preset_heterogeneous(variant: str, seed: int, stages: int = 10,
                         symmetric_rho: bool = False) -> ScenarioSpec:
    """Fifty heterogeneous agents with per-agent confidence thresholds.

    Interaction probabilities are redrawn per pair from [0.3, 0.7] each
    stage; influence gains are 0.8 gated by each agent's own threshold
    drawn once from [0, 1]; stubbornness seeds are 0.1.  Variant "a" gives
    every agent correlation conception +1; variant "b" splits the population
    into +1 (agents 1-25) and -1 (agents 26-50).  Initial opinions are
    uniform in [-1, 1] per issue.
    """
    if variant not in ("a", "b"):
        raise ValueError("variant must be 'a' or 'b'")
    n, d = 50, 2
    profile_rng = np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(entropy=seed, spawn_key=(1000,)))
    )
    epsilons = profile_rng.uniform(0.0, 1.0, size=n)
    profiles = []
    for i in range(n):
        r = 1.0 if (variant == "a" or i < 25) else -1.0
        profiles.append(AgentProfile(
            attributes=np.array([0.0]), epsilon=float(epsilons[i]),
            correlations=_correlation_matrix(d, r), c=1.0,
            stubborn_diag=np.array([0.1, 0.1]),
        ))
    return ScenarioSpec(
        d=d, profiles=profiles, group_of=tuple(["all"] * n),
        bias_init={"all": UniformBias(-1.0, 1.0)},
        stage_count=stages, T_stage=5.0,
        rho=IntervalRho(0.3, 0.7, symmetric=symmetric_rho),
        gamma=ConstantGain(0.8),
        seed=seed,
    )


PRESETS = {
    "parties": preset_parties,
    "heterogeneous-a": lambda seed, **kw: preset_heterogeneous("a", seed, **kw),
    "heterogeneous-b": lambda seed, **kw: preset_heterogeneous("b", seed, **kw),
}
