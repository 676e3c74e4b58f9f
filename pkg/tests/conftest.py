"""Shared generators for randomized game specs used across the test modules."""

import numpy as np

from opiniongame.game import GameSpec, assemble


def random_psd(rng, d, scale=1.0):
    A = rng.standard_normal((d, d))
    W = A.T @ A
    return scale * W / d


def random_spd(rng, d, scale=1.0, ridge=0.15):
    return random_psd(rng, d, scale) + ridge * scale * np.eye(d)


def random_game_spec(rng, T_range=(0.4, 1.0), radius_range=(0.3, 1.0),
                     symmetric=False, n=None, d=None, max_nd=12):
    """A random admissible game, rescaled to a controlled spectral radius.

    Keeping the spectral radius of Q at or below ~1 guarantees every
    critical time exceeds pi/2, so any horizon below ~1.5 is solvable; it
    also keeps the trapezoidal-oracle discretization error well inside the
    comparison tolerances.
    """
    if d is None:
        d = int(rng.integers(1, 4))
    if n is None:
        n = int(rng.integers(2, max(3, max_nd // d) + 1))
    stub = {i: random_spd(rng, d) for i in range(n)}
    infl = {}
    for i in range(n):
        for j in range(n):
            if i == j or (symmetric and i > j):
                continue
            if rng.random() < 0.7:
                W = random_psd(rng, d)
                infl[(i, j)] = W
                if symmetric:
                    infl[(j, i)] = W.copy()
    T = float(rng.uniform(*T_range))
    biases = {i: rng.uniform(-1.0, 1.0, d) for i in range(n)}
    probe = GameSpec(n=n, d=d, T=T, stubbornness=stub, influence=infl, biases=biases)
    radius = float(np.abs(np.linalg.eigvals(assemble(probe).Q)).max())
    alpha = float(rng.uniform(*radius_range)) / radius
    return GameSpec(
        n=n, d=d, T=T,
        stubbornness={i: alpha * W for i, W in stub.items()},
        influence={k: alpha * W for k, W in infl.items()},
        biases=biases,
    )


def example2_spec(T, b1=(-0.5, 0.5), b2=(1.0, 1.0)):
    """The two-agent fixture whose Q has one negative eigenvalue (-0.1840)."""
    W11 = np.array([[0.5, -1.0], [-1.0, 2.5]])
    W12 = np.array([[1.25, -1.0], [-1.0, 1.25]])
    W22 = np.array([[2.0, 2.5], [2.5, 3.25]])
    W21 = np.array([[2.0, 1.5], [1.5, 1.25]])
    return GameSpec(n=2, d=2, T=T,
                    stubbornness={0: W11, 1: W22},
                    influence={(0, 1): W12, (1, 0): W21},
                    biases={0: np.asarray(b1, float), 1: np.asarray(b2, float)})


def example1_spec(T=2.0, r=1.0):
    """One-way dyad: agent 0 watches agent 1 on two issues it deems correlated."""
    V12 = np.array([[1.0, r], [r, 1.0]])
    V11 = np.array([[0.1, r], [r, 0.1]])
    return GameSpec(n=2, d=2, T=T,
                    stubbornness={0: V11 @ V11, 1: np.eye(2)},
                    influence={(0, 1): V12 @ V12},
                    biases={0: np.array([0.3, 0.3]), 1: np.array([0.5, -0.5])})
