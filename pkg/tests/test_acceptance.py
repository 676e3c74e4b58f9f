"""Acceptance suite: one test per release criterion, each printing PASS/FAIL.

Run with ``pytest tests/test_acceptance.py -s`` to see the per-criterion
lines; every tolerance is pinned here, not configurable.
"""

import math
import time
import warnings
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest

from opiniongame import closedform, multistage, oracle
from opiniongame.cli import main as cli_main
from opiniongame.game import (GameSpec, NearCriticalHorizonWarning, assemble,
                              infinite_horizon_state, long_run_limit, solve)
from opiniongame.matfun import spectral

from conftest import example2_spec, random_game_spec, random_psd, random_spd

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


@contextmanager
def criterion(name, budget_seconds=None):
    start = time.perf_counter()
    try:
        yield
    except BaseException:
        print(f"[acceptance] {name}: FAIL")
        raise
    elapsed = time.perf_counter() - start
    if budget_seconds is not None:
        assert elapsed < budget_seconds, f"{name} took {elapsed:.2f}s (budget {budget_seconds}s)"
    print(f"[acceptance] {name}: PASS ({elapsed:.2f}s)")


def quiet_solve(spec):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NearCriticalHorizonWarning)
        return solve(spec)


def test_example2_spectrum():
    with criterion("example2-spectrum", budget_seconds=1.0):
        asm = assemble(example2_spec(T=1.0))
        eigs = np.sort(spectral(asm.Q).eigenvalues.real)[::-1]
        assert np.abs(eigs - [8.3611, 4.9858, 0.8372, -0.1840]).max() < 1e-3
        horizon = math.pi / (2.0 * math.sqrt(-eigs[-1]))
        assert abs(horizon - 3.6619) < 1e-3


def test_example2_blowup():
    with criterion("example2-blowup", budget_seconds=5.0):
        asm = assemble(example2_spec(T=1.0))
        r = math.sqrt(-spectral(asm.Q).min_real_negative)
        T_c3 = 3.0 * math.pi / (2.0 * r)
        assert abs(T_c3 - 3 * 3.6619) < 3e-3
        max_norms = []
        for delta in (1e-2, 1e-3, 1e-4):
            sol = quiet_solve(example2_spec(T=T_c3 - delta))
            sample = sol.sample(2001)
            max_norms.append(np.linalg.norm(sample.states, axis=1).max())
        assert max_norms[-1] > 1e3
        assert max_norms[0] < max_norms[1] < max_norms[2]

        sol = quiet_solve(example2_spec(T=10.0))
        sample = sol.sample(2001)
        norms = np.linalg.norm(sample.states, axis=1)
        assert norms.max() < 1e2  # bounded far from critical
        extrema = 0
        for col in range(4):
            y = sample.states[:, col]
            extrema += np.sum((y[1:-1] - y[:-2]) * (y[2:] - y[1:-1]) < 0)
        assert extrema >= 4  # oscillatory


def test_example3_extremum():
    with criterion("example3-extremum", budget_seconds=1.0):
        F = np.array([[1.25, 1.0], [1.0, 1.25]])
        spec = closedform.UniformSpec(n=2, F=F, G=F.copy(), T=2.46,
                                      biases=np.array([[0.3, 0.3], [0.5, -0.5]]))
        root = closedform.uniform_sqrt(spec)
        expected_root = np.array([[math.sqrt(3), math.sqrt(3) / 2],
                                  [math.sqrt(3) / 2, math.sqrt(3)]])
        assert np.abs(root - expected_root).max() < 1e-10
        ts = np.arange(0.0, spec.T + 1e-12, 1e-4)
        gaps = np.abs(np.array([closedform.uniform_difference(spec, 0, 1, t)[0]
                                for t in ts]))
        t_star = ts[np.argmax(gaps)]
        assert 0.0 < t_star < spec.T
        assert abs(t_star - math.log(15.0 / 8.0) / math.sqrt(3.0)) < 1e-3


def test_oracle_triangle():
    with criterion("oracle-triangle", budget_seconds=60.0):
        rng = np.random.default_rng(2024)
        for _ in range(50):
            spec = random_game_spec(rng)
            sol = solve(spec)
            b_norm = np.linalg.norm(assemble(spec).b)
            for t in np.linspace(0, spec.T, 7):
                x_series = sol.state_at(t)
                x_cosh = sol.state_at_cosh(t)
                assert np.abs(x_series - x_cosh).max() <= 1e-8 * (1 + np.abs(x_series).max())
            bvp = oracle.bvp_solve(spec, 512)
            for k in range(0, 513, 32):
                err = np.abs(bvp.x[k] - sol.state_at(bvp.grid[k])).max()
                assert err <= 1e-6 * (1 + b_norm)


def test_nash_certificate():
    with criterion("nash-certificate", budget_seconds=120.0):
        rng = np.random.default_rng(77)
        for _ in range(20):
            spec = random_game_spec(rng)
            sol = solve(spec)
            for agent in range(spec.n):
                r1 = oracle.nash_perturbation_test(spec, sol, agent,
                                                   epsilon=1e-3, intervals=1024)
                assert r1.passed, (agent, r1.min_difference, r1.tolerance)
                r2 = oracle.nash_perturbation_test(spec, sol, agent,
                                                   epsilon=2e-3, intervals=1024)
                for name, d1 in r1.differences.items():
                    assert r2.differences[name] == pytest.approx(4.0 * d1, rel=0.05)


def test_specialization_agreement():
    with criterion("specialization-agreement", budget_seconds=60.0):
        rng = np.random.default_rng(99)
        # uniform-weights closed form vs the general solver
        for _ in range(20):
            n, d = int(rng.integers(2, 7)), int(rng.integers(1, 4))
            uspec = closedform.UniformSpec(
                n=n, F=random_spd(rng, d, 0.8), G=random_psd(rng, d, 0.5),
                T=float(rng.uniform(0.5, 2.0)), biases=rng.uniform(-1, 1, (n, d)))
            sol = solve(uspec.as_game_spec())
            for t in rng.uniform(0, uspec.T, 4):
                general = sol.state_at(t).reshape(n, d)
                for i in range(n):
                    special = closedform.uniform_state(uspec, i, t)
                    assert np.abs(special - general[i]).max() <= \
                        1e-8 * (1 + np.abs(special).max())
        # one-leader closed form vs the general solver
        for _ in range(20):
            n, d = int(rng.integers(2, 6)), int(rng.integers(1, 4))
            lspec = closedform.LeaderSpec(
                n=n, leader_stubbornness=random_spd(rng, d, 0.9),
                stubbornness={i: random_spd(rng, d, 0.8) for i in range(1, n)},
                influence={i: random_psd(rng, d, 0.6) for i in range(1, n)},
                T=float(rng.uniform(0.5, 2.0)), biases=rng.uniform(-1, 1, (n, d)))
            sol = solve(lspec.as_game_spec())
            for t in rng.uniform(0, lspec.T, 4):
                general = sol.state_at(t).reshape(n, d)
                for i in range(1, n):
                    special = closedform.leader_state(lspec, i, t)
                    assert np.abs(special - general[i]).max() <= \
                        1e-8 * (1 + np.abs(special).max())
        # scalar corollaries vs their one-issue parents
        f, g = 1.2, 0.7
        biases = rng.uniform(-1, 1, 5)
        uspec = closedform.UniformSpec(n=5, F=[[f]], G=[[g]], T=1.8,
                                       biases=biases.reshape(-1, 1))
        for i in range(5):
            for t in np.linspace(0, 1.8, 7):
                got = closedform.scalar_uniform_state(f, g, 5, biases, i, 1.8, t)
                assert abs(got - closedform.uniform_state(uspec, i, t)[0]) <= 1e-12
        w_ii, w_i1 = 0.9, 0.4
        lb = rng.uniform(-1, 1, 2)
        lspec = closedform.LeaderSpec(n=2, leader_stubbornness=[[1.0]],
                                      stubbornness={1: [[w_ii]]},
                                      influence={1: [[w_i1]]},
                                      T=1.3, biases=lb.reshape(-1, 1))
        for t in np.linspace(0, 1.3, 7):
            got = closedform.scalar_leader_state(w_ii, w_i1, lb[1], lb[0], 1.3, t)
            assert abs(got - closedform.leader_state(lspec, 1, t)[0]) <= 1e-12
        # follower trajectories invariant to the leader's own stubbornness
        base = closedform.LeaderSpec(
            n=4, leader_stubbornness=random_spd(rng, 2, 1.0),
            stubbornness={i: random_spd(rng, 2, 0.8) for i in range(1, 4)},
            influence={i: random_psd(rng, 2, 0.6) for i in range(1, 4)},
            T=1.5, biases=rng.uniform(-1, 1, (4, 2)))
        alt = closedform.LeaderSpec(
            n=4, leader_stubbornness=random_spd(rng, 2, 3.0),
            stubbornness=base.stubbornness, influence=base.influence,
            T=base.T, biases=base.biases)
        sol_a, sol_b = solve(base.as_game_spec()), solve(alt.as_game_spec())
        for t in np.linspace(0, base.T, 9):
            xa = sol_a.state_at(t).reshape(4, 2)
            xb = sol_b.state_at(t).reshape(4, 2)
            assert np.abs(xa[1:] - xb[1:]).max() <= 1e-10


def test_structural_invariants():
    with criterion("structural-invariants", budget_seconds=60.0):
        rng = np.random.default_rng(314)
        for _ in range(10):
            spec = random_game_spec(rng)
            asm = assemble(spec)
            sol = solve(spec)
            # initial condition is exact
            assert np.array_equal(sol.state_at(0.0), asm.b)
            # terminal control vanishes
            assert np.abs(sol.control_at(spec.T)).max() <= \
                1e-9 * (1 + np.linalg.norm(asm.b))
            # consensus preservation
            beta = rng.uniform(-1, 1, spec.d)
            cons = GameSpec(n=spec.n, d=spec.d, T=spec.T,
                            stubbornness=spec.stubbornness,
                            influence=spec.influence,
                            biases={i: beta.copy() for i in range(spec.n)})
            sol_c = solve(cons)
            for t in np.linspace(0, spec.T, 5):
                assert np.abs(sol_c.state_at(t) - assemble(cons).b).max() <= 1e-10
            # linearity in the biases
            b1 = {i: rng.uniform(-1, 1, spec.d) for i in range(spec.n)}
            b2 = {i: rng.uniform(-1, 1, spec.d) for i in range(spec.n)}
            mix = {i: 0.6 * b1[i] - 1.1 * b2[i] for i in range(spec.n)}
            sols = [solve(GameSpec(n=spec.n, d=spec.d, T=spec.T,
                                   stubbornness=spec.stubbornness,
                                   influence=spec.influence, biases=b))
                    for b in (b1, b2, mix)]
            for t in np.linspace(0, spec.T, 4):
                lhs = sols[2].state_at(t)
                rhs = 0.6 * sols[0].state_at(t) - 1.1 * sols[1].state_at(t)
                assert np.abs(lhs - rhs).max() <= 1e-10 * (1 + np.abs(rhs).max())
        # pairwise-symmetric weights give a positive definite Q
        for _ in range(50):
            spec = random_game_spec(rng, symmetric=True)
            verdict = closedform.pairwise_symmetric_psd_check(spec)
            assert verdict.positive_definite and verdict.min_eigenvalue > 0


def test_long_run_limits():
    with criterion("long-run-limits", budget_seconds=60.0):
        rng = np.random.default_rng(2718)
        from opiniongame.matfun import sqrt_positive_real

        for _ in range(10):
            spec = random_game_spec(rng, symmetric=True)
            asm = assemble(spec)
            limit = long_run_limit(asm)
            t_big = 50.0 / np.linalg.eigvals(sqrt_positive_real(asm.Q)).real.min()
            assert np.abs(infinite_horizon_state(asm, t_big) - limit).max() <= 1e-6
        for _ in range(10):
            n, d = int(rng.integers(2, 6)), int(rng.integers(1, 4))
            uspec = closedform.UniformSpec(
                n=n, F=random_spd(rng, d, 0.8), G=random_psd(rng, d, 0.5),
                T=1.0, biases=rng.uniform(-1, 1, (n, d)))
            limit = long_run_limit(assemble(uspec.as_game_spec())).reshape(n, d)
            for i in range(n):
                expect = closedform.uniform_long_run(uspec, i)
                assert np.abs(limit[i] - expect).max() <= 1e-8
        for _ in range(10):
            n, d = int(rng.integers(2, 6)), int(rng.integers(1, 4))
            lspec = closedform.LeaderSpec(
                n=n, leader_stubbornness=random_spd(rng, d, 0.9),
                stubbornness={i: random_spd(rng, d, 0.8) for i in range(1, n)},
                influence={i: random_psd(rng, d, 0.6) for i in range(1, n)},
                T=1.0, biases=rng.uniform(-1, 1, (n, d)))
            limit = long_run_limit(assemble(lspec.as_game_spec())).reshape(n, d)
            assert np.abs(limit[0] - lspec.biases[0]).max() <= 1e-8
            for i in range(1, n):
                expect = closedform.leader_long_run(lspec, i)
                assert np.abs(limit[i] - expect).max() <= 1e-8


def test_scenario_directions():
    with criterion("scenario-directions", budget_seconds=600.0):
        # propaganda drags the neutral group negative on both issues
        drifts = []
        for seed in range(20):
            spec = multistage.preset_parties(seed)
            records = multistage.run_scenario(spec, grid_points=2)
            neutral = spec.groups()["neutral"]
            init = records[0].initial_biases.reshape(spec.n, spec.d)
            final = records[-1].final_opinions.reshape(spec.n, spec.d)
            drifts.append(final[neutral].mean(axis=0) - init[neutral].mean(axis=0))
        mean_drift = np.mean(drifts, axis=0)
        assert mean_drift[0] < 0 and mean_drift[1] < 0

        # repeated play shrinks the maximum opinion distance
        for variant in ("a", "b"):
            changes = []
            for seed in range(20):
                spec = multistage.preset_heterogeneous(variant, seed)
                records = multistage.run_scenario(spec, grid_points=2)

                def spread(stacked):
                    X = stacked.reshape(spec.n, spec.d)
                    return np.linalg.norm(X[:, None, :] - X[None, :, :], axis=2).max()

                changes.append(spread(records[-1].final_opinions)
                               - spread(records[0].final_opinions))
            assert np.mean(changes) < 0


def test_scenario_determinism(tmp_path):
    with criterion("scenario-determinism", budget_seconds=60.0):
        out1, out2 = tmp_path / "run1", tmp_path / "run2"
        for out in (out1, out2):
            code = cli_main(["scenario", "--preset", "heterogeneous-a",
                             "--seed", "5", "--grid", "11", "--out", str(out)])
            assert code == 0
        files = sorted(p.relative_to(out1) for p in out1.rglob("*.csv"))
        assert files, "no CSVs produced"
        for rel in files:
            assert (out1 / rel).read_bytes() == (out2 / rel).read_bytes(), rel
