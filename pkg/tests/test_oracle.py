"""Cost quadrature, Nash perturbation certificate and BVP collocation."""

import numpy as np
import pytest

from opiniongame.closedform import UniformSpec
from opiniongame.game import GameSpec, assemble, solve
from opiniongame.matfun import spectral
from opiniongame.oracle import (CollocationSingularError, GridTooCoarseError,
                                bvp_solve, cost_quadrature,
                                nash_perturbation_test, perturbation_family)

from conftest import example1_spec, example2_spec, random_game_spec


def consensus_spec(rng, T=1.0):
    spec = random_game_spec(rng, T_range=(T, T))
    beta = rng.uniform(-1, 1, spec.d)
    return GameSpec(n=spec.n, d=spec.d, T=spec.T,
                    stubbornness=spec.stubbornness, influence=spec.influence,
                    biases={i: beta.copy() for i in range(spec.n)})


class TestCostQuadrature:
    def test_consensus_costs_nothing(self):
        rng = np.random.default_rng(70)
        spec = consensus_spec(rng)
        sample = solve(spec).sample(129)
        for i in range(spec.n):
            report = cost_quadrature(spec, sample, i)
            assert report.value == pytest.approx(0.0, abs=1e-18)
            assert all(abs(c) < 1e-18 for c in report.components)

    def test_uncoupled_uniform_game_costs_nothing(self):
        rng = np.random.default_rng(71)
        spec = UniformSpec(n=3, F=np.eye(2), G=np.zeros((2, 2)), T=1.0,
                           biases=rng.uniform(-1, 1, (3, 2))).as_game_spec()
        sample = solve(spec).sample(129)
        for i in range(3):
            assert cost_quadrature(spec, sample, i).value < 1e-16

    def test_antagonistic_dyad_cost_regression(self):
        spec = example1_spec()
        sol = solve(spec)
        coarse = cost_quadrature(spec, sol.sample(129), 0)
        fine = cost_quadrature(spec, sol.sample(513), 0)
        assert fine.converged and coarse.converged
        assert abs(coarse.value - fine.value) <= 1e-6 * (1 + fine.value)
        # frozen from the converged quadrature; guards the whole pipeline
        assert fine.value == pytest.approx(0.2882799927, rel=1e-6)
        assert all(c >= -1e-12 for c in fine.components)
        assert fine.value == pytest.approx(sum(fine.components), rel=1e-12)

    def test_grid_contract(self):
        spec = example1_spec()
        sample = solve(spec).sample(33)
        with pytest.raises(GridTooCoarseError):
            cost_quadrature(spec, sample, 0)
        with pytest.raises(GridTooCoarseError):
            cost_quadrature(spec, solve(spec).sample(67), 0)  # 66 intervals

    def test_components_nonnegative_on_random_specs(self):
        rng = np.random.default_rng(80)
        for _ in range(5):
            spec = random_game_spec(rng)
            sample = solve(spec).sample(129)
            for i in range(spec.n):
                report = cost_quadrature(spec, sample, i)
                influence, stubbornness, control = report.components
                assert control >= 0.0 and stubbornness >= -1e-12
                assert influence >= -1e-12  # PSD weights
                assert report.value == pytest.approx(sum(report.components), abs=1e-15)


class TestPerturbationFamily:
    def test_shapes_and_supports(self):
        T = 2.0
        grid = np.linspace(0, T, 513)
        family = perturbation_family(T, grid)
        names = [name for name, _, _ in family]
        expected = [f"bump{m}" for m in range(1, 8)] + ["constant", "linear"]
        assert names == [n + s for n in expected for s in ("+", "-")]
        for name, phi, Phi in family:
            assert np.abs(phi).max() <= 1.0 + 1e-12
            assert Phi[0] == 0.0
        # bump antiderivative equals half the support width at the end
        _, phi, Phi = family[0]
        assert Phi[-1] == pytest.approx(T / 8.0, rel=1e-12)

    def test_antiderivatives_match_cumulative_trapezoid(self):
        T = 1.7
        grid = np.linspace(0, T, 4097)
        for name, phi, Phi in perturbation_family(T, grid):
            num = np.concatenate([[0.0], np.cumsum((phi[1:] + phi[:-1]) / 2) * np.diff(grid)])
            assert np.abs(num - Phi).max() < 1e-6


class TestNashCertificate:
    def test_zero_amplitude_is_exactly_zero(self):
        rng = np.random.default_rng(72)
        spec = random_game_spec(rng)
        sol = solve(spec)
        report = nash_perturbation_test(spec, sol, 0, epsilon=0.0)
        assert all(d == 0.0 for d in report.differences.values())

    def test_random_specs_pass(self):
        rng = np.random.default_rng(73)
        for _ in range(4):
            spec = random_game_spec(rng)
            sol = solve(spec)
            for agent in range(spec.n):
                report = nash_perturbation_test(spec, sol, agent, epsilon=1e-3)
                assert report.passed, (agent, report.min_difference, report.tolerance)

    def test_quadratic_scaling(self):
        rng = np.random.default_rng(74)
        spec = random_game_spec(rng)
        sol = solve(spec)
        r1 = nash_perturbation_test(spec, sol, 0, epsilon=1e-3)
        r2 = nash_perturbation_test(spec, sol, 0, epsilon=2e-3)
        for name, d1 in r1.differences.items():
            d2 = r2.differences[name]
            assert d2 == pytest.approx(4.0 * d1, rel=0.05)

    def test_non_equilibrium_control_fails(self):
        # certifying along a wrong trajectory must produce a negative diff;
        # use the equilibrium of different biases as the wrong control
        rng = np.random.default_rng(75)
        spec = random_game_spec(rng, n=3, d=1)
        wrong = GameSpec(n=spec.n, d=spec.d, T=spec.T,
                         stubbornness=spec.stubbornness, influence=spec.influence,
                         biases={i: rng.uniform(2, 3, spec.d) + i for i in range(spec.n)})
        sol_wrong = solve(wrong)
        # evaluate the true spec's cost along the wrong solution's trajectories
        report = nash_perturbation_test(spec, sol_wrong, 0, epsilon=1e-1)
        assert report.min_difference < 0


class TestBVP:
    def test_consensus_stationary(self):
        rng = np.random.default_rng(76)
        spec = consensus_spec(rng)
        bvp = bvp_solve(spec, 128)
        b = assemble(spec).b
        assert np.abs(bvp.x - b).max() < 1e-10
        assert np.abs(bvp.p).max() < 1e-10

    def test_boundary_conditions(self):
        rng = np.random.default_rng(77)
        spec = random_game_spec(rng)
        bvp = bvp_solve(spec, 128)
        assert np.array_equal(bvp.x[0], assemble(spec).b)
        assert np.abs(bvp.p[-1]).max() < 1e-12

    def test_converges_to_closed_form(self):
        rng = np.random.default_rng(78)
        spec = random_game_spec(rng)
        sol = solve(spec)
        bvp = bvp_solve(spec, 512)
        b_norm = np.linalg.norm(assemble(spec).b)
        err = max(np.abs(bvp.x[k] - sol.state_at(bvp.grid[k])).max()
                  for k in range(0, 513, 32))
        assert err <= 1e-6 * (1 + b_norm)

    def test_second_order_convergence(self):
        # moderately stiff spec so the discretization error dominates rounding
        spec = example2_spec(T=2.0)
        sol = solve(spec)

        def max_err(N):
            bvp = bvp_solve(spec, N)
            return max(np.abs(bvp.x[k] - sol.state_at(bvp.grid[k])).max()
                       for k in range(0, N + 1, N // 16))

        ratio = max_err(256) / max_err(512)
        assert ratio == pytest.approx(4.0, rel=0.2)

    def test_resonant_horizon_detected(self):
        # the trapezoidal map rotates each step by 2 atan(r dt / 2), so the
        # discrete system is singular at T = (2N/r) tan(pi / (4N)), a hair
        # off the continuous critical time
        asm = assemble(example2_spec(T=1.0))
        r = np.sqrt(-spectral(asm.Q).min_real_negative)
        N = 256
        T_d = (2 * N / r) * np.tan(np.pi / (4 * N))
        with pytest.raises(CollocationSingularError, match="singular"):
            bvp_solve(example2_spec(T=T_d), N)

    def test_costate_is_negative_control(self):
        rng = np.random.default_rng(79)
        spec = random_game_spec(rng)
        sol = solve(spec)
        bvp = bvp_solve(spec, 512)
        for k in range(0, 513, 64):
            u = sol.control_at(bvp.grid[k])
            assert np.abs(bvp.p[k] + u).max() < 1e-5 * (1 + np.abs(u).max())
