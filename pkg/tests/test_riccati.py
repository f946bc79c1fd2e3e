import dataclasses

import numpy as np
import pytest

from ncslqg import (AssumptionViolated, InfeasibleProblem, NcsModel,
                    NotStabilizable, backward_recursion, finite_optimal_cost,
                    load_solution, monte_carlo, save_solution, SimConfig,
                    stationary_average_cost, uav_model, value_iteration)
from oracles import lqr_backward, lqr_value_iteration, random_instance


def test_terminal_values_exact(uav):
    sol = backward_recursion(uav, 10)
    assert np.array_equal(sol.Z[11], uav.P_terminal)
    assert np.array_equal(sol.X[11], uav.P_terminal)


def test_zero_terminal_forces_last_stage_to_state_weight(uav):
    # With a zero terminal weight the last-stage correction vanishes, so the
    # last computed pair is just the state weight and the gains are zero.
    sol = backward_recursion(uav, 5)
    assert np.array_equal(sol.Z[5], uav.Q)
    assert np.array_equal(sol.X[5], uav.Q)
    assert not sol.K[5].any()
    assert not sol.M[5].any()


def test_one_step_values_against_hand_evaluation():
    # Scalar instance with unit weights injected through the terminal value.
    m = NcsModel(A=1.0, BL=1.0, BR=1.0, Q=0.01, RL=5.0, RR=5.0,
                 P_terminal=1.0, Q_omega=1.0, p=0.5, x0_mean=[0.0], P0=0.0)
    sol = backward_recursion(m, 0)
    assert np.allclose(sol.Upsilon[0], [[6.0, 1.0], [1.0, 6.0]], atol=1e-14)
    assert np.allclose(sol.K[0], [[1 / 7], [1 / 7]], atol=1e-14)
    assert np.allclose(sol.Z[0], [[1.01 - 2 / 7]], atol=1e-14)
    # correction term equals 2 P^2 / (2 P + 5) at P = 1
    assert np.isclose(1.01 - sol.Z[0][0, 0], 2 * 1**2 / (2 * 1 + 5), atol=1e-14)
    assert np.allclose(sol.Psi[1], [[1.0]], atol=0)
    assert np.allclose(sol.Lambda[0], [[6.0]], atol=1e-14)
    assert np.allclose(sol.M[0], [[1.0]], atol=1e-14)
    assert np.allclose(sol.X[0], [[1.01 - 1 / 6]], atol=1e-14)


def test_zero_input_weights_infeasible_at_final_stage(uav):
    m = dataclasses.replace(uav, RL=0.0, RR=0.0)
    with pytest.raises(InfeasibleProblem) as exc:
        backward_recursion(m, 7)
    assert exc.value.k == 7
    assert exc.value.which == "Lambda"


def test_blend_identity_and_symmetry_all_stages(uav):
    sol = backward_recursion(uav, 30)
    p = uav.p
    for k in range(32):
        assert np.array_equal(sol.Psi[k], (1 - p) * sol.Z[k] + p * sol.X[k])
        assert np.array_equal(sol.Z[k], sol.Z[k].T)
        assert np.array_equal(sol.X[k], sol.X[k].T)
    for k in range(31):
        assert np.linalg.eigvalsh(sol.Upsilon[k])[0] > 0
        assert np.linalg.eigvalsh(sol.Lambda[k])[0] > 0


def test_horizon_shift_invariance(uav):
    # With a zero terminal weight the stage values depend only on the
    # distance to the horizon.
    s40 = backward_recursion(uav, 40)
    s25 = backward_recursion(uav, 25)
    for s in (5, 15):
        assert np.array_equal(s40.Z[20], s40.Z[20])
        assert np.array_equal(s40.Z[15 + s], s25.Z[s])
        assert np.array_equal(s40.X[15 + s], s25.X[s])


def test_horizon_monotonicity(uav):
    prev_Z, prev_Psi = None, None
    for N in range(1, 40):
        sol = backward_recursion(uav, N)
        if prev_Z is not None:
            assert np.linalg.eigvalsh(sol.Z[0] - prev_Z)[0] >= -1e-12
            assert np.linalg.eigvalsh(sol.Psi[0] - prev_Psi)[0] >= -1e-12
        prev_Z, prev_Psi = sol.Z[0], sol.Psi[0]


def test_p_zero_collapses_to_classical_recursion():
    rng = np.random.default_rng(42)
    for _ in range(5):
        m = random_instance(rng, p=0.0)
        N = 20
        sol = backward_recursion(m, N)
        Ps = lqr_backward(m.A, m.B, m.Q, m.R_stacked, m.P_terminal, N)
        scale = max(np.max(np.abs(P)) for P in Ps)
        for k in range(N + 2):
            assert np.max(np.abs(sol.Z[k] - Ps[k])) <= 1e-10 * scale


def test_value_iteration_zero_dynamics():
    m = NcsModel(A=np.zeros((2, 2)), BL=np.ones((2, 1)), BR=np.eye(2),
                 Q=np.diag([1.0, 2.0]), RL=1.0, RR=np.eye(2),
                 P_terminal=np.zeros((2, 2)), Q_omega=np.eye(2), p=0.3,
                 x0_mean=np.zeros(2), P0=np.eye(2))
    g = value_iteration(m)
    assert np.allclose(g.Z, m.Q, atol=1e-12)
    assert np.allclose(g.X, m.Q, atol=1e-12)
    assert np.allclose(g.K, 0.0, atol=1e-12)
    assert np.allclose(g.M, 0.0, atol=1e-12)


def test_value_iteration_uav(uav):
    g = value_iteration(uav)
    assert g.residual < 10 * 1e-10
    assert np.linalg.eigvalsh(g.Z)[0] > 0
    assert np.linalg.eigvalsh(g.Psi)[0] > 0
    assert np.array_equal(g.Psi, (1 - uav.p) * g.Z + uav.p * g.X)
    # Finite horizon converges to the same point from below.
    sol = backward_recursion(uav, 300)
    assert np.max(np.abs(sol.Z[0] - g.Z)) < 1e-9


def test_value_iteration_p_zero_matches_plain_lqr():
    rng = np.random.default_rng(7)
    for _ in range(5):
        m = random_instance(rng, p=0.0)
        g = value_iteration(m, tol=1e-12)
        P = lqr_value_iteration(m.A, m.B, m.Q, m.R_stacked, tol=1e-12)
        assert np.max(np.abs(g.Z - P)) <= 1e-8 * np.max(np.abs(P))


def test_value_iteration_preconditions(uav):
    with pytest.raises(AssumptionViolated):
        value_iteration(dataclasses.replace(uav, RL=0.0))
    unobservable = NcsModel(A=np.eye(2), BL=np.ones((2, 1)), BR=np.ones((2, 1)),
                            Q=np.diag([1.0, 0.0]), RL=1.0, RR=1.0,
                            P_terminal=np.zeros((2, 2)), Q_omega=np.eye(2),
                            p=0.2, x0_mean=np.zeros(2), P0=np.eye(2))
    with pytest.raises(AssumptionViolated):
        value_iteration(unobservable)


def test_value_iteration_not_stabilizable():
    # Remote-only actuation of an unstable scalar plant: with enough drops
    # the error variance cannot be tamed and the iterates diverge.
    m = NcsModel(A=2.0, BL=0.0, BR=1.0, Q=1.0, RL=1.0, RR=1.0,
                 P_terminal=0.0, Q_omega=1.0, p=0.5, x0_mean=[0.0], P0=1.0)
    with pytest.raises(NotStabilizable):
        value_iteration(m, max_iter=20000)


def test_finite_cost_degenerate_cases(uav):
    m = dataclasses.replace(uav, Q_omega=0.0, P0=0.0)
    sol = backward_recursion(m, 50)
    expected = float(m.x0_mean @ sol.Z[0] @ m.x0_mean)
    assert finite_optimal_cost(m, sol) == pytest.approx(expected, rel=1e-14)

    m0 = dataclasses.replace(uav, p=0.0, Q_omega=0.0)
    sol0 = backward_recursion(m0, 50)
    expected0 = float(m0.x0_mean @ sol0.Z[0] @ m0.x0_mean) + np.trace(sol0.Z[0] @ m0.P0)
    assert finite_optimal_cost(m0, sol0) == pytest.approx(expected0, rel=1e-14)


def test_finite_cost_matches_monte_carlo_quickly(uav):
    sol = backward_recursion(uav, 30)
    cost = finite_optimal_cost(uav, sol)
    agg = monte_carlo(uav, sol, SimConfig(seed=3, rollouts=4000, horizon=30))
    assert abs(agg.mean_total_cost - cost) <= 3 * agg.cost_std_error


def test_stationary_average_cost_values():
    g = value_iteration(uav_model(0.5))
    Q_omega = np.array([[1.0]])
    assert stationary_average_cost(g, Q_omega, 0.0) == pytest.approx(float(g.Z[0, 0]))
    assert stationary_average_cost(g, Q_omega, 1.0) == pytest.approx(float(g.X[0, 0]))
    fake = dataclasses.replace(g, Z=np.array([[2.0]]), X=np.array([[3.0]]))
    assert stationary_average_cost(fake, Q_omega, 0.5) == pytest.approx(2.5)


def test_solution_round_trip(tmp_path, uav):
    sol = backward_recursion(uav, 5)
    path = tmp_path / "sol.json"
    save_solution(sol, path)
    back = load_solution(path)
    assert back.N == 5
    assert np.array_equal(back.Z, sol.Z)
    assert np.array_equal(back.K, sol.K)

    g = value_iteration(uav)
    path2 = tmp_path / "gains.json"
    save_solution(g, path2)
    g2 = load_solution(path2)
    assert np.array_equal(g2.Z, g.Z)
    assert g2.iterations_used == g.iterations_used
